"""cefkit: continuous encryption functions, their attacks, quantization,
and a seeded Monte Carlo harness."""

from .keystream import (
    KeyMaterial,
    Stream,
    derive_stream,
    gaussian_matrix,
    haar_orthogonal,
    random_permutation,
)
from .linear import (
    LinearBank,
    drp1_forward,
    drp2_forward,
    make_drp1_bank,
    make_drp2_bank,
    make_rp_bank,
    make_urp_bank,
    rp_forward,
    sphere_lift,
    urp_forward,
)
from .nonlinear import (
    HopSpec,
    IomBank,
    hop_forward,
    iom1_forward,
    iom2_forward,
    make_hop_spec,
    make_iom1_bank,
    make_iom2_bank,
)
from .svdcef import (
    CefOutput,
    DegenerateSpectrumError,
    RotationBank,
    build_modulated_matrix,
    make_rotation_bank,
    principal_left_singular_vector,
    prune_bank,
    sensitivity_eta,
    svdcef_forward,
)
from .attacks import (
    AttackReport,
    attack_drp1,
    attack_drp2,
    attack_iom1,
    attack_iom2,
    hop_substitute,
    invert_rp,
    newton_attack_svdcef,
    normalized_projection,
)
from .quantizer import (
    QuantizerTable,
    build_table,
    decode_bob,
    gray_decode,
    gray_encode,
    quantize_alice,
)
from .stats import (
    correlation_rho,
    global_distance_profile,
    kl_distance,
    sample_uniform_sphere,
    sphere_marginal_cdf,
    sphere_marginal_pdf,
)

__version__ = "0.1.0"
