"""Linear CEF family: RP, dynamic RP (two selection schemes), unitary RP,
and the norm-hiding sphere lift.

Banks are immutable after construction and fully determined by
(key material, shape parameters); serialization stores only those, the
matrices are regenerated on load.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .keystream import (
    KeyMaterial,
    derive_stream,
    gaussian_matrix,
    permutation_batch,
)

_SKETCH_BITS = 64


def sphere_lift(x: np.ndarray) -> np.ndarray:
    """Embed x in R^N onto the unit sphere in R^(N+1), hiding ||x||.

    v = [ x / (||x|| sqrt(1+||x||^2)) ; ||x|| / sqrt(1+||x||^2) ].
    """
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x)
    if r == 0.0:
        raise ValueError("sphere_lift is undefined for the zero vector")
    s = np.sqrt(1.0 + r * r)
    return np.concatenate([x / (r * s), [r / s]])


@dataclass
class LinearBank:
    """One of the linear CEF banks; ``kind`` is rp|drp1|drp2|urp.

    matrices  -- rp: (blocks, rows, N); drp1/drp2: (slots, L, N) candidates
    sketch    -- drp1/drp2 sign-sketch matrix (64, N)
    masks     -- drp2 per-slot uint64 bit masks over the sketch signs
    """

    kind: str
    N: int
    key: KeyMaterial
    matrices: np.ndarray | None = None
    L: int = 1
    sketch: np.ndarray | None = None
    masks: np.ndarray | None = None
    quant_step: float = 0.5


def make_rp_bank(key: KeyMaterial, N: int, block_rows: int, blocks: int) -> LinearBank:
    s = derive_stream(key, ("rp",))
    mats = s.gaussians(blocks * block_rows * N).reshape(blocks, block_rows, N)
    return LinearBank(kind="rp", N=N, key=key, matrices=mats)


def _make_sketch(key: KeyMaterial, N: int) -> np.ndarray:
    return gaussian_matrix(derive_stream(key, ("sketch",)), _SKETCH_BITS, N)


def _sign_bits(sketch: np.ndarray, x: np.ndarray) -> int:
    bits = 0
    for i, positive in enumerate(sketch @ x > 0):
        if positive:
            bits |= 1 << i
    return bits


def make_drp1_bank(key: KeyMaterial, N: int, L: int, slots: int) -> LinearBank:
    s = derive_stream(key, ("drp1",))
    cand = s.gaussians(slots * L * N).reshape(slots, L, N)
    return LinearBank(kind="drp1", N=N, key=key, matrices=cand, L=L,
                      sketch=_make_sketch(key, N))


def make_drp2_bank(key: KeyMaterial, N: int, L: int, slots: int,
                   quant_step: float = 0.5) -> LinearBank:
    s = derive_stream(key, ("drp2",))
    cand = s.gaussians(slots * L * N).reshape(slots, L, N)
    masks = derive_stream(key, ("drp2.mask",))._raw(slots)
    return LinearBank(kind="drp2", N=N, key=key, matrices=cand, L=L,
                      sketch=_make_sketch(key, N), masks=masks,
                      quant_step=quant_step)


def make_urp_bank(key: KeyMaterial, N: int) -> LinearBank:
    return LinearBank(kind="urp", N=N, key=key, matrices=fixed_orthogonal(N))


def fixed_orthogonal(n: int) -> np.ndarray:
    """The public mixing matrix Q used by URP.

    Normalized Hadamard recursion when n is a power of two, otherwise QR
    orthogonalization of the DCT-II cosine matrix.  Key-independent.
    """
    if n >= 1 and (n & (n - 1)) == 0:
        q = np.array([[1.0]])
        while q.shape[0] < n:
            q = np.block([[q, q], [q, -q]]) / np.sqrt(2.0)
        return q
    j, k = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    c = np.cos(np.pi * (k + 0.5) * j / n)
    q, r = np.linalg.qr(c)
    d = np.sign(np.diag(r))
    d[d == 0] = 1.0
    return q * d


def rp_forward(bank: LinearBank, x: np.ndarray, i: int) -> np.ndarray:
    """y_i = R_i x for the i-th block of the RP bank."""
    if bank.kind != "rp":
        raise ValueError("rp_forward needs an rp bank")
    r = bank.matrices[i]
    x = np.asarray(x, dtype=float)
    if x.shape[0] != r.shape[1]:
        raise ValueError(f"dimension mismatch: bank N={r.shape[1]}, x has {x.shape[0]}")
    return r @ x


def drp1_selected(bank: LinearBank, x: np.ndarray) -> int:
    """Candidate index (0-based) chosen by x: popcount of the sign sketch mod L."""
    return _sign_bits(bank.sketch, np.asarray(x, dtype=float)).bit_count() % bank.L


def drp1_forward(bank: LinearBank, x: np.ndarray, i: int) -> float:
    """Slot output v_i = r_{i,l(x)}^T x; l(x) is shared by all slots."""
    if bank.kind != "drp1":
        raise ValueError("drp1_forward needs a drp1 bank")
    x = np.asarray(x, dtype=float)
    return float(bank.matrices[i, drp1_selected(bank, x)] @ x)


def drp2_selected(bank: LinearBank, x: np.ndarray) -> np.ndarray:
    """Per-slot candidate indices: popcount of a keyed sign-bit subset mod L."""
    bits = np.uint64(_sign_bits(bank.sketch, np.asarray(x, dtype=float)))
    return (np.bitwise_count(bank.masks & bits).astype(np.int64)) % bank.L


def drp2_forward(bank: LinearBank, x: np.ndarray, k: int,
                 quantize: bool = False) -> float:
    """Slot output v_k = r_{k,l_k(x)}^T x, with l_k varying per slot.

    With ``quantize`` the output passes a mid-rise uniform quantizer of
    step ``bank.quant_step`` (the additive-noise model of the original
    scheme).
    """
    if bank.kind != "drp2":
        raise ValueError("drp2_forward needs a drp2 bank")
    x = np.asarray(x, dtype=float)
    v = float(bank.matrices[k, drp2_selected(bank, x)[k]] @ x)
    if quantize:
        q = bank.quant_step
        v = (np.floor(v / q) + 0.5) * q
    return v


def drp2_forward_all(bank: LinearBank, x: np.ndarray,
                     quantize: bool = False) -> np.ndarray:
    """All slot outputs at once (vectorized selection)."""
    x = np.asarray(x, dtype=float)
    sel = drp2_selected(bank, x)
    v = np.einsum("kn,n->k", bank.matrices[np.arange(len(sel)), sel], x)
    if quantize:
        q = bank.quant_step
        v = (np.floor(v / q) + 0.5) * q
    return v


def _urp_perms(bank: LinearBank, k: int) -> tuple[np.ndarray, np.ndarray]:
    n = bank.N
    p1 = permutation_batch(derive_stream(bank.key, ("urp", k, 1)), 1, n)[0]
    p2 = permutation_batch(derive_stream(bank.key, ("urp", k, 2)), 1, n)[0]
    return p1, p2


def urp_forward(bank: LinearBank, x: np.ndarray, k: int) -> np.ndarray:
    """y_k = P_{k,2} Q P_{k,1} x -- an exact isometry for every k."""
    if bank.kind != "urp":
        raise ValueError("urp_forward needs a urp bank")
    x = np.asarray(x, dtype=float)
    if x.shape[0] != bank.N:
        raise ValueError(f"dimension mismatch: bank N={bank.N}, x has {x.shape[0]}")
    p1, p2 = _urp_perms(bank, k)
    return (bank.matrices @ x[p1])[p2]


def urp_matrix(bank: LinearBank, k: int) -> np.ndarray:
    """Dense R_k = P_{k,2} Q P_{k,1} (mostly for tests)."""
    p1, p2 = _urp_perms(bank, k)
    n = bank.N
    m1 = np.zeros((n, n))
    m1[np.arange(n), p1] = 1.0
    m2 = np.zeros((n, n))
    m2[np.arange(n), p2] = 1.0
    return m2 @ bank.matrices @ m1


def bank_to_json(bank: LinearBank) -> dict:
    """Shape-and-key description; matrices are regenerated, never stored."""
    doc = {
        "kind": bank.kind,
        "N": bank.N,
        "L": bank.L,
        "seed": bank.key.master_seed,
        "label": bank.key.label,
    }
    if bank.kind == "rp":
        doc["block_rows"] = int(bank.matrices.shape[1])
        doc["blocks"] = int(bank.matrices.shape[0])
    elif bank.kind in ("drp1", "drp2"):
        doc["slots"] = int(bank.matrices.shape[0])
        if bank.kind == "drp2":
            doc["quant_step"] = bank.quant_step
    return doc


def bank_from_json(doc: dict) -> LinearBank:
    key = KeyMaterial(doc["seed"], doc["label"])
    kind = doc["kind"]
    if kind == "rp":
        return make_rp_bank(key, doc["N"], doc["block_rows"], doc["blocks"])
    if kind == "drp1":
        return make_drp1_bank(key, doc["N"], doc["L"], doc["slots"])
    if kind == "drp2":
        return make_drp2_bank(key, doc["N"], doc["L"], doc["slots"],
                              doc.get("quant_step", 0.5))
    if kind == "urp":
        return make_urp_bank(key, doc["N"])
    raise ValueError(f"unknown bank kind {kind!r}")
