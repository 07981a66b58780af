"""Equal-probability quantization of SVD-CEF outputs with helper data.

Alice over-quantizes y into M_y = levels * helper_factor fine bins of
equal probability under the sphere-coordinate marginal, keeps the coarse
index m as the secret, and publishes the fine residue j.  Bob maps his
noisy y' to the fractional fine coordinate u' = M_y F(y') and picks the
coarse level whose center (m * L_y + j + 1/2) is nearest.  Coarse indices
are Gray-coded so that the dominant +-1 level errors cost one bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .stats import sphere_marginal_cdf


def gray_encode(value: int, bits: int) -> int:
    """Reflected binary Gray code of ``value`` (must fit in ``bits``)."""
    if not 0 <= value < (1 << bits):
        raise ValueError("value out of range for bit width")
    return value ^ (value >> 1)


def gray_decode(code: int, bits: int) -> int:
    """Inverse of gray_encode."""
    if not 0 <= code < (1 << bits):
        raise ValueError("code out of range for bit width")
    value = 0
    while code:
        value ^= code
        code >>= 1
    return value


@dataclass
class QuantizerTable:
    """Equal-probability boundaries for the marginal of dimension N.

    boundaries[i] is the left edge t_i of fine bin i, i = 0..M_y-1, with
    F(t_i) = i / M_y; the right edge of the last bin is +1.
    """

    N: int
    levels: int          # coarse (secret) level count, a power of two
    helper_factor: int   # fine bins per coarse level, a power of two
    boundaries: np.ndarray

    @property
    def fine_bins(self) -> int:
        return self.levels * self.helper_factor

    @property
    def secret_bits(self) -> int:
        return self.levels.bit_length() - 1

    @property
    def helper_bits(self) -> int:
        return self.helper_factor.bit_length() - 1


def _is_pow2(v: int) -> bool:
    return v >= 1 and (v & (v - 1)) == 0


def build_table(n: int, levels: int, helper_factor: int) -> QuantizerTable:
    """Quantizer boundaries by bisection on the closed-form CDF.

    Each of the M_y = levels * helper_factor fine bins carries probability
    1/M_y under the coordinate marginal of the unit sphere in R^n.
    """
    if not (_is_pow2(levels) and _is_pow2(helper_factor)):
        raise ValueError("level counts must be powers of two")
    m_y = levels * helper_factor
    targets = np.arange(1, m_y) / m_y
    lo = np.full(m_y - 1, -1.0)
    hi = np.full(m_y - 1, 1.0)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        below = sphere_marginal_cdf(n, mid) < targets
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.max(hi - lo) < 1e-13:
            break
    boundaries = np.concatenate([[-1.0], 0.5 * (lo + hi)])
    return QuantizerTable(N=n, levels=levels, helper_factor=helper_factor,
                          boundaries=boundaries)


def quantize_alice(table: QuantizerTable, y: float) -> tuple[int, int]:
    """(secret coarse index m, public helper j) for a sample y in (-1, 1)."""
    if not -1.0 < y < 1.0:
        raise ValueError("sample out of range (-1, 1)")
    i = int(np.searchsorted(table.boundaries, y, side="right")) - 1
    return i // table.helper_factor, i % table.helper_factor


def decode_bob(table: QuantizerTable, y_prime: float, j: int) -> int:
    """Bob's coarse index from his noisy sample and Alice's helper.

    Works in fine-index coordinates: u' = M_y F(y') is compared against
    the centers m * L_y + j + 1/2, which reduces to Alice's bin at zero
    noise and lets the helper absorb fine-bin errors.
    """
    if not -1.0 < y_prime < 1.0:
        raise ValueError("sample out of range (-1, 1)")
    u = table.fine_bins * sphere_marginal_cdf(table.N, y_prime)
    m = int(np.floor((u - j - 0.5) / table.helper_factor + 0.5))
    return int(np.clip(m, 0, table.levels - 1))


def decode_bob_batch(table: QuantizerTable, y_prime: np.ndarray,
                     j: np.ndarray) -> np.ndarray:
    u = table.fine_bins * sphere_marginal_cdf(table.N, np.asarray(y_prime))
    m = np.floor((u - j - 0.5) / table.helper_factor + 0.5)
    return np.clip(m, 0, table.levels - 1).astype(np.int64)


def quantize_alice_batch(table: QuantizerTable, y: np.ndarray):
    i = np.searchsorted(table.boundaries, y, side="right") - 1
    return i // table.helper_factor, i % table.helper_factor


def bit_errors(m_alice: np.ndarray, m_bob: np.ndarray, bits: int) -> int:
    """Total differing bits between Gray codewords of the two index arrays."""
    ga = np.asarray([gray_encode(int(v), bits) for v in np.ravel(m_alice)])
    gb = np.asarray([gray_encode(int(v), bits) for v in np.ravel(m_bob)])
    return int(np.bitwise_count(np.bitwise_xor(ga, gb)).sum())


def table_to_json(table: QuantizerTable) -> dict:
    return {"N": table.N, "levels": table.levels,
            "helper_factor": table.helper_factor,
            "boundaries": [float(f"{b:.17g}") for b in table.boundaries]}


def table_from_json(doc: dict) -> QuantizerTable:
    return QuantizerTable(N=doc["N"], levels=doc["levels"],
                          helper_factor=doc["helper_factor"],
                          boundaries=np.asarray(doc["boundaries"]))
