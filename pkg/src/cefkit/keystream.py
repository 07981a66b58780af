"""Deterministic keyed pseudo-randomness for all CEF constructions.

Every random object in this package (Gaussian matrices, orthogonal
matrices, permutations) is drawn from an explicitly specified generator,
so that a run is a pure function of (master seed, labels, indices) and
nothing depends on library-internal RNG state.

The construction is a 64-bit splittable design:

* stream derivation: a SplitMix64-style avalanche mixer absorbs the
  master seed, a domain label, and an index tuple into a 64-bit stream
  key;
* generation: the stream is counter-based, word ``i`` is
  ``mix64(key + (i + 1) * GOLDEN)``, which makes any block of the
  sequence computable in vectorized form;
* uniform doubles use the top 53 bits of a word;
* Gaussians use the explicit Box-Muller formula.

None of this is cryptographic; it only has to be reproducible and pass
ordinary statistical tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_MASK64 = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_INV53 = 1.0 / (1 << 53)


def mix64(z: int) -> int:
    """SplitMix64 finalizer: a bijective avalanche on 64-bit integers."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def _mix64_array(z: np.ndarray) -> np.ndarray:
    """Vectorized mix64 on a uint64 array."""
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        return z ^ (z >> np.uint64(31))


@dataclass(frozen=True)
class KeyMaterial:
    """Master secret for a family of streams.

    ``label`` is a short domain tag ("iom.P", "svdcef.Q", ...) so that
    different consumers of one master seed get unrelated streams.
    """

    master_seed: int
    label: str = ""

    def __post_init__(self):
        if not 0 <= self.master_seed <= _MASK64:
            raise ValueError("master_seed must fit in 64 bits")


@dataclass
class Stream:
    """An independently advanceable substream.

    Word ``i`` of the stream is ``mix64(key + (i+1)*GOLDEN)``; the
    counter records how many words have been consumed.  A stream never
    touches global state, so distinct streams may be advanced from
    parallel workers (a single stream must not be shared).
    """

    key: int
    counter: int = 0
    origin: tuple = field(default=(), repr=False)

    def _raw(self, n: int) -> np.ndarray:
        idx = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
        self.counter += n
        with np.errstate(over="ignore"):
            state = np.uint64(self.key) + idx * np.uint64(_GOLDEN)
        return _mix64_array(state)

    def uniforms(self, n: int) -> np.ndarray:
        """n doubles uniform on [0, 1), from the top 53 bits of each word."""
        return (self._raw(n) >> np.uint64(11)).astype(np.float64) * _INV53

    def gaussians(self, n: int) -> np.ndarray:
        """n standard normal doubles via Box-Muller.

        Pairs (u1, u2) of uniforms give
        ``r = sqrt(-2 ln(1 - u1))``, ``(r cos(2 pi u2), r sin(2 pi u2))``;
        1 - u1 lies in (0, 1] so the log is always finite.
        """
        m = (n + 1) // 2
        w = self.uniforms(2 * m)
        u1, u2 = w[0::2], w[1::2]
        r = np.sqrt(-2.0 * np.log1p(-u1))
        ang = (2.0 * np.pi) * u2
        out = np.empty(2 * m)
        out[0::2] = r * np.cos(ang)
        out[1::2] = r * np.sin(ang)
        return out[:n]

    def integers_below(self, bounds) -> np.ndarray:
        """One integer uniform on [0, bounds[i]) per entry of ``bounds``."""
        bounds = np.asarray(bounds)
        return np.minimum((self.uniforms(bounds.size) * bounds).astype(np.int64),
                          bounds - 1)


def _absorb_bytes(state: int, data: bytes) -> int:
    state = mix64((state + _GOLDEN + len(data)) & _MASK64)
    for b in data:
        state = mix64((state + _GOLDEN + b) & _MASK64)
    return state


def derive_stream(key: KeyMaterial, indices: tuple = ()) -> Stream:
    """Derive the substream for ``(key, indices)``.

    Index tuples may mix integers and short string tags.  The absorption
    chain folds the seed, the label, and each index through mix64 with
    lengths as separators, so identical arguments always give the
    identical stream and distinct labels or indices give unrelated ones.
    """
    if isinstance(indices, (int, str)):
        indices = (indices,)
    state = mix64(key.master_seed ^ _GOLDEN)
    state = _absorb_bytes(state, key.label.encode("utf-8"))
    state = mix64((state + _GOLDEN + len(indices)) & _MASK64)
    for ix in indices:
        if isinstance(ix, str):
            state = _absorb_bytes(state, ix.encode("utf-8"))
        else:
            state = mix64((state + _GOLDEN + (int(ix) & _MASK64)) & _MASK64)
    return Stream(key=state, origin=(key, tuple(indices)))


def gaussian_matrix(s: Stream, rows: int, cols: int) -> np.ndarray:
    """rows x cols matrix of i.i.d. standard normal entries drawn from s."""
    if rows < 1 or cols < 1:
        raise ValueError("matrix dimensions must be >= 1")
    return s.gaussians(rows * cols).reshape(rows, cols)


def haar_orthogonal(s: Stream, n: int) -> np.ndarray:
    """Haar-uniform random n x n real orthogonal matrix.

    QR of a Gaussian matrix, with each column of Q rescaled by the sign
    of the corresponding diagonal entry of R.  Without the sign fix the
    QR convention biases the distribution; with it the result is
    Haar-uniform.
    """
    a = gaussian_matrix(s, n, n)
    q, r = np.linalg.qr(a)
    d = np.sign(np.diag(r))
    d[d == 0] = 1.0
    return q * d


def haar_orthogonal_batch(s: Stream, count: int, n: int) -> np.ndarray:
    """(count, n, n) stack of independent Haar orthogonal matrices."""
    a = s.gaussians(count * n * n).reshape(count, n, n)
    q, r = np.linalg.qr(a)
    d = np.sign(np.diagonal(r, axis1=1, axis2=2)).copy()
    d[d == 0] = 1.0
    return q * d[:, None, :]


def permutation_batch(s: Stream, count: int, n: int) -> np.ndarray:
    """(count, n) int array of independent Fisher-Yates permutations.

    The shuffle runs position-by-position but is vectorized across the
    batch, so banks with thousands of permutations stay cheap.
    """
    perms = np.tile(np.arange(n, dtype=np.int64), (count, 1))
    rows = np.arange(count)
    for i in range(n - 1, 0, -1):
        j = s.integers_below(np.full(count, i + 1))
        tmp = perms[rows, i].copy()
        perms[rows, i] = perms[rows, j]
        perms[rows, j] = tmp
    return perms


def random_permutation(s: Stream, n: int) -> np.ndarray:
    """Random n x n permutation matrix (uniform, via Fisher-Yates)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    perm = permutation_batch(s, 1, n)[0]
    mat = np.zeros((n, n))
    mat[np.arange(n), perm] = 1.0
    return mat
