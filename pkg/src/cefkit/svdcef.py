"""SVD-CEF: outputs are selected components of the principal left singular
vector of the randomly modulated matrix M_{k,x} = [Q_{k,1} x, ..., Q_{k,N} x].

Besides the forward map this module carries the local differential
machinery: the input-to-output sensitivity of each block and bank pruning
based on it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .keystream import KeyMaterial, derive_stream, haar_orthogonal_batch

DEGENERACY_GAP = 1e-12
EIGEN_RESIDUAL_TOL = 1e-9
DEFAULT_ETA_MAX = 2.5


class DegenerateSpectrumError(ValueError):
    """Raised when the top two eigenvalues coincide and the principal
    direction (hence the CEF output) is undefined."""


@dataclass
class CefOutput:
    """Output of one CEF evaluation: real values (type A) or indices (type B)."""

    values: np.ndarray
    cef: str
    output_type: str = "A"
    skipped_blocks: tuple = ()


@dataclass
class RotationBank:
    """K blocks of N random rotations each; block k modulates x into M_{k,x}.

    ``block_ids`` maps local block positions to key-derivation indices, so
    a pruned bank keeps addressing the same underlying rotations.
    """

    key: KeyMaterial
    N: int
    Q: np.ndarray                       # (K, N, N, N); Q[k, l] orthogonal
    block_ids: np.ndarray
    pruned: bool = False
    eta_values: np.ndarray | None = None
    retention: float | None = None

    @property
    def K(self) -> int:
        return self.Q.shape[0]


def rotation_block(key: KeyMaterial, N: int, k: int) -> np.ndarray:
    """The (N, N, N) rotation stack for block k, derived from the key.

    Blocks are addressed individually, so extending a bank (e.g. with
    held-out blocks for attack validation) never reshuffles earlier ones.
    """
    return haar_orthogonal_batch(derive_stream(key, ("svdcef.Q", k)), N, N)


def make_rotation_bank(key: KeyMaterial, N: int, K: int) -> RotationBank:
    q = np.stack([rotation_block(key, N, k) for k in range(K)])
    return RotationBank(key=key, N=N, Q=q, block_ids=np.arange(K))


def build_modulated_matrix(bank: RotationBank, x: np.ndarray, k: int) -> np.ndarray:
    """M_{k,x} with columns Q_{k,l} x; unit columns for unit x."""
    x = _unit(x)
    return (bank.Q[k] @ x).T


def _unit(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x)
    if r == 0.0:
        raise ValueError("feature vector must be nonzero")
    return x / r


def _sign_fix(u: np.ndarray, start: int = 0) -> np.ndarray:
    """Flip u so the largest-|.| entry of u[start:] is positive (ties:
    lowest index).  start=0 is the canonical convention for principal
    vectors; the forward map uses start=N_y so that the sign reference
    never lies among the emitted components."""
    j = start + int(np.argmax(np.abs(u[start:])))
    return u if u[j] > 0 or (u[j] == 0.0) else -u


def principal_left_singular_vector(m: np.ndarray, tol: float = 1e-13,
                                   max_iter: int = 10_000):
    """Principal left singular vector and eigenvalue of M (as (u, lambda)
    with M M^T u = lambda u).

    Power iteration on G = M M^T from the normalized all-ones vector,
    stopping when successive iterates agree to ``tol`` up to sign; falls
    back to a full symmetric eigendecomposition if the iteration fails to
    certify itself.  Raises DegenerateSpectrumError when the top two
    eigenvalues agree within 1e-12.
    """
    m = np.asarray(m, dtype=float)
    n = m.shape[0]
    g = m @ m.T
    v = np.full(n, 1.0 / np.sqrt(n))
    converged = False
    for _ in range(max_iter):
        w = g @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            break
        w /= nw
        if min(np.linalg.norm(w - v), np.linalg.norm(w + v)) < tol:
            v = w
            converged = True
            break
        v = w
    lam = float(v @ g @ v)
    residual = np.linalg.norm(g @ v - lam * v)
    gap_ok = _deflated_gap_ok(g, v, lam)
    if not converged or residual > EIGEN_RESIDUAL_TOL or not gap_ok:
        lam_all, vecs = np.linalg.eigh(g)
        if lam_all[-1] - lam_all[-2] < DEGENERACY_GAP:
            raise DegenerateSpectrumError(
                f"top eigenvalues coincide ({lam_all[-1]:.3e})")
        v, lam = vecs[:, -1], float(lam_all[-1])
    return _sign_fix(v), lam


def _deflated_gap_ok(g: np.ndarray, u: np.ndarray, lam: float,
                     iters: int = 32) -> bool:
    """Cheap lower bound on lambda_2 via power steps on the deflated
    operator; a near-closed gap forces the eigh path."""
    n = g.shape[0]
    if n == 1:
        return True
    v = np.full(n, 1.0 / np.sqrt(n))
    v -= (u @ v) * u
    nv = np.linalg.norm(v)
    if nv < 1e-30:
        return False
    v /= nv
    for _ in range(iters):
        w = g @ v - lam * (u @ v) * u
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return True
        v = w / nw
    lam2 = float(v @ g @ v)
    return lam - lam2 > 1e-10 * max(1.0, abs(lam))


def svdcef_forward(bank: RotationBank, x: np.ndarray, n_y: int,
                   k_range=None) -> CefOutput:
    """Concatenate the first n_y components of the principal vector of
    every requested block.

    Each u is sign-normalized against its non-emitted part, which keeps
    the marginal distribution of emitted components identical to that of
    a uniformly random unit vector.  Degenerate blocks are skipped and
    recorded.
    """
    x = _unit(x)
    if not 1 <= n_y < bank.N:
        raise ValueError("need 1 <= n_y < N")
    ks = range(bank.K) if k_range is None else k_range
    values, skipped = [], []
    for k in ks:
        m = (bank.Q[k] @ x).T
        try:
            u, _ = principal_left_singular_vector(m)
        except DegenerateSpectrumError:
            skipped.append(k)
            continue
        values.append(_sign_fix(u, start=n_y)[:n_y])
    return CefOutput(values=np.concatenate(values) if values else np.empty(0),
                     cef="svdcef", output_type="A", skipped_blocks=tuple(skipped))


def differential_matrix(bank: RotationBank, x: np.ndarray, k: int) -> np.ndarray:
    """The N x N map T with du = T dx at (k, x), built from the full
    eigensystem of M M^T.  Rank N-1; its null direction is x itself."""
    x = _unit(x)
    q = bank.Q[k]
    m = (q @ x).T
    lam, vecs = np.linalg.eigh(m @ m.T)
    gaps = lam[-1] - lam[:-1]
    if gaps[-1] < DEGENERACY_GAP:
        raise DegenerateSpectrumError("sensitivity undefined: eigenvalue tie")
    u1 = vecs[:, -1]
    w = (vecs[:, :-1] / gaps) @ vecs[:, :-1].T
    a = m.T @ u1                                 # a_l = (Q_l x)^T u1
    s = np.tensordot(a, q, axes=1) + m @ (u1 @ q)
    return w @ s


def sensitivity_eta(bank: RotationBank, x: np.ndarray, k: int) -> float:
    """Local noise amplification sqrt((1/N) sum_j sigma_j(T)^2).

    The sum over the N-1 nonzero singular values equals ||T||_F^2 because
    T is rank-deficient by exactly one.
    """
    t = differential_matrix(bank, x, k)
    return float(np.linalg.norm(t) / np.sqrt(bank.N))


def prune_bank(bank: RotationBank, x: np.ndarray,
               eta_max: float = DEFAULT_ETA_MAX) -> RotationBank:
    """Keep only blocks with eta_{k,x} < eta_max at the enrollment x.

    Degenerate blocks are dropped as well.  The retention fraction is
    recorded on the returned bank.
    """
    if eta_max <= 0:
        raise ValueError("eta_max must be positive")
    etas = np.empty(bank.K)
    for k in range(bank.K):
        try:
            etas[k] = sensitivity_eta(bank, x, k)
        except DegenerateSpectrumError:
            etas[k] = np.inf
    keep = etas < eta_max
    if not keep.any():
        raise ValueError(
            "every block was pruned; rebuild the bank with a larger K")
    return RotationBank(key=bank.key, N=bank.N, Q=bank.Q[keep],
                        block_ids=bank.block_ids[keep], pruned=True,
                        eta_values=etas[keep],
                        retention=float(keep.mean()))


# ---------------------------------------------------------------------------
# Batched kernels.  These drive the Monte Carlo experiments; per-sample code
# above stays the reference implementation.

def modulated_batch(q: np.ndarray, x_batch: np.ndarray) -> np.ndarray:
    """(B, N, L) stack of modulated matrices for one rotation block."""
    return (x_batch @ q.transpose(0, 2, 1)).transpose(1, 2, 0)


def principal_batch(g: np.ndarray):
    """Principal eigenpairs of a (B, N, N) symmetric stack.

    Returns (u, lam, gap) with u sign-fixed by the canonical convention.
    """
    lam, vecs = np.linalg.eigh(g)
    u = vecs[:, :, -1]
    u = apply_sign_batch(u, 0)
    return u, lam[:, -1], lam[:, -1] - lam[:, -2]


def apply_sign_batch(u: np.ndarray, start: int = 0) -> np.ndarray:
    j = start + np.argmax(np.abs(u[:, start:]), axis=1)
    s = np.sign(u[np.arange(u.shape[0]), j])
    s[s == 0] = 1.0
    return u * s[:, None]


def eta_batch(q: np.ndarray, x_batch: np.ndarray, dtype=np.float64):
    """Sensitivities and principal vectors of one block over a batch of
    unit inputs.

    Returns (eta, u, gap); degenerate rows carry eta = +inf.  ``dtype``
    trades precision for speed in bulk statistics (float32 keeps eta to
    ~1e-4 relative, far inside every tolerance used downstream).
    """
    q = np.ascontiguousarray(q, dtype=dtype)
    x_batch = np.ascontiguousarray(x_batch, dtype=dtype)
    n = q.shape[1]
    m = modulated_batch(q, x_batch)
    g = m @ m.transpose(0, 2, 1)
    lam, vecs = np.linalg.eigh(g)
    u1 = apply_sign_batch(vecs[:, :, -1])
    gaps = lam[:, -1:] - lam[:, :-1]                      # (B, N-1)
    a = (m * u1[:, :, None]).sum(axis=1)                  # M^T u1
    term1 = (a @ q.reshape(n, n * n)).reshape(-1, n, n)   # sum_l a_l Q_l
    rows = np.matmul(u1, q).transpose(1, 0, 2)            # row l is u1^T Q_l
    s = term1 + m @ rows
    p = vecs[:, :, :-1].transpose(0, 2, 1) @ s            # project onto gaps
    with np.errstate(divide="ignore", invalid="ignore"):
        eta2 = ((p ** 2).sum(axis=2) / gaps ** 2).sum(axis=1) / n
    gap = gaps[:, -1]
    eta = np.sqrt(eta2, out=np.full(len(x_batch), np.inf, dtype=dtype),
                  where=gap >= DEGENERACY_GAP)
    eta[gap < DEGENERACY_GAP] = np.inf
    return (np.asarray(eta, dtype=np.float64),
            np.asarray(u1, dtype=np.float64),
            np.asarray(gap, dtype=np.float64))


def bank_to_json(bank: RotationBank) -> dict:
    return {"kind": "svdcef", "N": bank.N, "K": bank.K,
            "seed": bank.key.master_seed, "label": bank.key.label,
            "block_ids": [int(b) for b in bank.block_ids]}


def bank_from_json(doc: dict) -> RotationBank:
    key = KeyMaterial(doc["seed"], doc["label"])
    ids = np.asarray(doc["block_ids"], dtype=np.int64)
    q = np.stack([rotation_block(key, doc["N"], int(k)) for k in ids])
    return RotationBank(key=key, N=doc["N"], Q=q, block_ids=ids,
                        pruned=len(ids) != doc["K"])
