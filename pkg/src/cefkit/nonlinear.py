"""Nonlinear CEFs: higher-order polynomials and index-of-max hashing.

IoM-1 projects x through random L x N matrices and outputs the argmax
index per projection; IoM-2 multiplies disjoint groups of p randomly
permuted copies of x element-wise and outputs the argmax of each product
vector.  Argmax ties break toward the lowest index (ties have measure
zero for continuous inputs; the rule only pins determinism).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .keystream import KeyMaterial, derive_stream, permutation_batch


@dataclass
class HopSpec:
    """Multivariate polynomial family y_m = sum_j c[m,j] * prod_n x_n^p[j,n].

    The exponent table is shared by all output slots m, so every y_m is a
    linear map of the common monomial vector.
    """

    N: int
    M: int
    exponents: np.ndarray   # (J+1, N) non-negative ints, row 0 all zero
    coeffs: np.ndarray      # (M, J+1)
    key: KeyMaterial | None = None
    d_max: int = 3

    @property
    def monomials(self) -> int:
        return self.exponents.shape[0]


def make_hop_spec(key: KeyMaterial, N: int, M: int, J: int | None = None,
                  d_max: int = 3) -> HopSpec:
    """Random HOP: J defaults to 2N non-constant monomials, exponents
    uniform on {0..d_max}, coefficients standard normal."""
    if d_max > 6:
        raise ValueError("d_max above 6 risks overflow for |x|_inf <= 2")
    if J is None:
        J = 2 * N
    s = derive_stream(key, ("hop",))
    expo = np.zeros((J + 1, N), dtype=np.int64)
    if J > 0:
        expo[1:] = s.integers_below(np.full(J * N, d_max + 1)).reshape(J, N)
    coeffs = s.gaussians(M * (J + 1)).reshape(M, J + 1)
    return HopSpec(N=N, M=M, exponents=expo, coeffs=coeffs, key=key, d_max=d_max)


def monomial_vector(spec: HopSpec, x: np.ndarray) -> np.ndarray:
    """All monomial values prod_n x_n^p[j,n], including the constant slot."""
    x = np.asarray(x, dtype=float)
    return np.prod(x[None, :] ** spec.exponents, axis=1)


def hop_forward(spec: HopSpec, x: np.ndarray) -> np.ndarray:
    """Evaluate all M polynomial outputs at x."""
    x = np.asarray(x, dtype=float)
    if np.max(np.abs(x)) > 2.0:
        raise ValueError("hop_forward requires |x|_inf <= 2 (overflow guard)")
    if int(spec.exponents.max(initial=0)) > 6:
        raise ValueError("hop_forward requires max exponent <= 6 (overflow guard)")
    return spec.coeffs @ monomial_vector(spec, x)


def hop_gradient(spec: HopSpec, x: np.ndarray) -> np.ndarray:
    """(M, N) Jacobian of hop_forward; analytic monomial differentiation."""
    x = np.asarray(x, dtype=float)
    jac = np.zeros((spec.M, spec.N))
    v = x[None, :] ** spec.exponents                       # (J+1, N)
    for n in range(spec.N):
        p = spec.exponents[:, n]
        dv = np.where(p > 0, p * x[n] ** np.maximum(p - 1, 0), 0.0)
        others = np.prod(np.delete(v, n, axis=1), axis=1)
        jac[:, n] = spec.coeffs @ (dv * others)
    return jac


@dataclass
class IomBank:
    """Index-of-max bank.

    variant iom1: matrices (K1, L, N) Gaussian projections.
    variant iom2: perms (K1, N) permutations grouped in disjoint runs of
    p, so group k uses perms[k*p:(k+1)*p]; K2 = K1 // p outputs.
    """

    variant: str
    N: int
    key: KeyMaterial
    matrices: np.ndarray | None = None
    perms: np.ndarray | None = None
    L: int = 0
    p: int = 1

    @property
    def outputs(self) -> int:
        if self.variant == "iom1":
            return self.matrices.shape[0]
        return self.perms.shape[0] // self.p


def make_iom1_bank(key: KeyMaterial, N: int, K1: int, L: int | None = None) -> IomBank:
    if L is None:
        L = N
    s = derive_stream(key, ("iom1",))
    mats = s.gaussians(K1 * L * N).reshape(K1, L, N)
    return IomBank(variant="iom1", N=N, key=key, matrices=mats, L=L)


def make_iom2_bank(key: KeyMaterial, N: int, K2: int, p: int | None = None) -> IomBank:
    if p is None:
        p = N
    s = derive_stream(key, ("iom2",))
    perms = permutation_batch(s, K2 * p, N)
    return IomBank(variant="iom2", N=N, key=key, perms=perms, p=p)


def iom1_forward(bank: IomBank, x: np.ndarray, k: int) -> int:
    """Index of the largest entry of R_k x (0-based)."""
    if bank.variant != "iom1":
        raise ValueError("iom1_forward needs an iom1 bank")
    return int(np.argmax(bank.matrices[k] @ np.asarray(x, dtype=float)))


def iom1_forward_all(bank: IomBank, x: np.ndarray) -> np.ndarray:
    return np.argmax(bank.matrices @ np.asarray(x, dtype=float), axis=1)


def iom2_products(bank: IomBank, x: np.ndarray) -> np.ndarray:
    """(K2, N) product vectors w_k = elementwise prod of the group's
    permuted copies of x."""
    x = np.asarray(x, dtype=float)
    k2 = bank.outputs
    copies = x[bank.perms]                     # (K1, N), row j is P_j x
    return copies.reshape(k2, bank.p, bank.N).prod(axis=1)


def iom2_forward(bank: IomBank, x: np.ndarray, k: int) -> int:
    """Index of the largest entry of w_k (0-based)."""
    if bank.variant != "iom2":
        raise ValueError("iom2_forward needs an iom2 bank")
    x = np.asarray(x, dtype=float)
    group = bank.perms[k * bank.p:(k + 1) * bank.p]
    return int(np.argmax(x[group].prod(axis=0)))


def iom2_forward_all(bank: IomBank, x: np.ndarray) -> np.ndarray:
    return np.argmax(iom2_products(bank, x), axis=1)


def iom_bank_to_json(bank: IomBank) -> dict:
    doc = {"variant": bank.variant, "N": bank.N,
           "seed": bank.key.master_seed, "label": bank.key.label}
    if bank.variant == "iom1":
        doc.update(K1=int(bank.matrices.shape[0]), L=bank.L)
    else:
        doc.update(K2=bank.outputs, p=bank.p)
    return doc


def iom_bank_from_json(doc: dict) -> IomBank:
    key = KeyMaterial(doc["seed"], doc["label"])
    if doc["variant"] == "iom1":
        return make_iom1_bank(key, doc["N"], doc["K1"], doc["L"])
    return make_iom2_bank(key, doc["N"], doc["K2"], doc["p"])
