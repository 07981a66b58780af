"""Inversion and substitution attacks for every CEF in the package.

All attacks consume attacker-visible data only: CEF outputs plus bank
material (keys are assumed known, which is the threat model throughout).
The true input may be passed separately, purely to fill in the report's
normalized-projection score; no algorithm reads it.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .linear import LinearBank
from .nonlinear import HopSpec, IomBank, iom2_products, monomial_vector
from .svdcef import RotationBank, svdcef_forward


@dataclass
class AttackReport:
    """Outcome of one attack run.

    ``x_hat`` holds the recovered input estimate, or the substitute object
    for substitution attacks.  ``score`` is |x_hat . x| / (|x_hat| |x|)
    when the truth was supplied for scoring, else None.
    """

    x_hat: np.ndarray | None
    score: float | None
    iterations: int
    converged: bool
    elapsed: float
    extras: dict = field(default_factory=dict)


def normalized_projection(a: np.ndarray, b: np.ndarray) -> float:
    a = np.ravel(np.asarray(a, dtype=float))
    b = np.ravel(np.asarray(b, dtype=float))
    return float(abs(a @ b) / (np.linalg.norm(a) * np.linalg.norm(b)))


def _score(x_hat, x_true) -> float | None:
    return None if x_true is None else normalized_projection(x_hat, x_true)


# ---------------------------------------------------------------------------
# Linear CEFs

def invert_rp(bank: LinearBank, outputs, x_true=None) -> AttackReport:
    """Least-squares inversion of stacked RP blocks.

    ``outputs`` is the list of observed block outputs y_0..y_{L-1}; the
    vertical stack of the corresponding R blocks must reach full column
    rank N, otherwise more outputs are requested via ValueError.
    """
    t0 = time.perf_counter()
    blocks = bank.matrices[:len(outputs)]
    r = blocks.reshape(-1, bank.N)
    y = np.concatenate([np.atleast_1d(np.asarray(o, dtype=float)) for o in outputs])
    if np.linalg.matrix_rank(r) < bank.N:
        raise ValueError("stacked projection rank below N; request more outputs")
    x_hat, *_ = np.linalg.lstsq(r, y, rcond=None)
    return AttackReport(x_hat=x_hat, score=_score(x_hat, x_true), iterations=1,
                        converged=True, elapsed=time.perf_counter() - t0)


def attack_drp1(bank: LinearBank, v: np.ndarray, x_true=None) -> AttackReport:
    """Candidate search for dynamic RP with a shared slot choice.

    For each candidate index l, fit x by least squares over all K
    observations and keep the candidate with the smallest residual; in the
    noiseless model the true candidate's residual is exactly zero.
    """
    t0 = time.perf_counter()
    v = np.asarray(v, dtype=float)
    k = v.size
    best = (np.inf, None, None)
    residuals = np.empty(bank.L)
    for l in range(bank.L):
        rl = bank.matrices[:k, l, :]
        x_l, *_ = np.linalg.lstsq(rl, v, rcond=None)
        residuals[l] = float(np.sum((v - rl @ x_l) ** 2))
        if residuals[l] < best[0]:
            best = (residuals[l], l, x_l)
    resid, l_star, x_hat = best
    if resid > 1e-6 * max(1.0, float(v @ v)):
        raise ValueError("no candidate explains the observations (model mismatch)")
    return AttackReport(x_hat=x_hat, score=_score(x_hat, x_true), iterations=bank.L,
                        converged=True, elapsed=time.perf_counter() - t0,
                        extras={"selected": l_star, "residuals": residuals})


def attack_drp2(bank: LinearBank, v: np.ndarray, x_true=None,
                max_rounds: int = 200, anneal: float = 0.7,
                anneal_floor: float = 1e-8) -> AttackReport:
    """Alternating attack on dynamic RP with per-slot choices.

    Initialization inverts the cross-correlation structure of the known
    candidate vectors (x ~ C^{-1} y).  The alternation between candidate
    re-selection and least squares runs with annealed soft assignments
    first (per-slot candidate weights exp(-residual^2 / 2T), T shrinking
    geometrically), because the hard alternation alone has self-consistent
    wrong fixed points that capture a noticeable fraction of starts at
    large L.  Once T is cold the hard alternation runs to a fixed point.

    Success means the recovered selection reproduces every observation
    exactly (machine precision), which for discrete selections implies the
    exact x.
    """
    t0 = time.perf_counter()
    v = np.asarray(v, dtype=float)
    cand = bank.matrices[:v.size]                         # (K, L, N)
    k, l_count, n = cand.shape
    s = cand.sum(axis=1)                                  # (K, N)
    c = (s.T @ s) / (k * l_count)
    y = (s.T @ v) / k
    x_hat = np.linalg.solve(c, y)
    rounds = 0
    temp = float(np.median((v[:, None] - cand @ x_hat) ** 2))
    while temp > anneal_floor and rounds < max_rounds:
        rounds += 1
        resid2 = (v[:, None] - cand @ x_hat) ** 2
        w = np.exp(-(resid2 - resid2.min(axis=1, keepdims=True)) / (2.0 * temp))
        w /= w.sum(axis=1, keepdims=True)
        a = np.einsum("kl,kln,klm->nm", w, cand, cand, optimize=True)
        b = np.einsum("kl,kln,k->n", w, cand, v, optimize=True)
        x_hat = np.linalg.solve(a, b)
        temp *= anneal
    sel_prev = np.argmin(np.abs(v[:, None] - cand @ x_hat), axis=1)
    for _ in range(max_rounds):
        rounds += 1
        r = cand[np.arange(k), sel_prev]
        x_hat, *_ = np.linalg.lstsq(r, v, rcond=None)
        sel = np.argmin(np.abs(v[:, None] - cand @ x_hat), axis=1)
        if np.array_equal(sel, sel_prev):
            break
        sel_prev = sel
    final_resid = float(np.max(np.abs(cand[np.arange(k), sel_prev] @ x_hat - v)))
    exact = final_resid <= 1e-9 * max(1.0, float(np.max(np.abs(v))))
    return AttackReport(x_hat=x_hat, score=_score(x_hat, x_true),
                        iterations=rounds, converged=exact,
                        elapsed=time.perf_counter() - t0,
                        extras={"residual": final_resid})


# ---------------------------------------------------------------------------
# Index-of-max attacks: averaging plus constraint refinement

def _refine_cone(d: np.ndarray, z0: np.ndarray, max_iter: int,
                 track_violations: bool = False):
    """Drive z into the cone {d_k^T z > 0 for all k}.

    Repeatedly picks the most violated constraint and projects onto it
    (step 1/||d||^2 zeroes the constraint; a tiny relative margin pushes
    strictly inside so the loop can terminate).
    """
    z = z0.copy()
    norms2 = np.einsum("kn,kn->k", d, d)
    cons = d @ z
    trace = []
    it = 0
    for it in range(1, max_iter + 1):
        k_star = int(np.argmin(cons))
        worst = cons[k_star]
        if worst > 0:
            return z, it - 1, True, trace
        margin = 1e-12 * np.sqrt(norms2[k_star]) * np.linalg.norm(z)
        step = (worst - margin) / norms2[k_star]
        z -= step * d[k_star]
        cons -= step * (d @ d[k_star])
        if it % 256 == 0:
            cons = d @ z                   # resync accumulated rounding
        if track_violations:
            trace.append(int(np.sum(cons <= 0)))
    return z, it, bool(np.min(d @ z) > 0), trace


def _iom1_constraints(bank: IomBank, y: np.ndarray) -> np.ndarray:
    """Difference vectors d = r_winner - r_other, K1 (L-1) of them."""
    k1, l_count, n = bank.matrices.shape
    rows = []
    for k in range(k1):
        r = bank.matrices[k]
        win = int(y[k])
        others = np.delete(r, win, axis=0)
        rows.append(r[win][None, :] - others)
    return np.concatenate(rows, axis=0)


def attack_iom1(bank: IomBank, y: np.ndarray, x_true=None,
                max_iter: int | None = None,
                track_violations: bool = False) -> AttackReport:
    """Invert IoM-1 from its argmax outputs.

    Every output index turns into L-1 linear constraints d^T x > 0;
    averaging the d's already estimates the direction of x, refinement
    projects the estimate into the constraint cone.
    """
    t0 = time.perf_counter()
    d = _iom1_constraints(bank, y)
    if max_iter is None:
        max_iter = 1000 * d.shape[0]
    x_avg = d.mean(axis=0)
    x_hat, iters, ok, trace = _refine_cone(d, x_avg, max_iter, track_violations)
    extras = {"x_avg": x_avg, "score_avg": _score(x_avg, x_true)}
    if track_violations:
        extras["violations"] = trace
    return AttackReport(x_hat=x_hat, score=_score(x_hat, x_true),
                        iterations=iters, converged=ok,
                        elapsed=time.perf_counter() - t0, extras=extras)


def _iom2_constraints(bank: IomBank, y: np.ndarray, signs: np.ndarray):
    """Constraint rows c with c^T log|x| > 0 from IoM-2 outputs.

    T_k sums the group's permutation matrices, so log|w_k| = T_k log|x|.
    Groups whose product vector has exactly one positive entry are skipped
    (the argmax is sign-forced and orders nothing).
    """
    n, p = bank.N, bank.p
    signs = np.sign(np.asarray(signs, dtype=float))
    if np.any(signs == 0):
        raise ValueError("signs must be nonzero")
    rows = []
    used = 0
    for k in range(bank.outputs):
        group = bank.perms[k * p:(k + 1) * p]
        t = np.zeros((n, n))
        w_sign = np.ones(n)
        for perm in group:
            t[np.arange(n), perm] += 1.0
            w_sign *= signs[perm]
        pos = w_sign > 0
        n_pos = int(pos.sum())
        win = int(y[k])
        if n_pos == 1:
            continue
        used += 1
        if n_pos == 0:
            # all entries negative: the max has the smallest magnitude
            others = np.delete(t, win, axis=0)
            rows.append(others - t[win][None, :])
        else:
            others = t[pos & (np.arange(n) != win)]
            rows.append(t[win][None, :] - others)
    if not rows:
        raise ValueError("no usable constraints (every group was sign-forced)")
    d = np.concatenate(rows, axis=0)
    # identical T_k rows produce all-zero constraints (the two products share
    # one factor multiset and tie exactly); they carry no information
    d = d[np.any(d != 0.0, axis=1)]
    if d.size == 0:
        raise ValueError("no usable constraints (all rows degenerate)")
    return d, used


def attack_iom2(bank: IomBank, y: np.ndarray, signs: np.ndarray, x_true=None,
                max_iter: int | None = None,
                track_violations: bool = False) -> AttackReport:
    """Invert IoM-2 up to sign, given the sign vector of x.

    Works on z = log|x| where the constraints are linear; the estimate is
    exp(z) recombined with the given signs.  The score, when the truth is
    supplied, compares magnitudes |x_hat| against |x| (the signs are input,
    not recovered).
    """
    t0 = time.perf_counter()
    d, used = _iom2_constraints(bank, y, signs)
    if max_iter is None:
        max_iter = 1000 * d.shape[0]
    z_avg = d.mean(axis=0)
    z_hat, iters, ok, trace = _refine_cone(d, z_avg, max_iter, track_violations)
    signs = np.sign(np.asarray(signs, dtype=float))
    x_hat = signs * np.exp(z_hat)
    x_avg = signs * np.exp(z_avg)
    abs_true = None if x_true is None else np.abs(x_true)
    extras = {"x_avg": x_avg, "score_avg": _score(np.abs(x_avg), abs_true),
              "groups_used": used}
    if track_violations:
        extras["violations"] = trace
    return AttackReport(x_hat=x_hat, score=_score(np.abs(x_hat), abs_true),
                        iterations=iters, converged=ok,
                        elapsed=time.perf_counter() - t0, extras=extras)


# ---------------------------------------------------------------------------
# HOP substitution

def hop_substitute(spec: HopSpec, y_observed: np.ndarray) -> AttackReport:
    """Recover the monomial vector as a substitute input.

    The outputs are linear in the monomial vector once the coefficients
    are known, so enough observed outputs pin it down exactly and every
    future output is predictable without ever recovering x.
    """
    t0 = time.perf_counter()
    y_observed = np.asarray(y_observed, dtype=float)
    m_obs = y_observed.size
    c_obs = spec.coeffs[:m_obs]
    if np.linalg.matrix_rank(c_obs) < spec.monomials:
        raise ValueError("coefficient matrix rank below the monomial count; "
                         "request more outputs")
    v_hat, *_ = np.linalg.lstsq(c_obs, y_observed, rcond=None)
    resid = float(np.max(np.abs(c_obs @ v_hat - y_observed)))
    return AttackReport(x_hat=v_hat, score=None, iterations=1, converged=True,
                        elapsed=time.perf_counter() - t0,
                        extras={"residual": resid})


def hop_predict(spec: HopSpec, v_hat: np.ndarray, m: int) -> float:
    """Predicted output m from a recovered monomial vector."""
    return float(spec.coeffs[m] @ v_hat)


def hop_substitute_check(spec: HopSpec, x: np.ndarray, m_observed: int):
    """Convenience: observe the first m outputs, substitute, and report the
    worst prediction error over the remaining outputs."""
    from .nonlinear import hop_forward
    y = hop_forward(spec, x)
    report = hop_substitute(spec, y[:m_observed])
    preds = spec.coeffs[m_observed:] @ report.x_hat
    report.extras["prediction_error"] = float(np.max(np.abs(preds - y[m_observed:]))) \
        if m_observed < spec.M else 0.0
    report.extras["true_monomials"] = monomial_vector(spec, x)
    return report


# ---------------------------------------------------------------------------
# Newton attack on SVD-CEF via the relaxed symmetric unknown X

@dataclass
class NewtonOptions:
    """Knobs for the Newton attack.

    ``eigenpair`` picks how the per-iterate forward computation chooses
    among the eigenpairs of the (generally indefinite) iterate matrix:
    "power" takes the dominant one in absolute value, which is what power
    iteration returns and what the attack is calibrated on; "branch"
    always follows the algebraic branch implied by the current sign of
    the structured solution.  ``line_search`` enables residual
    backtracking (halve the step on increase, floor 1/64); it widens the
    convergence basin well beyond the plain update and is off by default.
    """

    max_iter: int = 100
    step: float = 1.0
    line_search: bool = False
    eta_floor: float = 1.0 / 64.0
    reproject_every: int = 50
    plateau_window: int = 10
    plateau_rtol: float = 0.01
    stop_residual: float = 1e-9
    y_tol: float = 0.02
    eigenpair: str = "power"


def _vech_indices(n: int):
    """Lower-triangle (row, col) pairs in column-major block order; the
    pair (1, 0) sits at position 1."""
    ii, jj = [], []
    for j in range(n):
        for i in range(j, n):
            ii.append(i)
            jj.append(j)
    return np.asarray(ii), np.asarray(jj)


def _forward_state(q: np.ndarray, x_mat: np.ndarray, branch: float,
                   eigenpair: str = "branch"):
    """Eigen data of every block matrix sum_l Q X Q^T at the iterate.

    Returns (s, u, c): the block matrices, the selected eigenvectors and
    eigenvalues.  "branch" selects the largest (branch > 0) or smallest
    eigenvalue; "power" selects the dominant-in-absolute-value pair.
    """
    qx = np.einsum("klab,bc->klac", q, x_mat)
    s = np.einsum("klac,kldc->kad", qx, q)
    lam, vecs = np.linalg.eigh(s)
    if eigenpair == "power":
        pick = np.where(np.abs(lam[:, -1]) >= np.abs(lam[:, 0]),
                        lam.shape[1] - 1, 0)
        rows = np.arange(len(pick))
        return s, vecs[rows, :, pick].copy(), lam[rows, pick].copy()
    if branch > 0:
        return s, vecs[:, :, -1].copy(), lam[:, -1].copy()
    return s, vecs[:, :, 0].copy(), lam[:, 0].copy()


def _align_to_known(u: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Flip each eigenvector so its known components match the data's sign."""
    n_y = y.shape[1]
    dots = np.einsum("kc,kc->k", u[:, :n_y], y)
    s = np.sign(dots)
    s[s == 0] = 1.0
    return u * s[:, None]


def _structured_x(e: np.ndarray) -> tuple[np.ndarray, float]:
    """The constrained solution-manifold point for direction e:
    X = a I + g e e^T with (X)_{1,2} = 1 and Tr X = 1."""
    n = e.size
    prod = e[0] * e[1]
    if abs(prod) < 1e-14:
        raise FloatingPointError("re-projection hit x1 x2 ~ 0")
    g = 1.0 / prod
    a = (1.0 - g) / n
    return a * np.eye(n) + g * np.outer(e, e), g


def _residual(u: np.ndarray, y: np.ndarray) -> np.ndarray:
    return (y - u[:, :y.shape[1]]).ravel()


class _NewtonSystem:
    """Assembles the linearized equilibrium system at an iterate.

    Row layout: one trace row, then N rows per block (the differentiated
    eigen-equations), then one norm row per block.  Column blocks of B:
    the free lower-triangle coordinates of X (minus the fixed (1,0)
    entry), the unknown eigenvector components, and the eigenvalue
    surrogates.
    """

    def __init__(self, q: np.ndarray, n_y: int):
        self.q = q
        self.k, _, self.n, _ = q.shape
        self.n_y = n_y
        self.d_full = self.n * (self.n + 1) // 2
        self.ii, self.jj = _vech_indices(self.n)
        self.off = self.ii != self.jj
        self.keep = np.ones(self.d_full, dtype=bool)
        self.keep[1] = False
        t_row = np.zeros(self.d_full)
        t_row[~self.off] = 1.0
        self.t_row = t_row
        self.rows = 1 + self.n * self.k + self.k

    def build(self, s, u, c):
        n, k, n_y = self.n, self.k, self.n_y
        g = s - c[:, None, None] * np.eye(n)[None, :, :]
        w = np.einsum("ki,klij->klj", u, self.q)       # w[k,l] = u_k^T Q_{k,l}
        j3 = np.einsum("klri,klj->krij", self.q, w)
        qhat = j3[:, :, self.ii, self.jj].copy()
        qhat[:, :, self.off] += j3[:, :, self.jj[self.off], self.ii[self.off]]
        a_mat = np.zeros((self.rows, n_y * k))
        b_x = np.zeros((self.rows, self.d_full - 1))
        b_u = np.zeros((self.rows, (n - n_y) * k))
        b_z = np.zeros((self.rows, k))
        b_x[0] = self.t_row[self.keep]
        for kk in range(k):
            r0 = 1 + kk * n
            b_x[r0:r0 + n] = qhat[kk][:, self.keep]
            a_mat[r0:r0 + n, kk * n_y:(kk + 1) * n_y] = g[kk][:, :n_y]
            b_u[r0:r0 + n, kk * (n - n_y):(kk + 1) * (n - n_y)] = g[kk][:, n_y:]
            b_z[r0:r0 + n, kk] = -u[kk]
            norm_row = 1 + n * k + kk
            a_mat[norm_row, kk * n_y:(kk + 1) * n_y] = u[kk, :n_y]
            b_u[norm_row, kk * (n - n_y):(kk + 1) * (n - n_y)] = u[kk, n_y:]
        return a_mat, np.concatenate([b_x, b_u, b_z], axis=1)

    def apply_step(self, x_mat, delta):
        vech = x_mat[self.ii, self.jj].copy()
        vech[self.keep] += delta
        out = np.zeros((self.n, self.n))
        out[self.ii, self.jj] = vech
        out[self.jj, self.ii] = vech
        out += (1.0 - np.trace(out)) / self.n * np.eye(self.n)
        return out


def newton_attack_svdcef(bank: RotationBank, y: np.ndarray, x_init: np.ndarray,
                         n_y: int = 1, known_blocks: int | None = None,
                         holdout_y: np.ndarray | None = None,
                         x_true=None,
                         options: NewtonOptions | None = None) -> AttackReport:
    """Newton iteration in the symmetric unknown X with Tr X = 1 and
    (X)_{1,2} = 1, from a unit-norm starting guess.

    Each step recomputes the eigen data of every block from the current X
    (only the X coordinates are ever updated), linearizes the equilibrium
    conditions, and solves the overdetermined system in least squares.
    On the re-projection cadence, and on residual plateaus, X is folded
    back onto its structured manifold through its own extreme eigenvector;
    a projection is kept only if it does not worsen the data residual, and
    two fruitless stalls in a row end the run.

    Success requires the recovered direction to reproduce the known
    outputs to ``y_tol`` max-abs error, and the held-out outputs as well
    when they are supplied.
    """
    t0 = time.perf_counter()
    opt = options or NewtonOptions()
    y = np.asarray(y, dtype=float).reshape(-1, n_y)
    n = bank.N
    k = y.shape[0] if known_blocks is None else known_blocks
    d_full = n * (n + 1) // 2
    if n_y * k < d_full - 1:
        raise ValueError(
            f"underdetermined system: N_y*K = {n_y * k} < N(N+1)/2 - 1 = {d_full - 1}")
    q = bank.Q[:k]
    x_init = np.asarray(x_init, dtype=float)
    x_init = x_init / np.linalg.norm(x_init)

    def fail(reason, it=0):
        return AttackReport(x_hat=x_init, score=_score(x_init, x_true),
                            iterations=it, converged=False,
                            elapsed=time.perf_counter() - t0,
                            extras={"known_ok": False, "holdout_ok": False,
                                    "reason": reason})

    try:
        x_mat, gamma = _structured_x(x_init)
    except FloatingPointError:
        return fail("degenerate initialization")
    branch = 1.0 if gamma > 0 else -1.0
    sysm = _NewtonSystem(q, n_y)

    def forward(xm, br):
        s, u, c = _forward_state(q, xm, br, opt.eigenpair)
        u = _align_to_known(u, y)
        rv = _residual(u, y)
        return s, u, c, rv, float(np.linalg.norm(rv))

    s, u, c, res_vec, res = forward(x_mat, branch)
    history = [res]
    rank_deficient = False
    stalled_twice = False
    it = 0
    with np.errstate(over="ignore", invalid="ignore"):
        while it < opt.max_iter:
            it += 1
            if np.max(np.abs(res_vec)) < opt.stop_residual:
                break
            a_mat, b_mat = sysm.build(s, u, c)
            rhs = a_mat @ res_vec
            if not np.all(np.isfinite(b_mat)):
                return fail("iterate diverged", it)
            sol, _, rank, _ = np.linalg.lstsq(b_mat, rhs, rcond=None)
            if rank < b_mat.shape[1]:
                rank_deficient = True
            delta = -sol[:d_full - 1]
            if not np.all(np.isfinite(delta)) or np.max(np.abs(delta)) > 1e12:
                return fail("step diverged", it)
            improved = True
            if opt.line_search:
                improved = False
                step = opt.step
                while step >= opt.eta_floor - 1e-15:
                    x_try = sysm.apply_step(x_mat, step * delta)
                    s_t, u_t, c_t, rv_t, res_t = forward(x_try, branch)
                    if res_t < res:
                        x_mat, s, u, c = x_try, s_t, u_t, c_t
                        res_vec, res = rv_t, res_t
                        improved = True
                        break
                    step *= 0.5
            else:
                x_mat = sysm.apply_step(x_mat, opt.step * delta)
                if not np.all(np.isfinite(x_mat)):
                    return fail("iterate diverged", it)
                s, u, c, res_vec, res = forward(x_mat, branch)
            plateau = (len(history) > opt.plateau_window and
                       history[-opt.plateau_window] - res <
                       opt.plateau_rtol * max(res, 1e-30))
            scheduled = it % opt.reproject_every == 0
            if improved and not (scheduled or plateau):
                history.append(res)
                stalled_twice = False
                continue
            # scheduled cadence or stall: fold X back onto its manifold
            if not np.all(np.isfinite(x_mat)):
                return fail("iterate diverged", it)
            _, vec_x = np.linalg.eigh(x_mat)
            e = vec_x[:, -1] if branch > 0 else vec_x[:, 0]
            try:
                x_proj, gamma = _structured_x(e)
            except FloatingPointError:
                break
            br_p = 1.0 if gamma > 0 else -1.0
            s_p, u_p, c_p, rv_p, res_p = forward(x_proj, br_p)
            if res_p < res:
                branch = br_p
                x_mat, s, u, c = x_proj, s_p, u_p, c_p
                res_vec, res = rv_p, res_p
                stalled_twice = False
            elif not improved:
                if stalled_twice:
                    break
                stalled_twice = True
            history.append(res)

    if not np.all(np.isfinite(x_mat)):
        return fail("iterate diverged", it)
    _, vec_x = np.linalg.eigh(x_mat)
    x_hat = vec_x[:, -1] if branch > 0 else vec_x[:, 0]
    known_ok, holdout_ok = _verify_outputs(bank, x_hat, y, n_y, k, holdout_y,
                                           opt.y_tol)
    converged = known_ok and (holdout_ok if holdout_y is not None else True)
    return AttackReport(x_hat=x_hat, score=_score(x_hat, x_true),
                        iterations=it, converged=converged,
                        elapsed=time.perf_counter() - t0,
                        extras={"known_ok": known_ok, "holdout_ok": holdout_ok,
                                "residual": res, "rank_deficient": rank_deficient})


def _verify_outputs(bank, x_hat, y, n_y, k, holdout_y, tol):
    out = svdcef_forward(bank, x_hat, n_y, k_range=range(k))
    if out.skipped_blocks or out.values.size != y.size:
        return False, False
    known_ok = bool(np.max(np.abs(out.values - y.ravel())) <= tol)
    if holdout_y is None:
        return known_ok, False
    holdout_y = np.asarray(holdout_y, dtype=float).reshape(-1, n_y)
    h = holdout_y.shape[0]
    out_h = svdcef_forward(bank, x_hat, n_y, k_range=range(k, k + h))
    if out_h.skipped_blocks or out_h.values.size != holdout_y.size:
        return known_ok, False
    holdout_ok = bool(np.max(np.abs(out_h.values - holdout_y.ravel())) <= tol)
    return known_ok, holdout_ok
