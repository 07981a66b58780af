"""Monte Carlo experiment implementations behind the harness.

Every experiment is a pure function of (seed, parameters): per-trial
randomness derives from the trial index, never from scheduling order, so
serial and parallel runs produce identical tables.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .attacks import (
    NewtonOptions,
    attack_drp2,
    attack_iom1,
    attack_iom2,
    hop_substitute,
    invert_rp,
    newton_attack_svdcef,
)
from .keystream import KeyMaterial, derive_stream, permutation_batch
from .linear import drp2_forward_all, make_drp2_bank, make_rp_bank, rp_forward
from .nonlinear import (
    hop_forward,
    iom1_forward_all,
    iom2_forward_all,
    make_hop_spec,
    make_iom1_bank,
    make_iom2_bank,
)
from .quantizer import (
    build_table,
    decode_bob_batch,
    gray_encode,
    quantize_alice_batch,
)
from .stats import (
    correlation_rho,
    global_distance_profile,
    kl_distance,
    kl_self_distance,
    orthogonal_unit_perturbation,
    sample_uniform_sphere,
    sample_uniform_sphere_batch,
)
from .svdcef import (
    apply_sign_batch,
    eta_batch,
    make_rotation_bank,
    rotation_block,
    svdcef_forward,
)

DEFAULT_ETA_MAX = 2.5


def _map_ordered(fn, args_list, workers: int):
    """Apply fn over args in a fixed order, optionally across processes.

    Results come back in argument order regardless of scheduling, so the
    reduction downstream is schedule-independent.
    """
    if workers <= 1:
        return [fn(a) for a in args_list]
    chunk = max(1, len(args_list) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, args_list, chunksize=chunk))


def _mean_se(values) -> tuple[float, float]:
    a = np.asarray(values, dtype=float)
    if a.size <= 1:
        return float(a.mean()) if a.size else float("nan"), float("nan")
    return float(a.mean()), float(a.std(ddof=1) / np.sqrt(a.size))


# ---------------------------------------------------------------------------
# IoM attack tables

def _iom1_trial(args):
    seed, n, k1, t = args
    key = KeyMaterial(seed, f"iom1.{n}.{k1}")
    bank = make_iom1_bank(KeyMaterial(seed + t, key.label), n, k1)
    x = derive_stream(bank.key, ("x",)).gaussians(n)
    rep = attack_iom1(bank, iom1_forward_all(bank, x), x_true=x)
    return rep.extras["score_avg"], rep.score, rep.converged


def iom1_table(seed: int, n_list, k1_list, trials: int, workers: int = 1):
    rows = []
    for n in n_list:
        for k1 in k1_list:
            res = _map_ordered(_iom1_trial,
                               [(seed, n, k1, t) for t in range(trials)], workers)
            avg_m, avg_se = _mean_se([r[0] for r in res])
            ref_m, ref_se = _mean_se([r[1] for r in res])
            conv = float(np.mean([r[2] for r in res]))
            rows.append([n, k1, trials, avg_m, avg_se, ref_m, ref_se, conv])
    return (["N", "K1", "trials", "score_avg", "score_avg_se",
             "score_refined", "score_refined_se", "converged_frac"], rows)


def _iom2_trial(args):
    seed, n, k2, t = args
    key = KeyMaterial(seed + t, f"iom2.{n}.{k2}")
    bank = make_iom2_bank(key, n, k2)
    x = np.abs(derive_stream(key, ("x",)).gaussians(n))
    rep = attack_iom2(bank, iom2_forward_all(bank, x), np.ones(n), x_true=x)
    return rep.extras["score_avg"], rep.score, rep.converged


def iom2_table(seed: int, n_list, k2_list, trials: int, workers: int = 1):
    rows = []
    for n in n_list:
        for k2 in k2_list:
            res = _map_ordered(_iom2_trial,
                               [(seed, n, k2, t) for t in range(trials)], workers)
            avg_m, avg_se = _mean_se([r[0] for r in res])
            ref_m, ref_se = _mean_se([r[1] for r in res])
            conv = float(np.mean([r[2] for r in res]))
            rows.append([n, k2, trials, avg_m, avg_se, ref_m, ref_se, conv])
    return (["N", "K2", "trials", "score_avg", "score_avg_se",
             "score_refined", "score_refined_se", "converged_frac"], rows)


# ---------------------------------------------------------------------------
# Dynamic RP and RP / HOP exactness

def _drp2_trial(args):
    seed, n, l_count, k_slots, t = args
    key = KeyMaterial(seed + t, f"drp2.{n}.{l_count}.{k_slots}")
    bank = make_drp2_bank(key, n, l_count, k_slots)
    x = derive_stream(key, ("x",)).gaussians(n)
    rep = attack_drp2(bank, drp2_forward_all(bank, x), x_true=x)
    return rep.converged, rep.iterations, rep.score


def drp2_success(seed: int, cases, trials_list, workers: int = 1):
    rows = []
    for (n, l_count, k_slots), trials in zip(cases, trials_list):
        res = _map_ordered(
            _drp2_trial,
            [(seed, n, l_count, k_slots, t) for t in range(trials)], workers)
        rate = float(np.mean([r[0] for r in res]))
        rounds = float(np.mean([r[1] for r in res]))
        score = float(np.mean([r[2] for r in res]))
        rows.append([n, l_count, k_slots, trials, rate, rounds, score])
    return (["N", "L", "K", "trials", "success_rate", "mean_rounds",
             "mean_score"], rows)


def rp_exactness(seed: int, n: int, block_rows: int, trials: int):
    blocks = -(-n // block_rows) + 1
    worst = 1.0
    for t in range(trials):
        key = KeyMaterial(seed + t, "rp.exact")
        bank = make_rp_bank(key, n, block_rows, blocks)
        x = derive_stream(key, ("x",)).gaussians(n)
        ys = [rp_forward(bank, x, i) for i in range(blocks)]
        rep = invert_rp(bank, ys, x_true=x)
        worst = min(worst, rep.score)
    return (["N", "block_rows", "trials", "min_score"],
            [[n, block_rows, trials, worst]])


def hop_exactness(seed: int, n: int, j: int, m: int, observed: int, trials: int):
    worst = 0.0
    for t in range(trials):
        key = KeyMaterial(seed + t, "hop.exact")
        spec = make_hop_spec(key, n, m, J=j)
        x = derive_stream(key, ("x",)).uniforms(n) * 2.0 - 1.0
        y = hop_forward(spec, x)
        rep = hop_substitute(spec, y[:observed])
        preds = spec.coeffs[observed:] @ rep.x_hat
        worst = max(worst, float(np.max(np.abs(preds - y[observed:]))))
    return (["N", "J", "M", "observed", "trials", "max_prediction_error"],
            [[n, j, m, observed, trials, worst]])


# ---------------------------------------------------------------------------
# Newton attack convergence probabilities

def _newton_trial(args):
    seed, n, k, n_y, holdout, r_list, t, opt_kw = args
    key = KeyMaterial(seed + t, f"newton.{n}")
    bank = make_rotation_bank(key, n, k + holdout)
    x = sample_uniform_sphere(derive_stream(key, ("x",)), n)
    out = svdcef_forward(bank, x, n_y, k_range=range(k))
    if out.skipped_blocks:
        return [(False, False)] * len(r_list)
    y = out.values.reshape(k, n_y)
    out_h = svdcef_forward(bank, x, n_y, k_range=range(k, k + holdout))
    y_h = out_h.values.reshape(holdout, n_y) if not out_h.skipped_blocks else None
    opts = NewtonOptions(**opt_kw)
    flags = []
    for idx, r in enumerate(r_list):
        w = orthogonal_unit_perturbation(derive_stream(key, ("init", idx)), x)
        x_init = np.sqrt(max(1.0 - r * r, 0.0)) * x + r * w
        rep = newton_attack_svdcef(bank, y, x_init, n_y, holdout_y=y_h,
                                   options=opts)
        flags.append((rep.extras["known_ok"],
                      rep.extras["known_ok"] and rep.extras["holdout_ok"]))
    return flags


def newton_table(seed: int, n: int, r_list, trials: int, n_y: int = 1,
                 k: int | None = None, holdout_factor: int = 2,
                 workers: int = 1, options: dict | None = None):
    """P_r and P*_r over the r grid, plus the r_max-based bound on the
    overall convergence probability."""
    if k is None:
        k = n * (n + 1) // 2
    if n_y * k < n * (n + 1) // 2:
        raise ValueError(
            f"infeasible: N_y*K = {n_y * k} below the full-rank bound "
            f"N(N+1)/2 = {n * (n + 1) // 2}")
    holdout = holdout_factor * k
    res = _map_ordered(
        _newton_trial,
        [(seed, n, k, n_y, holdout, list(r_list), t, options or {})
         for t in range(trials)], workers)
    rows = []
    r_max = 0.0
    for idx, r in enumerate(r_list):
        p = 100.0 * np.mean([flags[idx][0] for flags in res])
        p_star = 100.0 * np.mean([flags[idx][1] for flags in res])
        if p > 0:
            r_max = max(r_max, r)
        rows.append([n, r, trials, p, p_star])
    meta = {"r_max": r_max,
            "p_conv_bound": r_max ** (n - 1) if r_max > 0 else 0.0}
    return (["N", "r", "trials", "P_percent", "P_star_percent"], rows, meta)


# ---------------------------------------------------------------------------
# Sensitivity statistics

def _eta_bank_task(args):
    seed, n, num_x, b, eta_max, use_f32 = args
    key = KeyMaterial(seed, f"eta.{n}")
    q = rotation_block(key, n, b)
    xs = sample_uniform_sphere_batch(derive_stream(key, ("x", b)), num_x, n)
    eta, _, _ = eta_batch(q, xs, dtype=np.float32 if use_f32 else np.float64)
    good = eta[np.isfinite(eta) & (eta < eta_max)]
    return good.size, float(good.sum()), float((good ** 2).sum()), num_x


def eta_statistics(seed: int, n_list, num_x: int, num_banks: int,
                   eta_max: float = DEFAULT_ETA_MAX, workers: int = 1,
                   use_f32: bool = True):
    """Mean and deviation of the local sensitivity below the pruning
    threshold, and the retention probability, per dimension."""
    rows = []
    for n in n_list:
        res = _map_ordered(
            _eta_bank_task,
            [(seed, n, num_x, b, eta_max, use_f32) for b in range(num_banks)],
            workers)
        n_good = sum(r[0] for r in res)
        total = sum(r[3] for r in res)
        s1 = sum(r[1] for r in res)
        s2 = sum(r[2] for r in res)
        mean = s1 / n_good
        std = float(np.sqrt(max(s2 / n_good - mean * mean, 0.0)))
        rows.append([n, num_x, num_banks, mean, std, n_good / total])
    return (["N", "num_x", "num_banks", "eta_mean", "eta_std", "p_good"], rows)


# ---------------------------------------------------------------------------
# BER comparison of quantized SVD-CEF against IoM-2

def _ber_trial(args):
    (seed, n, sigmas, draws, blocks, helper_factor, eta_max, t) = args
    key = KeyMaterial(seed, f"ber.{n}")
    table = build_table(n, n, helper_factor)
    nbits = n.bit_length() - 1
    gray_lut = np.array([gray_encode(v, nbits) for v in range(n)])
    x = derive_stream(key, ("x", t)).gaussians(n)
    xh = x / np.linalg.norm(x)
    # Alice's bank: accept blocks with eta below the pruning threshold
    qs = []
    bidx = 0
    while len(qs) < blocks and bidx < 64 * blocks:
        cand = rotation_block(key, n, t * 1_000_000 + bidx)
        bidx += 1
        eta, _, _ = eta_batch(cand, xh[None, :])
        if np.isfinite(eta[0]) and eta[0] < eta_max:
            qs.append(cand)
    q = np.stack(qs)
    m = np.einsum("blij,j->bli", q, xh).transpose(0, 2, 1)
    _, vecs = np.linalg.eigh(m @ m.transpose(0, 2, 1))
    u_alice = apply_sign_batch(vecs[:, :, -1], start=1)
    y_alice = np.clip(u_alice[:, 0], -1 + 1e-15, 1 - 1e-15)
    m_alice, j_alice = quantize_alice_batch(table, y_alice)
    g_alice = gray_lut[m_alice]
    perms = permutation_batch(derive_stream(key, ("perm", t)), blocks * n, n)
    g_iom_alice = gray_lut[np.argmax(x[perms].reshape(blocks, n, n).prod(axis=1),
                                     axis=1)]
    err_svd = np.zeros(len(sigmas))
    err_iom = np.zeros(len(sigmas))
    s_noise = derive_stream(key, ("noise", t))
    for _ in range(draws):
        w0 = s_noise.gaussians(n)
        for si, sig in enumerate(sigmas):
            xp = x + sig * w0
            xph = xp / np.linalg.norm(xp)
            mp = np.einsum("blij,j->bli", q, xph).transpose(0, 2, 1)
            _, vecp = np.linalg.eigh(mp @ mp.transpose(0, 2, 1))
            u_bob = apply_sign_batch(vecp[:, :, -1], start=1)
            y_bob = np.clip(u_bob[:, 0], -1 + 1e-15, 1 - 1e-15)
            m_bob = decode_bob_batch(table, y_bob, j_alice)
            err_svd[si] += np.bitwise_count(
                np.bitwise_xor(g_alice, gray_lut[m_bob])).sum()
            g_iom_bob = gray_lut[np.argmax(
                xp[perms].reshape(blocks, n, n).prod(axis=1), axis=1)]
            err_iom[si] += np.bitwise_count(
                np.bitwise_xor(g_iom_alice, g_iom_bob)).sum()
    bits = draws * blocks * nbits
    return err_svd, err_iom, bits


def ber_compare(seed: int, n_list, sigmas, trials: int, draws: int = 5,
                blocks: int = 16, helper_factor: int = 4,
                eta_max: float = DEFAULT_ETA_MAX, workers: int = 1):
    rows = []
    for n in n_list:
        res = _map_ordered(
            _ber_trial,
            [(seed, n, list(sigmas), draws, blocks, helper_factor, eta_max, t)
             for t in range(trials)], workers)
        err_svd = np.sum([r[0] for r in res], axis=0)
        err_iom = np.sum([r[1] for r in res], axis=0)
        bits = sum(r[2] for r in res)
        for si, sig in enumerate(sigmas):
            rows.append([n, sig, trials, draws, blocks,
                         err_svd[si] / bits, err_iom[si] / bits])
    return (["N", "sigma", "trials", "draws", "blocks",
             "ber_svdcef", "ber_iom2"], rows)


# ---------------------------------------------------------------------------
# Distribution statistics: correlation, KL distance, global profile

def _rho_task(args):
    seed, n, trials, k = args
    key = KeyMaterial(seed, f"rho.{n}")
    bank_block_key = KeyMaterial(seed, f"rho.{n}")
    from .svdcef import RotationBank
    q = rotation_block(bank_block_key, n, k)
    bank = RotationBank(key=bank_block_key, N=n, Q=q[None, :],
                        block_ids=np.array([k]))
    return correlation_rho(bank, 0, trials, derive_stream(key, ("mc", k)))


def rho_correlation(seed: int, n_list, trials: int, blocks: int,
                    workers: int = 1):
    rows = []
    for n in n_list:
        res = _map_ordered(_rho_task,
                           [(seed, n, trials, k) for k in range(blocks)], workers)
        rho_m, rho_se = _mean_se([r[0] for r in res])
        star_m, star_se = _mean_se([r[1] for r in res])
        rows.append([n, trials, blocks, rho_m, rho_se, star_m, star_se])
    return (["N", "trials", "blocks", "rho_mean", "rho_se",
             "rho_star_mean", "rho_star_se"], rows)


def _kl_task(args):
    seed, n, trials, bins, k = args
    key = KeyMaterial(seed, f"kl.{n}")
    from .svdcef import RotationBank
    q = rotation_block(key, n, k)
    bank = RotationBank(key=key, N=n, Q=q[None, :], block_ids=np.array([k]))
    v = sample_uniform_sphere(derive_stream(key, ("v", k)), n)
    return kl_distance(bank, 0, v, trials, derive_stream(key, ("mc", k)),
                       bins=bins)


def kl_divergence_table(seed: int, n_list, trials: int, blocks: int,
                        bins: int = 64, workers: int = 1):
    rows = []
    for n in n_list:
        res = _map_ordered(_kl_task,
                           [(seed, n, trials, bins, k) for k in range(blocks)],
                           workers)
        d_m, d_se = _mean_se(res)
        ctrl = kl_self_distance(n, trials,
                                derive_stream(KeyMaterial(seed, f"kl.{n}"),
                                              ("ctrl",)), bins=bins)
        rows.append([n, trials, blocks, bins, d_m, d_se, ctrl])
    return (["N", "trials", "blocks", "bins", "d_mean", "d_se", "d_control"],
            rows)


def distance_profile_table(seed: int, n: int, alphas, trials: int,
                           blocks: int = 8):
    key = KeyMaterial(seed, f"profile.{n}")
    bank = make_rotation_bank(key, n, blocks)
    alphas_arr, dx, means, stds = global_distance_profile(
        bank, alphas, trials, derive_stream(key, ("mc",)))
    rows = [[n, float(a), float(d), float(m), float(s)]
            for a, d, m, s in zip(alphas_arr, dx, means, stds)]
    return (["N", "alpha", "dx_norm", "ratio_mean", "ratio_std"], rows)


def bench_forward(seed: int, n_list, repeats: int = 5, blocks: int = 4):
    """Median wall time of one SVD-CEF block evaluation per dimension.

    The modulated-matrix product dominates and grows cubically; the table
    is meant for eyeballing the trend, not as a hard bound.
    """
    import time as _time
    rows = []
    for n in n_list:
        key = KeyMaterial(seed, f"bench.{n}")
        bank = make_rotation_bank(key, n, blocks)
        x = sample_uniform_sphere(derive_stream(key, ("x",)), n)
        times = []
        for _ in range(repeats):
            t0 = _time.perf_counter()
            svdcef_forward(bank, x, 1)
            times.append((_time.perf_counter() - t0) / blocks)
        rows.append([n, float(np.median(times))])
    return (["N", "seconds_per_block"], rows)
