"""Experiment configuration, dispatch, and table emission.

A run is a pure function of (config, seed): rerunning the same config
produces byte-identical CSV, serial or parallel.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field

from . import __version__, experiments


@dataclass
class ExperimentConfig:
    experiment: str
    seed: int = 1
    params: dict = field(default_factory=dict)
    workers: int = 1

    def canonical_json(self) -> str:
        return json.dumps({"experiment": self.experiment, "seed": self.seed,
                           "params": self.params}, sort_keys=True)

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()[:16]

    @classmethod
    def from_json(cls, doc: dict) -> "ExperimentConfig":
        return cls(experiment=doc["experiment"], seed=doc.get("seed", 1),
                   params=doc.get("params", {}),
                   workers=doc.get("workers", 1))


@dataclass
class ResultTable:
    columns: list
    rows: list
    metadata: dict
    elapsed: float = 0.0

    def cell(self, row: int, column: str):
        return self.rows[row][self.columns.index(column)]

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]


_REGISTRY = {}


def _experiment(name):
    def wrap(fn):
        _REGISTRY[name] = fn
        return fn
    return wrap


@_experiment("iom1_table")
def _run_iom1(cfg):
    p = cfg.params
    return experiments.iom1_table(cfg.seed, p.get("N", [8, 16, 32]),
                                  p.get("K1", [8, 16, 32, 64]),
                                  p.get("trials", 100), cfg.workers)


@_experiment("iom2_table")
def _run_iom2(cfg):
    p = cfg.params
    return experiments.iom2_table(cfg.seed, p.get("N", [8, 16, 32]),
                                  p.get("K2", [8, 16, 32, 64]),
                                  p.get("trials", 100), cfg.workers)


@_experiment("drp2_success")
def _run_drp2(cfg):
    p = cfg.params
    cases = [tuple(c) for c in p.get("cases", [[8, 8, 184], [16, 48, 3360]])]
    trials = p.get("trials", [100, 50])
    if isinstance(trials, int):
        trials = [trials] * len(cases)
    return experiments.drp2_success(cfg.seed, cases, trials, cfg.workers)


@_experiment("rp_invert")
def _run_rp(cfg):
    p = cfg.params
    return experiments.rp_exactness(cfg.seed, p.get("N", 8),
                                    p.get("block_rows", 3),
                                    p.get("trials", 100))


@_experiment("hop_substitute")
def _run_hop(cfg):
    p = cfg.params
    return experiments.hop_exactness(cfg.seed, p.get("N", 3), p.get("J", 5),
                                     p.get("M", 16), p.get("observed", 10),
                                     p.get("trials", 100))


@_experiment("svdcef_newton")
def _run_newton(cfg):
    p = cfg.params
    n = p.get("N", 4)
    k = p.get("K", n * (n + 1) // 2)
    n_y = p.get("N_y", 1)
    if n_y * k < n * (n + 1) // 2:
        raise ValueError(
            f"infeasible parameters: N_y*K = {n_y * k} violates the "
            f"full-rank bound N_y*K >= N(N+1)/2 = {n * (n + 1) // 2}")
    return experiments.newton_table(
        cfg.seed, n, p.get("r", [0.001, 0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0]),
        p.get("trials", 100), n_y, k, p.get("holdout_factor", 2), cfg.workers,
        p.get("options"))


@_experiment("eta_stats")
def _run_eta(cfg):
    p = cfg.params
    return experiments.eta_statistics(cfg.seed, p.get("N", [16, 32]),
                                      p.get("num_x", 10_000),
                                      p.get("num_banks", 100),
                                      p.get("eta_max", 2.5), cfg.workers,
                                      p.get("use_f32", True))


@_experiment("ber_compare")
def _run_ber(cfg):
    p = cfg.params
    return experiments.ber_compare(cfg.seed, p.get("N", [16, 32]),
                                   p.get("sigma", [0.01, 0.02, 0.05, 0.1]),
                                   p.get("trials", 500), p.get("draws", 5),
                                   p.get("blocks", 16),
                                   p.get("helper_factor", 4),
                                   p.get("eta_max", 2.5), cfg.workers)


@_experiment("rho_corr")
def _run_rho(cfg):
    p = cfg.params
    return experiments.rho_correlation(cfg.seed, p.get("N", [8, 16, 32]),
                                       p.get("trials", 10_000),
                                       p.get("blocks", 16), cfg.workers)


@_experiment("kl_divergence")
def _run_kl(cfg):
    p = cfg.params
    return experiments.kl_divergence_table(cfg.seed, p.get("N", [8, 16, 32]),
                                           p.get("trials", 40_000),
                                           p.get("blocks", 6),
                                           p.get("bins", 64), cfg.workers)


@_experiment("distance_profile")
def _run_profile(cfg):
    p = cfg.params
    return experiments.distance_profile_table(
        cfg.seed, p.get("N", 16),
        p.get("alpha", [1e-8, 1e-4, 0.01, 0.1, 0.5, 1.0]),
        p.get("trials", 200), p.get("blocks", 8))


@_experiment("bench_forward")
def _run_bench(cfg):
    p = cfg.params
    return experiments.bench_forward(cfg.seed, p.get("N", [16, 32, 64]),
                                     p.get("repeats", 5))


def run(config: ExperimentConfig) -> ResultTable:
    """Dispatch one experiment and wrap its table with metadata."""
    if config.experiment not in _REGISTRY:
        raise ValueError(f"unknown experiment {config.experiment!r}; "
                         f"known: {sorted(_REGISTRY)}")
    t0 = time.perf_counter()
    out = _REGISTRY[config.experiment](config)
    if len(out) == 3:
        columns, rows, extra = out
    else:
        columns, rows = out
        extra = {}
    for row in rows:
        for cell in row:
            if cell != cell or cell in (float("inf"), float("-inf")):
                raise ValueError(f"non-finite cell in results: {row}")
    meta = {"experiment": config.experiment, "config_hash": config.config_hash(),
            "version": f"cefkit-{__version__}", **extra}
    return ResultTable(columns=list(columns), rows=[list(r) for r in rows],
                       metadata=meta, elapsed=time.perf_counter() - t0)


def _fmt(cell) -> str:
    if isinstance(cell, bool):
        return "1" if cell else "0"
    if isinstance(cell, (int,)):
        return str(cell)
    return f"{float(cell):.10g}"


def emit(table: ResultTable, fmt: str = "csv") -> bytes:
    """Serialize a table: plain numeric CSV, or JSON with metadata.

    Volatile fields (elapsed) never reach the byte stream, so identical
    configs emit identical bytes.
    """
    if fmt == "csv":
        lines = [",".join(table.columns)]
        lines += [",".join(_fmt(c) for c in row) for row in table.rows]
        return ("\n".join(lines) + "\n").encode("utf-8")
    if fmt == "json":
        doc = {"metadata": table.metadata, "columns": table.columns,
               "rows": [[float(c) for c in row] for row in table.rows]}
        return (json.dumps(doc, indent=1, sort_keys=True) + "\n").encode("utf-8")
    raise ValueError(f"unknown format {fmt!r}")


def table_from_json_bytes(data: bytes) -> ResultTable:
    doc = json.loads(data.decode("utf-8"))
    return ResultTable(columns=doc["columns"], rows=doc["rows"],
                       metadata=doc["metadata"])
