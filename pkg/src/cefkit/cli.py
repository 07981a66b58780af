"""Command-line interface: batch reproduction of every experiment table,
plus small utilities for key generation, forward evaluation, and
quantizer-table construction.

Experiment configs are JSON documents:

    {"experiment": "iom1_table", "seed": 1,
     "params": {"N": [8, 16, 32], "K1": [8, 16, 32, 64], "trials": 100}}

with --seed / --trials / --workers overriding the file.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__
from .harness import ExperimentConfig, ResultTable, emit, run
from .keystream import KeyMaterial, derive_stream
from .linear import (
    bank_from_json,
    drp1_forward,
    drp2_forward_all,
    make_urp_bank,
    urp_forward,
)
from .nonlinear import (
    hop_forward,
    iom1_forward_all,
    iom2_forward_all,
    make_hop_spec,
    make_iom1_bank,
    make_iom2_bank,
)
from .quantizer import build_table, table_to_json
from .svdcef import make_rotation_bank, svdcef_forward

_EXPERIMENTS_BY_COMMAND = {
    "attack": ("iom1_table", "iom2_table", "drp2_success", "rp_invert",
               "hop_substitute", "svdcef_newton"),
    "quantize": ("ber_compare",),
    "stats": ("eta_stats", "rho_corr", "kl_divergence", "distance_profile"),
    "bench": ("bench_forward",),
}


def _load_config(args) -> ExperimentConfig:
    with open(args.config) as fh:
        cfg = ExperimentConfig.from_json(json.load(fh))
    if args.seed is not None:
        cfg.seed = args.seed
    if args.trials is not None:
        cfg.params["trials"] = args.trials
    if args.workers is not None:
        cfg.workers = args.workers
    return cfg


def _write_out(data: bytes, out: str | None):
    if out:
        with open(out, "wb") as fh:
            fh.write(data)
    else:
        sys.stdout.write(data.decode("utf-8"))


def _run_experiment(args, command: str):
    cfg = _load_config(args)
    allowed = _EXPERIMENTS_BY_COMMAND[command]
    if cfg.experiment not in allowed:
        raise SystemExit(f"{command} runs one of {allowed}, "
                         f"got {cfg.experiment!r}")
    table = run(cfg)
    _write_out(emit(table, args.format), args.out)
    print(f"# {cfg.experiment}: {len(table.rows)} rows in "
          f"{table.elapsed:.1f}s (config {table.metadata['config_hash']})",
          file=sys.stderr)


def _cmd_keygen(args):
    doc = {"seed": args.seed if args.seed is not None else 1,
           "label": args.label}
    _write_out((json.dumps(doc, indent=1) + "\n").encode(), args.out)


def _cmd_forward(args):
    with open(args.config) as fh:
        cfg = json.load(fh)
    x = np.asarray(json.loads(args.input)["x"] if args.input.startswith("{")
                   else json.load(open(args.input))["x"], dtype=float)
    key = KeyMaterial(cfg.get("seed", 1), cfg.get("label", ""))
    kind = cfg["cef"]
    n = cfg.get("N", x.size)
    if kind == "svdcef":
        bank = make_rotation_bank(key, n, cfg.get("K", 8))
        out = svdcef_forward(bank, x, cfg.get("N_y", 1))
        values = out.values.tolist()
    elif kind == "iom1":
        values = iom1_forward_all(make_iom1_bank(key, n, cfg.get("K1", 8),
                                                 cfg.get("L")), x).tolist()
    elif kind == "iom2":
        values = iom2_forward_all(make_iom2_bank(key, n, cfg.get("K2", 8),
                                                 cfg.get("p")), x).tolist()
    elif kind == "hop":
        values = hop_forward(make_hop_spec(key, n, cfg.get("M", 2 * n),
                                           cfg.get("J")), x).tolist()
    elif kind == "urp":
        bank = make_urp_bank(key, n)
        values = np.concatenate([urp_forward(bank, x, k)
                                 for k in range(cfg.get("K", 1))]).tolist()
    elif kind in ("rp", "drp1", "drp2"):
        bank = bank_from_json({**cfg, "kind": kind,
                               "seed": cfg.get("seed", 1),
                               "label": cfg.get("label", "")})
        if kind == "rp":
            values = np.concatenate(
                [bank.matrices[i] @ x for i in range(bank.matrices.shape[0])]
            ).tolist()
        elif kind == "drp1":
            values = [drp1_forward(bank, x, i)
                      for i in range(bank.matrices.shape[0])]
        else:
            values = drp2_forward_all(bank, x).tolist()
    else:
        raise SystemExit(f"unknown cef {kind!r}")
    _write_out((json.dumps({"cef": kind, "y": values}) + "\n").encode(),
               args.out)


def _cmd_quantize(args):
    if args.build:
        n, levels, helper = (int(v) for v in args.build.split(","))
        doc = table_to_json(build_table(n, levels, helper))
        _write_out((json.dumps(doc) + "\n").encode(), args.out)
        return
    _run_experiment(args, "quantize")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="cefkit",
        description="Continuous encryption functions: forward maps, attacks, "
                    "quantization, and reproduction experiments.")
    parser.add_argument("--version", action="version",
                        version=f"cefkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_key = sub.add_parser("keygen", help="emit a key-material JSON document")
    p_key.add_argument("--seed", type=int, default=None)
    p_key.add_argument("--label", default="cefkit")
    p_key.add_argument("--out", default=None)

    p_fwd = sub.add_parser("forward", help="evaluate one CEF on an input vector")
    p_fwd.add_argument("--config", required=True,
                       help="JSON file: cef kind, dimensions, seed")
    p_fwd.add_argument("--input", required=True,
                       help="JSON file or inline JSON with field 'x'")
    p_fwd.add_argument("--out", default=None)

    for name, help_text in [
            ("attack", "run an attack experiment table"),
            ("stats", "run a statistics experiment table"),
            ("bench", "run the forward-cost bench table")]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--trials", type=int, default=None)
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--out", default=None)

    p_q = sub.add_parser("quantize",
                         help="build a quantizer table or run the BER experiment")
    p_q.add_argument("--build", default=None, metavar="N,LEVELS,HELPER",
                     help="emit the boundary table instead of an experiment")
    p_q.add_argument("--config", default=None)
    p_q.add_argument("--seed", type=int, default=None)
    p_q.add_argument("--trials", type=int, default=None)
    p_q.add_argument("--workers", type=int, default=None)
    p_q.add_argument("--format", choices=("csv", "json"), default="csv")
    p_q.add_argument("--out", default=None)

    args = parser.parse_args(argv)
    if args.command == "keygen":
        _cmd_keygen(args)
    elif args.command == "forward":
        _cmd_forward(args)
    elif args.command == "quantize":
        if not args.build and not args.config:
            raise SystemExit("quantize needs --build or --config")
        _cmd_quantize(args)
    else:
        _run_experiment(args, args.command)
    return 0


if __name__ == "__main__":
    sys.exit(main())
