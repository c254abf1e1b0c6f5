"""Command-line front end.

Exit codes: 0 success, 1 runtime fault (e.g. a path produced NaNs or a solver
failed to converge), 2 usage or config error.
"""
from __future__ import annotations

import argparse
import json
import sys
import time

from . import diagnostics
from .config import ConfigError, ExperimentConfig, load_config
from .kernels import verify_regularity
from .grid import make_uniform_grid
from .monte_carlo import (SCHEMES, SimulationFault, convergence_table, price,
                          table_to_csv, table_to_json)
from .payoffs import EuropeanCall
from .reference import (FourierInversionError, SolverError, european_call_reference,
                        expected_integrated_variance, variance_call_reference)

EXIT_OK, EXIT_FAULT, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _dump(doc: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(doc, indent=2, sort_keys=True)
    keys = sorted(doc)
    vals = [repr(doc[k]) if isinstance(doc[k], float) else str(doc[k]) for k in keys]
    return ",".join(keys) + "\n" + ",".join(vals) + "\n"


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["master_seed"] = args.seed
    if getattr(args, "workers", None) is not None:
        changes["worker_count"] = args.workers
    if getattr(args, "paths", None) is not None:
        changes["num_paths"] = args.paths
    if getattr(args, "scheme", None) is not None:
        changes["scheme"] = args.scheme
    if getattr(args, "n", None) is not None:
        changes["n"] = args.n
    try:
        mc = cfg.mc.replace(**changes) if changes else cfg.mc
    except ValueError as exc:
        raise ConfigError("mc", str(exc)) from None
    return ExperimentConfig(model=cfg.model, kernel=cfg.kernel, payoff=cfg.payoff, mc=mc,
                            damping=cfg.damping, riccati_steps=cfg.riccati_steps,
                            output=args.out or cfg.output)


def _reference_for(cfg: ExperimentConfig, instrument: str) -> dict:
    t0 = time.perf_counter()
    if instrument == "european_call":
        strike = cfg.payoff.strike if isinstance(cfg.payoff, EuropeanCall) else 1.0
        out = european_call_reference(cfg.model, cfg.kernel, strike, m=cfg.riccati_steps,
                                      damping=cfg.damping)
    elif instrument == "variance_swap":
        val = expected_integrated_variance(cfg.model, cfg.kernel)
        out = {"price": val, "tolerance": 1e-6}
    elif instrument == "variance_call":
        out = variance_call_reference(cfg.model, cfg.kernel, m=max(200, cfg.riccati_steps // 2),
                                      damping=cfg.damping)
    else:
        raise UsageError(f"unknown instrument {instrument!r}")
    out["instrument"] = instrument
    out["wall_time_seconds"] = time.perf_counter() - t0
    return out


def cmd_price(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    est = price(cfg.model, cfg.kernel, cfg.payoff, cfg.mc)
    doc = est.as_dict()
    doc.update(scheme=cfg.mc.scheme, n=cfg.mc.n, payoff=cfg.payoff.name)
    print(_dump(doc, cfg.output), end="" if cfg.output == "csv" else "\n")
    return EXIT_OK


def _parse_n_list(text: str) -> list[int]:
    try:
        vals = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"--n-list must be comma-separated integers, got {text!r}") from None
    if not vals or any(v < 1 for v in vals):
        raise UsageError("--n-list must hold at least one positive integer")
    return vals


def cmd_table(args) -> int:
    n_list = _parse_n_list(args.n_list)
    cfg = _apply_overrides(load_config(args.config), args)
    schemes = SCHEMES if args.scheme is None else (args.scheme,)
    mc = cfg.mc
    rows = convergence_table(cfg.model, cfg.kernel, cfg.payoff, n_list, mc.num_paths,
                             seed=mc.master_seed, schemes=schemes, worker_count=mc.worker_count,
                             exact_theta_drift=mc.exact_theta_drift,
                             clip_variance_in_X=mc.clip_variance_in_X)
    ref = None
    if args.reference:
        kind = cfg.payoff.name
        if kind in ("european_call", "variance_swap", "variance_call"):
            ref = _reference_for(cfg, kind)["price"]
    text = table_to_json(rows, ref) + "\n" if cfg.output == "json" else table_to_csv(rows, ref)
    print(text, end="")
    return EXIT_OK


def cmd_reference(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    out = _reference_for(cfg, args.instrument)
    print(_dump(out, cfg.output), end="" if cfg.output == "csv" else "\n")
    return EXIT_OK


def cmd_diagnose(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    mc = cfg.mc
    if args.check == "holder":
        n = args.n or 256
        rep = diagnostics.holder_scaling_report(mc.scheme, cfg.model, cfg.kernel, n,
                                                args.paths or 10_000, p=args.p,
                                                seed=mc.master_seed).as_dict()
    elif args.check == "invariants":
        rep = diagnostics.structural_invariant_sweep(mc.scheme, cfg.model, cfg.kernel,
                                                     args.n or 128, args.paths or 10_000,
                                                     seed=mc.master_seed).as_dict()
    else:
        rep = diagnostics.martingale_mean_check(cfg.model, cfg.kernel, args.n or 160,
                                                args.paths or 100_000,
                                                seed=mc.master_seed).as_dict()
    rep["check"] = args.check
    print(json.dumps(rep, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_validate_kernel(args) -> int:
    cfg = load_config(args.config)
    H = args.exponent if args.exponent is not None else cfg.kernel.hurst_exponent
    grid = make_uniform_grid(args.n or 64, cfg.model.T)
    rep = verify_regularity(cfg.kernel, grid, H).as_dict()
    print(json.dumps(rep, indent=2, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML experiment config (default: built-in parameter set)")
    common.add_argument("--seed", type=int, help="master seed (default 0)")
    common.add_argument("--workers", type=int, help="worker processes")
    common.add_argument("--out", choices=("csv", "json"), help="output format")

    parser = argparse.ArgumentParser(prog="rough-heston",
                                     description="Euler schemes and pricing for rough Heston")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("price", parents=[common], help="Monte-Carlo price for one config")
    p.add_argument("--scheme", choices=SCHEMES)
    p.add_argument("--n", type=int)
    p.add_argument("--paths", type=int)
    p.set_defaults(func=cmd_price)

    p = sub.add_parser("table", parents=[common], help="convergence table over n")
    p.add_argument("--n-list", required=True)
    p.add_argument("--scheme", choices=SCHEMES, help="restrict to one scheme")
    p.add_argument("--paths", type=int)
    p.add_argument("--reference", action="store_true", help="add the deterministic reference row")
    p.set_defaults(func=cmd_table, n=None)

    p = sub.add_parser("reference", parents=[common], help="deterministic reference value")
    p.add_argument("--instrument", required=True,
                   choices=("european_call", "variance_swap", "variance_call"))
    p.set_defaults(func=cmd_reference)

    p = sub.add_parser("diagnose", parents=[common], help="statistical property checks")
    p.add_argument("--check", required=True, choices=("holder", "invariants", "martingale"))
    p.add_argument("--scheme", choices=SCHEMES)
    p.add_argument("--n", type=int)
    p.add_argument("--paths", type=int)
    p.add_argument("--p", type=float, default=2.0)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("validate-kernel", parents=[common], help="check the kernel regularity bounds")
    p.add_argument("--exponent", type=float)
    p.add_argument("--n", type=int)
    p.set_defaults(func=cmd_validate_kernel)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SimulationFault as exc:
        print(f"fault: {exc} (fault_count={exc.fault_count})", file=sys.stderr)
        return EXIT_FAULT
    except (SolverError, FourierInversionError) as exc:
        print(f"fault: {exc}", file=sys.stderr)
        return EXIT_FAULT


if __name__ == "__main__":
    sys.exit(main())
