"""Command-line entry point.

Subcommands:
    sample      select a node set for one method and print it
    estimate    one-shot estimate from a measurement file
    evaluate    full Monte-Carlo sweep to CSV
    gradcheck   finite-difference audit of the analytic cost gradients
    props       numerical property suites (submodularity, convexity, limits)

Exit codes: 0 success, 2 infeasibility, 1 any other error.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import properties
from .costs import CostKind
from .estimator import build_state, estimate
from .exceptions import InfeasibleError, ObservabilityError
from .harness import (
    band_from_config,
    build_graph,
    build_instance,
    emit_results,
    emit_sweep_results,
    load_config,
    run_monte_carlo,
    run_robustness_sweep,
    select_set,
)
from .model import SamplingVector


def _parse_selected(text: str) -> list[int]:
    return [int(tok) for tok in text.replace(",", ";").split(";") if tok.strip()]


def _cmd_sample(args) -> int:
    config = load_config(args.config)
    graph = build_graph(config)
    instance = build_instance(config, graph)
    band = band_from_config(config.band, instance.n)
    q_pct = args.q_pct if args.q_pct is not None else config.q_percents[0]
    q = int(round(q_pct * instance.n / 100.0))
    selected = select_set(config, instance, CostKind(args.method), q, band)
    print(";".join(str(i) for i in selected))
    return 0


def _cmd_estimate(args) -> int:
    config = load_config(args.config)
    graph = build_graph(config)
    instance = build_instance(config, graph)
    y = np.loadtxt(args.y).reshape(-1)
    selected = _parse_selected(args.selected)
    d = SamplingVector.from_indices(selected, instance.n)
    state = build_state(instance, d)
    xhat = estimate(state, y)
    if args.output:
        np.savetxt(args.output, xhat)
    else:
        for v in xhat:
            print(f"{v:.17e}")
    return 0


def _cmd_evaluate(args) -> int:
    config = load_config(args.config)
    if config.robustness.get("kind") not in (None, "none"):
        emit_sweep_results(run_robustness_sweep(config), args.output)
    else:
        emit_results(run_monte_carlo(config), args.output)
    return 0


def _cmd_gradcheck(args) -> int:
    if args.config:
        config = load_config(args.config)
        instance = build_instance(config, build_graph(config))
    else:
        instance = properties.default_instance(n=args.n, seed=args.seed)
    rng = np.random.default_rng(args.seed)
    worst = 0.0
    for kind in (CostKind.BCRB, CostKind.WC_MSE, CostKind.BMSE, CostKind.WC_BMSE):
        err = properties.gradient_audit(instance, kind, rng, points=args.points,
                                        step=1e-5)
        worst = max(worst, err)
        print(f"{kind.value}: max relative error {err:.3e}")
    if worst > 1e-4:
        print("gradcheck FAILED (tolerance 1e-4)", file=sys.stderr)
        return 1
    return 0


def _cmd_props(args) -> int:
    if args.config:
        config = load_config(args.config)
        instance = build_instance(config, build_graph(config))
    else:
        instance = properties.default_instance(n=args.n, seed=args.seed)
    ok = True
    for name, passed, detail in properties.run_property_suites(instance, seed=args.seed):
        print(f"{name}: {'PASS' if passed else 'FAIL'} ({detail})")
        ok = ok and passed
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gsample",
                                     description="Sampling allocation for graph "
                                                 "signal recovery")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="select a node set for one method")
    p.add_argument("--config", required=True)
    p.add_argument("--method", required=True)
    p.add_argument("--q-pct", type=float, default=None)
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("estimate", help="one-shot estimate from a measurement file")
    p.add_argument("--config", required=True)
    p.add_argument("--y", required=True, help="measurement vector, one value per line")
    p.add_argument("--selected", required=True, help="sampled indices, e.g. '1;4;7'")
    p.add_argument("--output", default=None)
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("evaluate", help="full Monte-Carlo sweep to CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("gradcheck", help="finite-difference gradient audit")
    p.add_argument("--config", default=None)
    p.add_argument("--n", type=int, default=12)
    p.add_argument("--points", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_gradcheck)

    p = sub.add_parser("props", help="run numerical property suites")
    p.add_argument("--config", default=None)
    p.add_argument("--n", type=int, default=12)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_props)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InfeasibleError, ObservabilityError) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
