"""Command-line entry point: ``esorl <subcommand> ...`` or ``python -m esorl``.

Exit codes: 0 success, 1 invalid input or configuration, 2 the simulation
diverged, 3 a monitored threshold was not met.
"""
from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

from . import config as cfgmod
from .errors import ConfigError
from .learner import gain_condition_report
from .observer import check_saturation_bounds
from .oracle import example1_analytic, example1_unknown_basis_weights, example2_analytic, verify_oracles, weight_error
from .sim import write_trace, write_weights

EXIT_OK, EXIT_INVALID, EXIT_DIVERGED, EXIT_THRESHOLD = 0, 1, 2, 3
A4_THRESHOLD = 1e-3


class _Parser(argparse.ArgumentParser):
    # usage errors share the validation exit code; 2 is reserved for divergence
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def reference_weights(cfg: dict):
    """Ideal weights for the configured plant and basis, or ``None`` if unknown."""
    key = (cfg["plant"]["name"], cfg["learner"]["basis"])
    if key == ("example1", "quad2"):
        return example1_analytic().theta_star
    if key == ("example1", "poly7"):
        return example1_unknown_basis_weights()
    if key == ("example2", "quad3"):
        params = cfg["plant"].get("params", {})
        if all(params.get(k, v) == v for k, v in (("m", 1.0), ("b", 1.0), ("tau", 0.1))):
            return example2_analytic().theta_star
    return None


def _echo(cfg: dict, out_dir: Path | None = None):
    text = cfgmod.dump(cfg)
    print("# resolved config")
    print(text, end="")
    if out_dir is not None:
        (out_dir / "config.yaml").write_text(text)


def _prepare(args):
    raw = cfgmod.load(args.config)
    cfg = cfgmod.resolve(raw, seed=args.seed)
    return cfg


def _run(cfg: dict, out_dir: Path | None, quiet: bool = False):
    """Build, validate, run and persist one experiment.  Returns ``(result, summary)``."""
    exp = cfgmod.build(cfg)
    for msg in check_saturation_bounds(exp.observer, exp.model, exp.plant.x_box):
        print(f"warning: {msg}", file=sys.stderr)
    res = exp.run()
    summary = dict(res.summary)
    wall = summary.pop("wall_time_s", None)
    ref = reference_weights(cfg)
    if ref is not None and "final_theta_c" in summary:
        mx, l2 = weight_error(summary["final_theta_c"], ref)
        summary["theta_star"] = ref.tolist()
        summary["weight_error_max"] = mx
        summary["weight_error_l2"] = l2
    if "inf_a4_c" in summary:
        report = gain_condition_report(
            exp.learner.gains,
            ref if ref is not None else summary["final_theta_c"],
            {"sigma0": summary["min_gamma_eig"], "c": summary["inf_a4_c"],
             "sup_G_t": summary["sup_G_t"], "max_G_i": summary["max_G_i"]},
        )
        summary["gain_conditions"] = {k: bool(v) for k, v in report.conditions.items()}
        summary["gain_conditions_evaluable"] = report.evaluable
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        write_trace(res.trace, out_dir / "trace.csv")
        write_weights(res.trace, out_dir / "weights.csv")
        (out_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    if not quiet:
        _print_summary(summary)
        if wall is not None:
            print(f"wall time {wall:.1f} s", file=sys.stderr)
    return res, summary


def _print_summary(s: dict):
    keys = ("t_final", "final_x_norm", "final_theta_c", "weight_error_max", "inf_a4_c", "mean_a4_c",
            "max_gamma_norm", "min_gamma_eig", "steady_state_est_error")
    for k in keys:
        if k in s:
            print(f"{k}: {s[k]}")
    if s.get("failed"):
        print(f"run diverged: {s.get('error')}")


def cmd_simulate(args) -> int:
    cfg = _prepare(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _echo(cfg, out)
    res, summary = _run(cfg, out)
    if args.plots and len(res.trace):
        from .svgplot import plot_trace

        plot_trace(out / "trace.csv", out, out / "weights.csv", refs=summary.get("theta_star", ()))
    return EXIT_DIVERGED if res.failed else EXIT_OK


def cmd_check_a4(args) -> int:
    cfg = _prepare(args)
    out = Path(args.out) if args.out else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    _echo(cfg, out)
    res, summary = _run(cfg, out, quiet=True)
    if res.failed:
        print(f"run diverged: {res.error}")
        return EXIT_DIVERGED
    c_min, c_mean = summary["inf_a4_c"], summary["mean_a4_c"]
    ok = c_min > args.threshold
    print(f"a4_c min {c_min:.6e}  mean {c_mean:.6e}  threshold {args.threshold:.3e}  "
          f"{'holds' if ok else 'fails'}")
    return EXIT_OK if ok else EXIT_THRESHOLD


def cmd_verify_oracle(args) -> int:
    print("# resolved config")
    print(f"samples: {args.samples}\nseed: {args.seed or 0}")
    tamper = None
    if args.tamper_theta:
        tamper = [float(v) for v in args.tamper_theta.split(",")]
    rep = verify_oracles(samples=args.samples, seed=args.seed or 0, theta_override=tamper)
    for line in rep.lines():
        print(line)
    print("oracle checks " + ("pass" if rep.ok else "FAIL"))
    return EXIT_OK if rep.ok else EXIT_THRESHOLD


def _grid_sizes(text: str) -> list[int]:
    try:
        sizes = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"--grid-sizes must be comma-separated integers, got {text!r}") from None
    if not sizes:
        raise ConfigError("--grid-sizes needs at least one size")
    return sizes


def cmd_sweep_grid(args) -> int:
    sizes = _grid_sizes(args.grid_sizes)
    cfg = _prepare(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _echo(cfg, out)
    rows = []
    code = EXIT_OK
    for a in sizes:
        sub = cfgmod.with_grid(cfg, a)
        d = out / f"a{a}"
        d.mkdir(parents=True, exist_ok=True)
        (d / "config.yaml").write_text(cfgmod.dump(sub))
        res, s = _run(sub, d, quiet=True)
        if res.failed:
            code = EXIT_DIVERGED
        rows.append({"a": a, "failed": bool(res.failed), "weight_error_max": s.get("weight_error_max"),
                     "weight_error_l2": s.get("weight_error_l2"), "inf_a4_c": s.get("inf_a4_c"),
                     "final_x_norm": s.get("final_x_norm")})
    (out / "sweep.json").write_text(json.dumps(rows, indent=2) + "\n")
    print(f"{'a':>3} {'weight err (max)':>17} {'inf a4_c':>12} {'|x(T)|':>10}")
    for r in rows:
        we = r["weight_error_max"]
        print(f"{r['a']:>3} {('n/a' if we is None else f'{we:.4g}'):>17} "
              f"{r['inf_a4_c'] if r['inf_a4_c'] is None else format(r['inf_a4_c'], '.4e'):>12} "
              f"{r['final_x_norm'] if r['final_x_norm'] is None else format(r['final_x_norm'], '.4g'):>10}")
    return code


def cmd_plot(args) -> int:
    from .svgplot import plot_trace

    trace = Path(args.trace)
    print("# resolved config")
    print(f"trace: {trace}\nout: {args.out}")
    if not trace.exists():
        raise ConfigError(f"no trace file at {trace}")
    weights = Path(args.weights) if args.weights else trace.with_name("weights.csv")
    refs = ()
    if args.refs:
        refs = [float(v) for v in args.refs.split(",")]
    else:
        summ = trace.with_name("summary.json")
        if summ.exists():
            refs = json.loads(summ.read_text()).get("theta_star", ())
    try:
        files = plot_trace(trace, args.out, weights, refs=refs)
    except ValueError as exc:
        print(str(exc))
        return EXIT_INVALID
    for f in files:
        print(f"wrote {f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="esorl", description="Observer-based learning controller experiments.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, out_required):
        sp.add_argument("--config", required=True,
                        help="YAML config path or bundled name (" + ", ".join(cfgmod.BUNDLED) + ")")
        sp.add_argument("--out", required=out_required, help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="seed for random initial weights")

    s = sub.add_parser("simulate", help="run one experiment and write trace, weights and summary")
    common(s, True)
    s.add_argument("--plots", action="store_true", help="also write SVG plots")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("check-a4", help="run and test the grid rank metric against a threshold")
    common(s, False)
    s.add_argument("--threshold", type=float, default=A4_THRESHOLD)
    s.set_defaults(func=cmd_check_a4)

    s = sub.add_parser("verify-oracle", help="check the reference solutions")
    s.add_argument("--samples", type=int, default=1000)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--tamper-theta", help=argparse.SUPPRESS)
    s.set_defaults(func=cmd_verify_oracle)

    s = sub.add_parser("sweep-grid", help="repeat a run for several extrapolation grid sizes")
    common(s, True)
    s.add_argument("--grid-sizes", required=True, help="comma-separated sizes, e.g. 9,5,3,2")
    s.set_defaults(func=cmd_sweep_grid)

    s = sub.add_parser("plot", help="write SVG plots of a recorded trace")
    s.add_argument("--trace", required=True)
    s.add_argument("--weights", default=None)
    s.add_argument("--out", required=True)
    s.add_argument("--refs", default=None, help="comma-separated reference weights")
    s.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
