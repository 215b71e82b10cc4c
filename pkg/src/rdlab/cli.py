"""Command-line entry point: ``rdlab <verb> --config cfg.json --out DIR``.

Exit codes: 0 success, 2 bad config, 3 resource budget exceeded,
4 invariant violated, 5 solver did not converge.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import experiments as ex
from .codes import BlockCode, goodness_report
from .exceptions import ConfigError, InvariantViolation, NotConverged, ResourceError

EXIT_CONFIG, EXIT_RESOURCE, EXIT_INVARIANT, EXIT_NOT_CONVERGED = 2, 3, 4, 5


def _config(args) -> ex.ExperimentConfig:
    if args.config is None:
        raise ConfigError("--config is required for this command")
    cfg = ex.load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.budget is not None:
        if args.budget < 1:
            raise ConfigError("--budget must be positive")
        cfg.budget = args.budget
    return cfg


def _out(args, cfg=None) -> Path:
    out = Path(args.out if args.out is not None else (cfg.output_dir if cfg else "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_table(out: Path, name: str, rows, fields_, kind: str, plot: bool):
    text = ex.rows_to_csv(rows, fields_, kind)
    (out / f"{name}.csv").write_text(text)
    if plot:
        k, parsed = ex.read_csv(text)
        (out / f"{name}.svg").write_text(ex.plot_rows(k, parsed))
    for r in rows:
        if str(r.get("status", "ok")) != "ok":
            print(f"warning: n={r.get('n', r.get('target_distortion'))}: {r['status']}",
                  file=sys.stderr)


def cmd_rd_curve(args):
    cfg = _config(args)
    rows, dump = ex.rd_curve_rows(cfg)
    out = _out(args, cfg)
    _write_table(out, "rd_curve", rows, ex.RD_FIELDS, "rd_curve", args.plot)
    (out / "backward_channels.json").write_text(json.dumps(dump, indent=1) + "\n")
    if any(r["status"] == "not_converged" for r in rows):
        raise NotConverged("some grid points did not converge; see rd_curve.csv")


def cmd_divergence_sweep(args):
    cfg = _config(args)
    rows = ex.divergence_rows(cfg, args.jobs)
    _write_table(_out(args, cfg), "divergence_sweep", rows, ex.DIVERGENCE_FIELDS, "divergence_sweep",
                 args.plot)


def cmd_channel_experiment(args):
    cfg = _config(args)
    rows = ex.channel_rows(cfg, args.jobs)
    _write_table(_out(args, cfg), "channel_experiment", rows, ex.CHANNEL_FIELDS, "channel_experiment",
                 args.plot)


def cmd_code_build(args):
    cfg = _config(args)
    if args.n is None:
        raise ConfigError("--n is required")
    rd = cfg.target()
    code = ex.build_code(cfg, rd, args.n)
    out = _out(args, cfg)
    path = out / f"code_n{args.n}.txt"
    path.write_text(code.to_text())
    print(path)


def cmd_code_inspect(args):
    try:
        code = BlockCode.from_text(Path(args.code).read_text())
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read code {args.code}: {exc}") from exc
    info = {"n": code.n, "M": code.M, "rate_nats": code.rate, "bijective": code.is_bijective,
            "x_alphabet": code.x_size, "y_alphabet": code.y_size}
    if args.config is not None:
        cfg = _config(args)
        rd = cfg.target()
        rep = goodness_report(code, rd.source, rd.measure, rd, budget=cfg.budget)
        info.update({"target_rate": rd.rate, "rate_gap": rep.rate_gap,
                     "expected_distortion": rep.expected_distortion,
                     "expected_tv_type_to_target": rep.expected_tv_to_target, "mode": rep.mode})
    print(json.dumps(info, indent=1, sort_keys=True))


def cmd_plot(args):
    text = Path(args.csv).read_text()
    kind, rows = ex.read_csv(text)
    target = Path(args.out) if args.out else Path(args.csv).with_suffix(".svg")
    try:
        target.write_text(ex.plot_rows(kind, rows))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    print(target)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rdlab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, jobs=False):
        sp.add_argument("--config", help="JSON experiment config")
        sp.add_argument("--out", help="output directory (default: config output_dir)")
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("--budget", type=int, help="override the enumeration budget")
        sp.add_argument("--plot", action="store_true", help="also write an SVG next to the CSV")
        if jobs:
            sp.add_argument("--jobs", type=int, default=1, help="worker processes")
        return sp

    common(sub.add_parser("rd-curve", help="tabulate R(D) with backward channels")) \
        .set_defaults(func=cmd_rd_curve)
    common(sub.add_parser("theorem2-sweep", aliases=["divergence-sweep"], help="normalized divergence vs blocklength"), True) \
        .set_defaults(func=cmd_divergence_sweep)
    common(sub.add_parser("theorem6-experiment", aliases=["channel-experiment"],
                          help="channel-code error probability vs blocklength"), True) \
        .set_defaults(func=cmd_channel_experiment)
    b = common(sub.add_parser("code-build", help="construct and save one block code"))
    b.add_argument("--n", type=int, help="blocklength")
    b.set_defaults(func=cmd_code_build)
    i = common(sub.add_parser("code-inspect", help="summarize a saved code"))
    i.add_argument("code", help="code file written by code-build")
    i.set_defaults(func=cmd_code_inspect)
    pl = sub.add_parser("plot", help="regenerate an SVG from a CSV")
    pl.add_argument("csv")
    pl.add_argument("--out")
    pl.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ResourceError as exc:
        print(f"resource error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except InvariantViolation as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except NotConverged as exc:
        print(f"not converged: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return 0


if __name__ == "__main__":
    sys.exit(main())
