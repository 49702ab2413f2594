"""Command-line front end: ``fastcq {weights,bench,fode,rd}``.

Every subcommand accepts ``--config FILE`` with flat ``key = value`` lines
(keys are flag names without dashes, ``-`` or ``_`` separated); flags given
on the command line take precedence. Each run writes ``manifest.json`` into
``--out`` with all effective parameters and the library version.

Exit codes: 0 on success, 2 on invalid input, 1 on a runtime failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Sequence

import numpy as np

from fastcq import __version__
from fastcq.errors import FastCQError

__all__ = ["main", "read_config"]

GF_CHOICES = [f"fbdf{p}" for p in range(1, 7)] + [f"gngf{p}" for p in range(1, 7)] + ["ftrap"]
ENGINE_CHOICES = ["direct", "talbot", "realline"]


class ValidationError(ValueError):
    """Invalid command-line or configuration input."""


def read_config(path: str | Path) -> dict[str, str]:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    config = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        config[key.replace("-", "_")] = value
    return config


def _int_list(text: str) -> list[int]:
    return [int(float(s)) for s in text.split(",") if s.strip()]


def _float_list(text: str) -> list[float]:
    return [float(s) for s in text.split(",") if s.strip()]


def _write_manifest(out: Path, command: str, args: argparse.Namespace, extra=None) -> None:
    params = {k: v for k, v in vars(args).items() if k not in ("func", "config")}
    manifest = {"command": command, "version": __version__, "parameters": params}
    if extra:
        manifest.update(extra)
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))


def _emit(text: str, out: Path, name: str) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text)
    sys.stdout.write(text if text.endswith("\n") else text + "\n")


# {{{ weights


def cmd_weights(args: argparse.Namespace) -> int:
    from fastcq.realline import PhiIntegrand, build_rule, rule_weights
    from fastcq.talbot import fast_weight_talbot, level_time, talbot_nodes
    from fastcq.weights import GeneratingFunction, convolution_weights

    if args.n_max <= args.n0:
        raise ValidationError("--n-max must exceed --n0")
    if args.Q < 2 or args.talbot_N < 1 or args.B < 2:
        raise ValidationError("need Q >= 2, talbot-N >= 1 and B >= 2")
    gf = GeneratingFunction.parse(args.gf)
    table = convolution_weights(gf, args.alpha, args.sigma, args.tau, args.n_max)
    n = np.arange(args.n0, args.n_max + 1)
    exact = table.weights[n]

    columns = [("exact", exact)]
    rule = None
    if gf.kind in ("gngf", "ftrap") or gf.name == "fbdf1":
        rule = build_rule(PhiIntegrand(gf, args.alpha, args.tau), args.n0, args.n_max, args.Q)
        fast2 = rule_weights(rule, args.alpha, args.sigma, args.tau, n)
        columns += [("fast2", fast2), ("fast2_relerr", None)]
    elif not args.talbot_N:
        raise ValidationError(f"{gf.name} has no real-line form; request --talbot-N")

    if args.talbot_N:
        fast1 = np.empty_like(exact)
        # lag n belongs to the first level whose range reaches it
        level = np.ones_like(n)
        while np.any(n > args.n0 + 2 * args.B ** level - 2):
            level += n > args.n0 + 2 * args.B ** level - 2
        for lvl in np.unique(level):
            mask = level == lvl
            contour = talbot_nodes(args.talbot_N, level_time(int(lvl), args.B, args.n0, args.tau))
            fast1[mask] = fast_weight_talbot(
                n[mask], contour, gf, args.alpha, args.sigma, args.tau
            )
        columns += [("fast1", fast1), ("fast1_relerr", None)]

    with np.errstate(divide="ignore", invalid="ignore"):
        data = []
        for name, col in columns:
            if col is None:
                col = np.abs(data[-1] - exact) / np.abs(exact)
            data.append(col)
    lines = [",".join(["n"] + [c[0] for c in columns])]
    for i, k in enumerate(n.tolist()):
        lines.append(",".join([str(k)] + [repr(float(c[i])) for c in data]))
    out = Path(args.out)
    _emit("\n".join(lines) + "\n", out, "weights.csv")
    summary = {
        name: float(np.nanmax(col)) for (name, _), col in zip(columns, data) if name.endswith("relerr")
    }
    extra = {"max_relerr": summary}
    if rule is not None:
        extra["x_range"] = [rule.x_min, rule.x_max]
    _write_manifest(out, "weights", args, extra)
    return 0


# }}}


# {{{ bench


def cmd_bench(args: argparse.Namespace) -> int:
    from fastcq.bench import bench
    from fastcq.weights import GeneratingFunction

    sizes = _int_list(args.sizes)
    if not sizes or any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ValidationError("--sizes must be a strictly increasing list")
    engines = [e.strip() for e in args.engines.split(",") if e.strip()]
    bad = set(engines) - set(ENGINE_CHOICES)
    if bad:
        raise ValidationError(f"unknown engines {sorted(bad)}")
    report = bench(
        sizes,
        engines,
        alpha=args.alpha,
        sigma=args.sigma,
        tau=args.tau,
        gf=GeneratingFunction.parse(args.gf),
        Q=args.Q,
        N=args.talbot_N,
        B=args.B,
        n0=args.n0,
        reps=args.reps,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report.to_csv(out / "bench.csv")
    print(report.summary())
    slopes = {k: v for k, v in report.slopes().items() if math.isfinite(v)}
    _write_manifest(out, "bench", args, {"slopes": slopes})
    return 0


# }}}


# {{{ fode


def _fode_column(params: dict) -> list[tuple[float, float, float]]:
    from fastcq.fode import FodeProblem, convergence_table, linear_reference
    from fastcq.weights import GeneratingFunction

    alpha, sigma = params["alpha"], params["sigma"]

    def reference(t):
        return linear_reference(alpha, sigma, t)

    def make(tau):
        return FodeProblem(
            alpha=alpha,
            sigma=sigma,
            T=params["T"],
            tau=tau,
            m=params["m"],
            gf=GeneratingFunction.parse(params["gf"]),
            engine=params["engine"],
            Q=params["Q"],
            N=params["talbot_N"],
            B=params["B"],
            n0=params["n0"],
            anchor=params["anchor"],
            startup=params["startup"],
            exact=reference if params["startup"] == "exact" else None,
        )

    return convergence_table(make, params["taus"], reference, at_end=params["at_end"])


def _format_table(taus, ms, columns) -> str:
    head = f"{'tau':>10}" + "".join(f"{f'm={m}':>13}{'order':>8}" for m in ms)
    lines = [head]
    for i, tau in enumerate(taus):
        k = round(-math.log2(tau))
        label = f"2^-{k}" if math.isclose(tau, 2.0**-k) else f"{tau:.4g}"
        row = f"{label:>10}"
        for col in columns:
            _, err, order = col[i]
            row += f"{err:>13.4e}" + (f"{order:>8.4f}" if math.isfinite(order) else f"{'':>8}")
        lines.append(row)
    return "\n".join(lines)


def cmd_fode(args: argparse.Namespace) -> int:
    ms = _int_list(args.m)
    if not ms or min(ms) < 0:
        raise ValidationError("--m must be a list of non-negative integers")
    if args.halvings < 1:
        raise ValidationError("--halvings must be at least 1")
    taus = [args.tau / 2**k for k in range(args.halvings)]
    # validate once before fanning out
    base = {k: v for k, v in vars(args).items() if k not in ("func", "config")}
    base.update(taus=taus)
    from fastcq.fode import FodeProblem
    from fastcq.weights import GeneratingFunction

    FodeProblem(
        alpha=args.alpha,
        sigma=args.sigma,
        T=args.T,
        tau=taus[-1],
        m=max(ms),
        gf=GeneratingFunction.parse(args.gf),
        engine=args.engine,
        anchor=args.anchor,
    )
    jobs = [dict(base, m=m) for m in ms]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            columns = list(pool.map(_fode_column, jobs))
    else:
        columns = [_fode_column(j) for j in jobs]

    out = Path(args.out)
    lines = ["tau,m,error,order"]
    for m, col in zip(ms, columns):
        for tau, err, order in col:
            lines.append(f"{float(tau)!r},{m},{float(err)!r},{float(order)!r}")
    out.mkdir(parents=True, exist_ok=True)
    (out / "fode.csv").write_text("\n".join(lines) + "\n")
    _emit(_format_table(taus, ms, columns) + "\n", out, "fode.txt")
    _write_manifest(out, "fode", args, {"taus": taus})
    return 0


# }}}


# {{{ rd


def cmd_rd(args: argparse.Namespace) -> int:
    from fastcq.reaction_diffusion import InitialCondition, get_kinetics, preset, run
    from fastcq.weights import GeneratingFunction

    overrides = {}
    for name in ("alpha1", "alpha2", "d", "kappa", "kappa1", "kappa2", "D", "cells", "tau", "T"):
        value = getattr(args, name)
        if value is not None:
            overrides[name] = value
    if args.kinetics is not None:
        overrides["kinetics"] = get_kinetics(args.kinetics)
    overrides["ic"] = InitialCondition(args.ic, args.epsilon, args.q, args.seed)
    overrides.update(
        engine=args.engine,
        Q=args.Q,
        N=args.talbot_N,
        B=args.B,
        n0=args.n0,
        gf=GeneratingFunction.parse(args.gf),
    )
    problem = preset(args.preset, **overrides)
    save_times = _float_list(args.save_times) if args.save_times else None
    history = run(problem, args.save_stride, save_times)
    var = history.variance("u")
    history.write(
        args.out,
        {
            "command": "rd",
            "version": __version__,
            "arguments": {k: v for k, v in vars(args).items() if k not in ("func", "config")},
        },
    )
    print(f"preset={args.preset} steps={problem.steps} snapshots={len(history.t)}")
    print(f"var(u): t={history.t[0]:g} {var[0]:.4e}  t={history.t[-1]:g} {var[-1]:.4e}")
    return 0


# }}}


# {{{ parser


def _common(p: argparse.ArgumentParser, *, alpha=True) -> None:
    p.add_argument("--config", help="flat 'key = value' file; flags take precedence")
    if alpha:
        p.add_argument("--alpha", type=float, default=0.5)
        p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--gf", choices=GF_CHOICES, default="gngf2")
    p.add_argument("--Q", type=int, default=256, help="real-line quadrature points")
    p.add_argument("--talbot-N", type=int, default=64, help="contour points per level")
    p.add_argument("--B", type=int, default=5, help="block growth base")
    p.add_argument("--n0", type=int, default=50, help="exact local window")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fastcq", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("weights", help="exact weights and their fast approximations")
    _common(p)
    p.add_argument("--tau", type=float, default=0.01)
    p.add_argument("--n-max", type=int, default=10_000)
    p.set_defaults(func=cmd_weights)

    p = sub.add_parser("bench", help="time the convolution engines")
    _common(p)
    p.set_defaults(Q=140, talbot_N=20)
    p.add_argument("--tau", type=float, default=0.01)
    p.add_argument("--sizes", default="1000,10000,100000")
    p.add_argument("--engines", default="direct,realline,talbot")
    p.add_argument("--reps", type=int, default=None, help="repetitions (default: 3 below 1e4)")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("fode", help="convergence table for the linear test problem")
    _common(p)
    p.add_argument("--tau", type=float, default=2.0**-5, help="largest step")
    p.add_argument("--halvings", type=int, default=5, help="number of step sizes")
    p.add_argument("--T", type=float, default=10.0)
    p.add_argument("--m", default="0,1,2,3", help="correction term counts")
    p.add_argument("--engine", choices=ENGINE_CHOICES, default="realline")
    p.add_argument("--anchor", choices=["constant", "tempered"], default="constant")
    p.add_argument("--startup", choices=["fine", "exact"], default="fine")
    p.add_argument("--at-end", action="store_true", help="error at T instead of the maximum")
    p.set_defaults(func=cmd_fode)

    p = sub.add_parser("rd", help="time-fractional reaction-diffusion run")
    _common(p, alpha=False)
    p.add_argument("--preset", default="fig8b")
    p.add_argument("--kinetics", choices=["brusselator", "gierer-meinhardt"], default=None)
    p.add_argument("--alpha1", type=float, default=None)
    p.add_argument("--alpha2", type=float, default=None)
    p.add_argument("--d", type=float, default=None)
    p.add_argument("--kappa", type=float, default=None)
    p.add_argument("--kappa1", type=float, default=None)
    p.add_argument("--kappa2", type=float, default=None)
    p.add_argument("--D", type=float, default=None, help="domain length")
    p.add_argument("--cells", type=int, default=None)
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--T", type=float, default=None)
    p.add_argument("--ic", choices=["random", "long-wave", "short-wave"], default="random")
    p.add_argument("--epsilon", type=float, default=0.01)
    p.add_argument("--q", type=float, default=None, help="wavenumber of sinusoidal data")
    p.add_argument("--engine", choices=ENGINE_CHOICES, default="realline")
    p.add_argument("--save-stride", type=int, default=None)
    p.add_argument("--save-times", default=None, help="comma-separated output times")
    p.set_defaults(func=cmd_rd)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: Sequence[str]) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("command", nargs="?")
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config or not known.command:
        return
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    target = sub.choices.get(known.command)
    if target is None:
        return
    config = read_config(known.config)
    dests = {a.dest for a in target._actions}
    unknown = sorted(set(config) - dests)
    if unknown:
        raise ValidationError(f"unknown configuration keys {unknown}")
    for action in target._actions:
        if action.dest in config and isinstance(action, argparse._StoreTrueAction):
            config[action.dest] = config[action.dest].lower() in ("1", "true", "yes", "on")
    # string defaults are converted by argparse like command-line values
    target.set_defaults(**config)


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
    except (ValidationError, OSError) as exc:
        print(f"fastcq: error: {exc}", file=sys.stderr)
        return 2
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ArithmeticError, RuntimeError) as exc:
        print(f"fastcq: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        parser.print_usage(sys.stderr)
        print(f"fastcq: error: {exc}", file=sys.stderr)
        return 2
    except FastCQError as exc:
        print(f"fastcq: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


# }}}


if __name__ == "__main__":
    sys.exit(main())
