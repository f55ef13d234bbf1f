"""Command-line front end: ``projsde <subcommand> [options]``.

Subcommands
-----------
convergence   Monte-Carlo mean-square errors and fitted orders.
drift         single path with invariant errors per step.
path          single path export (same CSV columns as ``drift``).
list-models   bundled models and their parameters.
selftest      structural property checks.

Exit codes are 0 on success, 1 for configuration errors (including bad
flags) and 2 for numerical failures.
"""

from __future__ import annotations

import argparse
import sys

from .core import ConfigurationError, NumericalError, UnsupportedModelError
from .harness import StudyConfig, StudyError, run_convergence, run_drift
from .models import MODELS, build_model
from .noise import TruncationConfig
from .projection import DIRECTIONS, ProjectionConfig
from .report import ReportIOError, export_report

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2

DRIFT_DEFAULTS = {"kubo": (200.0, 0.02), "pendulum": (100.0, 0.01), "lotka": (200.0, 0.01)}


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that reports usage errors as exceptions instead of exit(2)."""

    def error(self, message):
        raise ConfigurationError(f"{self.prog}: {message}\n{self.format_usage()}")


def _floats(text: str) -> tuple:
    try:
        return tuple(float(_power(v)) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated reals, got {text!r}")


def _power(v: str) -> float:
    # accept 2^-5 as well as plain reals
    v = v.strip()
    if "^" in v:
        base, exp = v.split("^")
        return float(base) ** float(exp)
    return float(v)


def _real(text: str) -> float:
    try:
        return _power(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a real number, got {text!r}")


def _params(text: str) -> dict:
    out = {}
    for item in filter(None, (p.strip() for p in text.split(","))):
        key, sep, val = item.partition("=")
        if not sep:
            raise argparse.ArgumentTypeError(f"parameter {item!r} is not of the form name=value")
        try:
            out[key.strip()] = float(val)
        except ValueError:
            raise argparse.ArgumentTypeError(f"parameter {key!r} needs a real value")
    return out


def _common(p: argparse.ArgumentParser):
    p.add_argument("--model", default="kubo", help="kubo | pendulum | lotka")
    p.add_argument("--params", type=_params, default={}, help="e.g. a=1,sigma=1")
    p.add_argument("--x0", type=_floats, default=None, help="comma-separated initial state")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--t-end", type=_real, default=None, help="final time T")
    p.add_argument("--truncation-k", type=int, default=6)
    p.add_argument("--no-truncation", action="store_true")
    p.add_argument("--projection-direction", choices=DIRECTIONS, default="xhat")
    p.add_argument("--newton-tol", type=float, default=1e-12)
    p.add_argument("--newton-max-iter", type=int, default=25)
    p.add_argument("--out", default=None, help="output file (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="projsde", description="Projection methods for SDEs with invariants.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    conv = sub.add_parser("convergence", help="mean-square convergence study")
    _common(conv)
    conv.add_argument("--methods", default=None,
                      help="comma list, P suffix = projected (default: model's table)")
    conv.add_argument("--h-levels", type=_floats, default=None, help="e.g. 2^-3,2^-4,2^-5")
    conv.add_argument("--h-ref", type=_real, default=2.0 ** -14)
    conv.add_argument("--paths", type=int, default=10000)
    conv.add_argument("--workers", type=int, default=1)
    conv.add_argument("--block-size", type=int, default=500)

    for name, text in (("drift", "invariant errors along one path"),
                       ("path", "export one sample path")):
        p = sub.add_parser(name, help=text)
        _common(p)
        p.add_argument("--method", default="eulerP", help="one method, P suffix = projected")
        p.add_argument("--h", type=_real, default=None, help="step size")

    sub.add_parser("list-models", help="list bundled models")
    sub.add_parser("selftest", help="run structural property checks")
    return parser


def _truncation(args) -> TruncationConfig:
    return TruncationConfig(k=args.truncation_k, enabled=not args.no_truncation)


def _projection(args) -> ProjectionConfig:
    return ProjectionConfig(direction=args.projection_direction, newton_tol=args.newton_tol,
                            newton_max_iter=args.newton_max_iter)


def _cmd_convergence(args) -> int:
    build_model(args.model, **args.params)  # validate early
    cfg = StudyConfig(
        model=args.model, params=args.params,
        methods=tuple(m for m in (args.methods or "").split(",") if m.strip()),
        T=args.t_end if args.t_end is not None else 1.0,
        h_levels=args.h_levels or (), h_ref=args.h_ref, paths=args.paths, seed=args.seed,
        x0=args.x0, truncation=_truncation(args), projection=_projection(args),
        workers=args.workers, block_size=args.block_size,
    )
    report = run_convergence(cfg)
    text = export_report(report, args.format, args.out)
    if args.out is None:
        sys.stdout.write(text)
    out = sys.stderr if args.out is None else sys.stdout
    print(f"{'method':<10}" + "".join(f"{h:>11.3e}" for h in report.h_levels) + "   order",
          file=out)
    for label in report.methods:
        order = report.orders.get(label, (float("nan"),))[0]
        print(f"{label:<10}" + "".join(f"{e:>11.3e}" for e in report.errors[label])
              + f"{order:>8.3f}", file=out)
    return EXIT_OK


def _cmd_single(args) -> int:
    model = build_model(args.model, **args.params)
    T_def, h_def = DRIFT_DEFAULTS.get(args.model, (1.0, 0.01))
    T = args.t_end if args.t_end is not None else T_def
    h = args.h if args.h is not None else h_def
    report = run_drift(model, args.method, h, T, seed=args.seed, x0=args.x0,
                       pcfg=_projection(args), truncation=_truncation(args))
    text = export_report(report, args.format, args.out)
    if args.out is None:
        sys.stdout.write(text)
    out = sys.stderr if args.out is None else sys.stdout
    print(f"{report.method}: {len(report.times) - 1} steps of h={h:g}, "
          f"max combined invariant error {report.max_error:.3e}, "
          f"final state {report.states[-1].tolist()}", file=out)
    return EXIT_OK


def _cmd_list(args) -> int:
    for name, (_, desc) in MODELS.items():
        print(f"{name:<10}{desc}")
    return EXIT_OK


def _cmd_selftest(args) -> int:
    from .checks import run_all

    results = run_all()
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<42} {r.value:.2e} (tol {r.tol:.0e})")
    return EXIT_OK if all(r.passed for r in results) else EXIT_NUMERIC


COMMANDS = {"convergence": _cmd_convergence, "drift": _cmd_single, "path": _cmd_single,
            "list-models": _cmd_list, "selftest": _cmd_selftest}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except (ConfigurationError, UnsupportedModelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (StudyError, NumericalError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ReportIOError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
