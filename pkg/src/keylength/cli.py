"""Command-line front end.

    keylength theory --nv 300 --dwr 10 --eps 0.01 --no 1
    keylength sweep --fig 3 --threads 4 --out fig3.csv

Exit codes: 0 success, 2 usage error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import sys

from .core import InvalidParameterError
from .harness import COMMANDS, FIGURES, ExperimentSpec, PointFailure, run, to_csv

EXIT_USAGE = 2
EXIT_NUMERICAL = 3

_BOOL_FLAGS = {"full", "timing", "asym", "verbose", "fixed_mu"}


def _real(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("grid")
    g.add_argument("--nv", type=int, nargs="+", help="host dimensions")
    g.add_argument("--dwr", type=_real, nargs="+", help="document-to-watermark ratios (dB)")
    g.add_argument("--eps", type=_real, nargs="+", help="tolerated symbol error rates")
    g.add_argument("--no", type=int, nargs="+", help="numbers of known-message observations")
    g.add_argument("--scheme", choices=("ss", "iss"), default="ss")
    g.add_argument("--gamma", type=_real, nargs="+", help="ISS host rejection values")
    g.add_argument("--wnr", type=_real, nargs="+", help="watermark-to-noise ratios (dB)")
    e = p.add_argument_group("estimators")
    e.add_argument("--trials", type=int, help="Monte Carlo trials N_2 (or SER trials)")
    e.add_argument("--n1", type=int, default=1, help="secret keys N_1")
    e.add_argument("--nt", type=int, help="contents per equivalence test / angle estimate")
    e.add_argument("--particles", type=int, default=80)
    e.add_argument("--mu", type=_real, default=0.3)
    e.add_argument("--moves", type=int, default=20, help="moves per splitting iteration")
    e.add_argument("--max-levels", type=int, default=200_000,
                   help="splitting iterations before giving up")
    e.add_argument("--fixed-mu", action="store_true", help="do not adapt the move strength")
    e.add_argument("--indicator", choices=("cone", "counting"), default="cone")
    e.add_argument("--score", choices=("geometric", "blackbox"), default="geometric")
    o = p.add_argument_group("run")
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--threads", type=int, default=1)
    o.add_argument("--out", help="CSV path; without it the CSV goes to stdout")
    o.add_argument("--seed-bits", type=int, help="clip key lengths to this many bits")
    o.add_argument("--full", action="store_true", help="large trial counts (N_2 = N_t = 10^6)")
    o.add_argument("--timing", action="store_true", help="fill the wall_time_ms column")
    o.add_argument("--config", help="key=value file; command-line flags take precedence")
    o.add_argument("--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="keylength",
                                     description="Effective key length of spread-spectrum watermarking.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    helps = {"theory": "closed-form key lengths", "mc": "plain Monte Carlo estimate",
             "rare-event": "adaptive splitting estimate", "angle": "equivalence-angle estimate",
             "ser": "symbol error rate under AWGN", "sweep": "figure-reproducing grids"}
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name])
        _common(p)
        if name == "theory":
            p.add_argument("--asym", action="store_true", help="n_v -> infinity limit")
        if name == "sweep":
            p.add_argument("--fig", type=int, required=True, choices=FIGURES)
    return parser


def config_tokens(path: str) -> list[str]:
    """Turn a key=value file into argv tokens."""
    tokens = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InvalidParameterError(f"{path}:{lineno}: expected key=value")
            key, value = (t.strip() for t in line.split("=", 1))
            flag = "--" + key.replace("_", "-")
            if key in _BOOL_FLAGS:
                if value.lower() in ("1", "true", "yes", "on"):
                    tokens.append(flag)
                continue
            tokens.append(flag)
            tokens.extend(value.replace(",", " ").split())
    return tokens


def _expand_config(argv: list[str]) -> list[str]:
    """Insert config-file tokens right after the subcommand so later flags win."""
    probe = argparse.ArgumentParser(add_help=False)
    probe.add_argument("--config")
    known, _ = probe.parse_known_args(argv[1:])
    if not known.config or not argv:
        return argv
    return argv[:1] + config_tokens(known.config) + argv[1:]


def spec_from_args(args: argparse.Namespace) -> ExperimentSpec:
    kw = dict(command=args.command, scheme=args.scheme, n1=args.n1, trials=args.trials,
              n_t=args.nt, n_t_blackbox=args.nt, particles=args.particles, mu=args.mu,
              moves=args.moves, max_levels=args.max_levels, fixed_mu=args.fixed_mu,
              indicator=args.indicator, score=args.score, seed=args.seed,
              threads=args.threads, out=args.out, seed_bits=args.seed_bits, full=args.full,
              timing=args.timing, asymptote=getattr(args, "asym", False),
              fig=getattr(args, "fig", None))
    for axis, name in (("n_v", "nv"), ("dwr_db", "dwr"), ("epsilon", "eps"), ("n_o", "no"),
                       ("gamma", "gamma"), ("wnr_db", "wnr")):
        value = getattr(args, name)
        if value is not None:
            kw[axis] = value
    return ExperimentSpec(**kw)


def _summary(rows: list[list[str]]) -> str:
    lines = []
    for r in rows:
        rec = dict(zip(("scheme", "n_v", "dwr_db", "epsilon", "n_o", "gamma", "wnr_db", "method",
                        "p_hat", "bits", "std_error"), r))
        where = " ".join(f"{k}={v}" for k, v in rec.items()
                         if k in ("scheme", "n_v", "dwr_db", "epsilon", "n_o", "gamma", "wnr_db")
                         and v != "")
        value = rec["bits"]
        try:
            value = f"{float(value):.4f}"
        except ValueError:
            pass
        lines.append(f"{rec['method']:<22} {where}  bits={value}  p_hat={rec['p_hat']}")
    return "\n".join(lines)


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _expand_config(argv)
    except (OSError, InvalidParameterError) as exc:
        parser.print_usage(sys.stderr)
        print(f"keylength: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        spec = spec_from_args(args)
        if spec.out is not None:
            open(spec.out, "a", encoding="utf-8").close()
        _, rows = run(spec)
    except PointFailure as exc:
        print(f"keylength: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (InvalidParameterError, OSError) as exc:
        parser.print_usage(sys.stderr)
        print(f"keylength: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    text = to_csv(rows)
    if spec.out is None:
        sys.stdout.write(text)
    else:
        with open(spec.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        print(_summary(rows))
        print(f"wrote {len(rows)} rows to {spec.out}")
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
