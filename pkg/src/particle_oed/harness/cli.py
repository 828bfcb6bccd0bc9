"""``particle-oed`` command line.

Exit codes: 0 on success, 1 on a configuration or input error, 2 when the
numerics abort (singular matrix, non-finite state); the message on stderr
names the outer iteration.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from ..errors import ConfigError, OEDError
from .config import RunSpec, _floats
from .histogram import histogram
from .runner import compare_sampling, fmt, read_ensemble, run_experiment, write_histogram

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2


def _parser():
    p = argparse.ArgumentParser(prog="particle-oed", description="Particle-flow optimal experimental design.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run the design flow described by a spec file")
    r.add_argument("spec")

    b = sub.add_parser("benchmark", help="run the flow with sigma pinned to the ground truth")
    b.add_argument("spec")

    c = sub.add_parser("compare", help="inner reconstruction under a strategic and a uniform ensemble")
    c.add_argument("strategic")
    c.add_argument("uniform")
    c.add_argument("--out", help="directory for compare.csv (default: the strategic spec's output.dir)")

    h = sub.add_parser("histogram", help="bin an ensemble dump and apply the density threshold")
    h.add_argument("ensemble")
    h.add_argument("--spec", help="take the domain, bins and threshold from this spec")
    h.add_argument("--lower", help="comma-separated lower corner of the domain")
    h.add_argument("--upper", help="comma-separated upper corner of the domain")
    h.add_argument("--bins", type=int)
    h.add_argument("--threshold", type=float)
    h.add_argument("--out", help="output CSV (default: stdout)")
    return p


def _histogram_command(args):
    ensemble = read_ensemble(args.ensemble)
    bins, threshold, n_channels = 60, 0.05, 1
    if args.spec:
        spec = RunSpec.from_file(args.spec)
        model = spec.build_model()
        lower, upper, n_channels = model.lower, model.upper, model.n_channels
        bins, threshold = spec.int("output.bins"), spec.float("output.threshold")
    elif args.lower and args.upper:
        lower, upper = _floats(args.lower, "--lower"), _floats(args.upper, "--upper")
    else:
        raise ConfigError("histogram needs --spec or both --lower and --upper")
    bins = args.bins if args.bins is not None else bins
    threshold = args.threshold if args.threshold is not None else threshold
    if len(lower) != ensemble.coords.shape[1] or len(upper) != ensemble.coords.shape[1]:
        raise ConfigError("domain bounds do not match the ensemble's coordinate count")
    try:
        report = histogram(ensemble, bins, threshold, lower, upper, n_channels)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if args.out:
        write_histogram(Path(args.out), report)
    else:
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(report.header())
        for row in report.rows():
            writer.writerow([fmt(v) for v in row])


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "run":
            out = run_experiment(RunSpec.from_file(args.spec))
            print(out)
        elif args.command == "benchmark":
            out = run_experiment(RunSpec.from_file(args.spec), benchmark=True)
            print(out)
        elif args.command == "compare":
            path = compare_sampling(RunSpec.from_file(args.strategic), RunSpec.from_file(args.uniform), args.out)
            print(path)
        else:
            _histogram_command(args)
    except ConfigError as exc:
        print(f"particle-oed: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OEDError as exc:
        print(f"particle-oed: numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
