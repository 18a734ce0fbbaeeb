"""Command line entry point: ``python -m levelscope <command>``."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .experiment import CellError, ConfigError, load_config, run_experiment, synth_configs
from .lob_data import EventParseError, EventValidationError, parse_events, validate_events, write_events
from .reporting import load_records, write_reports
from .synthgen import SynthConfig, generate

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _synth_from_config(path: Path, dataset: str | None) -> SynthConfig:
    synths = synth_configs(path.read_text(encoding="utf-8"))
    if dataset is None:
        if len(synths) != 1:
            raise ConfigError("config must define exactly one synthetic dataset, or pass --dataset")
        return next(iter(synths.values()))
    if dataset not in synths:
        raise ConfigError(f"no synthetic dataset {dataset!r} in config")
    return synths[dataset]


def cmd_run(args) -> int:
    config = load_config(args.config)

    def progress(name, secs):
        if args.verbose:
            print(f"{name} {secs:.1f}s", file=sys.stderr)

    out = run_experiment(config, args.out, jobs=args.jobs, progress=progress)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_gen_data(args) -> int:
    synth = _synth_from_config(Path(args.config), args.dataset)
    events = generate(synth)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = out.with_name(f".{out.name}.tmp")
    write_events(events, tmp, synth.start_date)
    tmp.replace(out)
    print(f"wrote {len(events)} events to {out}")
    return EXIT_OK


def cmd_report(args) -> int:
    src = Path(args.inp)
    if (src / "records").is_dir():
        src = src / "records"
    if not src.is_dir():
        print(f"error: no such directory: {src}", file=sys.stderr)
        return EXIT_DATA
    records = load_records(src)
    if not records:
        print(f"error: no records in {src}", file=sys.stderr)
        return EXIT_DATA
    for path in write_reports(records, args.out):
        print(path)
    return EXIT_OK


def cmd_validate_data(args) -> int:
    events = parse_events(args.inp, validate=False)
    problems = validate_events(events)
    for p in problems:
        print(p)
    print(f"{len(events)} events, {len(problems)} violations")
    return EXIT_OK if not problems else EXIT_DATA


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="levelscope", description="Order-book level selection experiments.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run an experiment grid from a config file")
    r.add_argument("--config", required=True)
    r.add_argument("--jobs", type=int, default=1)
    r.add_argument("--out", default=None, help="output directory (default: the config's output key)")
    r.add_argument("-v", "--verbose", action="store_true")
    r.set_defaults(func=cmd_run)

    g = sub.add_parser("gen-data", help="write a synthetic event file")
    g.add_argument("--config", required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--dataset", default=None, help="dataset id when the config defines several")
    g.set_defaults(func=cmd_gen_data)

    rep = sub.add_parser("report", help="build tables and figures from run records")
    rep.add_argument("--in", dest="inp", required=True)
    rep.add_argument("--out", required=True)
    rep.set_defaults(func=cmd_report)

    v = sub.add_parser("validate-data", help="check an event file against the book invariants")
    v.add_argument("--in", dest="inp", required=True)
    v.set_defaults(func=cmd_validate_data)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (EventParseError, EventValidationError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except CellError as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except ValueError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        print(f"runtime failure: {exc!r}", file=sys.stderr)
        return EXIT_RUNTIME
