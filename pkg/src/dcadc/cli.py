"""Command-line interface.

Exit status: 0 on success (every check true), 1 when a check fails, 2 on
usage, configuration or input errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from contextlib import contextmanager
from importlib import resources
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, TextIO

from . import __version__
from .analysis import ByCount, ByTime, SegmentedAnalysis, analyse_offline
from .bench import BenchConfig, run_bench
from .config import EngineConfig
from .dc.parser import load_spec
from .dc.semantics import first_violation, eval_formula
from .dc.syntax import Box, to_fraction
from .dc.trace import Interval, read_traces, write_trace
from .dca.population import Population, batches
from .dca.stream import read_csv, read_jsonl, stream_header, synthesize, write_labels, write_stream
from .errors import ConfigError, DCError, InputError, InstrumentationError, SchedulerOverflowError
from .instrument import Layout, record_population
from .monitor import theorem1_experiment

logger = logging.getLogger("dcadc")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@contextmanager
def _open_in(path: Optional[str]) -> Iterator[TextIO]:
    if path in (None, "-"):
        yield sys.stdin
    else:
        with open(path, encoding="utf-8", newline="") as fh:
            yield fh


@contextmanager
def _open_out(path: Optional[str]) -> Iterator[TextIO]:
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            yield fh


def _load_config(args) -> EngineConfig:
    return EngineConfig.load(args.config) if getattr(args, "config", None) else EngineConfig()


def _read_instances(path: Optional[str], categories):
    with _open_in(path) as fh:
        if path and path.lower().endswith(".csv"):
            return list(read_csv(fh, categories))
        return list(read_jsonl(fh, categories))


# -- detect -----------------------------------------------------------------


def cmd_detect(args) -> int:
    cfg = _load_config(args)
    if args.tau is not None:
        cfg.analysis.tau = args.tau
    if args.analysis:
        cfg.analysis.mode = args.analysis
    if args.by_count is not None or args.by_time is not None:
        cfg.analysis.by_count, cfg.analysis.by_time = args.by_count, args.by_time
        cfg.analysis.mode = "segmented"
    if args.seed is not None:
        cfg.seed = args.seed
    cfg.validate()
    source = args.input or cfg.input
    instances = _read_instances(source, cfg.cell.categories)
    policy = cfg.segmentation() or ByCount(100)
    segmented = cfg.analysis.mode == "segmented"
    seg_out: List[dict] = []
    with _open_out(args.output or cfg.output) as out:
        with Population(cfg.population_config()) as pop:
            if segmented:
                live = SegmentedAnalysis(policy, cfg.tau, on_close=lambda seg, rep: seg_out.append(
                    {"segment": seg.segment_id, "close_time": seg.close_time, "report": rep.rows()}))

                def emit(reports):
                    if args.format == "table":
                        for rep in reports:
                            out.write(f"segment {rep.window.segment_id}\n{rep.to_table()}\n\n")

                for presented in pop.iter_run(batches(instances)):
                    emit(live.feed(presented))
                emit(live.finish())
                final = live.cumulative
            else:
                final = analyse_offline(pop.run(batches(instances)), cfg.tau)
        if args.format == "json":
            doc = {"mode": cfg.analysis.mode, "final": final.rows()}
            if segmented:
                doc["segments"] = seg_out
            out.write(json.dumps(doc) + "\n")
        else:
            out.write(("final\n" if segmented else "") + final.to_table() + "\n")
    return EXIT_OK


# -- simulate ---------------------------------------------------------------


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.iterations is not None:
        cfg.simulation.iterations = args.iterations
    if args.anomaly_fraction is not None:
        cfg.simulation.anomaly_fraction = args.anomaly_fraction
    cfg.validate()
    syn = cfg.synthetic_config()
    instances, labels = synthesize(syn)
    with _open_out(args.output) as out:
        write_stream(out, instances, stream_header(syn, cfg.cell.categories))
    labels_path = args.labels
    if labels_path is None and args.output not in (None, "-"):
        p = Path(args.output)
        labels_path = str(p.with_name(p.stem + ".labels.jsonl"))
    if labels_path is not None:
        with _open_out(labels_path) as fh:
            write_labels(fh, labels)
    return EXIT_OK


# -- trace ------------------------------------------------------------------


def cmd_trace(args) -> int:
    cfg = _load_config(args)
    if args.layout:
        cfg.durations.layout = args.layout
    if args.iteration_ticks is not None:
        cfg.durations.iteration_ticks = args.iteration_ticks
    cfg.validate()
    instances = _read_instances(args.input or cfg.input, cfg.cell.categories)
    traces, _, _ = record_population(
        cfg.population_config(), batches(instances), cfg.event_durations(),
        Layout(cfg.durations.layout), cfg.durations.iteration_ticks, args.allow_overflow,
    )
    with _open_out(args.output) as out:
        for cell_id, tr in traces.items():
            write_trace(tr, out, cell=cell_id)
    return EXIT_OK


# -- monitor ----------------------------------------------------------------


def _bindings(pairs: Sequence[str]) -> Dict[str, object]:
    out = {}
    for pair in pairs:
        name, sep, value = pair.partition("=")
        if not sep or not name:
            raise UsageError(f"--set expects name=value, got {pair!r}")
        try:
            out[name.strip()] = to_fraction(value.strip())
        except (ValueError, ZeroDivisionError):
            raise UsageError(f"--set {name}: not a number: {value!r}") from None
    return out


def cmd_monitor(args) -> int:
    data = resources.files("dcadc.dc").joinpath("data")
    spec_text = Path(args.spec).read_text(encoding="utf-8") if args.spec else data.joinpath("paper.dcspec").read_text(encoding="utf-8")
    bundle = load_spec(spec_text)
    if args.trace:
        with _open_in(args.trace) as fh:
            traces = read_traces(fh)
    else:
        traces = read_traces(data.joinpath("fig2.trace.jsonl").read_text(encoding="utf-8").splitlines())
    if args.cell is not None:
        key = next((k for k in traces if str(k) == args.cell), None)
        if key is None:
            raise InputError(f"no trace for cell {args.cell!r}")
        traces = {key: traces[key]}
    names = args.formula or bundle.checks
    unknown = [n for n in names if n not in bundle.formulas]
    if unknown:
        raise UsageError(f"unknown formulas {unknown}; available: {sorted(bundle.formulas)}")
    v = bundle.valuation.update(_bindings(args.set))
    results = []
    for cell, tr in traces.items():
        iv = Interval(0, tr.horizon) if args.interval is None else Interval(*args.interval)
        for name in names:
            f = bundle.formulas[name]
            ok = eval_formula(tr, f, v, iv)
            row = {"formula": name, "holds": ok, "interval": [iv.b, iv.e]}
            if cell is not None:
                row["cell"] = cell
            if not ok and isinstance(f, Box):
                w = first_violation(tr, f.arg, v, iv)
                if w is not None:
                    row["witness"] = [w.b, w.e]
            results.append(row)
    if args.format == "json":
        print(json.dumps(results))
    else:
        for row in results:
            where = f"cell {row['cell']} " if "cell" in row else ""
            extra = f"  (violated on [{row['witness'][0]}, {row['witness'][1]}])" if "witness" in row else ""
            print(f"{where}{row['formula']} on [{row['interval'][0]}, {row['interval'][1]}]: "
                  f"{'true' if row['holds'] else 'FALSE'}{extra}")
    return EXIT_OK if all(r["holds"] for r in results) else EXIT_FAIL


# -- theorem1 ---------------------------------------------------------------


def cmd_theorem1(args) -> int:
    summary = theorem1_experiment(args.runs, args.seed, violate=args.violate)
    print(json.dumps(summary.to_dict()) if args.format == "json" else summary.to_text())
    if args.violate:
        return EXIT_OK
    return EXIT_OK if summary.passed else EXIT_FAIL


# -- bench ------------------------------------------------------------------


def cmd_bench(args) -> int:
    policy = ByTime(args.by_time) if args.by_time is not None else ByCount(args.by_count)
    cfg = BenchConfig(m_values=tuple(args.m), policy=policy, seed=args.seed, wall_clock=args.wall_clock)
    result = run_bench(cfg)
    print(result.to_json() if args.format == "json" else result.to_table())
    return EXIT_OK


# -- config -----------------------------------------------------------------


def cmd_config(args) -> int:
    if args.check:
        EngineConfig.load(args.check)
        print(f"{args.check}: ok")
        return EXIT_OK
    print(EngineConfig().to_json())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dcadc", description="Dendritic cell anomaly detection with duration-calculus checking.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0, help="log segment closes and progress")
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("detect", help="run the detector over an input stream")
    d.add_argument("input", nargs="?", help="stream file (.jsonl or .csv); stdin if omitted")
    d.add_argument("--config")
    d.add_argument("--analysis", choices=("offline", "segmented"))
    g = d.add_mutually_exclusive_group()
    g.add_argument("--by-count", type=int, help="segment every N presented antigens")
    g.add_argument("--by-time", type=float, help="segment every T seconds")
    d.add_argument("--tau", type=float, help="anomaly threshold on mcav")
    d.add_argument("--seed", type=int)
    d.add_argument("--format", choices=("table", "json"), default="table")
    d.add_argument("-o", "--output")
    d.set_defaults(func=cmd_detect)

    s = sub.add_parser("simulate", help="write a labelled synthetic stream")
    s.add_argument("--config")
    s.add_argument("-o", "--output", help="stream file; stdout if omitted")
    s.add_argument("--labels", help="labels file (default: next to the output)")
    s.add_argument("--iterations", type=int)
    s.add_argument("--anomaly-fraction", type=float)
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_simulate)

    t = sub.add_parser("trace", help="record per-cell traces of a detector run")
    t.add_argument("input", nargs="?")
    t.add_argument("--config")
    t.add_argument("--layout", choices=("event", "wall"))
    t.add_argument("--iteration-ticks", type=int)
    t.add_argument("--allow-overflow", action="store_true")
    t.add_argument("-o", "--output")
    t.set_defaults(func=cmd_trace)

    m = sub.add_parser("monitor", help="check a spec file against a trace file")
    m.add_argument("spec", nargs="?", help="spec file (bundled spec if omitted)")
    m.add_argument("trace", nargs="?", help="trace file (bundled golden trace if omitted)")
    m.add_argument("--formula", action="append", help="formula to check (repeatable)")
    m.add_argument("--set", action="append", default=[], metavar="NAME=VALUE", help="bind a global variable")
    m.add_argument("--interval", nargs=2, type=int, metavar=("B", "E"), help="interval in ticks")
    m.add_argument("--cell", help="cell id within a multiplexed trace file")
    m.add_argument("--format", choices=("text", "json"), default="text")
    m.set_defaults(func=cmd_monitor)

    th = sub.add_parser("theorem1", help="check the real-time requirement on simulated lifespans")
    th.add_argument("--runs", type=int, default=1000)
    th.add_argument("--seed", type=int, default=0)
    th.add_argument("--violate", choices=("des1", "des2"))
    th.add_argument("--format", choices=("text", "json"), default="text")
    th.set_defaults(func=cmd_theorem1)

    b = sub.add_parser("bench", help="offline versus segmented latency")
    b.add_argument("--m", type=int, nargs="*", default=[100, 300, 1000, 3000])
    gb = b.add_mutually_exclusive_group()
    gb.add_argument("--by-count", type=int, default=50)
    gb.add_argument("--by-time", type=float)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--wall-clock", action="store_true", help="time with the host clock instead of the simulated one")
    b.add_argument("--format", choices=("table", "json"), default="table")
    b.set_defaults(func=cmd_bench)

    c = sub.add_parser("config", help="print or check configuration")
    gc = c.add_mutually_exclusive_group(required=True)
    gc.add_argument("--print-defaults", action="store_true")
    gc.add_argument("--check", metavar="FILE")
    c.set_defaults(func=cmd_config)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError, InputError, DCError, OSError) as exc:
        print(f"dcadc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SchedulerOverflowError, InstrumentationError) as exc:
        print(f"dcadc: check failed: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
