"""Cross-run consensus statistics, performance tables and bar charts."""
from __future__ import annotations

import csv
import io
import json
import math
import statistics
from collections import defaultdict
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum
from fractions import Fraction
from pathlib import Path
from xml.etree import ElementTree
from xml.sax.saxutils import quoteattr

import numpy as np

from .lob_data import N_LEVELS
from .masking import LevelMask
from .predictor import F1Report
from .selection.traces import atomic_write_text

RECORD_FORMAT = "levelscope-run/1"


class Method(str, Enum):
    BASELINE = "baseline"
    BE = "be"
    BPSO = "bpso"

    @classmethod
    def parse(cls, text: str) -> Method:
        return cls(text.strip().lower())


@dataclass(frozen=True)
class RunRecord:
    """Outcome of one (dataset, backbone, method, horizon, repetition) cell.

    ``selected`` lists ``(mask, validation fitness)`` pairs: subsets of size
    10 down to 1 for BE, the best distinct masks (best first) for BPSO and
    the full mask for Baseline.  ``test`` scores ``evaluation_mask``.
    """

    dataset: str
    backbone: str
    method: Method
    horizon: int
    repetition: int
    seed: int
    selected: tuple[tuple[LevelMask, float], ...]
    evaluation_mask: LevelMask
    test: F1Report
    wall_seconds: float = field(default=0.0, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "method", Method.parse(self.method))
        sizes = [m.popcount for m, _ in self.selected]
        if self.method is Method.BE and sizes != list(range(N_LEVELS, 0, -1)):
            raise ValueError("BE records need subsets of sizes 10 down to 1")
        if self.method is Method.BPSO:
            masks = [m for m, _ in self.selected]
            if not 1 <= len(masks) <= 3 or len(set(masks)) != len(masks):
                raise ValueError("BPSO records need 1 to 3 distinct masks")

    @property
    def config(self) -> tuple[str, str, int]:
        return (self.dataset, self.backbone, self.horizon)

    def subset(self, cardinality: int) -> LevelMask:
        for m, _ in self.selected:
            if m.popcount == cardinality:
                return m
        raise KeyError(cardinality)

    def ranked(self, rank: int) -> LevelMask | None:
        return self.selected[rank - 1][0] if rank <= len(self.selected) else None

    @property
    def filename(self) -> str:
        return f"{self.dataset}__{self.backbone}__{self.method.value}__H{self.horizon}__r{self.repetition:03d}.json"

    def to_dict(self) -> dict:
        # wall-clock time is kept out so identical runs give identical files
        return {
            "format": RECORD_FORMAT,
            "dataset": self.dataset,
            "backbone": self.backbone,
            "method": self.method.value,
            "horizon": self.horizon,
            "repetition": self.repetition,
            "seed": self.seed,
            "selected": [[str(m), f] for m, f in self.selected],
            "evaluation_mask": str(self.evaluation_mask),
            "test": self.test.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> RunRecord:
        if d.get("format") != RECORD_FORMAT:
            raise ValueError("not a run record")
        return cls(
            d["dataset"],
            d["backbone"],
            Method.parse(d["method"]),
            int(d["horizon"]),
            int(d["repetition"]),
            int(d["seed"]),
            tuple((LevelMask.from_string(m), float(f)) for m, f in d["selected"]),
            LevelMask.from_string(d["evaluation_mask"]),
            F1Report.from_dict(d["test"]),
        )


def save_record(record: RunRecord, directory) -> Path:
    path = Path(directory) / record.filename
    atomic_write_text(path, json.dumps(record.to_dict(), indent=1, sort_keys=True) + "\n")
    return path


def load_records(directory) -> list[RunRecord]:
    """Every run record under ``directory``, in file-name order."""
    out = []
    for path in sorted(Path(directory).glob("*.json")):
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: {exc}") from exc
        if isinstance(doc, dict) and doc.get("format") == RECORD_FORMAT:
            out.append(RunRecord.from_dict(doc))
    return out


# -- consensus tables --------------------------------------------------------


@dataclass(frozen=True)
class Selector:
    """Which subset of a run is counted: BE of a given size or BPSO rank."""

    method: Method
    index: int

    @classmethod
    def parse(cls, text: str) -> Selector:
        try:
            method, index = text.split(":")
            sel = cls(Method.parse(method), int(index))
        except ValueError as exc:
            raise ValueError(f"bad selector {text!r}; use be:<size> or bpso:<rank>") from exc
        limit = N_LEVELS if sel.method is Method.BE else 3
        if sel.method is Method.BASELINE or not 1 <= sel.index <= limit:
            raise ValueError(f"bad selector {text!r}; use be:<size> or bpso:<rank>")
        return sel

    def pick(self, record: RunRecord) -> LevelMask | None:
        if self.method is Method.BE:
            return record.subset(self.index)
        return record.ranked(self.index)

    def __str__(self) -> str:
        return f"{self.method.value}:{self.index}"


@dataclass(frozen=True, eq=False)
class ConsensusTable:
    """``counts[k-1, c]`` runs of column c whose selected subset holds level k."""

    selector: str
    columns: tuple[tuple[str, str, int], ...]
    counts: np.ndarray
    totals: tuple[int, ...]

    def percentage(self, level: int, column: int) -> Fraction:
        return Fraction(100 * int(self.counts[level - 1, column]), self.totals[column])

    def percentages(self) -> list[list[Fraction]]:
        return [[self.percentage(k, c) for c in range(len(self.columns))] for k in range(1, N_LEVELS + 1)]

    def column_label(self, c: int) -> str:
        dataset, backbone, horizon = self.columns[c]
        return f"{dataset}/{backbone}/H{horizon}"


def appearance_percentages(records, subset_selector) -> ConsensusTable:
    """Share of runs, per configuration, whose chosen subset contains each level.

    A BPSO run without a mask at the requested rank still counts in the
    denominator.  Records of another method, or two records for the same
    repetition of a configuration, raise ValueError.
    """
    sel = subset_selector if isinstance(subset_selector, Selector) else Selector.parse(subset_selector)
    records = list(records)
    if not records:
        raise ValueError("no records")
    by_config: dict[tuple, list[RunRecord]] = defaultdict(list)
    for r in records:
        if r.method is not sel.method:
            raise ValueError(f"selector {sel} cannot read a {r.method.value} record ({r.filename})")
        by_config[r.config].append(r)
    columns = tuple(sorted(by_config))
    counts = np.zeros((N_LEVELS, len(columns)), dtype=np.int64)
    totals = []
    for c, key in enumerate(columns):
        runs = by_config[key]
        reps = [r.repetition for r in runs]
        if len(set(reps)) != len(reps):
            raise ValueError(f"duplicate repetitions for configuration {key}")
        for r in runs:
            mask = sel.pick(r)
            if mask is not None:
                counts[:, c] += np.array(mask.bits)
        totals.append(len(runs))
    return ConsensusTable(str(sel), columns, counts, tuple(totals))


def average_across_configs(table: ConsensusTable) -> list[Fraction]:
    """Unweighted mean of each level's row, exact."""
    n = len(table.columns)
    if n == 0:
        raise ValueError("empty table")
    return [sum(row, Fraction(0)) / n for row in table.percentages()]


def format_percent(value) -> str:
    """Two decimals, halves rounded up (exact for Fractions)."""
    if isinstance(value, Fraction):
        d = Decimal(value.numerator) / Decimal(value.denominator)
    else:
        d = Decimal(repr(float(value)))
    return str(d.quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def format_pm(mean: float, std: float) -> str:
    """Percent mean and std in the zero-padded ``65.01 ± 00.36`` style."""
    return f"{mean:05.2f} ± {std:05.2f}"


# -- performance -------------------------------------------------------------


@dataclass(frozen=True)
class GroupStats:
    n: int
    mean: float
    std: float  # sample std (n - 1); nan for a single run


@dataclass(frozen=True)
class PerformanceSummary:
    groups: dict  # (dataset, backbone, horizon, method) -> GroupStats
    deltas: dict  # (dataset, method) -> mean of baseline minus method over configs
    warnings: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "groups": [
                {"dataset": d, "backbone": b, "horizon": h, "method": m.value, "n": g.n, "mean": g.mean,
                 "std": None if math.isnan(g.std) else g.std}
                for (d, b, h, m), g in sorted(self.groups.items(), key=lambda kv: _group_order(kv[0]))
            ],
            "deltas": [
                {"dataset": d, "method": m.value, "baseline_minus_method": v}
                for (d, m), v in sorted(self.deltas.items(), key=lambda kv: (kv[0][0], kv[0][1].value))
            ],
            "warnings": list(self.warnings),
        }


_METHOD_ORDER = {Method.BASELINE: 0, Method.BE: 1, Method.BPSO: 2}


def _group_order(key):
    d, b, h, m = key
    return (d, b, h, _METHOD_ORDER[m])


def performance_summary(records) -> PerformanceSummary:
    """Mean and sample std of test macro-F1 per configuration and method."""
    values: dict[tuple, list[float]] = defaultdict(list)
    for r in records:
        values[(*r.config, r.method)].append(r.test.macro_f1)
    groups = {}
    warnings = []
    for key, v in values.items():
        std = statistics.stdev(v) if len(v) > 1 else float("nan")
        if len(v) < 2:
            warnings.append(f"{'/'.join(map(str, key[:3]))}/{key[3].value}: single run, std undefined")
        groups[key] = GroupStats(len(v), statistics.fmean(v), std)

    configs = sorted({k[:3] for k in groups})
    gaps: dict[tuple, list[float]] = defaultdict(list)
    for cfg in configs:
        base = groups.get((*cfg, Method.BASELINE))
        for method in (Method.BE, Method.BPSO):
            other = groups.get((*cfg, method))
            if other is None:
                continue
            if base is None:
                warnings.append(f"{'/'.join(map(str, cfg))}: no baseline group, {method.value} delta omitted")
                continue
            gaps[(cfg[0], method)].append(base.mean - other.mean)
    deltas = {k: statistics.fmean(v) for k, v in gaps.items()}
    return PerformanceSummary(groups, deltas, tuple(sorted(set(warnings))))


# -- figures -----------------------------------------------------------------

CHART_KINDS = {"be-cardinality": Method.BE, "bpso-best": Method.BPSO}
_PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd")


def selection_frequency_chart(tables, kind: str, labels=None) -> str:
    """Grouped bar chart (SVG text) of level-averaged appearance percentages.

    One bar series per table, levels 1..10 along the x axis.  Every bar
    carries its exact value in a ``data-value`` attribute.
    """
    tables = list(tables)
    if not tables:
        raise ValueError("no tables to chart")
    if kind not in CHART_KINDS:
        raise ValueError(f"chart kind must be one of {sorted(CHART_KINDS)}")
    for t in tables:
        if Selector.parse(t.selector).method is not CHART_KINDS[kind]:
            raise ValueError(f"table {t.selector} does not belong in a {kind} chart")
        if t.counts.shape[0] != N_LEVELS:
            raise ValueError("tables must share the ten level rows")
    labels = list(labels) if labels is not None else [t.selector for t in tables]
    series = [[float(v) for v in average_across_configs(t)] for t in tables]

    width, height = 640, 360
    left, right, top, bottom = 50, 20, 30, 40
    plot_w, plot_h = width - left - right, height - top - bottom
    group_w = plot_w / N_LEVELS
    bar_w = 0.8 * group_w / len(series)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" data-kind="{kind}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]
    for tick in range(0, 101, 20):
        y = top + plot_h * (1 - tick / 100)
        out.append(f'<line x1="{left}" y1="{y:.2f}" x2="{width - right}" y2="{y:.2f}" stroke="#ddd"/>')
        out.append(f'<text x="{left - 6}" y="{y + 4:.2f}" font-size="10" text-anchor="end">{tick}%</text>')
    for s, (label, values) in enumerate(zip(labels, series)):
        colour = _PALETTE[s % len(_PALETTE)]
        out.append(f'<g data-series={quoteattr(str(label))} fill="{colour}">')
        for k, v in enumerate(values, start=1):
            x = left + (k - 1) * group_w + 0.1 * group_w + s * bar_w
            h = plot_h * v / 100
            out.append(
                f'<rect x="{x:.2f}" y="{top + plot_h - h:.2f}" width="{bar_w:.2f}" height="{h:.2f}" '
                f'data-level="{k}" data-value="{v!r}"/>'
            )
        out.append("</g>")
        ly = top - 14
        lx = left + s * 120
        out.append(f'<rect x="{lx}" y="{ly - 8}" width="10" height="10" fill="{colour}"/>')
        out.append(f'<text x="{lx + 14}" y="{ly + 1}" font-size="11">{_escape(label)}</text>')
    for k in range(1, N_LEVELS + 1):
        x = left + (k - 0.5) * group_w
        out.append(f'<text x="{x:.2f}" y="{height - bottom + 16}" font-size="11" text-anchor="middle">{k}</text>')
    out.append(f'<text x="{left + plot_w / 2:.2f}" y="{height - 6}" font-size="12" text-anchor="middle">level</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _escape(text: str) -> str:
    return str(text).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def parse_chart(svg: str) -> dict[str, list[float]]:
    """Series label -> bar values, read back from a chart document."""
    root = ElementTree.fromstring(svg)
    out = {}
    for g in root.iter("{http://www.w3.org/2000/svg}g"):
        bars = sorted(g.iter("{http://www.w3.org/2000/svg}rect"), key=lambda r: int(r.get("data-level")))
        out[g.get("data-series")] = [float(b.get("data-value")) for b in bars]
    return out


# -- report files ------------------------------------------------------------

TABLE_FILES = {
    "be:1": "table1_be_single_level.csv",
    "bpso:1": "table2_bpso_final.csv",
    "be:2": "table3_be_two_levels.csv",
}
PERFORMANCE_FILE = "table6_performance.csv"
FIGURE_FILES = {"be-cardinality": "figure2_be_subsets.svg", "bpso-best": "figure3_bpso_ranked.svg"}
SUMMARY_FILE = "summary.json"


def consensus_csv(table: ConsensusTable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["level", *[table.column_label(c) for c in range(len(table.columns))], "average"])
    avg = average_across_configs(table)
    for k, row in enumerate(table.percentages(), start=1):
        w.writerow([f"Level {k}", *[format_percent(v) for v in row], format_percent(avg[k - 1])])
    return buf.getvalue()


def performance_csv(summary: PerformanceSummary) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["dataset", "backbone", "horizon", "method", "n", "mean_f1_pct", "std_f1_pct", "formatted"])
    for (d, b, h, m), g in sorted(summary.groups.items(), key=lambda kv: _group_order(kv[0])):
        mean, std = 100 * g.mean, 100 * g.std
        shown = format_pm(mean, std) if not math.isnan(std) else f"{mean:05.2f}"
        w.writerow([d, b, h, m.value, g.n, f"{mean:.4f}", "" if math.isnan(std) else f"{std:.4f}", shown])
    return buf.getvalue()


def write_reports(records, out_dir) -> list[Path]:
    """Write the consensus tables, performance table, charts and summary.

    Outputs whose method has no records are skipped and noted in the summary.
    Returns the written paths.
    """
    records = list(records)
    if not records:
        raise ValueError("no records")
    out_dir = Path(out_dir)
    by_method = defaultdict(list)
    for r in records:
        by_method[r.method].append(r)
    written = []
    notes = []
    summary: dict = {"records": len(records)}

    def emit(name, text):
        atomic_write_text(out_dir / name, text)
        written.append(out_dir / name)

    tables = {}
    for sel, name in TABLE_FILES.items():
        method = Selector.parse(sel).method
        if not by_method[method]:
            notes.append(f"no {method.value} records: {name} skipped")
            continue
        tables[sel] = appearance_percentages(by_method[method], sel)
        emit(name, consensus_csv(tables[sel]))

    perf = performance_summary(records)
    emit(PERFORMANCE_FILE, performance_csv(perf))

    if by_method[Method.BE]:
        series = [appearance_percentages(by_method[Method.BE], f"be:{c}") for c in (1, 2, 3)]
        emit(FIGURE_FILES["be-cardinality"],
             selection_frequency_chart(series, "be-cardinality", ["1 level", "2 levels", "3 levels"]))
        summary["be_average"] = {
            t.selector: [format_percent(v) for v in average_across_configs(t)] for t in series
        }
    else:
        notes.append(f"no be records: {FIGURE_FILES['be-cardinality']} skipped")
    if by_method[Method.BPSO]:
        series = [appearance_percentages(by_method[Method.BPSO], f"bpso:{r}") for r in (1, 2, 3)]
        emit(FIGURE_FILES["bpso-best"], selection_frequency_chart(series, "bpso-best", ["best", "second", "third"]))
        summary["bpso_average"] = {
            t.selector: [format_percent(v) for v in average_across_configs(t)] for t in series
        }
    else:
        notes.append(f"no bpso records: {FIGURE_FILES['bpso-best']} skipped")

    summary["performance"] = perf.to_dict()
    summary["notes"] = notes
    emit(SUMMARY_FILE, json.dumps(summary, indent=1, sort_keys=True) + "\n")
    return written
