"""Experiment configuration, per-cell seeds and the grid runner."""
from __future__ import annotations

import dataclasses
import json
import time
from collections.abc import Callable
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

from .lob_data import Dataset, parse_events, split_dataset
from .masking import LevelMask
from .predictor import BackboneKind, TrainConfig
from .reporting import Method, RunRecord, save_record, write_reports
from .selection import BpsoConfig, TrainingEvaluator, backward_eliminate, bpso_select, write_trace
from .selection.traces import atomic_write_text
from .synthgen import SynthConfig, generate


class ConfigError(ValueError):
    pass


class CellError(RuntimeError):
    def __init__(self, cell: Cell, cause: BaseException):
        super().__init__(f"cell {cell.name} failed: {cause}")
        self.cell = cell


@dataclass(frozen=True)
class DataSource:
    id: str
    path: str | None = None
    synth: SynthConfig | None = None

    def load(self):
        if self.synth is not None:
            return generate(self.synth)
        return parse_events(self.path)


@dataclass(frozen=True)
class ExperimentConfig:
    datasets: tuple[DataSource, ...]
    window: int = 10
    horizons: tuple[int, ...] = (10, 20, 50)
    backbones: tuple[BackboneKind, ...] = (BackboneKind.TEMPORAL_BILINEAR, BackboneKind.CONVOLUTIONAL)
    methods: tuple[Method, ...] = (Method.BASELINE, Method.BE, Method.BPSO)
    repetitions: int = 20
    seed: int = 0
    alpha: float = 0.002
    train_days: int = 7
    test_days: int = 3
    validation_fraction: float = 0.25
    train: TrainConfig = field(default_factory=TrainConfig)
    bpso: BpsoConfig = field(default_factory=BpsoConfig)
    output: str = "results"

    def __post_init__(self):
        if not self.datasets:
            raise ConfigError("at least one dataset is required")
        if len({d.id for d in self.datasets}) != len(self.datasets):
            raise ConfigError("dataset ids must be unique")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        if not self.horizons or any(h < 1 for h in self.horizons):
            raise ConfigError("horizons must be a nonempty list of positive integers")
        if not self.backbones or not self.methods:
            raise ConfigError("backbones and methods must be nonempty")
        if self.window < 1:
            raise ConfigError("window must be >= 1")
        if self.alpha < 0:
            raise ConfigError("alpha must be >= 0")
        if self.train_days < 1 or self.test_days < 1:
            raise ConfigError("split.train_days and split.test_days must be >= 1")
        if not 0 <= self.validation_fraction < 1:
            raise ConfigError("split.validation_fraction must be in [0, 1)")
        for d in self.datasets:
            if d.synth is not None and d.synth.days < self.train_days + self.test_days:
                raise ConfigError(f"dataset {d.id}: {d.synth.days} days cannot cover the train/test split")

    def cells(self) -> list[Cell]:
        return [
            Cell(d.id, b, m, h, r, derive_seed(self.seed, d.id, b.value, m.value, h, r))
            for d in self.datasets
            for b in self.backbones
            for m in self.methods
            for h in self.horizons
            for r in range(self.repetitions)
        ]

    def source(self, dataset_id: str) -> DataSource:
        for d in self.datasets:
            if d.id == dataset_id:
                return d
        raise KeyError(dataset_id)


@dataclass(frozen=True)
class Cell:
    dataset: str
    backbone: BackboneKind
    method: Method
    horizon: int
    repetition: int
    seed: int

    @property
    def name(self) -> str:
        return f"{self.dataset}__{self.backbone.value}__{self.method.value}__H{self.horizon}__r{self.repetition:03d}"


# -- seeds -------------------------------------------------------------------

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_M64 = (1 << 64) - 1


def _fnv1a(data: bytes) -> int:
    h = _FNV_OFFSET
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & _M64
    return h


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _M64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _M64
    return x ^ (x >> 31)


def derive_seed(root: int, dataset: str, backbone: str, method: str, horizon: int, repetition: int) -> int:
    """63-bit cell seed: FNV-1a over the cell key, mixed with splitmix64.

    The key is the unit-separator-joined text of all six fields, so distinct
    cells hash distinct byte strings.
    """
    key = "\x1f".join(map(str, (root, dataset, backbone, method, horizon, repetition))).encode()
    return _splitmix64(_fnv1a(key)) >> 1


# -- config file -------------------------------------------------------------


def _int(v: str) -> int:
    return int(v)


def _opt_int(v: str):
    return None if v.lower() in ("", "none") else int(v)


def _levels(v: str) -> frozenset:
    return frozenset(int(x) for x in v.split(",") if x.strip())


def _floats(v: str):
    return None if v.lower() in ("", "none") else tuple(float(x) for x in v.split(","))


_CONVERTERS = {"int": _int, "float": float, "str": str, "int | None": _opt_int, "frozenset": _levels, "tuple | None": _floats}


def _section(cls, items: dict[str, tuple[int, str]], prefix: str):
    types = {f.name: f.type for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, (line, value) in items.items():
        name = key[len(prefix):]
        if name not in types or name == "seed" and cls is not SynthConfig:
            raise ConfigError(f"line {line}: unknown key {key!r}")
        try:
            kwargs[name] = _CONVERTERS[types[name]](value)
        except ValueError as exc:
            raise ConfigError(f"line {line}: bad value for {key}: {value!r}") from exc
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"[{prefix.rstrip('.')}] {exc}") from exc


def _list(value: str, conv: Callable, line: int, key: str) -> tuple:
    try:
        out = tuple(conv(x.strip()) for x in value.split(",") if x.strip())
    except ValueError as exc:
        raise ConfigError(f"line {line}: bad value for {key}: {value!r}") from exc
    return out


def _entries(text: str) -> dict[str, tuple[int, str]]:
    entries: dict[str, tuple[int, str]] = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key = value")
        key, value = (p.strip() for p in line.split("=", 1))
        if key in entries:
            raise ConfigError(f"line {n}: duplicate key {key!r}")
        entries[key] = (n, value)
    return entries


def synth_configs(text: str) -> dict[str, SynthConfig]:
    """Synthetic generator settings found in a config text, by dataset id.

    Bare ``synth.*`` keys describe a dataset with the id ``synth``.
    """
    found: dict[str, dict] = {}
    for key, item in _entries(text).items():
        parts = key.split(".")
        if parts[0] == "synth" and len(parts) == 2:
            found.setdefault("synth", {})[key] = item
        elif parts[0] == "dataset" and len(parts) == 4 and parts[2] == "synth":
            found.setdefault(parts[1], {})[f"synth.{parts[3]}"] = item
    return {k: _section(SynthConfig, v, "synth.") for k, v in sorted(found.items())}


def parse_config_text(text: str, base_dir=".") -> ExperimentConfig:
    """Parse the flat ``key = value`` format (``#`` starts a comment).

    Top-level keys: window, horizons, backbones, methods, repetitions, seed,
    alpha, output.  Prefixed keys: ``split.*``, ``train.*``, ``bpso.*``,
    ``dataset.<id>.path`` and ``dataset.<id>.synth.*``.  Relative paths are
    taken from ``base_dir``.
    """
    entries = _entries(text)
    base_dir = Path(base_dir)
    top: dict = {}
    groups: dict[str, dict] = {"train.": {}, "bpso.": {}}
    datasets: dict[str, dict] = {}
    split = {"train_days": int, "test_days": int, "validation_fraction": float}
    for key, (n, value) in entries.items():
        if key.startswith(("train.", "bpso.")):
            groups[key.split(".")[0] + "."][key] = (n, value)
        elif key.startswith("split."):
            name = key[6:]
            if name not in split:
                raise ConfigError(f"line {n}: unknown key {key!r}")
            top[name] = _list(value, split[name], n, key)[0] if value else None
        elif key.startswith("dataset."):
            parts = key.split(".")
            if len(parts) < 3 or not parts[1]:
                raise ConfigError(f"line {n}: malformed dataset key {key!r}")
            ds = datasets.setdefault(parts[1], {"synth": {}})
            if parts[2] == "path" and len(parts) == 3:
                ds["path"] = str(base_dir / value)
            elif parts[2] == "synth" and len(parts) == 4:
                ds["synth"][f"synth.{parts[3]}"] = (n, value)
            else:
                raise ConfigError(f"line {n}: unknown key {key!r}")
        elif key == "horizons":
            top[key] = _list(value, int, n, key)
        elif key == "backbones":
            top[key] = _list(value, BackboneKind.parse, n, key)
        elif key == "methods":
            top[key] = _list(value, Method.parse, n, key)
        elif key in ("window", "repetitions", "seed"):
            top[key] = _list(value, int, n, key)[0] if value else None
        elif key == "alpha":
            top[key] = _list(value, float, n, key)[0] if value else None
        elif key == "output":
            top[key] = str(base_dir / value)
        else:
            raise ConfigError(f"line {n}: unknown key {key!r}")
    if any(v is None for v in top.values()):
        raise ConfigError("empty value in config")

    sources = []
    for ds_id, entry in sorted(datasets.items()):
        has_path, has_synth = "path" in entry, bool(entry["synth"])
        if has_path == has_synth:
            raise ConfigError(f"dataset {ds_id}: give exactly one of path or synth.*")
        if has_path:
            sources.append(DataSource(ds_id, path=entry["path"]))
        else:
            sources.append(DataSource(ds_id, synth=_section(SynthConfig, entry["synth"], "synth.")))
    train = _section(TrainConfig, groups["train."], "train.")
    bpso = _section(BpsoConfig, groups["bpso."], "bpso.")
    return ExperimentConfig(datasets=tuple(sources), train=train, bpso=bpso, **top)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    return parse_config_text(text, path.parent)


# -- running -----------------------------------------------------------------


@lru_cache(maxsize=4)
def _events(source: DataSource):
    return source.load()


@lru_cache(maxsize=8)
def _dataset(config: ExperimentConfig, dataset_id: str, horizon: int) -> Dataset:
    events = _events(config.source(dataset_id))
    return split_dataset(
        events, config.train_days, config.test_days, config.validation_fraction, config.window, horizon, config.alpha
    )


def load_datasets(config: ExperimentConfig) -> None:
    """Build every (dataset, horizon) split up front so data errors surface early."""
    for d in config.datasets:
        for h in config.horizons:
            _dataset(config, d.id, h)


def run_cell(config: ExperimentConfig, cell: Cell, trace_dir=None) -> RunRecord:
    start = time.perf_counter()
    dataset = _dataset(config, cell.dataset, cell.horizon)
    evaluator = TrainingEvaluator(dataset, cell.backbone, config.train.with_seed(cell.seed))
    meta = {
        "dataset": cell.dataset,
        "backbone": cell.backbone.value,
        "method": cell.method.value,
        "horizon": cell.horizon,
        "repetition": cell.repetition,
        "seed": cell.seed,
        "train": dataclasses.asdict(config.train.with_seed(cell.seed)),
    }
    if cell.method is Method.BASELINE:
        mask = LevelMask.full()
        selected = ((mask, evaluator(mask)),)
    elif cell.method is Method.BE:
        trace = backward_eliminate(evaluator)
        selected = tuple(trace.per_cardinality[n] for n in sorted(trace.per_cardinality, reverse=True))
        mask = selected[-1][0]
    else:
        bpso = config.bpso.with_seed(cell.seed)
        trace = bpso_select(evaluator, bpso)
        meta["bpso"] = dataclasses.asdict(bpso)
        selected = trace.ranked
        mask = trace.best
    if trace_dir is not None and cell.method is not Method.BASELINE:
        write_trace(Path(trace_dir) / f"{cell.name}.json", trace, meta)
    report = evaluator.test_report(mask)
    return RunRecord(
        cell.dataset, cell.backbone.value, cell.method, cell.horizon, cell.repetition, cell.seed,
        selected, mask, report, wall_seconds=time.perf_counter() - start,
    )


def _run_and_save(config: ExperimentConfig, cell: Cell, out: str) -> RunRecord:
    try:
        record = run_cell(config, cell, Path(out) / "traces")
    except Exception as exc:
        raise CellError(cell, exc) from exc
    save_record(record, Path(out) / "records")
    return record


def run_experiment(config: ExperimentConfig, out_dir=None, jobs: int = 1, progress=None) -> Path:
    """Run every cell, write records, traces and reports under ``out_dir``.

    Layout: ``records/`` (one file per cell), ``traces/``, ``report/`` and
    ``timing.json`` (wall-clock seconds per cell, the only run-dependent
    file).  Completed cells are kept if a later cell fails.
    """
    out = Path(out_dir if out_dir is not None else config.output)
    (out / "records").mkdir(parents=True, exist_ok=True)
    cells = config.cells()
    load_datasets(config)
    records: list[RunRecord] = []

    def done(cell, record):
        records.append(record)
        if progress:
            progress(cell.name, record.wall_seconds)

    try:
        if jobs <= 1:
            for cell in cells:
                done(cell, _run_and_save(config, cell, str(out)))
        else:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                futures = [pool.submit(_run_and_save, config, cell, str(out)) for cell in cells]
                for cell, fut in zip(cells, futures):
                    done(cell, fut.result())
    finally:
        timing = {r.filename: r.wall_seconds for r in records}
        atomic_write_text(out / "timing.json", json.dumps(timing, indent=1, sort_keys=True) + "\n")
    # reports cover this configuration's cells only, whatever else is on disk
    write_reports(records, out / "report")
    return out
