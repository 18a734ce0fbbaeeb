"""JSON documents for selection runs (one document per run)."""
from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

from .elimination import EliminationTrace
from .swarm import BpsoResult

TRACE_FORMAT = "levelscope-trace/1"


def trace_document(result, metadata: dict) -> dict:
    """Wrap a BPSO result or elimination trace with run metadata."""
    if isinstance(result, BpsoResult):
        body = {
            "method": "bpso",
            "final_mask": str(result.best),
            "final_fitness": result.best_fitness,
            "ranked": [[str(m), f] for m, f in result.ranked],
            "iterations": [rec.to_dict() for rec in result.history],
        }
    elif isinstance(result, EliminationTrace):
        final = result.per_cardinality[min(result.per_cardinality)][0]
        body = {"method": "be", "final_mask": str(final), **result.to_dict()}
    else:
        raise TypeError(f"cannot serialize {type(result).__name__}")
    return {"format": TRACE_FORMAT, "metadata": dict(metadata), **body}


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_trace(path, result, metadata: dict) -> None:
    atomic_write_text(path, dumps(trace_document(result, metadata)))


def read_trace(path) -> dict:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != TRACE_FORMAT:
        raise ValueError(f"{path}: not a selection trace")
    return doc
