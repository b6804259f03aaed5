"""Tables from a directory of result documents: an ECDF of solved runs per
variant, and a histogram of the alpha upper bounds reached."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Any, Iterable

SOLVED = {"Converged", "AlphaUnbounded", "NeFound", "NoNeExists"}
ALPHA_BINS = [(1.0, "1"), (1.1, "(1,1.1]"), (2.0, "(1.1,2]"), (5.0, "(2,5]"),
              (10.0, "(5,10]"), (100.0, "(10,100]"), (math.inf, ">100")]


def load_results(directory: str | Path) -> list[dict[str, Any]]:
    docs = []
    for path in sorted(Path(directory).glob("*.json")):
        try:
            doc = json.loads(path.read_text("utf-8"))
        except json.JSONDecodeError:
            continue
        if isinstance(doc, dict) and "status" in doc:
            docs.append(doc)
    return docs


def _variant(doc: dict[str, Any]) -> str:
    return doc.get("variant", "solve")


def _measure(doc: dict[str, Any], measure: str) -> float | None:
    if measure == "time":
        return doc.get("wall_time_s")
    return doc.get("stats", {}).get("nodes")


def ecdf_rows(docs: Iterable[dict[str, Any]], measure: str = "time") -> tuple[list[str], list[list]]:
    """One row per distinct measure value of a solved run; column ``v`` holds
    how many runs of variant ``v`` were solved within that value."""
    if measure not in ("time", "nodes"):
        raise ValueError("measure must be 'time' or 'nodes'")
    docs = list(docs)
    variants = sorted({_variant(d) for d in docs})
    solved: dict[str, list[float]] = {v: [] for v in variants}
    for d in docs:
        value = _measure(d, measure)
        if d["status"] in SOLVED and value is not None:
            solved[_variant(d)].append(float(value))
    points = sorted({v for vals in solved.values() for v in vals})
    rows = [[p] + [sum(1 for v in solved[name] if v <= p) for name in variants] for p in points]
    return [measure] + variants, rows


def alpha_histogram(docs: Iterable[dict[str, Any]]) -> tuple[list[str], list[list]]:
    docs = [d for d in docs if "alpha_hi" in d]
    variants = sorted({_variant(d) for d in docs})
    labels = [label for _, label in ALPHA_BINS] + ["unbounded"]
    counts = {label: {v: 0 for v in variants} for label in labels}
    for d in docs:
        if d["status"] == "AlphaUnbounded":
            counts["unbounded"][_variant(d)] += 1
        elif d["status"] == "Converged":
            hi = float(d["alpha_hi"])
            label = next(lab for edge, lab in ALPHA_BINS if hi <= edge)
            counts[label][_variant(d)] += 1
    return ["alpha_bin"] + variants, [[label] + [counts[label][v] for v in variants]
                                      for label in labels]


def to_csv(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def write_report(results: str | Path, out: str | Path, measure: str = "time") -> tuple[Path, Path]:
    docs = load_results(results)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    ecdf = out / f"ecdf_{measure}.csv"
    hist = out / "alpha_histogram.csv"
    ecdf.write_text(to_csv(*ecdf_rows(docs, measure)), "utf-8")
    hist.write_text(to_csv(*alpha_histogram(docs)), "utf-8")
    return ecdf, hist
