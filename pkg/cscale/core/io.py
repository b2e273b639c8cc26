"""
File formats: series CSV, truth edge lists, results JSON, curve dumps and run manifests
"""

import csv
import hashlib
import json
import logging
import math
import platform
import sys
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Set, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field

from core.embedding import EmbeddedSeries, ScalarSeries
from core.errors import ParseError
from core.inference import CausalityResult, CausalNetwork, RocCurve

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
Edge = Tuple[str, str]

FLOAT_FORMAT = ".17g"
EDGE_ARROW = "->"
TRACKED_PACKAGES = ("numpy", "scipy", "scikit-learn", "pydantic", "python-dotenv")


def _fmt(value: float) -> str:
    return format(float(value), FLOAT_FORMAT)


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def _select_columns(header: List[str], cols: Optional[Sequence[str]], index_col: Optional[str],
                    path: str) -> List[int]:
    index_pos = None
    if index_col is not None:
        if index_col in header:
            index_pos = header.index(index_col)
        elif index_col.isdigit() and 1 <= int(index_col) <= len(header):
            index_pos = int(index_col) - 1
        else:
            raise ParseError(f"index column {index_col!r} not found in {header}", path=path)

    if cols:
        missing = [c for c in cols if c not in header]
        if missing:
            raise ParseError(f"columns {missing} not found in {header}", path=path)
        return [header.index(c) for c in cols]
    return [i for i in range(len(header)) if i != index_pos]


def read_series_csv(path: PathLike, cols: Optional[Sequence[str]] = None, index_col: Optional[str] = None,
                    has_header: Optional[bool] = None) -> List[ScalarSeries]:
    """
    Read one ScalarSeries per selected column of a comma-separated file.

    A first row with any non-numeric cell is taken as the header unless
    has_header says otherwise. Headerless columns are named x1, x2, ...

    Args:
        path: CSV file (UTF-8)
        cols: Column names to keep, in this order (default: all but the index)
        index_col: Column to drop (name, or 1-based position)
        has_header: Force header handling instead of detecting it

    Returns:
        List of ScalarSeries
    """
    path = str(path)
    with open(path, newline="", encoding="utf-8") as f:
        rows = [(n, row) for n, row in enumerate(csv.reader(f), start=1) if any(cell.strip() for cell in row)]
    if not rows:
        raise ParseError("file is empty", path=path)

    first_line, first = rows[0]
    first = [cell.strip() for cell in first]
    if has_header is None:
        has_header = not all(_is_number(cell) for cell in first)
    if has_header:
        header = first
        body = rows[1:]
        if len(set(header)) != len(header):
            raise ParseError(f"duplicate column names in header {header}", path=path, line=first_line)
    else:
        header = [f"x{i + 1}" for i in range(len(first))]
        body = rows
    if not body:
        raise ParseError("no data rows", path=path)

    selected = _select_columns(header, cols, index_col, path)
    values = np.empty((len(body), len(selected)))
    for r, (line, row) in enumerate(body):
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} cells, found {len(row)}", path=path, line=line)
        for c, pos in enumerate(selected):
            cell = row[pos].strip()
            try:
                value = float(cell)
            except ValueError:
                raise ParseError(f"non-numeric cell {cell!r}", path=path, line=line, column=header[pos]) from None
            if not math.isfinite(value):
                raise ParseError(f"non-finite cell {cell!r}", path=path, line=line, column=header[pos])
            values[r, c] = value

    logger.info(f"Read {len(selected)} series of length {len(body)} from {path}")
    return [ScalarSeries(values=values[:, c], label=header[pos]) for c, pos in enumerate(selected)]


def write_series_csv(path: PathLike, series: Sequence[ScalarSeries], index_col: Optional[str] = "t") -> None:
    """Write series as columns with a header row; values use 17 significant digits."""
    lengths = {len(s) for s in series}
    if len(lengths) != 1:
        raise ValueError(f"series must share one length to be written together, got {sorted(lengths)}")
    length = lengths.pop()
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        header = [s.label for s in series]
        writer.writerow(([index_col] if index_col else []) + header)
        for t in range(length):
            cells = [_fmt(s.values[t]) for s in series]
            writer.writerow(([str(t)] if index_col else []) + cells)
    logger.info(f"Wrote {len(series)} series of length {length} to {path}")


def read_edges(path: PathLike) -> Set[Edge]:
    """Truth edges, one `src->dst` per line; blank lines and `#` comments are skipped."""
    path = str(path)
    edges: Set[Edge] = set()
    with open(path, encoding="utf-8") as f:
        for line_no, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = [p.strip() for p in line.split(EDGE_ARROW)]
            if len(parts) != 2 or not all(parts):
                raise ParseError(f"expected 'src{EDGE_ARROW}dst', got {line!r}", path=path, line=line_no)
            if parts[0] == parts[1]:
                raise ParseError(f"self-loop {line!r} is not a valid edge", path=path, line=line_no)
            edges.add((parts[0], parts[1]))
    return edges


def write_edges(path: PathLike, edges: Iterable[Edge]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for src, dst in sorted(edges):
            f.write(f"{src}{EDGE_ARROW}{dst}\n")


def read_scores(path: PathLike) -> Dict[Edge, float]:
    """
    Edge scores from a results JSON (slopes) or a `src,dst,score` CSV.

    Args:
        path: File written by `detect`/`network`, or a three-column CSV

    Returns:
        Score per ordered pair
    """
    path = str(path)
    if path.endswith(".json"):
        with open(path, encoding="utf-8") as f:
            payload = json.load(f)
        try:
            return {(r["cause"], r["effect"]): float(r["slope"]) for r in payload["results"]}
        except (KeyError, TypeError) as e:
            raise ParseError(f"not a results file: missing {e}", path=path) from None

    scores: Dict[Edge, float] = {}
    with open(path, newline="", encoding="utf-8") as f:
        for line_no, row in enumerate(csv.reader(f), start=1):
            if not row or not any(cell.strip() for cell in row):
                continue
            if len(row) != 3:
                raise ParseError(f"expected 3 cells, found {len(row)}", path=path, line=line_no)
            src, dst, cell = (c.strip() for c in row)
            try:
                scores[(src, dst)] = float(cell)
            except ValueError:
                if line_no == 1:
                    continue  # header
                raise ParseError(f"non-numeric score {cell!r}", path=path, line=line_no, column="score") from None
    return scores


def result_to_dict(result: CausalityResult) -> Dict[str, Any]:
    pvalue = result.pvalue
    return {
        "cause": result.cause,
        "effect": result.effect,
        "slope": result.slope,
        "intercept": result.fit.intercept,
        "p_value": result.p_value,
        "significant": result.significant,
        "surrogate_mean": pvalue.mean,
        "surrogate_std": pvalue.std,
        "surrogate_slopes": [float(s) for s in pvalue.surrogate_slopes],
        "cause_embedding": _params_dict(result.cause_embedding),
        "effect_embedding": _params_dict(result.effect_embedding),
        "theiler_window": result.theiler_window,
        "dd_condition": result.dd_condition,
        "n_included": result.curve.n_included,
        "n_times": result.curve.n_times,
    }


def _params_dict(params) -> Optional[Dict[str, int]]:
    if params is None:
        return None
    return {"dimension": params.dimension, "lag": params.lag}


def network_to_dict(network: CausalNetwork) -> Dict[str, Any]:
    return {
        "labels": list(network.labels),
        "results": [result_to_dict(network.results[edge]) for edge in sorted(network.results)],
        "errors": [
            {"cause": cause, "effect": effect, "message": message}
            for (cause, effect), message in sorted(network.errors.items())
        ],
    }


def roc_to_dict(roc: RocCurve) -> Dict[str, Any]:
    return {
        "auroc": roc.auroc,
        "false_positive_rate": [float(v) for v in roc.false_positive_rate],
        "true_positive_rate": [float(v) for v in roc.true_positive_rate],
        # the first threshold is +inf, which JSON cannot carry
        "thresholds": [float(t) if math.isfinite(t) else None for t in roc.thresholds],
    }


def write_json(path: PathLike, payload: Dict[str, Any]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, allow_nan=False)
        f.write("\n")
    logger.info(f"Wrote {path}")


CURVE_COLUMNS = ("j", "eps", "ln_eps", "mean_delta", "populated", "neighbor_pairs", "in_fit", "slope", "intercept")


def write_curve_dump(path: PathLike, result: CausalityResult) -> None:
    """One row per radius: 1-based j, eps, ln eps, <delta>, counts and fit membership."""
    curve, fit = result.curve, result.fit
    in_fit = set(fit.fit_indices)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(CURVE_COLUMNS)
        for j in range(curve.grid.count):
            writer.writerow([
                j + 1,
                _fmt(curve.grid.values[j]),
                _fmt(curve.log_eps[j]),
                _fmt(curve.deltas[j]),
                int(curve.populated[j]),
                int(curve.neighbor_pairs[j]),
                int(j in in_fit),
                _fmt(fit.slope),
                _fmt(fit.intercept),
            ])


def curve_dump_name(result: CausalityResult) -> str:
    return f"curve_{result.cause}__{result.effect}.csv"


def write_points_csv(path: PathLike, emb: EmbeddedSeries) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow([f"{emb.label}_{k}" for k in range(emb.params.dimension)])
        for point in emb.points:
            writer.writerow([_fmt(v) for v in point])


class InputRecord(BaseModel):
    path: str
    sha256: str
    columns: List[str]
    rows: int


class RunManifest(BaseModel):
    """Everything needed to repeat a run: effective flags, resolved config, inputs and versions."""

    command: str
    flags: Dict[str, Any]
    config: Dict[str, Any]
    inputs: List[InputRecord] = Field(default_factory=list)
    versions: Dict[str, str] = Field(default_factory=dict)
    started_at: str = ""
    elapsed_seconds: float = 0.0


def file_sha256(path: PathLike) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def package_versions() -> Dict[str, str]:
    versions = {"python": sys.version.split()[0], "platform": platform.platform()}
    for name in TRACKED_PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "not installed"
    return versions


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


def input_record(path: PathLike, series: Sequence[ScalarSeries]) -> InputRecord:
    return InputRecord(
        path=str(Path(path).resolve()),
        sha256=file_sha256(path),
        columns=[s.label for s in series],
        rows=len(series[0]) if series else 0,
    )


def load_manifest(path: PathLike) -> RunManifest:
    """Manifest embedded in a results JSON file."""
    path = str(path)
    with open(path, encoding="utf-8") as f:
        payload = json.load(f)
    if "manifest" not in payload:
        raise ParseError("results file carries no manifest", path=path)
    return RunManifest.model_validate(payload["manifest"])


def write_table_csv(path: PathLike, records: Sequence[Dict[str, Any]]) -> None:
    """Flat records as CSV; floats use 17 significant digits, None is left empty."""
    if not records:
        raise ValueError("no records to write")
    columns = list(records[0])
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(columns)
        for record in records:
            writer.writerow([
                "" if record[c] is None else _fmt(record[c]) if isinstance(record[c], float) else record[c]
                for c in columns
            ])
    logger.info(f"Wrote {len(records)} rows to {path}")
