"""Readers and writers for panel, factor, coefficient and report files."""
import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from afm.storage import FLOAT_FORMAT, ensure_dir
from afm.models.panel_model import Panel
from afm.utils.errors import ParseError

logger = logging.getLogger(__name__)


def _write_frame(path, frame: pd.DataFrame, index: bool = False) -> Path:
    path = Path(path)
    ensure_dir(path.parent)
    try:
        frame.to_csv(path, index=index, float_format=FLOAT_FORMAT, lineterminator="\n", encoding="utf-8")
        logger.info(f"Wrote {path}")
        return path
    except OSError as e:
        logger.error(f"Error writing {path}: {e}")
        raise


def _read_frame(path, **kwargs) -> pd.DataFrame:
    path = Path(path)
    try:
        return pd.read_csv(path, float_precision="round_trip", encoding="utf-8", **kwargs)
    except FileNotFoundError as e:
        raise ParseError(path, "file not found") from e
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError, ValueError) as e:
        logger.error(f"Error reading {path}: {e}")
        raise ParseError(path, f"malformed CSV ({e})") from e


def _numeric(path, frame: pd.DataFrame, skip: Sequence[str] = ()) -> np.ndarray:
    """Numeric block of `frame`; the first bad cell is reported by file line and column name."""
    columns = [c for c in frame.columns if c not in skip]
    for column in columns:
        converted = pd.to_numeric(frame[column], errors="coerce")
        bad = converted.isna().to_numpy() | ~np.isfinite(converted.to_numpy(dtype=np.float64, na_value=np.nan))
        if bad.any():
            position = int(np.argmax(bad))
            # line 1 is the header
            raise ParseError(path, f"non-numeric value {frame[column].iloc[position]!r}", row=position + 2, column=column)
    return frame[columns].to_numpy(dtype=np.float64)


def write_panel_csv(path, panel: Panel) -> Path:
    """Header series_id,t1..tT; one row per series."""
    series, times = panel.labels()
    frame = pd.DataFrame(panel.values, columns=list(times))
    frame.insert(0, "series_id", list(series))
    return _write_frame(path, frame)


def read_panel_csv(path) -> Panel:
    frame = _read_frame(path, dtype={"series_id": str})
    if frame.shape[1] < 3 or frame.columns[0] != "series_id":
        raise ParseError(path, "expected header 'series_id,t1,...,tT' with at least two time columns", row=1)
    values = _numeric(path, frame, skip=("series_id",))
    try:
        return Panel(values=values, series_ids=tuple(frame["series_id"].astype(str)),
                     time_ids=tuple(str(c) for c in frame.columns[1:]))
    except ValueError as e:
        raise ParseError(path, str(e)) from e


def write_factors_csv(path, factors, prefix: str = "f") -> Path:
    """Header t,f1..fq; T rows."""
    values = np.asarray(getattr(factors, "values", factors), dtype=np.float64)
    frame = pd.DataFrame(values, columns=[f"{prefix}{l + 1}" for l in range(values.shape[1])])
    frame.insert(0, "t", np.arange(1, values.shape[0] + 1))
    return _write_frame(path, frame)


def read_factors_csv(path) -> np.ndarray:
    frame = _read_frame(path)
    if frame.shape[1] < 2 or frame.columns[0] != "t":
        raise ParseError(path, "expected header 't,f1,...,fq'", row=1)
    values = _numeric(path, frame, skip=("t",))
    if values.shape[0] < 1:
        raise ParseError(path, "no data rows")
    return values


def write_coeffs_csv(path, coeffs: np.ndarray, series_ids: Sequence[str]) -> Path:
    """One row per (series, factor): series_id, factor, b1..bd."""
    N, q, d = coeffs.shape
    frame = pd.DataFrame(coeffs.reshape(N * q, d), columns=[f"b{k + 1}" for k in range(d)])
    frame.insert(0, "factor", np.tile(np.arange(1, q + 1), N))
    frame.insert(0, "series_id", np.repeat(np.asarray(series_ids, dtype=object), q))
    return _write_frame(path, frame)


def read_coeffs_csv(path) -> Tuple[np.ndarray, List[str]]:
    frame = _read_frame(path, dtype={"series_id": str})
    if list(frame.columns[:2]) != ["series_id", "factor"] or frame.shape[1] < 6:
        raise ParseError(path, "expected header 'series_id,factor,b1,...,bd' with d >= 4", row=1)
    factor = _numeric(path, frame[["factor"]])[:, 0].astype(np.int64)
    values = _numeric(path, frame, skip=("series_id", "factor"))
    if factor.size == 0 or factor.min() < 1:
        raise ParseError(path, "factor numbers start at 1")
    q = int(factor.max())
    if values.shape[0] % q != 0 or not np.array_equal(factor, np.tile(np.arange(1, q + 1), values.shape[0] // q)):
        raise ParseError(path, "rows must list factors 1..q for each series in order")
    series_ids = list(frame["series_id"].astype(str).iloc[::q])
    return values.reshape(len(series_ids), q, values.shape[1]), series_ids


def write_ghat_grid_csv(path, values: np.ndarray, points: np.ndarray, series_ids: Sequence[str]) -> Path:
    """Long format series_id,factor,x,value for values of shape N x q x P."""
    N, q, P = values.shape
    frame = pd.DataFrame({
        "series_id": np.repeat(np.asarray(series_ids, dtype=object), q * P),
        "factor": np.tile(np.repeat(np.arange(1, q + 1), P), N),
        "x": np.tile(points, N * q),
        "value": values.ravel(),
    })
    return _write_frame(path, frame)


def write_frame_csv(path, frame: pd.DataFrame) -> Path:
    return _write_frame(path, frame)


def read_series_csv(path) -> np.ndarray:
    """First numeric column of a CSV with a header row (e.g. an index level or return series)."""
    frame = _read_frame(path)
    for column in frame.columns:
        converted = pd.to_numeric(frame[column], errors="coerce")
        if converted.notna().all() and len(converted) > 0:
            return converted.to_numpy(dtype=np.float64)
    raise ParseError(path, "no fully numeric column found")


def write_json(path, document: Dict[str, Any]) -> Path:
    path = Path(path)
    ensure_dir(path.parent)
    try:
        path.write_text(json.dumps(document, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        logger.info(f"Wrote {path}")
        return path
    except OSError as e:
        logger.error(f"Error writing {path}: {e}")
        raise


def read_json(path) -> Dict[str, Any]:
    path = Path(path)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise ParseError(path, "file not found") from e
    except json.JSONDecodeError as e:
        raise ParseError(path, f"malformed JSON ({e.msg})", row=e.lineno, column=e.colno) from e


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def checksums(paths: Sequence[Path], root: Optional[Path] = None) -> Dict[str, str]:
    return {(p.relative_to(root) if root else p).as_posix(): sha256_file(p) for p in paths}
