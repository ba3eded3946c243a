"""CSV readers and writers for prices, ensembles and result tables."""

from __future__ import annotations

import csv
import datetime as dt
import math
from collections import defaultdict
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from bessbench.core import DEFAULT_HOURS, PriceDay, ScenarioEnsemble

DST_HINT = (
    "if this is a daylight-saving transition day, pre-process the file first: "
    "duplicate the missing hour on 23-hour days and drop the repeated hour on 25-hour days"
)


class PriceFileError(ValueError):
    """Malformed price or ensemble file; the message carries file and line."""


def _fmt(x: float) -> str:
    return repr(float(x))


def load_price_csv(path, hours: int = DEFAULT_HOURS) -> list[PriceDay]:
    """Read ``date,hour,price`` rows into one ``PriceDay`` per date, sorted by date."""
    path = Path(path)
    days: dict[dt.date, dict[int, float]] = defaultdict(dict)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["date", "hour", "price"]:
            raise PriceFileError(f"{path}:1: expected header 'date,hour,price', got {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise PriceFileError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
            try:
                date = dt.date.fromisoformat(row[0].strip())
                hour = int(row[1])
                price = float(row[2])
            except ValueError as exc:
                raise PriceFileError(f"{path}:{lineno}: cannot parse row {row!r} ({exc})") from None
            if not 0 <= hour < hours:
                raise PriceFileError(f"{path}:{lineno}: hour {hour} outside 0..{hours - 1}; {DST_HINT}")
            if not math.isfinite(price):
                raise PriceFileError(f"{path}:{lineno}: non-finite price {row[2]!r}")
            if hour in days[date]:
                raise PriceFileError(f"{path}:{lineno}: duplicate entry for {date.isoformat()} hour {hour}; {DST_HINT}")
            days[date][hour] = price
    out = []
    for date in sorted(days):
        missing = [h for h in range(hours) if h not in days[date]]
        if missing:
            raise PriceFileError(f"{path}: {date.isoformat()} is missing hour(s) {missing}; {DST_HINT}")
        out.append(PriceDay(np.array([days[date][h] for h in range(hours)]), date))
    return out


def write_price_csv(path, days: Iterable[PriceDay]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "hour", "price"])
        for d in days:
            tag = d.date_tag.isoformat() if hasattr(d.date_tag, "isoformat") else d.date_tag
            for h, p in enumerate(d.prices):
                w.writerow([tag, h, _fmt(p)])


def write_ensemble_csv(path, ensembles: Iterable[ScenarioEnsemble]) -> None:
    """Long format ``date,member,hour,price``."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "member", "hour", "price"])
        for ens in ensembles:
            tag = ens.date_tag.isoformat() if hasattr(ens.date_tag, "isoformat") else ens.date_tag
            for m, row in enumerate(ens.paths):
                for h, p in enumerate(row):
                    w.writerow([tag, m, h, _fmt(p)])


def load_ensemble_csv(path) -> dict[dt.date, ScenarioEnsemble]:
    path = Path(path)
    cells: dict[dt.date, dict[tuple[int, int], float]] = defaultdict(dict)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["date", "member", "hour", "price"]:
            raise PriceFileError(f"{path}:1: expected header 'date,member,hour,price', got {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                date = dt.date.fromisoformat(row[0].strip())
                key = (int(row[1]), int(row[2]))
                price = float(row[3])
            except (ValueError, IndexError) as exc:
                raise PriceFileError(f"{path}:{lineno}: cannot parse row {row!r} ({exc})") from None
            if key in cells[date]:
                raise PriceFileError(f"{path}:{lineno}: duplicate member/hour {key} on {date.isoformat()}")
            cells[date][key] = price
    out = {}
    for date, c in sorted(cells.items()):
        n_m = 1 + max(k[0] for k in c)
        n_h = 1 + max(k[1] for k in c)
        if len(c) != n_m * n_h:
            raise PriceFileError(f"{path}: ensemble for {date.isoformat()} is not a full {n_m}x{n_h} grid")
        arr = np.empty((n_m, n_h))
        for (m, h), p in c.items():
            arr[m, h] = p
        out[date] = ScenarioEnsemble(arr, date)
    return out


def write_rows(path, header: Sequence[str], rows: Iterable[Sequence], meta: Mapping[str, str] | None = None) -> None:
    """Write a CSV table; floats use ``repr`` so reruns are byte-identical.

    ``meta`` entries become leading ``# key=value`` lines, which
    :func:`read_rows` skips.
    """
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        for key, value in (meta or {}).items():
            fh.write(f"# {key}={value}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return "" if math.isnan(v) else _fmt(v)
    if isinstance(v, (dt.date,)):
        return v.isoformat()
    if isinstance(v, (np.integer,)):
        return int(v)
    return v


def read_rows(path) -> list[Mapping[str, str]]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(ln for ln in fh if not ln.startswith("#")))


def read_meta(path) -> dict[str, str]:
    """The ``# key=value`` header lines written by :func:`write_rows`."""
    out = {}
    with Path(path).open(encoding="utf-8") as fh:
        for ln in fh:
            if not ln.startswith("#"):
                break
            key, _, value = ln[1:].strip().partition("=")
            out[key] = value
    return out
