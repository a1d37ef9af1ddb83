"""CSV file formats: donors, distances, daily values, clusters, day records, sweeps."""

import math
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple

import pandas as pd
from pydantic import ValidationError

from core.exceptions import ParseError
from core.geo import DistanceMatrix
from models.schemas import Cluster, DayRecord, Donor, SweepRow

DONOR_COLUMNS = ["id", "name", "category", "sqft", "lat", "lon", "dist_km"]
DISTANCE_COLUMNS = ["from_id", "to_id", "km"]
DAILY_VALUE_COLUMNS = ["donor_id", "date", "lbs"]
CLUSTER_COLUMNS = ["cluster_index", "donor_id", "cluster_cost_km"]
DAY_COLUMNS = ["day", "total_demand", "net_demand", "recovered", "cost_km", "excess", "warehouse", "underrun",
               "optimal"]
SWEEP_METRICS = ["mean_cost_km", "mean_excess_lbs", "underrun_days", "mean_recovered_lbs"]


def _num(value: float) -> str:
    """Shortest repr that round-trips."""
    return repr(float(value))


def _flag(value: bool) -> str:
    return "true" if value else "false"


def _write(path, frame: pd.DataFrame) -> str:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator="\n", encoding="utf-8")
    return str(path)


def _read(path, columns: Sequence[str], module: str) -> pd.DataFrame:
    """Read all cells as strings and check the header. Data line numbers are row index + 2."""
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except FileNotFoundError:
        raise ParseError(module, "file not found", path=str(path)) from None
    except pd.errors.EmptyDataError:
        raise ParseError(module, "file is empty", path=str(path), line=1) from None
    except (pd.errors.ParserError, UnicodeDecodeError) as e:
        raise ParseError(module, f"unreadable CSV: {e}", path=str(path)) from None
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise ParseError(module, f"missing columns {missing}; expected header {','.join(columns)}",
                         path=str(path), line=1)
    if frame.empty:
        raise ParseError(module, "no data rows", path=str(path), line=2)
    return frame


def _float(text: str, field: str, module: str, path, line: int, optional: bool = False):
    text = text.strip()
    if text == "":
        if optional:
            return None
        raise ParseError(module, f"missing value for '{field}'", path=str(path), line=line)
    try:
        value = float(text)
    except ValueError:
        raise ParseError(module, f"'{field}' is not a number: {text!r}", path=str(path), line=line) from None
    if not math.isfinite(value):
        raise ParseError(module, f"'{field}' is not finite: {text!r}", path=str(path), line=line)
    return value


# --- donors ------------------------------------------------------------------


def load_donors(path) -> List[Donor]:
    frame = _read(path, DONOR_COLUMNS, "supply")
    donors: List[Donor] = []
    seen = set()
    for idx, row in frame.iterrows():
        line = int(idx) + 2
        donor_id = row["id"].strip()
        if donor_id in seen:
            raise ParseError("supply", f"duplicate donor id '{donor_id}'", path=str(path), line=line)
        seen.add(donor_id)
        try:
            donors.append(Donor(
                id=donor_id,
                name=row["name"].strip(),
                category=row["category"].strip().lower(),
                square_footage=_float(row["sqft"], "sqft", "supply", path, line, optional=True),
                latitude=_float(row["lat"], "lat", "supply", path, line, optional=True),
                longitude=_float(row["lon"], "lon", "supply", path, line, optional=True),
                distance_from_warehouse=_float(row["dist_km"], "dist_km", "supply", path, line, optional=True),
            ))
        except ValidationError as e:
            detail = "; ".join(f"{'.'.join(map(str, err['loc']))}: {err['msg']}" for err in e.errors())
            raise ParseError("supply", detail, path=str(path), line=line) from None
    return donors


def save_donors(path, donors: Iterable[Donor]) -> str:
    """Write donors.csv; returns its digest."""
    def opt(v):
        return "" if v is None else _num(v)

    rows = [[d.id, d.name, d.category.value, opt(d.square_footage), opt(d.latitude), opt(d.longitude),
             opt(d.distance_from_warehouse)] for d in donors]
    return _write(path, pd.DataFrame(rows, columns=DONOR_COLUMNS))


# --- distances ---------------------------------------------------------------


def load_distance_pairs(path) -> Dict[Tuple[str, str], float]:
    frame = _read(path, DISTANCE_COLUMNS, "geo")
    pairs: Dict[Tuple[str, str], float] = {}
    for idx, row in frame.iterrows():
        line = int(idx) + 2
        km = _float(row["km"], "km", "geo", path, line)
        if km < 0:
            raise ParseError("geo", f"negative distance {km}", path=str(path), line=line)
        pairs[(row["from_id"].strip(), row["to_id"].strip())] = km
    return pairs


def save_distance_matrix(path, matrix: DistanceMatrix) -> str:
    """Off-diagonal pairs as `from_id,to_id,km`."""
    rows = [[a, b, _num(km)] for a, b, km in matrix.pairs() if a != b]
    return _write(path, pd.DataFrame(rows, columns=DISTANCE_COLUMNS))


# --- daily supply records ----------------------------------------------------


def load_daily_values(path) -> pd.DataFrame:
    """Rows of `donor_id,date,lbs`; lbs parsed to float and checked non-negative."""
    frame = _read(path, DAILY_VALUE_COLUMNS, "evt")
    values = []
    for idx, row in frame.iterrows():
        line = int(idx) + 2
        if not row["donor_id"].strip():
            raise ParseError("evt", "missing donor_id", path=str(path), line=line)
        lbs = _float(row["lbs"], "lbs", "evt", path, line)
        if lbs < 0:
            raise ParseError("evt", f"negative weight {lbs}", path=str(path), line=line)
        values.append(lbs)
    out = frame[DAILY_VALUE_COLUMNS].copy()
    out["donor_id"] = out["donor_id"].str.strip()
    out["lbs"] = values
    return out


def save_qq_pairs(path, pairs: Sequence[Tuple[float, float]]) -> str:
    """Theoretical against empirical quantiles."""
    rows = [[_num(t), _num(e)] for t, e in pairs]
    return _write(path, pd.DataFrame(rows, columns=["theoretical", "empirical"]))


# --- outputs -----------------------------------------------------------------


def save_clusters(path, clusters: Sequence[Cluster]) -> str:
    """One row per cluster member."""
    rows = [[str(i), member, _num(c.cost if c.cost is not None else math.nan)]
            for i, c in enumerate(clusters) for member in c.member_ids]
    return _write(path, pd.DataFrame(rows, columns=CLUSTER_COLUMNS))


def save_day_records(path, records: Sequence[DayRecord]) -> str:
    """Write days.csv."""
    rows = [[str(r.day), _num(r.total_demand), _num(r.net_demand), _num(r.recovered), _num(r.cost), _num(r.excess),
             _num(r.warehouse_stock), _flag(r.underrun), _flag(r.optimality_proven)] for r in records]
    return _write(path, pd.DataFrame(rows, columns=DAY_COLUMNS))


def load_day_records(path) -> List[DayRecord]:
    frame = _read(path, DAY_COLUMNS, "sim")
    return [
        DayRecord(
            day=int(row["day"]),
            total_demand=float(row["total_demand"]),
            net_demand=float(row["net_demand"]),
            recovered=float(row["recovered"]),
            cost=float(row["cost_km"]),
            excess=float(row["excess"]),
            warehouse_stock=float(row["warehouse"]),
            underrun=row["underrun"] == "true",
            optimality_proven=row["optimal"] == "true",
        )
        for _, row in frame.iterrows()
    ]


def save_sweep(path, rows: Sequence[SweepRow]) -> str:
    """Long format: one column per varied parameter, then the metrics."""
    params = list(rows[0].params) if rows else []
    table = [[_num(r.params[p]) for p in params]
             + [_num(r.mean_cost), _num(r.mean_excess), str(r.underrun_days), _num(r.mean_recovered)]
             for r in rows]
    return _write(path, pd.DataFrame(table, columns=params + SWEEP_METRICS))
