"""Input schemas, validated loading, and monthly interpolation of migrant stocks.

All inputs are UTF-8 CSV files with a mandatory header row (RFC-4180 quoting):

    economics.csv        country,year,gdp_per_capita,population,income_group
    stocks.csv           origin,destination,sex,anchor_year,count
    age_profiles.csv     sex,age,share
    surplus_profiles.csv country,age,surplus        (country may be GLOBAL_DEFAULT)
    disasters.csv        event_id,country,onset_month,hazard,affected
    panel.csv            sender,recipient,month,amount_usd

Loading either succeeds completely or raises :class:`DataValidationError`
naming the offending file, row and column; there are no partial loads.
The returned :class:`Dataset` is immutable and safe to share across threads.
"""
from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterator, Mapping, Sequence

import numpy as np

from .months import WINDOW_MONTHS, month_index, month_label, year_of

SEXES = ("male", "female")
INCOME_GROUPS = ("low", "lower-middle", "upper-middle", "high")
HAZARDS = ("drought", "earthquake", "flood", "storm")
ANCHOR_YEARS = (2010, 2015, 2020)
PANEL_YEARS = tuple(range(2010, 2020))
MAX_AGE = 100
N_AGES = MAX_AGE + 1
GLOBAL_SURPLUS = "GLOBAL_DEFAULT"
# EMDAT-style double counting can push `affected` past the population;
# beyond 10x it is treated as corrupt input.
AFFECTED_SANITY_FACTOR = 10.0

FILE_COLUMNS = {
    "economics.csv": ("country", "year", "gdp_per_capita", "population", "income_group"),
    "stocks.csv": ("origin", "destination", "sex", "anchor_year", "count"),
    "age_profiles.csv": ("sex", "age", "share"),
    "surplus_profiles.csv": ("country", "age", "surplus"),
    "disasters.csv": ("event_id", "country", "onset_month", "hazard", "affected"),
    "panel.csv": ("sender", "recipient", "month", "amount_usd"),
}


class DataValidationError(ValueError):
    """A schema or cross-reference violation in an input file."""


@dataclass(frozen=True)
class CountryEconomics:
    country: str
    year: int
    gdp_per_capita: float
    population: float
    income_group: str


@dataclass(frozen=True)
class MigrantStockRecord:
    origin: str
    destination: str
    sex: str
    anchor_year: int
    count: float


@dataclass(frozen=True)
class AgeProfile:
    sex: str
    age: int
    share: float


@dataclass(frozen=True)
class SurplusProfile:
    country: str
    age: int
    surplus: float


@dataclass(frozen=True)
class DisasterEvent:
    event_id: str
    country: str
    onset_month: int  # month index since 2010-01
    hazard: str
    affected: float


@dataclass(frozen=True)
class FlowObservation:
    sender: str
    recipient: str
    month: int  # month index since 2010-01
    amount_usd: float
    split_tag: str = "unassigned"


@dataclass(frozen=True)
class Dataset:
    """Everything the engine consumes, loaded and cross-checked."""

    economics: tuple[CountryEconomics, ...]
    stocks: tuple[MigrantStockRecord, ...]
    age_profiles: tuple[AgeProfile, ...]
    surplus_profiles: tuple[SurplusProfile, ...]
    disasters: tuple[DisasterEvent, ...]
    panel: tuple[FlowObservation, ...]

    @cached_property
    def gdp(self) -> Mapping[tuple[str, int], float]:
        return {(r.country, r.year): r.gdp_per_capita for r in self.economics}

    @cached_property
    def population(self) -> Mapping[tuple[str, int], float]:
        return {(r.country, r.year): r.population for r in self.economics}

    @cached_property
    def income_group(self) -> Mapping[tuple[str, int], str]:
        return {(r.country, r.year): r.income_group for r in self.economics}

    @cached_property
    def corridors(self) -> tuple[tuple[str, str], ...]:
        """Sorted (origin, destination) pairs present in the stock table."""
        return tuple(sorted({(r.origin, r.destination) for r in self.stocks}))

    @cached_property
    def stock_anchors(self) -> Mapping[tuple[str, str, str], dict[int, float]]:
        out: dict[tuple[str, str, str], dict[int, float]] = {}
        for r in self.stocks:
            out.setdefault((r.origin, r.destination, r.sex), {})[r.anchor_year] = r.count
        return out

    @cached_property
    def age_shares(self) -> Mapping[str, np.ndarray]:
        """Per-sex share vector over ages 0..100; unlisted ages are 0."""
        out = {}
        for sex in SEXES:
            v = np.zeros(N_AGES)
            for r in self.age_profiles:
                if r.sex == sex:
                    v[r.age] = r.share
            v.flags.writeable = False
            out[sex] = v
        return out

    @cached_property
    def surplus_by_country(self) -> Mapping[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for r in self.surplus_profiles:
            out.setdefault(r.country, np.zeros(N_AGES))[r.age] = r.surplus
        for v in out.values():
            v.flags.writeable = False
        return out

    def surplus_for(self, country: str) -> np.ndarray:
        """Destination surplus profile, falling back to GLOBAL_DEFAULT."""
        by = self.surplus_by_country
        if country in by:
            return by[country]
        return by[GLOBAL_SURPLUS]

    @cached_property
    def events_by_country(self) -> Mapping[str, tuple[DisasterEvent, ...]]:
        out: dict[str, list[DisasterEvent]] = {}
        for e in self.disasters:
            out.setdefault(e.country, []).append(e)
        return {c: tuple(evs) for c, evs in out.items()}

    def fingerprint(self) -> str:
        """SHA-256 over the canonical CSV serialization; used to detect mutation."""
        h = hashlib.sha256()
        for name, rows in _serialize_tables(self):
            h.update(name.encode())
            for row in rows:
                h.update(",".join(row).encode())
                h.update(b"\n")
        return h.hexdigest()


# ---------------------------------------------------------------------------
# Field parsing

def _err(path: Path, line: int, column: str, message: str) -> DataValidationError:
    return DataValidationError(f"{path.name}:{line}: column '{column}': {message}")


def _parse_float(path: Path, line: int, column: str, raw: str, *, minimum: float | None = None,
                 maximum: float | None = None, strict_min: bool = False) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise _err(path, line, column, f"not a number: {raw!r}") from None
    if not math.isfinite(value):
        raise _err(path, line, column, f"not finite: {raw!r}")
    if minimum is not None and (value < minimum or (strict_min and value == minimum)):
        bound = "> " if strict_min else ">= "
        raise _err(path, line, column, f"must be {bound}{minimum}, got {value}")
    if maximum is not None and value > maximum:
        raise _err(path, line, column, f"must be <= {maximum}, got {value}")
    return value


def _parse_int(path: Path, line: int, column: str, raw: str, *, minimum: int | None = None,
               maximum: int | None = None) -> int:
    try:
        value = int(raw)
    except ValueError:
        raise _err(path, line, column, f"not an integer: {raw!r}") from None
    if minimum is not None and value < minimum:
        raise _err(path, line, column, f"must be >= {minimum}, got {value}")
    if maximum is not None and value > maximum:
        raise _err(path, line, column, f"must be <= {maximum}, got {value}")
    return value


def _parse_country(path: Path, line: int, column: str, raw: str, *, allow_global: bool = False) -> str:
    if allow_global and raw == GLOBAL_SURPLUS:
        return raw
    if len(raw) != 3 or not raw.isalpha() or not raw.isupper():
        raise _err(path, line, column, f"not an ISO-3166 alpha-3 code: {raw!r}")
    return raw


def _parse_enum(path: Path, line: int, column: str, raw: str, allowed: Sequence[str]) -> str:
    if raw not in allowed:
        raise _err(path, line, column, f"{raw!r} not one of {'/'.join(allowed)}")
    return raw


def _parse_month(path: Path, line: int, column: str, raw: str) -> int:
    try:
        return month_index(raw)
    except ValueError as exc:
        raise _err(path, line, column, str(exc)) from None


def _read_rows(path: Path) -> Iterator[tuple[int, dict[str, str]]]:
    columns = FILE_COLUMNS[path.name]
    if not path.exists():
        raise DataValidationError(f"{path.name}: file not found at {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DataValidationError(f"{path.name}: empty file, expected header {','.join(columns)}")
        if tuple(reader.fieldnames) != columns:
            raise DataValidationError(
                f"{path.name}: header {','.join(reader.fieldnames)} does not match "
                f"required {','.join(columns)}")
        for line, row in enumerate(reader, start=2):
            if None in row or any(v is None for v in row.values()):
                raise DataValidationError(f"{path.name}:{line}: wrong number of fields")
            yield line, row


# ---------------------------------------------------------------------------
# Per-file loaders

def _load_economics(path: Path) -> tuple[CountryEconomics, ...]:
    rows: list[CountryEconomics] = []
    seen: set[tuple[str, int]] = set()
    for line, r in _read_rows(path):
        rec = CountryEconomics(
            country=_parse_country(path, line, "country", r["country"]),
            year=_parse_int(path, line, "year", r["year"], minimum=1900, maximum=2100),
            gdp_per_capita=_parse_float(path, line, "gdp_per_capita", r["gdp_per_capita"],
                                        minimum=0.0, strict_min=True),
            population=_parse_float(path, line, "population", r["population"],
                                    minimum=0.0, strict_min=True),
            income_group=_parse_enum(path, line, "income_group", r["income_group"], INCOME_GROUPS),
        )
        key = (rec.country, rec.year)
        if key in seen:
            raise _err(path, line, "country", f"duplicate row for {key}")
        seen.add(key)
        rows.append(rec)
    return tuple(rows)


def _load_stocks(path: Path) -> tuple[MigrantStockRecord, ...]:
    rows: list[MigrantStockRecord] = []
    seen: set[tuple[str, str, str, int]] = set()
    for line, r in _read_rows(path):
        rec = MigrantStockRecord(
            origin=_parse_country(path, line, "origin", r["origin"]),
            destination=_parse_country(path, line, "destination", r["destination"]),
            sex=_parse_enum(path, line, "sex", r["sex"], SEXES),
            anchor_year=_parse_int(path, line, "anchor_year", r["anchor_year"]),
            count=_parse_float(path, line, "count", r["count"], minimum=0.0),
        )
        if rec.anchor_year not in ANCHOR_YEARS:
            raise _err(path, line, "anchor_year",
                       f"must be one of {ANCHOR_YEARS}, got {rec.anchor_year}")
        if rec.origin == rec.destination:
            raise _err(path, line, "destination", f"origin equals destination ({rec.origin})")
        key = (rec.origin, rec.destination, rec.sex, rec.anchor_year)
        if key in seen:
            raise _err(path, line, "anchor_year", f"duplicate anchor for {key[:3]}")
        seen.add(key)
        rows.append(rec)
    # anchor-year completeness per (origin, destination, sex)
    anchors: dict[tuple[str, str, str], set[int]] = {}
    for rec in rows:
        anchors.setdefault((rec.origin, rec.destination, rec.sex), set()).add(rec.anchor_year)
    for (o, d, s), years in sorted(anchors.items()):
        missing = sorted(set(ANCHOR_YEARS) - years)
        if missing:
            raise DataValidationError(
                f"{path.name}: corridor {o}->{d} sex {s} missing anchor year(s) {missing}")
    return tuple(rows)


def _load_age_profiles(path: Path) -> tuple[AgeProfile, ...]:
    rows: list[AgeProfile] = []
    seen: set[tuple[str, int]] = set()
    sums: dict[str, float] = {}
    for line, r in _read_rows(path):
        rec = AgeProfile(
            sex=_parse_enum(path, line, "sex", r["sex"], SEXES),
            age=_parse_int(path, line, "age", r["age"], minimum=0, maximum=MAX_AGE),
            share=_parse_float(path, line, "share", r["share"], minimum=0.0, maximum=1.0),
        )
        key = (rec.sex, rec.age)
        if key in seen:
            raise _err(path, line, "age", f"duplicate row for {key}")
        seen.add(key)
        sums[rec.sex] = sums.get(rec.sex, 0.0) + rec.share
        rows.append(rec)
    for sex, total in sorted(sums.items()):
        if abs(total - 1.0) > 1e-9:
            raise DataValidationError(
                f"{path.name}: shares for sex {sex} sum to {total!r}, expected 1 +/- 1e-9")
    return tuple(rows)


def _load_surplus_profiles(path: Path) -> tuple[SurplusProfile, ...]:
    rows: list[SurplusProfile] = []
    seen: set[tuple[str, int]] = set()
    for line, r in _read_rows(path):
        rec = SurplusProfile(
            country=_parse_country(path, line, "country", r["country"], allow_global=True),
            age=_parse_int(path, line, "age", r["age"], minimum=0, maximum=MAX_AGE),
            surplus=_parse_float(path, line, "surplus", r["surplus"], minimum=0.0),
        )
        if rec.age < 16 and rec.surplus != 0.0:
            raise _err(path, line, "surplus", f"must be 0 below age 16, got {rec.surplus} at age {rec.age}")
        key = (rec.country, rec.age)
        if key in seen:
            raise _err(path, line, "age", f"duplicate row for {key}")
        seen.add(key)
        rows.append(rec)
    by_country: dict[str, set[int]] = {}
    for rec in rows:
        by_country.setdefault(rec.country, set()).add(rec.age)
    for country, ages in sorted(by_country.items()):
        missing = sorted(set(range(N_AGES)) - ages)
        if missing:
            raise DataValidationError(
                f"{path.name}: profile {country} missing age(s) {missing[:5]}"
                f"{'...' if len(missing) > 5 else ''}; every age 0-100 is required")
    return tuple(rows)


def _load_disasters(path: Path, population: Mapping[tuple[str, int], float]) -> tuple[DisasterEvent, ...]:
    rows: list[DisasterEvent] = []
    seen: set[str] = set()
    for line, r in _read_rows(path):
        rec = DisasterEvent(
            event_id=r["event_id"],
            country=_parse_country(path, line, "country", r["country"]),
            onset_month=_parse_month(path, line, "onset_month", r["onset_month"]),
            hazard=_parse_enum(path, line, "hazard", r["hazard"], HAZARDS),
            affected=_parse_float(path, line, "affected", r["affected"], minimum=0.0),
        )
        if not rec.event_id:
            raise _err(path, line, "event_id", "must be non-empty")
        if rec.event_id in seen:
            raise _err(path, line, "event_id", f"duplicate event_id {rec.event_id!r}")
        seen.add(rec.event_id)
        onset_year = year_of(rec.onset_month)
        pop = population.get((rec.country, onset_year))
        if pop is None:
            raise _err(path, line, "country",
                       f"no economics row for {rec.country} in onset year {onset_year}")
        if rec.affected > AFFECTED_SANITY_FACTOR * pop:
            raise _err(path, line, "affected",
                       f"{rec.affected} exceeds {AFFECTED_SANITY_FACTOR:g}x the population of "
                       f"{rec.country} in {onset_year} ({pop})")
        rows.append(rec)
    return tuple(rows)


def _load_panel(path: Path) -> tuple[FlowObservation, ...]:
    rows: list[FlowObservation] = []
    seen: set[tuple[str, str, int]] = set()
    for line, r in _read_rows(path):
        rec = FlowObservation(
            sender=_parse_country(path, line, "sender", r["sender"]),
            recipient=_parse_country(path, line, "recipient", r["recipient"]),
            month=_parse_month(path, line, "month", r["month"]),
            amount_usd=_parse_float(path, line, "amount_usd", r["amount_usd"], minimum=0.0),
        )
        key = (rec.sender, rec.recipient, rec.month)
        if key in seen:
            raise _err(path, line, "month",
                       f"duplicate observation for {rec.sender}->{rec.recipient} {month_label(rec.month)}")
        seen.add(key)
        rows.append(rec)
    return tuple(rows)


# ---------------------------------------------------------------------------
# Dataset assembly

def load_dataset(data_dir: str | Path) -> Dataset:
    """Load and cross-validate all six input files from ``data_dir``.

    Raises :class:`DataValidationError` on the first violation; nothing is
    returned partially loaded.
    """
    data_dir = Path(data_dir)
    economics = _load_economics(data_dir / "economics.csv")
    stocks = _load_stocks(data_dir / "stocks.csv")
    age_profiles = _load_age_profiles(data_dir / "age_profiles.csv")
    surplus_profiles = _load_surplus_profiles(data_dir / "surplus_profiles.csv")
    population = {(r.country, r.year): r.population for r in economics}
    disasters = _load_disasters(data_dir / "disasters.csv", population)
    panel = _load_panel(data_dir / "panel.csv")

    dataset = Dataset(economics=economics, stocks=stocks, age_profiles=age_profiles,
                      surplus_profiles=surplus_profiles, disasters=disasters, panel=panel)
    _check_cross_references(dataset)
    return dataset


def _check_cross_references(ds: Dataset) -> None:
    econ_years: dict[str, set[int]] = {}
    for r in ds.economics:
        econ_years.setdefault(r.country, set()).add(r.year)

    # Modeled countries need GDP and population for every simulated year.
    modeled = {r.origin for r in ds.stocks} | {r.destination for r in ds.stocks}
    modeled |= {e.country for e in ds.disasters}
    for country in sorted(modeled):
        have = econ_years.get(country, set())
        missing = sorted(set(PANEL_YEARS) - have)
        if missing:
            raise DataValidationError(
                f"economics.csv: unknown country code or missing years for {country}: "
                f"needs every year {PANEL_YEARS[0]}-{PANEL_YEARS[-1]}, missing {missing}")

    sexes_in_stocks = {r.sex for r in ds.stocks}
    profiled = {r.sex for r in ds.age_profiles}
    for sex in sorted(sexes_in_stocks - profiled):
        raise DataValidationError(f"age_profiles.csv: no profile for sex {sex} present in stocks.csv")

    have_surplus = set(ds.surplus_by_country)
    if GLOBAL_SURPLUS not in have_surplus:
        destinations = {r.destination for r in ds.stocks}
        uncovered = sorted(destinations - have_surplus)
        if uncovered:
            raise DataValidationError(
                f"surplus_profiles.csv: no {GLOBAL_SURPLUS} profile and no profile for "
                f"destination(s) {uncovered}")


# ---------------------------------------------------------------------------
# Writing (round-trip support and fixture generation)

def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _serialize_tables(ds: Dataset) -> list[tuple[str, list[list[str]]]]:
    tables: list[tuple[str, list[list[str]]]] = []
    tables.append(("economics.csv", [
        [r.country, str(r.year), _fmt(r.gdp_per_capita), _fmt(r.population), r.income_group]
        for r in ds.economics]))
    tables.append(("stocks.csv", [
        [r.origin, r.destination, r.sex, str(r.anchor_year), _fmt(r.count)] for r in ds.stocks]))
    tables.append(("age_profiles.csv", [
        [r.sex, str(r.age), _fmt(r.share)] for r in ds.age_profiles]))
    tables.append(("surplus_profiles.csv", [
        [r.country, str(r.age), _fmt(r.surplus)] for r in ds.surplus_profiles]))
    tables.append(("disasters.csv", [
        [r.event_id, r.country, month_label(r.onset_month), r.hazard, _fmt(r.affected)]
        for r in ds.disasters]))
    tables.append(("panel.csv", [
        [r.sender, r.recipient, month_label(r.month), _fmt(r.amount_usd)] for r in ds.panel]))
    return tables


def write_dataset(ds: Dataset, data_dir: str | Path) -> list[Path]:
    """Write the dataset back to its six CSV files; reloading yields an equal Dataset."""
    data_dir = Path(data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, rows in _serialize_tables(ds):
        path = data_dir / name
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(FILE_COLUMNS[name])
            writer.writerows(rows)
        written.append(path)
    return written


# ---------------------------------------------------------------------------
# Monthly interpolation of quinquennial stocks

def _natural_cubic_second_derivs(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Second derivatives of the natural cubic spline through (x, y).

    Natural boundary conditions: second derivative zero at both ends.
    Interior values come from the standard tridiagonal system, solved with
    the Thomas algorithm.
    """
    n = len(x)
    m = np.zeros(n)
    if n < 3:
        return m
    h = np.diff(x)
    # system rows i = 1..n-2:  h[i-1] m[i-1] + 2(h[i-1]+h[i]) m[i] + h[i] m[i+1] = rhs
    rhs = 6.0 * ((y[2:] - y[1:-1]) / h[1:] - (y[1:-1] - y[:-2]) / h[:-1])
    diag = 2.0 * (h[:-1] + h[1:]).copy()
    lower = h[:-1].copy()
    upper = h[1:].copy()
    k = n - 2
    for i in range(1, k):
        w = lower[i] / diag[i - 1]
        diag[i] -= w * upper[i - 1]
        rhs[i] -= w * rhs[i - 1]
    sol = np.zeros(k)
    sol[-1] = rhs[-1] / diag[-1]
    for i in range(k - 2, -1, -1):
        sol[i] = (rhs[i] - upper[i] * sol[i + 1]) / diag[i]
    m[1:-1] = sol
    return m


def _eval_natural_cubic(x: np.ndarray, y: np.ndarray, m: np.ndarray, xq: np.ndarray) -> np.ndarray:
    idx = np.clip(np.searchsorted(x, xq, side="right") - 1, 0, len(x) - 2)
    xl, xu = x[idx], x[idx + 1]
    yl, yu = y[idx], y[idx + 1]
    ml, mu = m[idx], m[idx + 1]
    h = xu - xl
    a, b = xu - xq, xq - xl
    out = (ml * a**3 + mu * b**3) / (6.0 * h) + (yl / h - h * ml / 6.0) * a + (yu / h - h * mu / 6.0) * b
    # queries that land on a node return the anchor exactly
    out = np.where(b == 0.0, yl, out)
    out = np.where(a == 0.0, yu, out)
    return out


def interpolate_stocks_monthly(stocks: Sequence[MigrantStockRecord]) -> dict[tuple[str, str, str], np.ndarray]:
    """Natural cubic spline through the three anchors, evaluated monthly.

    Anchors sit at January 2010/2015/2020; the returned series covers the
    120 window months and is clamped at zero. At anchor months the series
    equals the anchor exactly.
    """
    anchors: dict[tuple[str, str, str], dict[int, float]] = {}
    for r in stocks:
        anchors.setdefault((r.origin, r.destination, r.sex), {})[r.anchor_year] = r.count
    nodes = np.array([(y - 2010) * 12.0 for y in ANCHOR_YEARS])
    months = np.arange(WINDOW_MONTHS, dtype=float)
    out: dict[tuple[str, str, str], np.ndarray] = {}
    for key, by_year in anchors.items():
        missing = sorted(set(ANCHOR_YEARS) - set(by_year))
        if missing:
            raise DataValidationError(f"corridor {key[0]}->{key[1]} sex {key[2]} missing anchor year(s) {missing}")
        y = np.array([by_year[yr] for yr in ANCHOR_YEARS], dtype=float)
        m2 = _natural_cubic_second_derivs(nodes, y)
        series = np.maximum(_eval_natural_cubic(nodes, y, m2, months), 0.0)
        series.flags.writeable = False
        out[key] = series
    return out
