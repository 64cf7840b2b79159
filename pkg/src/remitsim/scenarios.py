"""Counterfactual runs and disaster attribution.

The counterfactual re-runs the identical parameterized model with a filtered
event set; differences against the factual run isolate disaster-induced
flows. Because the logistic is nonlinear, per-hazard effects are not
additive; the interaction residual is always reported, never hidden.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .behavior import BehaviorParams, DISASTER_WINDOW
from .dataio import Dataset, HAZARDS
from .engine import (SimulationContext, scenario_none, scenario_only_event,
                     scenario_only_hazard, scenario_without_hazard)
from .months import year_of


@dataclass(frozen=True)
class ScenarioResult:
    """Paired factual/counterfactual flow grids plus their difference."""

    scenario_id: str
    corridors: tuple[tuple[str, str], ...]
    months: tuple[int, ...]
    factual: np.ndarray  # (n_corridors, n_months), USD
    counterfactual: np.ndarray
    induced: np.ndarray

    def total_induced(self) -> float:
        return float(self.induced.sum())

    def total_factual(self) -> float:
        return float(self.factual.sum())


@dataclass(frozen=True)
class HazardAttribution:
    hazard: str
    induced_usd: float
    affected_persons: float
    usd_per_affected: float | None  # None when nobody was affected


@dataclass(frozen=True)
class AttributionReport:
    convention: str  # only_hazard | leave_one_out
    per_hazard: tuple[HazardAttribution, ...]
    total_induced: float
    total_factual: float
    interaction_residual: float  # total induced minus the per-hazard sum
    share_of_total: float


@dataclass(frozen=True)
class EventAttribution:
    event_id: str
    months: tuple[int, ...]  # the up-to-12 window months after onset
    induced_by_corridor: Mapping[tuple[str, str], float]
    induced_usd_12m: float
    baseline_usd_12m: float
    relative_increase: float | None


def _context(dataset: Dataset | SimulationContext) -> SimulationContext:
    return dataset if isinstance(dataset, SimulationContext) else SimulationContext(dataset)


def run_counterfactual(dataset: Dataset | SimulationContext, params: BehaviorParams,
                       scenario_id: str = "no_disaster",
                       active_ids: frozenset | None = None) -> ScenarioResult:
    """Factual (all events) versus a counterfactual with only ``active_ids``.

    The default empty filter is the no-disaster scenario.
    """
    ctx = _context(dataset)
    if active_ids is None:
        active_ids = scenario_none()
    win = ctx.window
    factual = ctx.expected_flows(params, None)[:, win]
    counter = ctx.expected_flows(params, active_ids)[:, win]
    return ScenarioResult(scenario_id=scenario_id, corridors=ctx.corridors,
                          months=tuple(ctx.window_months), factual=factual,
                          counterfactual=counter, induced=factual - counter)


def attribute_by_hazard(dataset: Dataset | SimulationContext, params: BehaviorParams,
                        convention: str = "only_hazard") -> AttributionReport:
    """Per-hazard induced totals under the chosen isolation convention.

    only_hazard: flows(only h) - flows(none). leave_one_out: flows(all) -
    flows(all but h).
    """
    if convention not in ("only_hazard", "leave_one_out"):
        raise ValueError(f"unknown convention {convention!r}")
    ctx = _context(dataset)
    win = ctx.window
    full = ctx.expected_flows(params, None)[:, win].sum()
    base = ctx.expected_flows(params, scenario_none())[:, win].sum()
    total_induced = float(full - base)

    rows = []
    for hazard in HAZARDS:
        if convention == "only_hazard":
            induced = float(ctx.expected_flows(params, scenario_only_hazard(ctx.dataset, hazard))[:, win].sum() - base)
        else:
            induced = float(full - ctx.expected_flows(params, scenario_without_hazard(ctx.dataset, hazard))[:, win].sum())
        affected = float(sum(e.affected for e in ctx.dataset.disasters if e.hazard == hazard))
        per_person = induced / affected if affected > 0 else None
        rows.append(HazardAttribution(hazard=hazard, induced_usd=induced,
                                      affected_persons=affected, usd_per_affected=per_person))

    residual = total_induced - sum(r.induced_usd for r in rows)
    share = total_induced / full if full > 0 else 0.0
    return AttributionReport(convention=convention, per_hazard=tuple(rows),
                             total_induced=total_induced, total_factual=float(full),
                             interaction_residual=float(residual), share_of_total=float(share))


def attribute_event(dataset: Dataset | SimulationContext, params: BehaviorParams,
                    event_id: str) -> EventAttribution:
    """Flows attributable to a single event over the 12 months from onset."""
    ctx = _context(dataset)
    only = scenario_only_event(ctx.dataset, event_id)
    event = next(e for e in ctx.dataset.disasters if e.event_id == event_id)
    months = tuple(m for m in range(event.onset_month, event.onset_month + DISASTER_WINDOW)
                   if ctx.start <= m <= ctx.end)
    with_event = ctx.expected_flows(params, only)
    without = ctx.expected_flows(params, scenario_none())
    diff = with_event - without

    cols = list(months)
    by_corridor = {}
    for c, (origin, dest) in enumerate(ctx.corridors):
        value = float(diff[c, cols].sum())
        if value != 0.0:
            by_corridor[(dest, origin)] = value  # (sender, recipient)
    induced_total = float(diff[:, cols].sum())
    recipient_rows = [c for c, (o, _) in enumerate(ctx.corridors) if o == event.country]
    baseline = float(without[np.ix_(recipient_rows, cols)].sum()) if recipient_rows else 0.0
    relative = induced_total / baseline if baseline > 0 else None
    return EventAttribution(event_id=event_id, months=months, induced_by_corridor=by_corridor,
                            induced_usd_12m=induced_total, baseline_usd_12m=baseline,
                            relative_increase=relative)


@dataclass(frozen=True)
class SummaryRow:
    key: str
    induced_usd: float
    factual_usd: float
    share_of_factual: float
    per_capita: float | None  # country grouping only
    per_gdp: float | None


def summarize(result: ScenarioResult, dataset: Dataset, grouping: str,
              attribution: AttributionReport | None = None) -> list[SummaryRow]:
    """Plot-ready grouped totals of induced and factual flows.

    Groupings: ``income-group`` and ``country`` follow the recipient (income
    group as of each observation year), ``year`` partitions time, ``hazard``
    tabulates a per-hazard attribution report.
    """
    if grouping == "hazard":
        if attribution is None:
            raise ValueError("hazard grouping needs an AttributionReport")
        rows = [SummaryRow(key=h.hazard, induced_usd=h.induced_usd,
                           factual_usd=attribution.total_factual,
                           share_of_factual=(h.induced_usd / attribution.total_factual
                                             if attribution.total_factual else 0.0),
                           per_capita=None, per_gdp=None)
                for h in attribution.per_hazard]
        return rows
    if grouping not in ("income-group", "country", "year"):
        raise ValueError(f"unknown grouping {grouping!r}")

    induced: dict[str, float] = {}
    factual: dict[str, float] = {}
    for c, (origin, _) in enumerate(result.corridors):
        for mi, month in enumerate(result.months):
            year = year_of(month)
            if grouping == "income-group":
                key = dataset.income_group[(origin, year)]
            elif grouping == "country":
                key = origin
            else:
                key = str(year)
            induced[key] = induced.get(key, 0.0) + float(result.induced[c, mi])
            factual[key] = factual.get(key, 0.0) + float(result.factual[c, mi])

    years = sorted({year_of(m) for m in result.months})
    rows = []
    for key in sorted(induced):
        per_capita = per_gdp = None
        if grouping == "country":
            pops = [dataset.population[(key, y)] for y in years]
            per_capita = induced[key] / (sum(pops) / len(pops))
            decade_gdp = sum(dataset.gdp[(key, y)] * dataset.population[(key, y)] for y in years)
            per_gdp = induced[key] / decade_gdp if decade_gdp > 0 else None
        share = induced[key] / factual[key] if factual[key] else 0.0
        rows.append(SummaryRow(key=key, induced_usd=induced[key], factual_usd=factual[key],
                               share_of_factual=share, per_capita=per_capita, per_gdp=per_gdp))
    return rows
