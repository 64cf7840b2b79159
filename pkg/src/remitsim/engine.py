"""Vectorized expected-flow evaluation over all corridor-months.

The SimulationContext precomputes every covariate that does not depend on
the behavioural parameters (stocks, family proxy, GDP covariates, event
magnitudes), so that repeated evaluations during calibration only pay for
the score assembly and the logistic transform. Results are bit-identical to
the per-cohort scalar path in :mod:`behavior`; tests enforce the
equivalence.
"""
from __future__ import annotations

import logging
from typing import Mapping

import numpy as np

from . import behavior
from .behavior import BehaviorParams, DISASTER_WINDOW
from .dataio import Dataset, N_AGES, SEXES
from .months import WINDOW_MONTHS, year_of
from .population import build_population, demographics_series

log = logging.getLogger(__name__)


class SimulationContext:
    """Dataset-derived arrays for one simulation window.

    Covariates are laid out as (n_corridors, 120 months) arrays over the
    full 2010-2019 grid; ``start``/``end`` only restrict which months are
    reported, so events and splines behave identically under narrowed
    windows. Instances are read-only after construction and safe to share.
    """

    def __init__(self, dataset: Dataset, *, start: int = 0, end: int = WINDOW_MONTHS - 1,
                 clamp_delta_gdp: bool = False):
        if not 0 <= start <= end <= WINDOW_MONTHS - 1:
            raise ValueError(f"window [{start}, {end}] outside the 2010-2019 grid")
        self.dataset = dataset
        self.start = start
        self.end = end
        self.clamp_delta_gdp = clamp_delta_gdp
        self.population = build_population(dataset)
        self.corridors = self.population.corridors
        self.n_corridors = len(self.corridors)
        self.n_months = WINDOW_MONTHS

        self.stocks = self.population.stocks  # (n_c, n_m, 2)
        self.family = demographics_series(self.population)
        self.shares = np.vstack([self.population.shares[sex] for sex in SEXES])

        years = np.array([year_of(m) for m in range(self.n_months)])
        year_list = sorted(set(years))
        origins = sorted({o for o, _ in self.corridors})
        # static normalization: min-max over all origins and all grid years
        keys = [(o, y) for o in origins for y in year_list]
        norm_values = behavior.gdp_norm([dataset.gdp[key] for key in keys])
        norm_map = dict(zip(keys, norm_values))

        self.delta_gdp = np.zeros((self.n_corridors, self.n_months))
        self.gdp_norm = np.zeros((self.n_corridors, self.n_months))
        self.monthly_income = np.zeros((self.n_corridors, self.n_months))
        for c, (origin, dest) in enumerate(self.corridors):
            for year in year_list:
                cols = years == year
                gap = behavior.delta_gdp(dataset.gdp[(dest, year)], dataset.gdp[(origin, year)],
                                         clamp=clamp_delta_gdp)
                self.delta_gdp[c, cols] = gap
                self.gdp_norm[c, cols] = norm_map[(origin, year)]
                self.monthly_income[c, cols] = dataset.gdp[(dest, year)] / 12.0

        # corridor indices grouped by destination (shared surplus profile)
        # and by origin (shared disaster exposure)
        self.dest_groups: dict[str, np.ndarray] = {}
        self.origin_groups: dict[str, np.ndarray] = {}
        for c, (origin, dest) in enumerate(self.corridors):
            self.dest_groups.setdefault(dest, []).append(c)
            self.origin_groups.setdefault(origin, []).append(c)
        self.dest_groups = {d: np.array(v) for d, v in self.dest_groups.items()}
        self.origin_groups = {o: np.array(v) for o, v in self.origin_groups.items()}
        self.surplus = {d: dataset.surplus_for(d) for d in self.dest_groups}

        # event magnitudes: affected share of the onset-year population, clamped at 1
        self._events = []
        for e in dataset.disasters:
            pop = dataset.population[(e.country, year_of(e.onset_month))]
            magnitude = e.affected / pop
            if magnitude > 1.0:
                log.warning("event %s: affected %s exceeds population %s; magnitude clamped to 1",
                            e.event_id, e.affected, pop)
                magnitude = 1.0
            self._events.append((e.event_id, e.country, e.onset_month, magnitude))
        self._mag_cache: dict[frozenset | None, Mapping[str, np.ndarray]] = {}

        for arr in (self.family, self.delta_gdp, self.gdp_norm, self.monthly_income, self.shares):
            arr.flags.writeable = False

    # -- window helpers ----------------------------------------------------

    @property
    def window(self) -> slice:
        return slice(self.start, self.end + 1)

    @property
    def window_months(self) -> range:
        return range(self.start, self.end + 1)

    def corridor_index(self, origin: str, destination: str) -> int:
        return self.population.corridor_index(origin, destination)

    # -- disaster machinery --------------------------------------------------

    def event_magnitudes(self, active_ids: frozenset | None = None) -> Mapping[str, np.ndarray]:
        """Per-country (n_months, 12) matrices of summed magnitudes by offset.

        ``active_ids`` restricts to a subset of event ids; None means all.
        """
        if active_ids in self._mag_cache:
            return self._mag_cache[active_ids]
        mags: dict[str, np.ndarray] = {}
        for event_id, country, onset, magnitude in self._events:
            if active_ids is not None and event_id not in active_ids:
                continue
            arr = mags.setdefault(country, np.zeros((self.n_months, DISASTER_WINDOW)))
            for k in range(DISASTER_WINDOW):
                month = onset + k
                if 0 <= month < self.n_months:
                    arr[month, k] += magnitude
        for arr in mags.values():
            arr.flags.writeable = False
        self._mag_cache[active_ids] = mags
        return mags

    def disaster_scores(self, params: BehaviorParams,
                        active_ids: frozenset | None = None) -> np.ndarray:
        """Summed kernel scores per (corridor, month) for the active events."""
        sin_vec = np.sin(np.pi / 6.0 * (np.arange(DISASTER_WINDOW) + params.shift))
        scores = np.zeros((self.n_corridors, self.n_months))
        for country, mag in self.event_magnitudes(active_ids).items():
            idx = self.origin_groups.get(country)
            if idx is None:
                continue
            scores[idx] = params.height * mag.sum(axis=1) + params.shape * (mag @ sin_vec)
        return scores

    # -- probability and flows ------------------------------------------------

    def _base_scores(self, params: BehaviorParams, active_ids: frozenset | None,
                     cols: np.ndarray | None = None) -> np.ndarray:
        base = (params.alpha
                + params.beta1 * self.family
                + params.beta2 * self.delta_gdp
                + params.beta3 * self.gdp_norm
                + self.disaster_scores(params, active_ids))
        return base if cols is None else base[:, cols]

    def expected_flows(self, params: BehaviorParams, active_ids: frozenset | None = None,
                       cols: np.ndarray | None = None) -> np.ndarray:
        """Expected monthly USD flow per (corridor, month).

        flow = rho * monthly income * sum over cohorts of count * probability;
        ages without earnings surplus contribute exactly 0. ``cols`` restricts
        the evaluation to a subset of month columns (calibration hot path);
        the default covers the full 2010-2019 grid.
        """
        base = self._base_scores(params, active_ids, cols)
        n_cols = base.shape[1]
        stocks = self.stocks if cols is None else self.stocks[:, cols, :]
        income = self.monthly_income if cols is None else self.monthly_income[:, cols]
        flows = np.zeros_like(base)
        w_m, w_f = self.shares
        for dest, idx in self.dest_groups.items():
            surplus = self.surplus[dest]
            active = surplus > 0
            if not active.any():
                continue
            rows = base[idx].reshape(-1, 1)
            with np.errstate(over="ignore"):
                prob = 1.0 / (1.0 + np.exp(-(rows + params.beta0 * surplus[active])))
            per_m = prob @ w_m[active]
            per_f = prob @ w_f[active]
            sent = (stocks[idx, :, 0].ravel() * per_m
                    + stocks[idx, :, 1].ravel() * per_f)
            flows[idx] = params.rho * income[idx] * sent.reshape(len(idx), n_cols)
        return flows

    def probability_cube(self, params: BehaviorParams,
                         active_ids: frozenset | None = None) -> np.ndarray:
        """Probability per (corridor, month, age); gated ages are exactly 0."""
        base = self._base_scores(params, active_ids)
        cube = np.zeros((self.n_corridors, self.n_months, N_AGES))
        for dest, idx in self.dest_groups.items():
            surplus = self.surplus[dest]
            active = surplus > 0
            if not active.any():
                continue
            scores = base[idx][:, :, None] + params.beta0 * surplus[active]
            block = np.zeros((len(idx), self.n_months, N_AGES))
            with np.errstate(over="ignore"):
                block[:, :, active] = 1.0 / (1.0 + np.exp(-scores))
            cube[idx] = block
        return cube

    def cohort_counts(self, corridor: int, month: int) -> np.ndarray:
        """(2, 101) fractional cohort counts for one corridor-month."""
        return self.population.counts(corridor, month)


def probability_profile(ctx: SimulationContext, params: BehaviorParams, origin: str,
                        month: int, destination: str | None = None,
                        active_ids: frozenset | None = None,
                        cube: np.ndarray | None = None) -> list[tuple[float, float]]:
    """Diaspora probability profile for one origin at one month.

    ``destination`` narrows the scope to a single corridor; None pools all
    destinations of the origin's diaspora. Pass a precomputed probability
    ``cube`` when profiling many origin-months.
    """
    if cube is None:
        cube = ctx.probability_cube(params, active_ids)
    counts: list[float] = []
    probs: list[float] = []
    for c, (o, d) in enumerate(ctx.corridors):
        if o != origin or (destination is not None and d != destination):
            continue
        cohort_counts = ctx.cohort_counts(c, month)
        for s in range(len(SEXES)):
            for age in range(N_AGES):
                if cohort_counts[s, age] > 0:
                    counts.append(cohort_counts[s, age])
                    probs.append(cube[c, month, age])
    return behavior.probability_profile(counts, probs)


def scenario_none() -> frozenset:
    """Event filter for the no-disaster counterfactual."""
    return frozenset()


def scenario_only_hazard(dataset: Dataset, hazard: str) -> frozenset:
    return frozenset(e.event_id for e in dataset.disasters if e.hazard == hazard)


def scenario_without_hazard(dataset: Dataset, hazard: str) -> frozenset:
    return frozenset(e.event_id for e in dataset.disasters if e.hazard != hazard)


def scenario_only_event(dataset: Dataset, event_id: str) -> frozenset:
    if all(e.event_id != event_id for e in dataset.disasters):
        raise KeyError(f"unknown event_id {event_id!r}")
    return frozenset({event_id})
