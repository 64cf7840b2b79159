"""Shared fixtures: a tiny hand-written dataset, the desk-scale synthetic
dataset, and a per-cohort brute-force flow oracle independent of the engine."""
from __future__ import annotations

from pathlib import Path

import pytest

from remitsim import behavior, fixtures
from remitsim.behavior import BehaviorParams, CovariateVector
from remitsim.dataio import Dataset, load_dataset
from remitsim.engine import SimulationContext
from remitsim.months import year_of
from remitsim.population import build_population, family_probability

# ---------------------------------------------------------------------------
# Minimal hand-written CSV fixture (2 corridors, 1 event)

def _surplus_rows(country: str, adult_value: float = 1.0) -> str:
    lines = []
    for age in range(101):
        value = 0.0 if age < 16 else adult_value
        lines.append(f"{country},{age},{value}")
    return "\n".join(lines)


def small_csv_texts() -> dict[str, str]:
    economics = ["country,year,gdp_per_capita,population,income_group"]
    for year in range(2010, 2020):
        economics.append(f"AAA,{year},10000,1000000,lower-middle")
        economics.append(f"BBB,{year},40000,2000000,high")
        economics.append(f"CCC,{year},30000,5000000,upper-middle")
    stocks = [
        "origin,destination,sex,anchor_year,count",
        "AAA,BBB,male,2010,1000", "AAA,BBB,male,2015,1200", "AAA,BBB,male,2020,1400",
        "AAA,BBB,female,2010,800", "AAA,BBB,female,2015,900", "AAA,BBB,female,2020,1000",
        "AAA,CCC,male,2010,500", "AAA,CCC,male,2015,450", "AAA,CCC,male,2020,400",
        "AAA,CCC,female,2010,500", "AAA,CCC,female,2015,550", "AAA,CCC,female,2020,600",
    ]
    ages = [
        "sex,age,share",
        "male,30,0.6", "male,40,0.4",
        "female,20,0.5", "female,35,0.5",
    ]
    surplus = ["country,age,surplus", _surplus_rows("GLOBAL_DEFAULT")]
    disasters = [
        "event_id,country,onset_month,hazard,affected",
        "EV1,AAA,2012-03,flood,100000",
    ]
    panel = ["sender,recipient,month,amount_usd"]
    for month in ("2010-01", "2010-02", "2010-03", "2011-06", "2012-03", "2012-07"):
        panel.append(f"BBB,AAA,{month},500000")
        panel.append(f"CCC,AAA,{month},200000")
    return {
        "economics.csv": "\n".join(economics) + "\n",
        "stocks.csv": "\n".join(stocks) + "\n",
        "age_profiles.csv": "\n".join(ages) + "\n",
        "surplus_profiles.csv": "\n".join(surplus) + "\n",
        "disasters.csv": "\n".join(disasters) + "\n",
        "panel.csv": "\n".join(panel) + "\n",
    }


def write_csv_dir(directory: Path, texts: dict[str, str]) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    for name, text in texts.items():
        (directory / name).write_text(text, encoding="utf-8")
    return directory


@pytest.fixture
def small_dir(tmp_path: Path) -> Path:
    return write_csv_dir(tmp_path / "data", small_csv_texts())


@pytest.fixture
def small_dataset(small_dir: Path) -> Dataset:
    return load_dataset(small_dir)


@pytest.fixture(scope="session")
def desk_dataset() -> Dataset:
    return fixtures.build_dataset(seed=7)


@pytest.fixture(scope="session")
def desk_ctx(desk_dataset: Dataset) -> SimulationContext:
    return SimulationContext(desk_dataset)


# ---------------------------------------------------------------------------
# Brute-force oracle: per-cohort scalar evaluation, independent of the engine

def brute_force_flow(dataset: Dataset, params: BehaviorParams, origin: str, dest: str,
                     month: int, *, clamp: bool = False,
                     active_ids: frozenset | None = None) -> float:
    """Expected corridor-month flow summed cohort by cohort via the scalar ops."""
    population = build_population(dataset)
    cohorts = population.cohorts(origin, dest, month)
    demo = family_probability(cohorts)
    family = demo.family if demo is not None else 1.0
    year = year_of(month)
    gap = behavior.delta_gdp(dataset.gdp[(dest, year)], dataset.gdp[(origin, year)], clamp=clamp)

    origins = sorted({o for o, _ in dataset.corridors})
    years = sorted(range(2010, 2020))
    normed = behavior.gdp_norm([dataset.gdp[(o, y)] for o in origins for y in years])
    gnorm = float(normed[origins.index(origin) * len(years) + years.index(year)])

    score = 0.0
    for event in dataset.events_by_country.get(origin, ()):
        if active_ids is not None and event.event_id not in active_ids:
            continue
        pop = dataset.population[(event.country, year_of(event.onset_month))]
        magnitude = min(event.affected / pop, 1.0)
        score += behavior.kernel_value(magnitude, month - event.onset_month, params)

    surplus = dataset.surplus_for(dest)
    monthly_income = dataset.gdp[(dest, year)] / 12.0
    total = 0.0
    for cohort in cohorts:
        cov = CovariateVector(surplus=float(surplus[cohort.age]), family=family,
                              delta_gdp=gap, gdp_norm=gnorm, disaster_score=score)
        p = behavior.probability(behavior.theta(cov, params))
        total += cohort.count * p * params.rho * monthly_income
    return total
