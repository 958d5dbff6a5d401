from datetime import date

import pandas as pd
import pytest

from gridload.synth import ScenarioSpec, generate
from gridload.timeseries import CalendarConfig, align

HOLIDAYS = [date(y, m, d) for y in range(2016, 2021) for m, d in ((1, 1), (7, 1), (11, 11), (12, 25))]


@pytest.fixture(scope="session")
def calendar():
    return CalendarConfig(holidays=HOLIDAYS)


@pytest.fixture(scope="session")
def noisy_dataset(calendar):
    """52 months of seeded data with a planted 8% suppression over the last 167 days."""
    spec = ScenarioSpec(seed=11, start=date(2016, 5, 1), end=date(2020, 9, 1), noise_std=30.0,
                        suppression=((date(2020, 3, 18), date(2020, 9, 1), 0.08),), calendar=calendar)
    load, weather, truth = generate(spec)
    return spec, load, weather, truth, align(load, weather)


@pytest.fixture(scope="session")
def stationary_dataset(calendar):
    spec = ScenarioSpec(seed=5, start=date(2016, 5, 1), end=date(2020, 9, 1), noise_std=30.0,
                        trend_by_year={y: 2500.0 for y in range(2016, 2021)}, calendar=calendar)
    load, weather, truth = generate(spec)
    return spec, load, weather, truth, align(load, weather)


def hourly_weather(start, hours, **overrides):
    idx = pd.date_range(start, periods=hours, freq="h", name="timestamp")
    cols = {"temp_c": 10.0, "wind_kmh": 12.0, "rh_pct": 50.0, "daily_max_c": 15.0, "daily_min_c": 5.0}
    cols.update(overrides)
    return pd.DataFrame(cols, index=idx)
