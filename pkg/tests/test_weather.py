import numpy as np
import pytest

from gridload.errors import ValidationError
from gridload.weather import (WeatherRecord, c_to_f, check_daily_range, f_to_c, heat_index, heat_index_f,
                              wind_chill, wind_chill_f)

from conftest import hourly_weather


def nws_wind_chill_oracle(t_f, v_mph):
    return 35.74 + 0.6215 * t_f + (0.4275 * t_f - 35.75) * v_mph ** 0.16


def rothfusz_oracle(t, rh):
    return (-42.379 + 2.04901523 * t + 10.14333127 * rh - 0.22475541 * t * rh
            - 0.00683783 * t ** 2 - 0.05481717 * rh ** 2 + 0.00122874 * t ** 2 * rh
            + 0.00085282 * t * rh ** 2 - 0.00000199 * t ** 2 * rh ** 2)


class TestWindChill:
    def test_warm_passthrough(self):
        assert wind_chill(20.0, 30.0) == 20.0

    def test_calm_passthrough(self):
        assert wind_chill(-10.0, 2.0) == -10.0

    def test_zero_f_fifteen_mph(self):
        expected_f = nws_wind_chill_oracle(0.0, 15.0)
        assert expected_f == pytest.approx(-19.0, abs=1.0)
        got = wind_chill(-17.78, 24.14)
        assert c_to_f(got) == pytest.approx(expected_f, abs=0.05)
        assert got == pytest.approx(-28.3, abs=0.3)

    @pytest.mark.parametrize("t_f", np.linspace(-40, 50, 10))
    @pytest.mark.parametrize("v", [3.5, 10, 25, 60])
    def test_never_warmer_inside_region(self, t_f, v):
        assert wind_chill_f(t_f, v) <= t_f + 1e-12

    def test_unit_conversion(self):
        assert f_to_c(c_to_f(-12.3)) == pytest.approx(-12.3)


class TestHeatIndex:
    def test_cool_branch(self):
        for rh in (0, 30, 70, 100):
            hi = heat_index(15.0, rh)
            t = c_to_f(15.0)
            assert hi < 26.7
            assert c_to_f(hi) == pytest.approx(0.5 * (t + 61.0 + (t - 68.0) * 1.2 + rh * 0.094))

    def test_ninety_f_fifty_pct(self):
        expected = rothfusz_oracle(90.0, 50.0)
        assert expected == pytest.approx(94.6, abs=1.0)
        assert c_to_f(heat_index(32.22, 50)) == pytest.approx(94.6, abs=1.0)
        assert heat_index_f(90.0, 50.0) == pytest.approx(expected, abs=1e-9)

    def test_low_rh_adjustment_subtracts(self):
        t, rh = 100.0, 5.0
        adj = (13 - rh) / 4 * np.sqrt((17 - abs(t - 95)) / 17)
        assert heat_index_f(t, rh) == pytest.approx(rothfusz_oracle(t, rh) - adj)

    def test_high_rh_adjustment_adds(self):
        t, rh = 85.0, 95.0
        assert heat_index_f(t, rh) == pytest.approx(rothfusz_oracle(t, rh) + (rh - 85) / 10 * (87 - t) / 5)

    def test_monotone_at_hot_temperature(self):
        assert heat_index(32.22, 0) < heat_index(32.22, 100)

    # below ~31 C the branch seam makes the index step down with RH
    @pytest.mark.parametrize("t_c", [32.0, 35.0, 38.0, 41.0])
    def test_monotone_in_rh_grid(self, t_c):
        vals = [heat_index(t_c, rh) for rh in np.linspace(0, 100, 201)]
        assert np.all(np.diff(vals) >= -1e-9)

    def test_domain_error(self):
        with pytest.raises(ValueError):
            heat_index(30.0, 101.0)


def test_record_validation():
    with pytest.raises(ValidationError):
        WeatherRecord("2020-01-01T00:00", 1.0, 5.0, 120.0, 2.0, 0.0)
    with pytest.raises(ValidationError):
        WeatherRecord("2020-01-01T00:00", 1.0, -5.0, 50.0, 2.0, 0.0)


def test_daily_range_check():
    wx = hourly_weather("2020-01-01", 48, temp_c=10.0, daily_max_c=10.4, daily_min_c=9.0)
    assert check_daily_range(wx) == []
    wx.iloc[30, 0] = 12.0
    assert [d.isoformat() for d in check_daily_range(wx)] == ["2020-01-02"]
