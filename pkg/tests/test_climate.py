import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from climarket.climate import (
    CO2_COLUMNS,
    AnnualSeries,
    DomainError,
    DuplicateYearError,
    ForcingKind,
    MalformedRowError,
    SingularDesignError,
    YearGapError,
    calibrate_truth,
    load_series_csv,
    smooth_tsi_11yr,
    to_log_co2,
    write_series_csv,
)
from climarket.sim import bundled_paths

from conftest import ar1_path


def write(tmp_path, text, name="t.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_load_echoes_rows(tmp_path):
    p = write(tmp_path, "year,anomaly_c\n1880,-0.20\n1881,-0.12\n")
    s = load_series_csv(p)
    assert s == AnnualSeries(1880, (-0.20, -0.12))


def test_year_gap_names_line(tmp_path):
    p = write(tmp_path, "year,anomaly_c\n1880,-0.20\n1882,-0.12\n")
    with pytest.raises(YearGapError) as exc:
        load_series_csv(p)
    assert exc.value.line == 3
    assert "line 3" in str(exc.value)


def test_duplicate_year(tmp_path):
    p = write(tmp_path, "year,anomaly_c\n1880,-0.20\n1880,-0.12\n")
    with pytest.raises(DuplicateYearError) as exc:
        load_series_csv(p)
    assert exc.value.line == 3


def test_malformed_row(tmp_path):
    p = write(tmp_path, "year,anomaly_c\n1880,-0.20\n1881,abc\n")
    with pytest.raises(MalformedRowError) as exc:
        load_series_csv(p)
    assert exc.value.line == 3


def test_missing_header_column(tmp_path):
    p = write(tmp_path, "year,value\n1880,1\n")
    with pytest.raises(MalformedRowError):
        load_series_csv(p)


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError, match="nope.csv"):
        load_series_csv(tmp_path / "nope.csv")


def test_bundled_fixture_length():
    temps = load_series_csv(bundled_paths()["temperature"])
    assert (temps.start_year, temps.end_year, len(temps)) == (1880, 2014, 135)


def test_csv_round_trip(tmp_path):
    s = AnnualSeries(1990, (0.1, 1 / 3, -2.5e-7))
    write_series_csv(s, tmp_path / "s.csv", CO2_COLUMNS)
    assert load_series_csv(tmp_path / "s.csv", CO2_COLUMNS) == s


def test_log_co2_values():
    s = to_log_co2(AnnualSeries(2000, (math.e, 400.0)))
    assert s.values[0] == pytest.approx(1.0, abs=1e-15)
    assert s.values[1] == pytest.approx(5.9915, abs=5e-5)
    assert s.values[1] == pytest.approx(math.log(400.0), rel=1e-15)


def test_log_co2_constant():
    s = to_log_co2(AnnualSeries(2000, (350.0,) * 5))
    assert s.values == (math.log(350.0),) * 5


def test_log_co2_rejects_nonpositive():
    with pytest.raises(DomainError):
        to_log_co2(AnnualSeries(2000, (300.0, 0.0)))


@given(st.lists(st.floats(1e-3, 1e6), min_size=2, max_size=30, unique=True))
def test_log_co2_strictly_monotone(ppm):
    ppm = sorted(ppm)
    out = to_log_co2(AnnualSeries(1900, tuple(ppm))).values
    assert all(a < b for a, b in zip(out, out[1:]))


def test_smooth_constant():
    s = smooth_tsi_11yr(AnnualSeries(1900, (1361.0,) * 30))
    assert np.allclose(s.values, 1361.0, rtol=0, atol=1e-9)
    assert (s.start_year, len(s)) == (1900, 30)


def test_smooth_spike_center():
    s = smooth_tsi_11yr(AnnualSeries(1900, (0,) * 5 + (11,) + (0,) * 5))
    assert s[1905] == pytest.approx(1.0)


def test_smooth_linear_ramp_unchanged():
    ramp = tuple(float(t) for t in range(40))
    s = smooth_tsi_11yr(AnnualSeries(1900, ramp))
    assert np.allclose(s.values, ramp)


def test_smooth_edge_window_shrinks_symmetrically():
    v = np.arange(20.0) ** 2
    s = smooth_tsi_11yr(AnnualSeries(1900, tuple(v)))
    assert s.values[0] == v[0]
    assert s.values[1] == pytest.approx(v[:3].mean())
    assert s.values[5] == pytest.approx(v[:11].mean())
    assert s.values[-2] == pytest.approx(v[-3:].mean())


@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=40), st.floats(-1e3, 1e3))
def test_smooth_preserves_length_and_constants(values, c):
    s = smooth_tsi_11yr(AnnualSeries(1700, tuple(values)))
    assert len(s) == len(values) and s.start_year == 1700
    const = smooth_tsi_11yr(AnnualSeries(1700, (c,) * len(values)))
    assert np.allclose(const.values, c, atol=1e-9 * max(1.0, abs(c)))
    again = smooth_tsi_11yr(const)
    assert np.allclose(again.values, const.values, atol=1e-9 * max(1.0, abs(c)))


def test_calibrate_exact_linear(log_co2_hist):
    temps = AnnualSeries(1880, tuple(1.5 * log_co2_hist.array()))
    fit = calibrate_truth(temps, log_co2_hist, ForcingKind.LOG_CO2)
    assert fit.beta == pytest.approx(1.5, abs=1e-9)
    assert fit.sigma < 1e-9
    assert fit.rho == 0.0


def test_calibrate_exact_affine():
    f = AnnualSeries(1900, tuple(np.linspace(0.0, 3.0, 20)))
    temps = AnnualSeries(1900, tuple(np.array(f.values) - 5.0))
    fit = calibrate_truth(temps, f, ForcingKind.TSI)
    assert fit.alpha == pytest.approx(-5.0, abs=1e-12)
    assert fit.beta == pytest.approx(1.0, abs=1e-12)


def test_calibrate_constant_forcing_singular():
    f = AnnualSeries(1900, (5.0,) * 20)
    temps = AnnualSeries(1900, tuple(np.arange(20.0)))
    with pytest.raises(SingularDesignError):
        calibrate_truth(temps, f, ForcingKind.TSI)


def test_calibrate_requires_coverage(log_co2_hist):
    temps = AnnualSeries(1870, (0.0,) * 20)
    with pytest.raises(ValueError):
        calibrate_truth(temps, log_co2_hist, ForcingKind.LOG_CO2)


def test_calibrate_recovers_known_fixture(log_co2_hist):
    # scripts/make_fixtures.py: alpha=-11.5, beta=2.0, rho=0.5, sigma=0.1
    temps = load_series_csv(bundled_paths()["temperature"].with_name("temperature_known.csv"))
    fit = calibrate_truth(temps, log_co2_hist, ForcingKind.LOG_CO2)
    assert abs(fit.beta - 2.0) <= 3 * fit.beta_se
    assert abs(fit.rho - 0.5) <= 0.15
    assert fit.sigma == pytest.approx(0.1, rel=0.2)


def test_generate_and_refit_recovery(log_co2_hist):
    x = log_co2_hist.array()
    beta_hits = rho_hits = 0
    rhos = []
    for seed in range(100):
        rng = np.random.default_rng(seed)
        temps = AnnualSeries(1880, tuple(2.0 * x + ar1_path(rng, len(x), 0.5, 0.1)))
        fit = calibrate_truth(temps, log_co2_hist, ForcingKind.LOG_CO2)
        beta_hits += abs(fit.beta - 2.0) <= 3 * fit.beta_se
        rho_hits += abs(fit.rho - 0.5) <= 0.15
        rhos.append(fit.rho)
    assert beta_hits >= 95
    # rho's sampling sd is about 0.075 at n=135, so 0.15 is roughly a 2-sd band.
    assert rho_hits >= 85
    assert abs(np.mean(rhos) - 0.5) <= 0.05
