"""Regenerate the synthetic datasets bundled in ``src/climarket/data``.

The series are smooth curves through rough anchor values shaped like the
public records (Mauna Loa / ice-core CO2 joined to a high-emission pathway,
a reconstructed solar irradiance with an 11-year cycle and a projected
21st-century decline), not the records themselves.

``temperature.csv`` is a smooth curve through approximate decadal means of
the observed global anomaly record (cool 1900s-1910s, 1940s bump, flat
1945-1975, fast rise afterwards) plus seeded AR(1) weather noise.

``temperature_known.csv`` is drawn from the single-forcing model
``T = KNOWN_ALPHA + KNOWN_BETA*ln(CO2) + AR(1)(KNOWN_RHO, KNOWN_SIGMA)`` so tests can
check that calibration recovers known coefficients.

    python scripts/make_fixtures.py
"""

from pathlib import Path

import numpy as np
from scipy.interpolate import PchipInterpolator

from climarket.climate import (
    CO2_COLUMNS,
    TEMPERATURE_COLUMNS,
    TSI_COLUMNS,
    AnnualSeries,
    write_series_csv,
)

OUT = Path(__file__).resolve().parents[1] / "src" / "climarket" / "data"

FIRST, LAST_HIST, LAST = 1880, 2014, 2100
SEED = 2016
NOISE_RHO = 0.3
NOISE_SIGMA = 0.09

KNOWN_ALPHA = -11.5
KNOWN_BETA = 2.0
KNOWN_RHO = 0.5
KNOWN_SIGMA = 0.1

ANOMALY_ANCHORS = {
    1880: -0.20, 1885: -0.22, 1895: -0.24, 1905: -0.30, 1915: -0.33, 1925: -0.24,
    1935: -0.13, 1944: 0.06, 1955: -0.05, 1965: -0.03, 1975: 0.02, 1985: 0.23,
    1995: 0.37, 2005: 0.59, 2012: 0.67, 2014: 0.72,
}

CO2_ANCHORS = {
    1880: 290.8, 1890: 294.2, 1900: 296.6, 1910: 300.1, 1920: 303.8, 1930: 307.2,
    1940: 310.4, 1950: 311.3, 1960: 316.9, 1970: 325.7, 1980: 338.7, 1990: 354.4,
    2000: 369.7, 2005: 379.8, 2010: 389.9, 2014: 397.5, 2020: 415.8, 2030: 449.3,
    2040: 489.4, 2050: 540.5, 2060: 603.5, 2070: 677.1, 2080: 758.2, 2090: 844.8,
    2100: 935.9,
}

TSI_BASELINE = {
    1880: 1360.75, 1890: 1360.60, 1900: 1360.45, 1910: 1360.42, 1920: 1360.65, 1930: 1360.80,
    1940: 1361.00, 1950: 1361.20, 1958: 1361.30, 1965: 1361.10, 1975: 1360.95,
    1985: 1361.10, 1995: 1361.05, 2005: 1360.90, 2014: 1360.80, 2025: 1360.55,
    2035: 1360.30, 2045: 1360.15, 2055: 1360.20, 2070: 1360.40, 2100: 1360.60,
}
CYCLE_AMPLITUDE = 0.45
CYCLE_MINIMUM = 1986


def curve(anchors, years):
    xs = np.array(sorted(anchors))
    return PchipInterpolator(xs, [anchors[x] for x in xs])(years)


def ar1(rng, n, rho, sigma):
    noise = np.empty(n)
    e = 0.0
    for i, shock in enumerate(rng.normal(0.0, sigma, n)):
        e = rho * e + shock
        noise[i] = e
    return noise


def main():
    years = np.arange(FIRST, LAST + 1)
    co2 = curve(CO2_ANCHORS, years)
    tsi = curve(TSI_BASELINE, years) - CYCLE_AMPLITUDE * np.cos(
        2 * np.pi * (years - CYCLE_MINIMUM) / 11.0
    )
    co2_series = AnnualSeries(FIRST, tuple(np.round(co2, 2)))
    tsi_series = AnnualSeries(FIRST, tuple(np.round(tsi, 4)))

    hist_years = years[years <= LAST_HIST]
    rng = np.random.default_rng(SEED)
    temps = curve(ANOMALY_ANCHORS, hist_years) + ar1(rng, len(hist_years), NOISE_RHO, NOISE_SIGMA)
    temps_series = AnnualSeries(FIRST, tuple(np.round(temps, 3)))

    log_co2 = np.log(np.array(co2_series.values)[years <= LAST_HIST])
    known = KNOWN_ALPHA + KNOWN_BETA * log_co2 + ar1(rng, len(hist_years), KNOWN_RHO, KNOWN_SIGMA)
    known_series = AnnualSeries(FIRST, tuple(np.round(known, 4)))

    OUT.mkdir(parents=True, exist_ok=True)
    write_series_csv(temps_series, OUT / "temperature.csv", TEMPERATURE_COLUMNS)
    write_series_csv(known_series, OUT / "temperature_known.csv", TEMPERATURE_COLUMNS)
    write_series_csv(co2_series, OUT / "co2.csv", CO2_COLUMNS)
    write_series_csv(tsi_series, OUT / "tsi.csv", TSI_COLUMNS)


if __name__ == "__main__":
    main()
