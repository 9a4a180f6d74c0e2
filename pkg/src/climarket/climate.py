"""Annual climate series: CSV ingestion, forcing transforms and truth calibration."""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class SeriesError(ValueError):
    """Base class for malformed or inconsistent series."""


class SeriesParseError(SeriesError):
    def __init__(self, path, line: int, message: str):
        self.path = str(path)
        self.line = line
        super().__init__(f"{path}: line {line}: {message}")


class MalformedRowError(SeriesParseError):
    pass


class YearGapError(SeriesParseError):
    pass


class DuplicateYearError(SeriesParseError):
    pass


class DomainError(SeriesError):
    pass


class SingularDesignError(SeriesError):
    pass


class ForcingKind(enum.Enum):
    LOG_CO2 = "CO2"
    TSI = "TSI"

    @classmethod
    def parse(cls, text: str) -> "ForcingKind":
        key = text.strip().upper()
        for kind in cls:
            if key in (kind.name, kind.value):
                return kind
        raise ValueError(f"unknown forcing kind {text!r}")

    def other(self) -> "ForcingKind":
        return ForcingKind.TSI if self is ForcingKind.LOG_CO2 else ForcingKind.LOG_CO2


@dataclass(frozen=True)
class AnnualSeries:
    """Values for consecutive calendar years; ``values[i]`` belongs to ``start_year + i``."""

    start_year: int
    values: tuple[float, ...]

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        if not values:
            raise SeriesError("series must contain at least one value")
        if not all(math.isfinite(v) for v in values):
            raise SeriesError("series values must be finite")
        object.__setattr__(self, "start_year", int(self.start_year))
        object.__setattr__(self, "values", values)

    @property
    def end_year(self) -> int:
        return self.start_year + len(self.values) - 1

    @property
    def years(self) -> np.ndarray:
        return np.arange(self.start_year, self.end_year + 1)

    def __len__(self) -> int:
        return len(self.values)

    def array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def covers(self, first: int, last: int) -> bool:
        return self.start_year <= first and last <= self.end_year

    def __getitem__(self, year: int) -> float:
        if not self.start_year <= year <= self.end_year:
            raise KeyError(year)
        return self.values[year - self.start_year]

    def slice(self, first: int, last: int) -> "AnnualSeries":
        if not self.covers(first, last) or last < first:
            raise SeriesError(
                f"series {self.start_year}-{self.end_year} does not cover {first}-{last}"
            )
        lo = first - self.start_year
        return AnnualSeries(first, self.values[lo : lo + last - first + 1])

    def extend(self, other: "AnnualSeries") -> "AnnualSeries":
        if other.start_year != self.end_year + 1:
            raise SeriesError("appended series must start the year after this one ends")
        return AnnualSeries(self.start_year, self.values + other.values)


@dataclass(frozen=True)
class ClimateFit:
    """Point estimates of ``T = alpha + beta*F`` with AR(1) residuals.

    ``beta_se`` is the standard error of the OLS slope, corrected for the
    fitted AR(1) error covariance.
    """

    kind: ForcingKind
    alpha: float
    beta: float
    rho: float
    sigma: float
    last_residual: float
    end_year: int
    beta_se: float = float("nan")

    def __post_init__(self):
        if not abs(self.rho) < 1.0:
            raise ValueError("AR(1) coefficient must satisfy |rho| < 1")
        if not self.sigma > 0.0:
            raise ValueError("sigma must be positive")


TEMPERATURE_COLUMNS = ("year", "anomaly_c")
CO2_COLUMNS = ("year", "ppm")
TSI_COLUMNS = ("year", "wm2")


def load_series_csv(path, column_spec=TEMPERATURE_COLUMNS) -> AnnualSeries:
    """Read a two-column ``year,value`` CSV with a header row.

    ``column_spec`` names the year and value headers. Years must be
    consecutive and ascending; every problem is reported with its line number.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"series file not found: {path}")
    year_col, value_col = column_spec
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise MalformedRowError(path, 1, "empty file, expected a header row") from None
        try:
            iy, iv = header.index(year_col), header.index(value_col)
        except ValueError:
            raise MalformedRowError(
                path, 1, f"header {header} lacks columns {year_col!r},{value_col!r}"
            ) from None

        start = None
        values: list[float] = []
        for row in reader:
            line = reader.line_num
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise MalformedRowError(path, line, f"expected {len(header)} fields, got {len(row)}")
            try:
                year = int(row[iy].strip())
                value = float(row[iv].strip())
            except ValueError:
                raise MalformedRowError(path, line, f"cannot parse {row!r}") from None
            if not math.isfinite(value):
                raise MalformedRowError(path, line, f"non-finite value {row[iv]!r}")
            if start is None:
                start = year
            else:
                expected = start + len(values)
                if year < expected:
                    raise DuplicateYearError(path, line, f"year {year} duplicated or out of order")
                if year > expected:
                    raise YearGapError(path, line, f"year gap: expected {expected}, got {year}")
            values.append(value)
    if start is None:
        raise MalformedRowError(path, 2, "no data rows")
    return AnnualSeries(start, tuple(values))


def write_series_csv(series: AnnualSeries, path, column_spec=TEMPERATURE_COLUMNS) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(column_spec)
        for year, value in zip(series.years, series.values):
            writer.writerow([int(year), repr(value)])


def to_log_co2(raw: AnnualSeries) -> AnnualSeries:
    """Natural log of CO2 concentrations given in ppm."""
    values = raw.array()
    if np.any(values <= 0):
        raise DomainError("CO2 concentrations must be strictly positive")
    return AnnualSeries(raw.start_year, tuple(np.log(values)))


def smooth_tsi_11yr(raw: AnnualSeries, window: int = 11) -> AnnualSeries:
    """Centered moving average over the 11-year sunspot cycle.

    Near either end the window shrinks symmetrically to the widest centered
    window that fits, so the output keeps every input year.
    """
    values = raw.array()
    n = len(values)
    half = window // 2
    csum = np.concatenate(([0.0], np.cumsum(values)))
    idx = np.arange(n)
    h = np.minimum(np.minimum(idx, n - 1 - idx), half)
    smoothed = (csum[idx + h + 1] - csum[idx - h]) / (2 * h + 1)
    return AnnualSeries(raw.start_year, tuple(smoothed))


def _aligned(temps: AnnualSeries, forcing: AnnualSeries) -> tuple[np.ndarray, np.ndarray]:
    if not forcing.covers(temps.start_year, temps.end_year):
        raise SeriesError(
            f"forcing {forcing.start_year}-{forcing.end_year} does not cover "
            f"temperatures {temps.start_year}-{temps.end_year}"
        )
    x = forcing.slice(temps.start_year, temps.end_year).array()
    return temps.array(), x


# Floor for sigma on noise-free data, keeps ClimateFit valid.
_SIGMA_FLOOR = 1e-12
_RHO_LIMIT = 0.999


def calibrate_truth(temps: AnnualSeries, forcing: AnnualSeries, kind: ForcingKind) -> ClimateFit:
    """OLS fit of temperature on one forcing, then conditional least squares AR(1) on residuals."""
    y, x = _aligned(temps, forcing)
    n = len(y)
    if n < 10:
        raise SeriesError("calibration needs at least 10 years")
    xc = x - x.mean()
    sxx = float(xc @ xc)
    if sxx <= 1e-12 * max(1.0, float(x @ x)):
        raise SingularDesignError("forcing has zero variance; slope is not identifiable")
    beta = float(xc @ (y - y.mean())) / sxx
    alpha = float(y.mean() - beta * x.mean())
    resid = y - alpha - beta * x

    lag, cur = resid[:-1], resid[1:]
    denom = float(lag @ lag)
    scale = max(1.0, float(np.abs(y).max()))
    if denom <= (1e-10 * scale) ** 2 * n:
        rho, sigma = 0.0, _SIGMA_FLOOR
    else:
        rho = float(np.clip((lag @ cur) / denom, -_RHO_LIMIT, _RHO_LIMIT))
        innov = cur - rho * lag
        sigma = max(float(np.sqrt(innov @ innov / len(innov))), _SIGMA_FLOOR)

    # Var(beta_ols) = w' Sigma w with w = xc/sxx and stationary AR(1) covariance.
    w = xc / sxx
    lags = np.abs(np.subtract.outer(np.arange(n), np.arange(n)))
    cov = sigma**2 / (1.0 - rho**2) * rho**lags
    beta_se = float(np.sqrt(w @ cov @ w))

    return ClimateFit(
        kind=kind,
        alpha=alpha,
        beta=beta,
        rho=rho,
        sigma=sigma,
        last_residual=float(resid[-1]),
        end_year=temps.end_year,
        beta_se=beta_se,
    )
