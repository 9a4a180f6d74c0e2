"""Stochastic future temperatures under the true climate model."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .climate import AnnualSeries, ClimateFit, SeriesError


@dataclass(frozen=True)
class TruthScenario:
    fit: ClimateFit
    future_forcing: AnnualSeries
    horizon_years: int

    def __post_init__(self):
        if self.horizon_years <= 0:
            raise ValueError("horizon_years must be positive")
        first = self.fit.end_year + 1
        if not self.future_forcing.covers(first, first + self.horizon_years - 1):
            raise SeriesError(
                f"future forcing {self.future_forcing.start_year}-{self.future_forcing.end_year} "
                f"does not cover {first}-{first + self.horizon_years - 1}"
            )


def generate_future(scenario: TruthScenario, rng: np.random.Generator) -> AnnualSeries:
    """Draw one temperature path for the years after calibration.

    The AR(1) noise chain starts from the last historical residual so the
    path joins the observed record without a jump in the noise process.
    """
    fit = scenario.fit
    first = fit.end_year + 1
    forcing = scenario.future_forcing.slice(first, first + scenario.horizon_years - 1).array()
    shocks = rng.standard_normal(scenario.horizon_years) * fit.sigma
    noise = np.empty(scenario.horizon_years)
    e = fit.last_residual
    for i, shock in enumerate(shocks):
        e = fit.rho * e + shock
        noise[i] = e
    return AnnualSeries(first, tuple(fit.alpha + fit.beta * forcing + noise))
