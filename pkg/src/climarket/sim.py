"""Yearly market dynamics over six-year trading sequences."""

from __future__ import annotations

import csv
import enum
import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .bayes import DEFAULT_BURN_IN, DEFAULT_DRAWS, bin_probabilities, predictive_at, sample_posterior
from .climate import (
    CO2_COLUMNS,
    TEMPERATURE_COLUMNS,
    TSI_COLUMNS,
    AnnualSeries,
    ForcingKind,
    calibrate_truth,
    load_series_csv,
    smooth_tsi_11yr,
    to_log_co2,
)
from .market import (
    DEFAULT_HI,
    DEFAULT_K,
    DEFAULT_LO,
    Order,
    OrderBook,
    Side,
    endow_complete_sets,
    end_period,
    make_binning,
    settle_sequence,
    submit_arrival,
)
from .network import generate_network, richest_neighbor
from .traders import IdeologyMode, choose_targets, init_traders, quote_prices, reservation_prices, revise_belief
from .truth import TruthScenario, generate_future

log = logging.getLogger(__name__)

MIN_CALIBRATION_YEARS = 30
HISTORICAL_FIRST_TRADE_YEAR = 1930
HISTORICAL_LAST_YEAR = 2014


class ConfigError(ValueError):
    """Inconsistent configuration or data coverage, detected before trading starts."""


class Mode(enum.Enum):
    HISTORICAL = "historical"
    FUTURE = "future"


class ScoreMode(enum.Enum):
    MEAN = "mean"
    FINAL = "final"


@dataclass(frozen=True)
class ParamSet:
    ideo: float = 0.5
    n_edge: int = 150
    n_traders: int = 150
    risk_tak: float = 0.5
    seg: float = 0.05
    true_model: ForcingKind = ForcingKind.LOG_CO2

    def __post_init__(self):
        if not 0.0 <= self.ideo <= 1.0:
            raise ConfigError("ideo must lie in [0, 1]")
        if not 0.0 <= self.risk_tak <= 1.0:
            raise ConfigError("risk_tak must lie in [0, 1]")
        if not 0.0 <= self.seg <= 1.0:
            raise ConfigError("seg must lie in [0, 1]")
        if self.n_traders < 4:
            raise ConfigError("n_traders must be at least 4")
        if self.n_edge < 1:
            raise ConfigError("n_edge must be positive")


@dataclass(frozen=True)
class SimConfig:
    params: ParamSet = field(default_factory=ParamSet)
    seq_length_years: int = 6
    n_sequences: int = 8
    bins_k: int = DEFAULT_K
    bins_lo: float = DEFAULT_LO
    bins_hi: float = DEFAULT_HI
    n_draws: int = DEFAULT_DRAWS
    burn_in: int = DEFAULT_BURN_IN
    mode: Mode = Mode.FUTURE
    master_seed: int | tuple = 0
    sessions_per_year: int = 1
    ideology_mode: IdeologyMode = IdeologyMode.RESIST
    score_mode: ScoreMode = ScoreMode.MEAN
    # Year of the first trading period; None picks the mode's default.
    first_trade_year: int | None = None
    historical_true_model: ForcingKind = ForcingKind.LOG_CO2

    def __post_init__(self):
        if self.seq_length_years < 1:
            raise ConfigError("seq_length_years must be at least 1")
        if self.n_sequences < 1:
            raise ConfigError("n_sequences must be at least 1")
        if self.sessions_per_year < 1:
            raise ConfigError("sessions_per_year must be at least 1")

    def to_dict(self) -> dict:
        def plain(v):
            if isinstance(v, enum.Enum):
                return v.value
            if isinstance(v, tuple):
                return list(v)
            return v

        d = {k: plain(v) for k, v in asdict(self).items() if k != "params"}
        d.update({k: plain(getattr(self.params, k)) for k in ParamSet.__dataclass_fields__})
        return d


@dataclass(frozen=True)
class DataBundle:
    """Observed temperatures plus raw forcings (ppm and W/m²)."""

    temperature: AnnualSeries
    co2_ppm: AnnualSeries
    tsi_wm2: AnnualSeries

    def forcing(self) -> dict[ForcingKind, AnnualSeries]:
        return {
            ForcingKind.LOG_CO2: to_log_co2(self.co2_ppm),
            ForcingKind.TSI: smooth_tsi_11yr(self.tsi_wm2),
        }

    @classmethod
    def from_csv(cls, temperature, co2, tsi) -> "DataBundle":
        return cls(
            load_series_csv(temperature, TEMPERATURE_COLUMNS),
            load_series_csv(co2, CO2_COLUMNS),
            load_series_csv(tsi, TSI_COLUMNS),
        )


def bundled_paths() -> dict[str, Path]:
    root = resources.files("climarket") / "data"
    return {
        "temperature": Path(str(root / "temperature.csv")),
        "co2": Path(str(root / "co2.csv")),
        "tsi": Path(str(root / "tsi.csv")),
    }


def bundled_data() -> DataBundle:
    p = bundled_paths()
    return DataBundle.from_csv(p["temperature"], p["co2"], p["tsi"])


@dataclass(frozen=True)
class SequenceRecord:
    sequence: int
    end_year: int
    frac_true: float
    trades: int
    mean_price: tuple
    realized_temp: float
    payout: float


@dataclass(frozen=True)
class SimResult:
    records: tuple[SequenceRecord, ...]
    convergence_score: float
    initial_frac_true: float
    true_model: ForcingKind
    n_edges_used: int
    bank_issued_units: int
    bank_paid: float

    def fractions(self) -> list[float]:
        return [r.frac_true for r in self.records]


def convergence_score(result, mode: ScoreMode = ScoreMode.MEAN) -> float:
    """Mean (or final) share of traders holding the true model at sequence ends.

    Accepts a :class:`SimResult` or a plain sequence of fractions.
    """
    fracs = result.fractions() if isinstance(result, SimResult) else list(result)
    if not fracs:
        raise ValueError("need at least one sequence record")
    if mode is ScoreMode.FINAL:
        return float(fracs[-1])
    return math.fsum(fracs) / len(fracs)


def _streams(master_seed) -> dict[str, np.random.Generator]:
    entropy = list(master_seed) if isinstance(master_seed, (tuple, list)) else master_seed
    names = ("truth", "network", "traders", "market", "inference")
    children = np.random.SeedSequence(entropy).spawn(len(names))
    return {name: np.random.default_rng(ss) for name, ss in zip(names, children)}


def _plan(config: SimConfig, data: DataBundle) -> tuple[int, int, int]:
    """First trading year, last settlement year and sequence count, checked against the data."""
    temps = data.temperature
    L = config.seq_length_years
    if config.mode is Mode.HISTORICAL:
        first = config.first_trade_year or HISTORICAL_FIRST_TRADE_YEAR
        last = first + L * config.n_sequences
        if not temps.covers(first, last):
            raise ConfigError(
                f"temperature record {temps.start_year}-{temps.end_year} does not cover "
                f"trading {first}-{last}"
            )
    else:
        first = config.first_trade_year or temps.end_year
        if first != temps.end_year:
            raise ConfigError("future mode trades from the last observed year")
        last = first + L * config.n_sequences
    if first - temps.start_year + 1 < MIN_CALIBRATION_YEARS:
        raise ConfigError(
            f"only {first - temps.start_year + 1} years of history before trading; "
            f"need {MIN_CALIBRATION_YEARS}"
        )
    for name, series in (("CO2", data.co2_ppm), ("TSI", data.tsi_wm2)):
        if not series.covers(temps.start_year, last):
            raise ConfigError(
                f"{name} forcing {series.start_year}-{series.end_year} does not cover "
                f"{temps.start_year}-{last}"
            )
    return first, last, config.n_sequences


def historical_config(**overrides) -> SimConfig:
    """14 six-year sequences settling 1936 ... 2014."""
    base = dict(
        mode=Mode.HISTORICAL,
        n_sequences=(HISTORICAL_LAST_YEAR - HISTORICAL_FIRST_TRADE_YEAR) // 6,
        first_trade_year=HISTORICAL_FIRST_TRADE_YEAR,
    )
    base.update(overrides)
    return SimConfig(**base)


def effective_edges(params: ParamSet) -> int:
    if params.n_edge < params.n_traders:
        return params.n_traders
    return params.n_edge


def run_simulation(config: SimConfig, data: DataBundle) -> SimResult:
    """One full market run; identical config and data give an identical result."""
    first, last, n_seq = _plan(config, data)
    params = config.params
    L = config.seq_length_years
    rngs = _streams(config.master_seed)
    forcing = data.forcing()
    bins = make_binning(config.bins_k, config.bins_lo, config.bins_hi)

    if config.mode is Mode.FUTURE:
        true_model = params.true_model
        hist = data.temperature
        fit = calibrate_truth(hist, forcing[true_model], true_model)
        scenario = TruthScenario(fit, forcing[true_model], last - hist.end_year)
        temps = hist.extend(generate_future(scenario, rngs["truth"]))
    else:
        true_model = config.historical_true_model
        temps = data.temperature

    n = params.n_traders
    traders = init_traders(n, params.risk_tak, params.ideo, rngs["traders"])
    for tr in traders:
        tr.ensure_securities(bins.k)
    n_edges = effective_edges(params)
    if n_edges != params.n_edge:
        log.warning("n_edge=%d below n_traders=%d; using %d edges", params.n_edge, n, n_edges)
    net = generate_network(n, n_edges, params.seg, [t.belief for t in traders], rngs["network"])

    def frac_true() -> float:
        return sum(t.belief is true_model for t in traders) / n

    initial = frac_true()
    market_rng = rngs["market"]
    inference_rng = rngs["inference"]
    risk = np.array([t.risk_tak for t in traders])
    book = OrderBook(bins.k)
    issued = 0
    paid = 0.0
    records = []

    for s in range(n_seq):
        t_star = first + L * (s + 1)
        issued += endow_complete_sets(traders)
        seq_trades = []
        for t in range(t_star - L, t_star):
            observed = temps.slice(temps.start_year, t)
            reserv = {}
            for kind in ForcingKind:
                if not any(tr.belief is kind for tr in traders):
                    continue
                post = sample_posterior(
                    observed, forcing[kind], config.n_draws, inference_rng,
                    kind=kind, burn_in=config.burn_in,
                )
                pred = predictive_at(post, observed, forcing[kind], t_star, inference_rng)
                reserv[kind] = reservation_prices(bin_probabilities(pred, bins))
            for _ in range(config.sessions_per_year):
                seq_trades.extend(_session(traders, reserv, risk, bins, book, market_rng, t))
        realized = temps[t_star]
        payouts = settle_sequence(traders, bins, realized)
        paid += float(payouts.sum())

        wealth = [tr.cash for tr in traders]
        revision_rng = market_rng
        new_beliefs = []
        for tr in traders:
            j = richest_neighbor(net, tr.id, wealth)
            new_beliefs.append(
                revise_belief(tr, wealth[j], traders[j].belief, revision_rng, config.ideology_mode)
            )
        for tr, b in zip(traders, new_beliefs):
            tr.belief = b

        prices = [[] for _ in range(bins.k)]
        for tr_ in seq_trades:
            prices[tr_.security].append(tr_.price)
        records.append(
            SequenceRecord(
                sequence=s + 1,
                end_year=t_star,
                frac_true=frac_true(),
                trades=len(seq_trades),
                mean_price=tuple(math.fsum(p) / len(p) if p else None for p in prices),
                realized_temp=float(realized),
                payout=float(payouts.sum()),
            )
        )

    score = convergence_score([r.frac_true for r in records], config.score_mode)
    return SimResult(
        records=tuple(records),
        convergence_score=score,
        initial_frac_true=initial,
        true_model=true_model,
        n_edges_used=n_edges,
        bank_issued_units=issued,
        bank_paid=paid,
    )


def _session(traders, reserv, risk, bins, book, rng, year):
    """One continuous double auction pass: every trader arrives once, in random order."""
    n = len(traders)
    targets = [choose_targets(tr, bins, rng) for tr in traders]
    r_buy = np.array([reserv[tr.belief][b] for tr, (b, _) in zip(traders, targets)])
    r_sell = np.array(
        [reserv[tr.belief][s] if s is not None else 0.0 for tr, (_, s) in zip(traders, targets)]
    )
    buy_price, _ = quote_prices(r_buy, risk, rng)
    _, sell_price = quote_prices(r_sell, risk, rng)
    trades = []
    for rank, i in enumerate(rng.permutation(n)):
        tr = traders[i]
        buy_bin, sell_bin = targets[i]
        buy = sell = None
        if tr.cash >= buy_price[i]:
            buy = Order(tr.id, buy_bin, Side.BUY, float(buy_price[i]), 2 * rank)
        if sell_bin is not None and tr.holdings[sell_bin] >= 1:
            sell = Order(tr.id, sell_bin, Side.SELL, float(sell_price[i]), 2 * rank + 1)
        trades.extend(submit_arrival(book, buy, sell, traders, year))
    end_period(book)
    return trades


def run_historical(config: SimConfig, temperature: AnnualSeries, co2: AnnualSeries, tsi: AnnualSeries) -> SimResult:
    if config.mode is not Mode.HISTORICAL:
        config = replace(config, mode=Mode.HISTORICAL)
    if not temperature.covers(1880, HISTORICAL_LAST_YEAR):
        raise ConfigError(
            f"historical mode needs temperatures for 1880-{HISTORICAL_LAST_YEAR}, "
            f"got {temperature.start_year}-{temperature.end_year}"
        )
    return run_simulation(config, DataBundle(temperature, co2, tsi))


RUN_COLUMNS = ("sequence", "end_year", "frac_true", "trades", "score")


def write_run_csv(result: SimResult, path, mode: ScoreMode = ScoreMode.MEAN) -> None:
    """Per-sequence rows; ``score`` is the convergence score over sequences so far."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RUN_COLUMNS)
        fracs = []
        for r in result.records:
            fracs.append(r.frac_true)
            writer.writerow(
                [r.sequence, r.end_year, repr(r.frac_true), r.trades, repr(convergence_score(fracs, mode))]
            )


def read_run_csv(path) -> list[dict]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != RUN_COLUMNS:
            raise ValueError(f"{path}: expected header {','.join(RUN_COLUMNS)}")
        return [
            {
                "sequence": int(r["sequence"]),
                "end_year": int(r["end_year"]),
                "frac_true": float(r["frac_true"]),
                "trades": int(r["trades"]),
                "score": float(r["score"]),
            }
            for r in reader
        ]


def manifest(config: SimConfig, data_paths: dict | None = None, **extra) -> dict:
    """Everything needed to reproduce a run: resolved config, seed, dataset digests."""
    digests = {}
    for name, path in (data_paths or {}).items():
        digests[name] = {
            "path": str(path),
            "sha256": hashlib.sha256(Path(path).read_bytes()).hexdigest(),
        }
    out = {"version": __version__, "config": config.to_dict(), "seed": config.to_dict()["master_seed"], "datasets": digests}
    out.update(extra)
    return out


def write_manifest(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def frac_series(results: Sequence[SimResult]) -> np.ndarray:
    """Fractions as an array of shape (runs, sequences)."""
    return np.array([r.fractions() for r in results])
