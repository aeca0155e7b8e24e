"""Experiment harness: seeded runs, aggregation, and delimited output.

A run simulates one strategy over T rounds against freshly drawn values and
competitor bids, scoring cumulative regret against T times the per-round
offline optimum Z.  Experiments repeat runs with independent substreams,
aggregate mean and standard error per round, and write one CSV per strategy
plus a JSON manifest that is sufficient to reproduce the CSVs byte for byte.
"""

from __future__ import annotations

import concurrent.futures
import json
import logging
import subprocess
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np

from . import __version__
from .auctions import AuctionFormat, AuctionSpec, clear_auction
from .distributions import (
    EmpiricalCdf,
    PointMass,
    TruncatedLognormal,
    UniformBids,
    ValueModel,
    load_bid_samples,
)
from .errors import ConfigError, ValidationError
from .offline import AuctionSetting, OfflineProblem, solve_mu_star
from .pacing import (
    BestResponseCache,
    PacingConfig,
    RoundFeedback,
    avp_bid,
    avp_update,
    baseline_bid,
    initial_state,
)

logger = logging.getLogger(__name__)

CSV_HEADER = "round,mean_cum_regret,stderr_cum_regret,mean_cum_spend,mean_normalized_regret"

# Distinct integers folded into seed material so the benchmark solve and the
# two strategies never share a substream.
_SEED_TAGS = {"benchmark": 101, "avp": 201, "baseline": 202}


class Strategy(str, Enum):
    AVP = "avp"
    BASELINE = "baseline"


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one experiment.

    ``eps_avp`` / ``eps_baseline`` default to horizon**(-1/4) when left None.
    """

    settings: tuple[AuctionSetting, ...]
    horizon: int
    rho: float
    eps_avp: float | None = None
    eps_baseline: float | None = None
    runs: int = 1
    seed: int = 0
    emit_every: int = 1
    mc_values: int = 100_000
    workers: int = 1
    refresh_every: int = 1
    mu_init: float | None = None
    br_grid_points: int = 512
    br_refine_tolerance: float | None = None
    br_mc_samples: int = 20_000

    def __post_init__(self) -> None:
        object.__setattr__(self, "settings", tuple(self.settings))
        if not self.settings:
            raise ConfigError("need at least one auction setting")
        if self.horizon < 1:
            raise ConfigError("horizon must be at least 1")
        if not (np.isfinite(self.rho) and self.rho > 0.0):
            raise ConfigError("rho must be positive")
        if self.runs < 1:
            raise ConfigError("runs must be at least 1")
        if self.emit_every < 1:
            raise ConfigError("emit_every must be at least 1")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        for eps in (self.eps_avp, self.eps_baseline):
            if eps is not None and not (np.isfinite(eps) and eps > 0.0):
                raise ConfigError("learning rates must be positive")

    @property
    def num_auctions(self) -> int:
        return len(self.settings)

    @property
    def value_bound(self) -> float:
        return max(s.value.upper for s in self.settings)

    def eps_for(self, strategy: Strategy) -> float:
        eps = self.eps_avp if strategy is Strategy.AVP else self.eps_baseline
        if eps is None:
            eps = float(self.horizon) ** -0.25
        return float(eps)

    def eps_threshold(self) -> float:
        """Learning rates at or above this forfeit the no-upper-clip guarantee."""
        return 1.0 / (self.num_auctions * self.value_bound)

    def offline_problem(self) -> OfflineProblem:
        return OfflineProblem(
            auctions=self.settings,
            budget_per_round=self.rho,
            mc_values=self.mc_values,
            payment_mc_samples=self.br_mc_samples,
            br_grid_points=self.br_grid_points,
            br_refine_tolerance=self.br_refine_tolerance,
        )

    def pacing_config(self, strategy: Strategy) -> PacingConfig:
        return PacingConfig(
            specs=tuple(s.spec for s in self.settings),
            horizon=self.horizon,
            budget_per_round=self.rho,
            value_bound=self.value_bound,
            learning_rate=self.eps_for(strategy),
            mu_init=self.mu_init,
            refresh_every=self.refresh_every,
            track_empirical=strategy is Strategy.AVP,
            br_grid_points=self.br_grid_points,
            br_refine_tolerance=self.br_refine_tolerance,
            br_mc_samples=self.br_mc_samples,
        )

    # ------------------------------------------------------------------
    # JSON round-trip

    def to_dict(self) -> dict:
        out = {
            "setting": [_setting_to_dict(s) for s in self.settings],
            "T": self.horizon,
            "rho": self.rho,
            "eps_avp": self.eps_avp,
            "eps_baseline": self.eps_baseline,
            "runs": self.runs,
            "seed": self.seed,
            "emit_every": self.emit_every,
            "mc_values": self.mc_values,
            "workers": self.workers,
            "refresh_every": self.refresh_every,
        }
        if self.mu_init is not None:
            out["mu_init"] = self.mu_init
        if self.br_grid_points != 512:
            out["br_grid_points"] = self.br_grid_points
        if self.br_refine_tolerance is not None:
            out["br_refine_tolerance"] = self.br_refine_tolerance
        if self.br_mc_samples != 20_000:
            out["br_mc_samples"] = self.br_mc_samples
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if "config" in data and isinstance(data["config"], dict):
            data = data["config"]  # accept a manifest as a config
        try:
            settings = tuple(_setting_from_dict(s) for s in data["setting"])
            kwargs = {
                "settings": settings,
                "horizon": int(data["T"]),
                "rho": float(data["rho"]),
            }
        except KeyError as missing:
            raise ConfigError(f"config is missing required key {missing}") from None
        for key, attr, conv in (
            ("eps_avp", "eps_avp", float),
            ("eps_baseline", "eps_baseline", float),
            ("runs", "runs", int),
            ("seed", "seed", int),
            ("emit_every", "emit_every", int),
            ("mc_values", "mc_values", int),
            ("workers", "workers", int),
            ("refresh_every", "refresh_every", int),
            ("mu_init", "mu_init", float),
            ("br_grid_points", "br_grid_points", int),
            ("br_refine_tolerance", "br_refine_tolerance", float),
            ("br_mc_samples", "br_mc_samples", int),
        ):
            if data.get(key) is not None:
                kwargs[attr] = conv(data[key])
        return cls(**kwargs)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as err:
                raise ConfigError(f"{path}: invalid JSON: {err}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected a JSON object")
        return cls.from_dict(data)


def _dist_to_dict(dist) -> dict:
    if isinstance(dist, TruncatedLognormal):
        return {"kind": "lognormal", "mu": dist.mu, "sigma": dist.sigma,
                "upper": dist.upper}
    if isinstance(dist, UniformBids):
        return {"kind": "uniform", "low": dist.low, "high": dist.high}
    if isinstance(dist, PointMass):
        return {"kind": "pointmass", "value": dist.value}
    if isinstance(dist, EmpiricalCdf):
        if dist.source is None:
            raise ConfigError(
                "cannot serialize an empirical CDF that was not loaded from a file"
            )
        return {"kind": "file", "path": dist.source}
    raise ConfigError(f"cannot serialize distribution {dist!r}")


def _dist_from_dict(data: dict):
    kind = data.get("kind")
    if kind == "lognormal":
        return TruncatedLognormal(data["mu"], data["sigma"], data["upper"])
    if kind == "uniform":
        return UniformBids(data["low"], data["high"])
    if kind == "pointmass":
        return PointMass(data["value"])
    if kind == "file":
        return load_bid_samples(data["path"])
    raise ConfigError(f"unknown distribution kind {kind!r}")


def _setting_to_dict(setting: AuctionSetting) -> dict:
    out = {
        "format": setting.spec.format.value,
        "n": setting.spec.num_competitors,
        "k": setting.spec.num_positions,
        "discounts": list(setting.spec.discounts),
        "competitor_dist": _dist_to_dict(setting.competitor),
    }
    value = setting.value
    if isinstance(value, ValueModel):
        out["value"] = {"multiplier": [value.multiplier_low, value.multiplier_high]}
    else:
        out["value"] = _dist_to_dict(value)
    return out


def _setting_from_dict(data: dict) -> AuctionSetting:
    try:
        spec = AuctionSpec(
            format=AuctionFormat(data["format"]),
            num_competitors=int(data["n"]),
            discounts=tuple(data["discounts"]),
        )
        if "k" in data and int(data["k"]) != spec.num_positions:
            raise ConfigError(
                f"k = {data['k']} does not match {spec.num_positions} discounts"
            )
        competitor = _dist_from_dict(data["competitor_dist"])
        vdata = data["value"]
    except KeyError as missing:
        raise ConfigError(f"auction setting is missing key {missing}") from None
    except ValueError as err:
        raise ConfigError(str(err)) from None
    if "multiplier" in vdata:
        lo, hi = vdata["multiplier"]
        value = ValueModel(competitor, lo, hi)
    else:
        value = _dist_from_dict(vdata)
    return AuctionSetting(spec=spec, competitor=competitor, value=value)


# ----------------------------------------------------------------------
# single runs


@dataclass
class RegretSeries:
    """Round-indexed trace of one run."""

    strategy: Strategy
    run_index: int
    z: float
    utility: np.ndarray
    spend: np.ndarray
    mu: np.ndarray
    bids: np.ndarray
    cum_regret: np.ndarray = field(init=False)
    normalized_regret: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        rounds = np.arange(1, len(self.utility) + 1)
        self.cum_regret = rounds * self.z - np.cumsum(self.utility)
        self.normalized_regret = self.cum_regret / rounds**0.75

    @property
    def total_spend(self) -> float:
        return float(self.spend.sum())

    @property
    def total_utility(self) -> float:
        return float(self.utility.sum())


# config fingerprint -> solved offline dual
_benchmark_cache: dict = {}


def _benchmark_key(config: ExperimentConfig) -> str:
    d = config.to_dict()
    # runs/output shape do not affect the offline solve
    for drop in ("runs", "emit_every", "workers", "eps_avp", "eps_baseline",
                 "refresh_every", "mu_init"):
        d.pop(drop, None)
    return json.dumps(d, sort_keys=True)


def offline_benchmark(config: ExperimentConfig):
    """Solve the offline dual for this experiment, cached per configuration.

    The solve consumes its own substream derived from the experiment seed, so
    it is reproducible and independent of the run streams.
    """
    key = _benchmark_key(config)
    got = _benchmark_cache.get(key)
    if got is None:
        rng = np.random.default_rng(
            np.random.SeedSequence((config.seed, _SEED_TAGS["benchmark"]))
        )
        got = solve_mu_star(config.offline_problem(), rng=rng)
        _benchmark_cache[key] = got
    return got


def run_single(config: ExperimentConfig, strategy: Strategy, run_index: int,
               z: float | None = None) -> RegretSeries:
    """Simulate one seeded run of one strategy.

    The substream is a deterministic function of (experiment seed, strategy,
    run index), so runs are reproducible individually and independent of
    execution order.
    """
    strategy = Strategy(strategy)
    seed_seq = np.random.SeedSequence(
        (config.seed, _SEED_TAGS[strategy.value], run_index)
    )
    return simulate_run(config, strategy, seed_seq, z=z, run_index=run_index)


def simulate_run(config: ExperimentConfig, strategy: Strategy, seed,
                 z: float | None = None, run_index: int = 0) -> RegretSeries:
    """Simulate one run from an explicit seed.

    Unlike ``run_single`` the seed is not derived from the strategy, so two
    strategies given the same seed consume identical value, competitor-bid,
    and tie-break streams; useful for paired comparisons.
    """
    strategy = Strategy(strategy)
    if z is None:
        z = offline_benchmark(config).expected_utility
    seed_seq = seed if isinstance(seed, np.random.SeedSequence) \
        else np.random.SeedSequence(seed)
    return _simulate(config, strategy, seed_seq, z, run_index)


def _simulate(config: ExperimentConfig, strategy: Strategy,
              seed_seq: np.random.SeedSequence, z: float,
              run_index: int) -> RegretSeries:
    values_rng, comp_rng, tie_rng, algo_rng, mc_rng = (
        np.random.default_rng(s) for s in seed_seq.spawn(5)
    )
    pacing_cfg = config.pacing_config(strategy)
    state = initial_state(pacing_cfg, algo_rng)
    cache = BestResponseCache(pacing_cfg, rng=mc_rng) if strategy is Strategy.AVP else None

    T = config.horizon
    J = config.num_auctions
    utility = np.empty(T)
    spend = np.empty(T)
    mu_trace = np.empty(T)
    bid_trace = np.empty((T, J))
    values = np.empty(J)
    ctrs = np.empty(J)
    payments = np.empty(J)

    for t in range(T):
        for j, setting in enumerate(config.settings):
            values[j] = setting.value.sample(values_rng)
        mu_trace[t] = state.mu
        if strategy is Strategy.AVP:
            bids = avp_bid(state, pacing_cfg, values, cache=cache)
        else:
            bids = baseline_bid(state, pacing_cfg, values)
        bid_trace[t] = bids

        revealed = []
        for j, setting in enumerate(config.settings):
            comp = setting.competitor.sample(comp_rng, setting.spec.num_competitors)
            outcome = clear_auction(
                setting.spec, np.append(comp, bids[j]), tie_rng
            )
            ctrs[j] = outcome.ctrs[-1]
            payments[j] = outcome.payments[-1]
            revealed.append(comp)

        utility[t] = float(values @ ctrs - payments.sum())
        spend[t] = float(payments.sum())
        feedback = RoundFeedback(
            competitor_bids=tuple(revealed), ctrs=ctrs.copy(), payments=payments.copy()
        )
        state = avp_update(state, pacing_cfg, feedback)

    series = RegretSeries(
        strategy=strategy, run_index=run_index, z=z,
        utility=utility, spend=spend, mu=mu_trace, bids=bid_trace,
    )
    budget = config.rho * T
    if series.total_spend > budget * (1.0 + 1e-9):
        raise ValidationError(
            f"run {run_index} ({strategy.value}) spent {series.total_spend} "
            f"with budget {budget}"
        )
    return series


# ----------------------------------------------------------------------
# experiments


@dataclass
class StrategyAggregate:
    strategy: Strategy
    mean_cum_regret: np.ndarray
    stderr_cum_regret: np.ndarray
    mean_cum_spend: np.ndarray
    mean_normalized_regret: np.ndarray
    series: list[RegretSeries]


@dataclass
class AggregateResult:
    config: ExperimentConfig
    z: float
    z_stderr: float
    mu_star: float
    by_strategy: dict[Strategy, StrategyAggregate]

    def aggregate(self, strategy: Strategy) -> StrategyAggregate:
        return self.by_strategy[Strategy(strategy)]


def _aggregate(strategy: Strategy, series: list[RegretSeries]) -> StrategyAggregate:
    regret = np.vstack([s.cum_regret for s in series])
    spend_cum = np.vstack([np.cumsum(s.spend) for s in series])
    normalized = np.vstack([s.normalized_regret for s in series])
    runs = regret.shape[0]
    if runs > 1:
        stderr = regret.std(axis=0, ddof=1) / np.sqrt(runs)
    else:
        stderr = np.zeros(regret.shape[1])
    return StrategyAggregate(
        strategy=strategy,
        mean_cum_regret=regret.mean(axis=0),
        stderr_cum_regret=stderr,
        mean_cum_spend=spend_cum.mean(axis=0),
        mean_normalized_regret=normalized.mean(axis=0),
        series=series,
    )


def _run_job(config: ExperimentConfig, strategy: Strategy, index: int,
             z: float) -> RegretSeries:
    return run_single(config, strategy, index, z=z)


def run_experiment(config: ExperimentConfig,
                   output_dir: str | Path | None = None) -> AggregateResult:
    """Run both strategies for the configured number of runs and aggregate.

    When ``output_dir`` is given, writes ``avp.csv``, ``baseline.csv`` and
    ``manifest.json`` there.  Identical configurations produce byte-identical
    CSVs regardless of worker count.
    """
    solution = offline_benchmark(config)
    z = solution.expected_utility
    jobs = [(strategy, i) for strategy in Strategy for i in range(config.runs)]

    if config.workers > 1:
        with concurrent.futures.ProcessPoolExecutor(config.workers) as pool:
            futures = {
                pool.submit(_run_job, config, s, i, z): (s, i) for s, i in jobs
            }
            results = {futures[f]: f.result() for f in
                       concurrent.futures.as_completed(futures)}
    else:
        results = {}
        for s, i in jobs:
            results[(s, i)] = _run_job(config, s, i, z)
            logger.debug("finished %s run %d/%d", s.value, i + 1, config.runs)

    by_strategy = {
        strategy: _aggregate(
            strategy, [results[(strategy, i)] for i in range(config.runs)]
        )
        for strategy in Strategy
    }
    result = AggregateResult(
        config=config, z=z, z_stderr=solution.utility_stderr,
        mu_star=solution.mu_star, by_strategy=by_strategy,
    )
    if output_dir is not None:
        write_outputs(result, output_dir)
    return result


# ----------------------------------------------------------------------
# output files


def _emitted_rounds(horizon: int, every: int) -> np.ndarray:
    rounds = np.arange(every, horizon + 1, every)
    if rounds.size == 0 or rounds[-1] != horizon:
        rounds = np.append(rounds, horizon)
    return rounds


def write_strategy_csv(path: Path, agg: StrategyAggregate, horizon: int,
                       emit_every: int) -> None:
    rounds = _emitted_rounds(horizon, emit_every)
    idx = rounds - 1
    lines = [CSV_HEADER]
    for r, m, se, sp, nz in zip(
        rounds,
        agg.mean_cum_regret[idx],
        agg.stderr_cum_regret[idx],
        agg.mean_cum_spend[idx],
        agg.mean_normalized_regret[idx],
    ):
        lines.append(f"{r},{m:.12g},{se:.12g},{sp:.12g},{nz:.12g}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def version_string() -> str:
    here = Path(__file__).resolve().parent
    try:
        described = subprocess.run(
            ["git", "describe", "--tags", "--always", "--dirty"],
            cwd=here, capture_output=True, text=True, timeout=10,
        )
        if described.returncode == 0 and described.stdout.strip():
            return f"pacesim {__version__} ({described.stdout.strip()})"
    except OSError:
        pass
    return f"pacesim {__version__}"


def write_outputs(result: AggregateResult, output_dir: str | Path) -> dict:
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    config = result.config
    manifest = {
        "version": version_string(),
        "config": config.to_dict(),
        "benchmark": {
            "z": result.z,
            "z_stderr": result.z_stderr,
            "mu_star": result.mu_star,
            "total": result.z * config.horizon,
        },
        "strategies": {},
    }
    for strategy, agg in result.by_strategy.items():
        name = f"{strategy.value}.csv"
        write_strategy_csv(out / name, agg, config.horizon, config.emit_every)
        manifest["strategies"][strategy.value] = {
            "csv": name,
            "learning_rate": config.eps_for(strategy),
            "per_run_final": [
                {
                    "run": s.run_index,
                    "final_cum_regret": float(s.cum_regret[-1]),
                    "total_spend": s.total_spend,
                    "total_utility": s.total_utility,
                    "final_mu": float(s.mu[-1]),
                }
                for s in agg.series
            ],
        }
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest
