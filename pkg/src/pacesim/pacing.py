"""Online budget pacing across simultaneous auctions.

Two strategies share the same multiplier mechanics and depletion rule:

* adaptive value pacing ("avp") bids the estimated best response to the
  paced value v/(1+mu), where the estimate plugs the empirical CDF of
  observed competitor bids into the best-response machinery; and
* the "baseline" bids the paced value itself.

After each round the multiplier moves by learning_rate * (spend - target)
and is clipped to [0, mu_cap]; once the remaining budget drops below one
round's worst-case spend, both strategies sit out every remaining round,
which is what makes the budget constraint hold on every sample path.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .auctions import AuctionFormat, AuctionSpec
from .distributions import EmpiricalCdf
from .errors import StructuralError, ValidationError
from .response import estimated_best_response

logger = logging.getLogger(__name__)

# Relative slack for floating-point comparisons on budget arithmetic.
_EPS = 1e-9

# Learning rates already warned about, to avoid one line per run.
_warned_rates: set[tuple[float, float]] = set()


@dataclass(frozen=True)
class PacingConfig:
    """Static data of one pacing run.

    ``learning_rate`` below 1 / (num_auctions * value_bound) is the regime
    with the clean guarantee (the upper multiplier clip provably never
    fires); larger rates are accepted with a warning because the standard
    experiment schedule T^(-1/4) exceeds the threshold at practical horizons.
    """

    specs: tuple[AuctionSpec, ...]
    horizon: int
    budget_per_round: float
    value_bound: float
    learning_rate: float
    mu_init: float | None = None
    refresh_every: int = 1
    track_empirical: bool = True
    br_grid_points: int = 512
    br_refine_tolerance: float | None = None
    br_mc_samples: int = 20_000

    def __post_init__(self) -> None:
        object.__setattr__(self, "specs", tuple(self.specs))
        if not self.specs:
            raise ValidationError("need at least one auction")
        if self.horizon < 1:
            raise ValidationError("horizon must be at least 1")
        if not (np.isfinite(self.budget_per_round) and self.budget_per_round > 0.0):
            raise ValidationError("budget_per_round must be positive")
        if not (np.isfinite(self.value_bound) and self.value_bound > 0.0):
            raise ValidationError("value_bound must be positive")
        if not (np.isfinite(self.learning_rate) and self.learning_rate > 0.0):
            raise ValidationError("learning_rate must be positive")
        threshold = 1.0 / (self.num_auctions * self.value_bound)
        if self.learning_rate >= threshold and \
                (self.learning_rate, threshold) not in _warned_rates:
            _warned_rates.add((self.learning_rate, threshold))
            logger.warning(
                "learning_rate %.6g is at or above 1/(J*U) = %.6g; "
                "budget safety still holds but the no-upper-clip guarantee does not",
                self.learning_rate, threshold,
            )
        if self.refresh_every < 1:
            raise ValidationError("refresh_every must be at least 1")
        if self.mu_init is not None and not (
            np.isfinite(self.mu_init) and 0.0 <= self.mu_init <= self.mu_cap
        ):
            raise ValidationError("mu_init must lie in [0, mu_cap]")

    @property
    def num_auctions(self) -> int:
        return len(self.specs)

    @property
    def mu_cap(self) -> float:
        return self.num_auctions * self.value_bound / self.budget_per_round

    @property
    def depletion_threshold(self) -> float:
        """Worst-case one-round spend; bidding stops below this remainder."""
        return self.num_auctions * self.value_bound


@dataclass(frozen=True)
class PacingState:
    """Mutable-across-rounds part of a run, kept as an immutable snapshot.

    ``pending_bids`` buffers revealed competitor bids between empirical-CDF
    refreshes (empty whenever refresh_every == 1).
    """

    round: int
    mu: float
    remaining_budget: float
    empirical_cdfs: tuple[EmpiricalCdf, ...]
    pending_bids: tuple[tuple[float, ...], ...]


@dataclass(frozen=True)
class RoundFeedback:
    """What one round revealed: all competitor bids plus own CTR and payment
    per auction."""

    competitor_bids: tuple[np.ndarray, ...]
    ctrs: np.ndarray
    payments: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(
            self,
            "competitor_bids",
            tuple(np.asarray(b, dtype=float) for b in self.competitor_bids),
        )
        object.__setattr__(self, "ctrs", np.asarray(self.ctrs, dtype=float))
        object.__setattr__(self, "payments", np.asarray(self.payments, dtype=float))


def initial_state(config: PacingConfig, rng: np.random.Generator | None = None) -> PacingState:
    """Round-1 state: full budget, empty empirical CDFs, and a starting
    multiplier either taken from the config or drawn uniformly on [0, mu_cap]."""
    if config.mu_init is not None:
        mu = config.mu_init
    else:
        if rng is None:
            rng = np.random.default_rng()
        mu = float(rng.uniform(0.0, config.mu_cap))
    J = config.num_auctions
    return PacingState(
        round=1,
        mu=mu,
        remaining_budget=config.budget_per_round * config.horizon,
        empirical_cdfs=tuple(EmpiricalCdf() for _ in range(J)),
        pending_bids=tuple(() for _ in range(J)),
    )


class BestResponseCache:
    """Memoizes estimated best responses.

    Keys combine the auction index, the empirical CDF's sample count (its
    version), and the paced value quantized at one thousandth of the value
    bound, so the memo never serves a stale CDF.  The held generator feeds the
    Monte Carlo payment draws that GSP estimates need.
    """

    def __init__(self, config: PacingConfig, rng: np.random.Generator | int | None = None):
        self._config = config
        self._rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        self._quant = 1e-3 * config.value_bound
        self._memo: dict[tuple[int, int, int], float] = {}

    def bid(self, index: int, cdf: EmpiricalCdf, paced_value: float) -> float:
        spec = self._config.specs[index]
        if paced_value <= 0.0:
            return 0.0
        if spec.format is AuctionFormat.VCG or cdf.count == 0:
            return float(paced_value)
        key = (index, cdf.count, int(round(paced_value / self._quant)))
        got = self._memo.get(key)
        if got is None:
            got = estimated_best_response(
                spec, cdf, paced_value,
                grid_points=self._config.br_grid_points,
                refine_tolerance=self._config.br_refine_tolerance,
                mc_samples=self._config.br_mc_samples,
                rng=self._rng,
            )
            self._memo[key] = got
        return got


def _checked_values(config: PacingConfig, values) -> np.ndarray:
    vals = np.asarray(values, dtype=float)
    if vals.shape != (config.num_auctions,):
        raise StructuralError(
            f"expected {config.num_auctions} values, got shape {vals.shape}"
        )
    if not np.all(np.isfinite(vals)):
        raise ValidationError("values must be finite")
    if np.any(vals < 0.0) or np.any(vals > config.value_bound * (1.0 + _EPS)):
        raise ValidationError(f"values must lie in [0, {config.value_bound}]")
    return vals


def avp_bid(state: PacingState, config: PacingConfig, values,
            cache: BestResponseCache | None = None) -> np.ndarray:
    """Adaptive-value-pacing bids for one round; does not modify the state.

    Bids zero everywhere once the remaining budget cannot cover a worst-case
    round.  Otherwise bids the estimated best response to each paced value;
    with no samples observed yet (round one) that estimate is the identity.
    """
    vals = _checked_values(config, values)
    bids = np.zeros(config.num_auctions)
    if state.remaining_budget < config.depletion_threshold:
        return bids
    if cache is None:
        cache = BestResponseCache(config)
    paced = vals / (1.0 + state.mu)
    for j in range(config.num_auctions):
        bids[j] = cache.bid(j, state.empirical_cdfs[j], paced[j])
    return bids


def baseline_bid(state: PacingState, config: PacingConfig, values) -> np.ndarray:
    """Paced-identity bids: the deflated value itself, same depletion rule."""
    vals = _checked_values(config, values)
    if state.remaining_budget < config.depletion_threshold:
        return np.zeros(config.num_auctions)
    return vals / (1.0 + state.mu)


def avp_update(state: PacingState, config: PacingConfig,
               feedback: RoundFeedback) -> PacingState:
    """Advance one round: multiplier step, budget debit, CDF growth.

    The multiplier moves against the spend-minus-target gap computed from
    realized payments and is clipped to [0, mu_cap].  Revealed competitor
    bids extend the per-auction empirical CDFs (buffered when refresh_every
    is larger than one).  Shared by both strategies.
    """
    J = config.num_auctions
    pay = np.asarray(feedback.payments, dtype=float)
    if pay.shape != (J,):
        raise StructuralError(f"expected {J} payments, got shape {pay.shape}")
    if not np.all(np.isfinite(pay)) or np.any(pay < 0.0):
        raise ValidationError("payments must be finite and non-negative")
    total = float(pay.sum())
    if total > config.depletion_threshold * (1.0 + _EPS):
        raise ValidationError(
            f"round spend {total} exceeds the worst-case bound {config.depletion_threshold}"
        )
    if len(feedback.competitor_bids) != J:
        raise StructuralError(f"expected competitor bids for {J} auctions")

    gap = config.budget_per_round - total
    mu_next = min(max(0.0, state.mu - config.learning_rate * gap), config.mu_cap)

    cdfs = state.empirical_cdfs
    pending = state.pending_bids
    if config.track_empirical:
        new_pending = []
        new_cdfs = []
        flush = state.round % config.refresh_every == 0
        for j in range(J):
            revealed = feedback.competitor_bids[j]
            if revealed.shape != (config.specs[j].num_competitors,):
                raise StructuralError(
                    f"auction {j}: expected {config.specs[j].num_competitors} "
                    f"competitor bids, got shape {revealed.shape}"
                )
            buf = pending[j] + tuple(float(x) for x in revealed)
            if flush:
                new_cdfs.append(cdfs[j].extend(buf))
                new_pending.append(())
            else:
                new_cdfs.append(cdfs[j])
                new_pending.append(buf)
        cdfs = tuple(new_cdfs)
        pending = tuple(new_pending)

    return replace(
        state,
        round=state.round + 1,
        mu=mu_next,
        remaining_budget=state.remaining_budget - total,
        empirical_cdfs=cdfs,
        pending_bids=pending,
    )
