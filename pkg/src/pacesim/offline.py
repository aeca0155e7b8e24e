"""Offline dual of the budget-constrained bidding problem.

With a per-round budget rho across J simultaneous auctions, dualizing the
budget constraint at multiplier mu >= 0 decouples rounds: the paced-optimal
play bids the best response to the deflated value v/(1+mu) in every auction,
and the dual objective is

    q(mu) = mu*rho + E[ sum_j v_j * x_j(s_j) - (1+mu) * p_j(s_j) ],
    s_j = best_response_j(v_j / (1+mu)),

with derivative q'(mu) = rho - E[aggregate spend at mu].  q is convex, its
minimizer lies in [0, J*U/rho], and the per-round primal optimum Z equals
q(mu*), so T*Z upper-bounds any feasible strategy's expected total utility.

Expectations over values are Monte Carlo with draws frozen per problem, so
every evaluation shares common random numbers and the sampled derivative is
effectively monotone, which is what lets plain bisection find mu*.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .auctions import AuctionFormat, AuctionSpec
from .errors import SolverError, ValidationError
from .response import BestResponseMap, ExpectedResponse

# Value-sample multisets at or below this many distinct points get exact
# best-response evaluation; larger ones go through an interpolation table.
_EXACT_UNIQUES = 64


@dataclass(frozen=True)
class AuctionSetting:
    """One auction: its mechanism, competitor-bid law, and own-value law."""

    spec: AuctionSpec
    competitor: Any
    value: Any


@dataclass
class OfflineProblem:
    """Inputs of the offline problem plus sampling knobs.

    ``value_bound`` defaults to the largest value-distribution bound; the dual
    multiplier is searched on [0, num_auctions * value_bound / budget].
    """

    auctions: tuple[AuctionSetting, ...]
    budget_per_round: float
    value_bound: float | None = None
    mc_values: int = 100_000
    payment_mc_samples: int = 20_000
    br_grid_points: int = 512
    br_refine_tolerance: float | None = None
    sigma_table_points: int = 513
    _ctx: Any = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        self.auctions = tuple(self.auctions)
        if not self.auctions:
            raise ValidationError("need at least one auction")
        if not (np.isfinite(self.budget_per_round) and self.budget_per_round > 0.0):
            raise ValidationError("budget_per_round must be positive")
        if self.value_bound is None:
            self.value_bound = max(a.value.upper for a in self.auctions)
        if not (np.isfinite(self.value_bound) and self.value_bound > 0.0):
            raise ValidationError("value_bound must be positive")
        if self.mc_values < 2:
            raise ValidationError("mc_values must be at least 2")

    @property
    def num_auctions(self) -> int:
        return len(self.auctions)

    @property
    def mu_cap(self) -> float:
        return self.num_auctions * self.value_bound / self.budget_per_round


@dataclass(frozen=True)
class DualSolution:
    """Solved dual: multiplier, objective, and the primal quantities at it."""

    mu_star: float
    dual_value: float
    dual_stderr: float
    expected_spend: float
    spend_stderr: float
    expected_utility: float
    utility_stderr: float
    complementary_slackness: float

    def as_dict(self) -> dict:
        return {
            "mu_star": self.mu_star,
            "dual_value": self.dual_value,
            "dual_stderr": self.dual_stderr,
            "expected_spend": self.expected_spend,
            "spend_stderr": self.spend_stderr,
            "expected_utility": self.expected_utility,
            "utility_stderr": self.utility_stderr,
            "complementary_slackness": self.complementary_slackness,
        }


class _SigmaEval:
    """Best response as a function of the paced value, evaluated either
    exactly at a small set of distinct points or via a dense table."""

    def __init__(self, brm: BestResponseMap, upper: float, table_points: int,
                 exact: bool):
        self._brm = brm
        self._upper = upper
        self._points = table_points
        self._exact = exact
        self._cache: dict[float, float] = {}
        self._grid = None
        self._bids = None

    def __call__(self, w: np.ndarray) -> np.ndarray:
        if self._brm.response.spec.format is AuctionFormat.VCG:
            return np.asarray(w, dtype=float)
        if self._exact:
            uniq = np.unique(w)
            bids = np.array([self._one(u) for u in uniq])
            return bids[np.searchsorted(uniq, w)]
        if self._grid is None:
            self._grid = np.linspace(0.0, self._upper, self._points)
            self._bids = self._brm.table(self._grid)
        return np.interp(w, self._grid, self._bids)

    def _one(self, u: float) -> float:
        got = self._cache.get(u)
        if got is None:
            got = self._brm.best_response(u)
            self._cache[u] = got
        return got


class _AuctionEval:
    """Frozen per-auction machinery: value draws, response curves, sigma."""

    def __init__(self, setting: AuctionSetting, problem: OfflineProblem,
                 rng: np.random.Generator):
        self.setting = setting
        self.values = np.asarray(
            setting.value.sample(rng, problem.mc_values), dtype=float
        )
        self.resp = ExpectedResponse(
            setting.spec, setting.competitor,
            mc_samples=problem.payment_mc_samples, rng=rng,
        )
        brm = BestResponseMap(
            self.resp,
            grid_points=problem.br_grid_points,
            refine_tolerance=problem.br_refine_tolerance,
        )
        exact = np.unique(self.values).size <= _EXACT_UNIQUES
        self.sigma = _SigmaEval(
            brm, setting.value.upper, problem.sigma_table_points, exact
        )
        self._pay_grid = None
        self._pay_tab = None

    def spend_and_gain(self, mu: float):
        """Per-sample spend p(s) and gross gain v * x(s) at multiplier mu."""
        w = self.values / (1.0 + mu)
        s = self.sigma(w)
        x = self.resp.allocation(s)
        if self.setting.spec.format is AuctionFormat.GFP:
            p = s * x
        else:
            p = self._tabulated_payment(s)
        return p, self.values * x

    def _tabulated_payment(self, s: np.ndarray) -> np.ndarray:
        # Monte Carlo payments are too slow to query at every value sample;
        # interpolate a dense one-time table instead.
        if self._pay_grid is None:
            self._pay_grid = np.linspace(0.0, self.setting.value.upper, 2049)
            self._pay_tab = self.resp.payment(self._pay_grid)
        return np.interp(s, self._pay_grid, self._pay_tab)


class _DualContext:
    """All frozen randomness and caches for one problem instance."""

    def __init__(self, problem: OfflineProblem, rng):
        gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        self.problem = problem
        self.evals = [_AuctionEval(a, problem, gen) for a in problem.auctions]
        self._stats: dict[float, dict] = {}

    def stats(self, mu: float) -> dict:
        got = self._stats.get(mu)
        if got is not None:
            return got
        m = self.problem.mc_values
        spend = np.zeros(m)
        gain = np.zeros(m)
        for ev in self.evals:
            p, g = ev.spend_and_gain(mu)
            spend += p
            gain += g
        util = gain - spend
        q_sample = util - mu * spend
        root_m = np.sqrt(m)
        out = {
            "spend": float(spend.mean()),
            "spend_se": float(spend.std(ddof=1) / root_m),
            "utility": float(util.mean()),
            "utility_se": float(util.std(ddof=1) / root_m),
            "q": float(mu * self.problem.budget_per_round + q_sample.mean()),
            "q_se": float(q_sample.std(ddof=1) / root_m),
        }
        self._stats[mu] = out
        return out


def _context(problem: OfflineProblem, rng) -> _DualContext:
    if problem._ctx is None:
        problem._ctx = _DualContext(problem, rng)
    return problem._ctx


def dual_value(problem: OfflineProblem, mu: float, rng=None):
    """Dual objective q(mu) with its Monte Carlo standard error.

    Draws are frozen on first use of the problem, so repeated calls at
    different mu share common random numbers.
    """
    if not (np.isfinite(mu) and mu >= 0.0):
        raise ValidationError("mu must be finite and non-negative")
    st = _context(problem, rng).stats(float(mu))
    return st["q"], st["q_se"]


def dual_derivative(problem: OfflineProblem, mu: float, rng=None):
    """q'(mu) = rho - expected aggregate spend at mu, with standard error."""
    if not (np.isfinite(mu) and mu >= 0.0):
        raise ValidationError("mu must be finite and non-negative")
    st = _context(problem, rng).stats(float(mu))
    return problem.budget_per_round - st["spend"], st["spend_se"]


def solve_mu_star(problem: OfflineProblem, tol: float | None = None, rng=None,
                  max_iter: int = 200) -> DualSolution:
    """Minimize the dual over [0, mu_cap] by bisection on its derivative.

    The constraint is declared slack (mu* = 0) when the derivative at zero is
    above -2 standard errors of its estimate.  If sampling noise breaks the
    sign pattern bisection needs, a golden-section pass on q itself is used
    instead.
    """
    ctx = _context(problem, rng)
    rho = problem.budget_per_round
    cap = problem.mu_cap
    if tol is None:
        tol = 1e-4 * cap
    if not (np.isfinite(tol) and tol > 0.0):
        raise ValidationError("tol must be positive")

    d0, se0 = dual_derivative(problem, 0.0)
    if d0 >= -2.0 * se0:
        return _solution_at(ctx, 0.0, rho)

    d_cap, _ = dual_derivative(problem, cap)
    if d_cap < 0.0:
        mu = _golden_min_q(problem, 0.0, cap, tol)
        return _solution_at(ctx, mu, rho)

    lo, hi = 0.0, cap
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        d_mid, _ = dual_derivative(problem, mid)
        if d_mid < 0.0:
            lo = mid
        else:
            hi = mid
    else:
        raise SolverError(
            f"bisection did not converge within {max_iter} iterations",
            bracket=(lo, hi),
        )
    return _solution_at(ctx, 0.5 * (lo + hi), rho)


def _golden_min_q(problem: OfflineProblem, lo: float, hi: float, tol: float) -> float:
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    c = hi - invphi * (hi - lo)
    d = lo + invphi * (hi - lo)
    fc, _ = dual_value(problem, c)
    fd, _ = dual_value(problem, d)
    while hi - lo > tol:
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - invphi * (hi - lo)
            fc, _ = dual_value(problem, c)
        else:
            lo, c, fc = c, d, fd
            d = lo + invphi * (hi - lo)
            fd, _ = dual_value(problem, d)
    return 0.5 * (lo + hi)


def _solution_at(ctx: _DualContext, mu: float, rho: float) -> DualSolution:
    st = ctx.stats(mu)
    return DualSolution(
        mu_star=mu,
        dual_value=st["q"],
        dual_stderr=st["q_se"],
        expected_spend=st["spend"],
        spend_stderr=st["spend_se"],
        expected_utility=st["utility"],
        utility_stderr=st["utility_se"],
        complementary_slackness=mu * (rho - st["spend"]),
    )


def hindsight_benchmark(problem: OfflineProblem, horizon: int, rng=None) -> float:
    """T times the per-round optimum Z; upper-bounds any feasible strategy's
    expected total utility over the horizon."""
    if horizon < 1:
        raise ValidationError("horizon must be at least 1")
    sol = solve_mu_star(problem, rng=rng)
    return horizon * sol.expected_utility
