"""Expected allocation/payment curves and best-response bids against them.

Against n i.i.d. competitor bids with CDF F, the tracked bidder's expected
CTR at bid b has a closed form shared by all three auction formats (they rank
bids identically):

    x(b) = sum_i alpha_i * C(n, n-i+1) * F(b)^(n-i+1) * (1-F(b))^(i-1)

GFP expected payment is exactly b * x(b).  GSP and VCG payments have no
elementary form here, so they are Monte Carlo means over a frozen draw of
competitor profiles; freezing gives common random numbers across every bid
queried through one instance, which is what makes argmax over bids stable.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .auctions import AuctionFormat, AuctionSpec
from .errors import ValidationError

_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0

# Cap on how many bids one vectorized Monte Carlo payment call touches at a
# time; keeps the (samples x bids x positions) temporary at a few tens of MB.
_MC_CHUNK = 1024


class ExpectedResponse:
    """Expected CTR and expected payment for the tracked bidder, as functions
    of its own bid, holding the competitor-bid distribution fixed."""

    def __init__(self, spec: AuctionSpec, competitor_dist, mc_samples: int = 20_000,
                 rng: np.random.Generator | int | None = None):
        if mc_samples < 2:
            raise ValidationError("mc_samples must be at least 2")
        self.spec = spec
        self.dist = competitor_dist
        self.mc_samples = int(mc_samples)
        self._rng = rng
        self._top = None   # (m, k) thresholds: j-th column is the (j+1)-th largest competitor bid
        self._pay = None   # (m, k+1) payment given j competitors above; last column = lost

    # ------------------------------------------------------------------
    # closed-form allocation

    def allocation(self, bid):
        """Expected CTR at own bid ``bid``; zero at zero (non-participation)."""
        b = np.asarray(bid, dtype=float)
        F = np.asarray(self.dist.cdf(b), dtype=float)
        n = self.spec.num_competitors
        out = np.zeros(b.shape)
        for i0, a in enumerate(self.spec.discounts):
            beaten = n - i0  # competitors that must bid below to win position i0+1
            if beaten < 0:
                continue
            out += a * comb(n, beaten) * F**beaten * (1.0 - F) ** i0
        out = np.where(b > 0.0, out, 0.0)
        return out if np.ndim(bid) else float(out)

    # ------------------------------------------------------------------
    # expected payment

    def payment(self, bid):
        """Expected payment at own bid ``bid``."""
        mean, _ = self.payment_stats(bid)
        return mean

    def payment_stats(self, bid):
        """Expected payment and its standard error (zero for the exact GFP form)."""
        b = np.atleast_1d(np.asarray(bid, dtype=float))
        if self.spec.format is AuctionFormat.GFP:
            mean = b * self.allocation(b)
            err = np.zeros_like(mean)
        else:
            mean, err = self._mc_payment(b)
        if np.ndim(bid):
            return mean, err
        return float(mean[0]), float(err[0])

    def utility(self, value: float, bid):
        """Expected single-round utility value * x(b) - p(b)."""
        return value * self.allocation(bid) - self.payment(bid)

    # ------------------------------------------------------------------
    # Monte Carlo internals (GSP / VCG)

    def _ensure_tables(self) -> None:
        if self._top is not None:
            return
        rng = self._rng if isinstance(self._rng, np.random.Generator) \
            else np.random.default_rng(self._rng)
        n = self.spec.num_competitors
        k = self.spec.num_positions
        m = self.mc_samples
        draws = self.dist.sample(rng, size=(m, n))
        desc = -np.sort(-draws, axis=1)
        padded = np.zeros((m, k + 1))
        cols = min(n, k + 1)
        padded[:, :cols] = desc[:, :cols]
        self._top = padded[:, :k]

        alpha = np.asarray(self.spec.discounts)
        pay = np.zeros((m, k + 1))
        if self.spec.format is AuctionFormat.GSP:
            # With j competitors above, own position is j+1 and the next bid
            # down is the (j+1)-th largest competitor.
            pay[:, :k] = alpha * padded[:, :k]
        else:
            marginal = alpha - np.append(alpha[1:], 0.0)
            contrib = marginal * padded[:, :k]
            pay[:, :k] = np.cumsum(contrib[:, ::-1], axis=1)[:, ::-1]
        self._pay = pay

    def _mc_payment(self, b: np.ndarray):
        self._ensure_tables()
        m = self.mc_samples
        rows = np.arange(m)[:, None]
        mean = np.empty(b.shape)
        err = np.empty(b.shape)
        for start in range(0, b.size, _MC_CHUNK):
            chunk = b[start : start + _MC_CHUNK]
            # number of competitors above own bid, already capped at k
            above = (self._top[:, None, :] > chunk[None, :, None]).sum(axis=2)
            pays = self._pay[rows, above]
            pays[:, chunk <= 0.0] = 0.0
            mean[start : start + _MC_CHUNK] = pays.mean(axis=0)
            err[start : start + _MC_CHUNK] = pays.std(axis=0, ddof=1) / np.sqrt(m)
        return mean, err


@dataclass
class BestResponseMap:
    """Maximizes expected utility over own bid in [0, value].

    A dense grid guards against non-concave utility curves; golden-section
    passes then sharpen the few best brackets.  VCG short-circuits to the
    identity (truthful bidding is optimal under any competitor distribution),
    and a zero value always maps to a zero bid.  Grid ties resolve to the
    smallest maximizing bid, which spends less.
    """

    response: ExpectedResponse
    grid_points: int = 512
    refine_tolerance: float | None = None
    refine_candidates: int = 3

    def best_response(self, value: float) -> float:
        v = float(value)
        if not np.isfinite(v) or v < 0.0:
            raise ValidationError("value must be finite and non-negative")
        if v == 0.0:
            return 0.0
        if self.response.spec.format is AuctionFormat.VCG:
            return v

        grid = np.linspace(0.0, v, self.grid_points)
        utils = self.response.utility(v, grid)
        best_i = int(np.argmax(utils))  # first index on ties -> smallest bid
        best_b = float(grid[best_i])
        best_u = float(utils[best_i])

        tol = self.refine_tolerance
        if tol is None:
            tol = 1e-4 * max(getattr(self.response.dist, "upper", v), v)

        for i in self._refine_indices(utils):
            lo = float(grid[max(i - 1, 0)])
            hi = float(grid[min(i + 1, len(grid) - 1)])
            if hi - lo <= tol:
                continue
            b_r, u_r = _golden_max(
                lambda x: float(self.response.utility(v, x)), lo, hi, tol
            )
            if u_r > best_u:
                best_b, best_u = b_r, u_r
        return best_b

    def table(self, values) -> np.ndarray:
        """Best response evaluated at each entry of ``values``."""
        return np.array([self.best_response(v) for v in np.asarray(values, dtype=float)])

    def _refine_indices(self, utils: np.ndarray) -> list[int]:
        inner = np.ones(len(utils), dtype=bool)
        inner[1:] &= utils[1:] >= utils[:-1]
        inner[:-1] &= utils[:-1] >= utils[1:]
        peaks = np.flatnonzero(inner)
        if peaks.size > self.refine_candidates:
            keep = np.argsort(-utils[peaks], kind="stable")[: self.refine_candidates]
            peaks = peaks[keep]
        # ascending bid order so equal-utility refinements keep the smaller bid
        return sorted(int(i) for i in peaks)


def _golden_max(f, lo: float, hi: float, tol: float):
    """Golden-section maximization on [lo, hi]; returns the best point that
    was actually evaluated together with its value."""
    best_x, best_f = lo, -np.inf
    span = hi - lo
    c = hi - _INVPHI * span
    d = lo + _INVPHI * span
    fc, fd = f(c), f(d)
    for x, fx in ((c, fc), (d, fd)):
        if fx > best_f:
            best_x, best_f = x, fx
    while hi - lo > tol:
        if fc >= fd:
            hi, d, fd = d, c, fc
            c = hi - _INVPHI * (hi - lo)
            fc = f(c)
            if fc > best_f:
                best_x, best_f = c, fc
        else:
            lo, c, fc = c, d, fd
            d = lo + _INVPHI * (hi - lo)
            fd = f(d)
            if fd > best_f:
                best_x, best_f = d, fd
    return best_x, best_f


def estimated_best_response(spec: AuctionSpec, empirical, value: float, *,
                            grid_points: int = 512,
                            refine_tolerance: float | None = None,
                            mc_samples: int = 20_000,
                            rng: np.random.Generator | int | None = None) -> float:
    """Best response against an empirical competitor-bid CDF.

    Identical to ``BestResponseMap`` with the empirical CDF plugged into the
    closed allocation form.  Before any sample has been observed the map is
    the identity, matching the online algorithm's first-round behavior.
    """
    v = float(value)
    if not np.isfinite(v) or v < 0.0:
        raise ValidationError("value must be finite and non-negative")
    if v == 0.0:
        return 0.0
    if spec.format is AuctionFormat.VCG:
        return v
    if empirical.count == 0:
        return v
    resp = ExpectedResponse(spec, empirical, mc_samples=mc_samples, rng=rng)
    return BestResponseMap(
        resp, grid_points=grid_points, refine_tolerance=refine_tolerance
    ).best_response(v)
