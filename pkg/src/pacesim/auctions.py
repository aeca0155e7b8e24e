"""Single-round clearing of position auctions under GFP, GSP, and VCG payment rules.

All three formats rank bidders identically (highest bid wins the best
position); they differ only in what winners pay per click.  Clearing is a
pure function of the bid profile plus an injected random generator used
solely to break ties.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import StructuralError, ValidationError


class AuctionFormat(str, Enum):
    GFP = "gfp"
    GSP = "gsp"
    VCG = "vcg"


@dataclass(frozen=True)
class AuctionSpec:
    """One platform's mechanism: payment rule, competitor count, slot CTRs.

    The tracked bidder always occupies the last entry of a bid profile, so
    profiles for this spec carry ``num_competitors + 1`` bids.  ``discounts``
    holds the click-through rate of each position, strictly decreasing and in
    (0, 1]; its length is the number of positions.
    """

    format: AuctionFormat
    num_competitors: int
    discounts: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "format", AuctionFormat(self.format))
        object.__setattr__(self, "discounts", tuple(float(a) for a in self.discounts))
        if self.num_competitors < 1:
            raise ValidationError("need at least one competitor")
        if not self.discounts:
            raise ValidationError("need at least one position")
        if any(not np.isfinite(a) or a <= 0.0 or a > 1.0 for a in self.discounts):
            raise ValidationError("position CTRs must lie in (0, 1]")
        if any(b >= a for a, b in zip(self.discounts, self.discounts[1:])):
            raise ValidationError("position CTRs must be strictly decreasing")

    @property
    def num_positions(self) -> int:
        return len(self.discounts)

    @property
    def num_bidders(self) -> int:
        return self.num_competitors + 1


@dataclass(frozen=True)
class AuctionOutcome:
    """Per-bidder CTRs obtained and per-click-scaled payments for one round."""

    ctrs: np.ndarray
    payments: np.ndarray


def clear_auction(spec: AuctionSpec, bids, rng: np.random.Generator) -> AuctionOutcome:
    """Clear one round and return what every bidder got and paid.

    A bid of exactly zero means staying out: the bidder takes no position and
    pays nothing, and does not block lower-ranked participants.  Equal
    positive bids are ordered uniformly at random using ``rng``.
    """
    b = np.asarray(bids, dtype=float)
    if b.shape != (spec.num_bidders,):
        raise StructuralError(
            f"expected {spec.num_bidders} bids for this auction, got shape {b.shape}"
        )
    if not np.all(np.isfinite(b)):
        raise ValidationError("bids must be finite")
    if np.any(b < 0.0):
        raise ValidationError("bids must be non-negative")

    ctrs = np.zeros_like(b)
    payments = np.zeros_like(b)
    active = np.flatnonzero(b > 0.0)
    if active.size == 0:
        return AuctionOutcome(ctrs=ctrs, payments=payments)

    # A random permutation followed by a stable sort on descending bid makes
    # every ordering of tied bids equally likely.
    shuffled = active[rng.permutation(active.size)]
    order = shuffled[np.argsort(-b[shuffled], kind="stable")]

    alpha = np.asarray(spec.discounts)
    k = spec.num_positions
    nwin = min(k, order.size)
    winners = order[:nwin]
    ctrs[winners] = alpha[:nwin]

    # Bids by rank, padded with zeros so "the bid one rank below" is always
    # defined even when fewer than k+1 bidders participate.
    ranked = np.zeros(k + 1)
    take = min(order.size, k + 1)
    ranked[:take] = b[order[:take]]

    if spec.format is AuctionFormat.GFP:
        payments[winners] = alpha[:nwin] * b[winners]
    elif spec.format is AuctionFormat.GSP:
        payments[winners] = alpha[:nwin] * ranked[1 : nwin + 1]
    else:
        # VCG: the winner of position i pays the externality it imposes,
        # sum over l >= i of (alpha_l - alpha_{l+1}) times the (l+1)-th
        # highest bid, with alpha beyond the last position taken as zero.
        marginal = alpha - np.append(alpha[1:], 0.0)
        contrib = marginal * ranked[1 : k + 1]
        suffix = np.cumsum(contrib[::-1])[::-1]
        payments[winners] = suffix[:nwin]

    return AuctionOutcome(ctrs=ctrs, payments=payments)
