"""Competitor-bid and own-value distributions.

Parametric samplers, an empirical CDF that grows as bids are revealed, and a
plain-text sample loader.  Samplers take a numpy Generator so the caller owns
every random stream.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtr

from .errors import LoadError, ValidationError


def dkw_epsilon(num_samples: int, alpha: float = 0.05) -> float:
    """Half-width of the level-(1 - alpha) DKW confidence band for an
    empirical CDF built from ``num_samples`` i.i.d. draws."""
    if num_samples < 1:
        raise ValidationError("need at least one sample")
    if not 0.0 < alpha < 1.0:
        raise ValidationError("alpha must lie in (0, 1)")
    return float(np.sqrt(np.log(2.0 / alpha) / (2.0 * num_samples)))


class TruncatedLognormal:
    """Lognormal distribution clipped to [0, upper].

    ``upper`` is the declared bid/value bound; parameter sets are chosen so the
    clipped tail carries well under 1e-3 of the mass.  Clipping leaves the mean
    essentially untouched but does thin the heavy tail, so higher moments sit
    slightly below their unclipped values.
    """

    def __init__(self, mu: float, sigma: float, upper: float):
        if not np.isfinite(mu):
            raise ValidationError("mu must be finite")
        if not (np.isfinite(sigma) and sigma > 0.0):
            raise ValidationError("sigma must be positive")
        if not (np.isfinite(upper) and upper > 0.0):
            raise ValidationError("upper must be positive")
        self.mu = float(mu)
        self.sigma = float(sigma)
        self._upper = float(upper)

    @property
    def upper(self) -> float:
        return self._upper

    def sample(self, rng: np.random.Generator, size=None):
        return np.minimum(rng.lognormal(self.mu, self.sigma, size), self._upper)

    def cdf(self, x):
        arr = np.asarray(x, dtype=float)
        out = np.zeros(arr.shape)
        pos = arr > 0.0
        out[pos] = ndtr((np.log(arr[pos]) - self.mu) / self.sigma)
        out[arr >= self._upper] = 1.0
        return out if np.ndim(x) else float(out)

    def __repr__(self) -> str:
        return f"TruncatedLognormal(mu={self.mu}, sigma={self.sigma}, upper={self._upper})"


class UniformBids:
    """Uniform distribution on [low, high]; handy as a smooth test bed."""

    def __init__(self, low: float = 0.0, high: float = 1.0):
        if not (np.isfinite(low) and np.isfinite(high) and 0.0 <= low < high):
            raise ValidationError("need 0 <= low < high")
        self.low = float(low)
        self.high = float(high)

    @property
    def upper(self) -> float:
        return self.high

    def sample(self, rng: np.random.Generator, size=None):
        return rng.uniform(self.low, self.high, size)

    def cdf(self, x):
        arr = np.asarray(x, dtype=float)
        out = np.clip((arr - self.low) / (self.high - self.low), 0.0, 1.0)
        out = np.where(arr < 0.0, 0.0, out)
        return out if np.ndim(x) else float(out)

    def __repr__(self) -> str:
        return f"UniformBids({self.low}, {self.high})"


class PointMass:
    """Degenerate distribution putting all mass on one value."""

    def __init__(self, value: float):
        if not (np.isfinite(value) and value >= 0.0):
            raise ValidationError("value must be finite and non-negative")
        self.value = float(value)

    @property
    def upper(self) -> float:
        return self.value

    def sample(self, rng: np.random.Generator, size=None):
        if size is None:
            return self.value
        return np.full(size, self.value)

    def cdf(self, x):
        arr = np.asarray(x, dtype=float)
        out = (arr >= self.value).astype(float)
        return out if np.ndim(x) else float(out)

    def __repr__(self) -> str:
        return f"PointMass({self.value})"


class EmpiricalCdf:
    """Right-continuous empirical CDF over a multiset of observed bids.

    Immutable: ``extend`` returns a new instance over the union multiset.
    Batched extension keeps the per-round cost of an online loop at one merge
    of two sorted arrays.
    """

    __slots__ = ("_samples", "source")

    def __init__(self, samples=(), source: str | None = None):
        arr = np.asarray(samples, dtype=float).ravel()
        if arr.size:
            if not np.all(np.isfinite(arr)):
                raise ValidationError("samples must be finite")
            if np.any(arr < 0.0):
                raise ValidationError("samples must be non-negative")
            arr = np.sort(arr)
        self._samples = arr
        self.source = source

    @classmethod
    def _from_sorted(cls, arr: np.ndarray, source=None) -> "EmpiricalCdf":
        obj = cls.__new__(cls)
        obj._samples = arr
        obj.source = source
        return obj

    @property
    def count(self) -> int:
        return int(self._samples.size)

    @property
    def samples(self) -> np.ndarray:
        view = self._samples.view()
        view.flags.writeable = False
        return view

    @property
    def upper(self) -> float:
        return float(self._samples[-1]) if self._samples.size else 0.0

    def cdf(self, x):
        arr = np.asarray(x, dtype=float)
        if self._samples.size == 0:
            out = np.zeros(arr.shape)
        else:
            out = np.searchsorted(self._samples, arr, side="right") / self._samples.size
        return out if np.ndim(x) else float(out)

    def extend(self, new_bids) -> "EmpiricalCdf":
        new = np.asarray(new_bids, dtype=float).ravel()
        if new.size == 0:
            return self
        if not np.all(np.isfinite(new)):
            raise ValidationError("samples must be finite")
        if np.any(new < 0.0):
            raise ValidationError("samples must be non-negative")
        # Both halves are sorted, so the stable sort is effectively a merge.
        merged = np.sort(np.concatenate([self._samples, np.sort(new)]), kind="stable")
        return EmpiricalCdf._from_sorted(merged, source=self.source)

    def sample(self, rng: np.random.Generator, size=None):
        if self._samples.size == 0:
            raise ValidationError("cannot sample from an empty empirical CDF")
        return rng.choice(self._samples, size=size)

    def __repr__(self) -> str:
        return f"EmpiricalCdf(count={self.count})"


class ValueModel:
    """Own-value distribution: a base draw scaled by a uniform markup.

    The product is clipped to the base distribution's bound so values never
    exceed the declared upper limit.  ``multiplier_low == multiplier_high``
    degenerates to a deterministic markup.
    """

    def __init__(self, base, multiplier_low: float = 1.0, multiplier_high: float = 1.5):
        lo, hi = float(multiplier_low), float(multiplier_high)
        if not (np.isfinite(lo) and np.isfinite(hi) and 1.0 <= lo <= hi):
            raise ValidationError("need 1 <= multiplier_low <= multiplier_high")
        self.base = base
        self.multiplier_low = lo
        self.multiplier_high = hi

    @property
    def upper(self) -> float:
        return self.base.upper

    def sample(self, rng: np.random.Generator, size=None):
        raw = self.base.sample(rng, size) * rng.uniform(
            self.multiplier_low, self.multiplier_high, size
        )
        return np.clip(raw, 0.0, self.upper)

    def __repr__(self) -> str:
        return (
            f"ValueModel({self.base!r}, "
            f"multiplier=[{self.multiplier_low}, {self.multiplier_high}])"
        )


def load_bid_samples(path) -> EmpiricalCdf:
    """Read one non-negative decimal per line (LF or CRLF) into an EmpiricalCdf.

    Raises LoadError naming the first bad line; an empty file is an error.
    """
    values = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.strip()
            if not text:
                raise LoadError(f"{path}: line {lineno}: empty line")
            try:
                v = float(text)
            except ValueError:
                raise LoadError(f"{path}: line {lineno}: not a number: {text!r}") from None
            if not np.isfinite(v):
                raise LoadError(f"{path}: line {lineno}: value must be finite")
            if v < 0.0:
                raise LoadError(f"{path}: line {lineno}: value must be non-negative")
            values.append(v)
    if not values:
        raise LoadError(f"{path}: no samples found")
    return EmpiricalCdf(values, source=str(path))
