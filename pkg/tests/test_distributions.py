"""Distributions: moments, CDF behavior, the empirical CDF, and the loader."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pacesim import (
    EmpiricalCdf,
    LoadError,
    PointMass,
    TruncatedLognormal,
    UniformBids,
    ValidationError,
    ValueModel,
    dkw_epsilon,
    load_bid_samples,
)

# The two lognormal parameter sets used throughout: both have unit mean before
# clipping; the second has variance 2.  Clipping at the bid bound thins the
# heavy tail, so the clipped moments sit below the raw ones.  Closed forms for
# X = min(L, u), with Phi the standard normal CDF and z = (ln u - mu)/sigma:
#   E[X]   = exp(mu + sigma^2/2) * Phi(z - sigma)   + u   * (1 - Phi(z))
#   E[X^2] = exp(2 mu + 2 sigma^2) * Phi(z - 2 sigma) + u^2 * (1 - Phi(z))
VAR1 = dict(mu=-0.3466, sigma=0.8326, upper=10.0)
VAR2 = dict(mu=-0.5493, sigma=1.0481, upper=15.0)
VAR1_CLIPPED_MEAN = 0.997923
VAR1_CLIPPED_VAR = 0.948148
VAR2_CLIPPED_MEAN = 0.994380
VAR2_CLIPPED_VAR = 1.755191


def test_unit_mean_parameter_set():
    d = TruncatedLognormal(**VAR1)
    x = d.sample(np.random.default_rng(1), 1_000_000)
    assert abs(x.mean() - 1.0) < 0.01
    assert np.all(x >= 0.0) and np.all(x <= 10.0)


def test_variance_two_parameter_set():
    d = TruncatedLognormal(**VAR2)
    rng = np.random.default_rng(2)
    raw = rng.lognormal(d.mu, d.sigma, 1_000_000)
    # the parameters encode variance 2 (and unit mean) before clipping
    assert abs(raw.var() - 2.0) < 0.1
    assert abs(raw.mean() - 1.0) < 0.01
    clipped = np.minimum(raw, d.upper)
    assert abs(clipped.var() - VAR2_CLIPPED_VAR) < 0.05
    assert abs(clipped.mean() - VAR2_CLIPPED_MEAN) < 0.01


def test_clipped_moments_match_closed_form():
    d = TruncatedLognormal(**VAR1)
    x = d.sample(np.random.default_rng(3), 1_000_000)
    assert abs(x.mean() - VAR1_CLIPPED_MEAN) < 0.005
    assert abs(x.var() - VAR1_CLIPPED_VAR) < 0.02


def test_lognormal_cdf_matches_empirical():
    d = TruncatedLognormal(**VAR1)
    x = d.sample(np.random.default_rng(4), 200_000)
    for q in [0.2, 0.5, 1.0, 2.0, 5.0]:
        assert d.cdf(q) == pytest.approx(np.mean(x <= q), abs=0.005)


def test_lognormal_cdf_endpoints():
    d = TruncatedLognormal(**VAR2)
    assert d.cdf(-1.0) == 0.0
    assert d.cdf(0.0) == 0.0
    assert d.cdf(d.upper) == 1.0
    assert d.cdf(d.upper + 5.0) == 1.0


def test_lognormal_parameter_validation():
    with pytest.raises(ValidationError):
        TruncatedLognormal(0.0, 0.0, 1.0)
    with pytest.raises(ValidationError):
        TruncatedLognormal(0.0, 1.0, 0.0)
    with pytest.raises(ValidationError):
        TruncatedLognormal(np.nan, 1.0, 1.0)


def test_seed_determinism():
    d = TruncatedLognormal(**VAR1)
    a = d.sample(np.random.default_rng(42), 1000)
    b = d.sample(np.random.default_rng(42), 1000)
    assert np.array_equal(a, b)


# ----------------------------------------------------------------------
# uniform / point mass


def test_uniform_bids():
    d = UniformBids(0.0, 2.0)
    x = d.sample(np.random.default_rng(5), 100_000)
    assert np.all((x >= 0.0) & (x <= 2.0))
    assert abs(x.mean() - 1.0) < 0.01
    assert d.cdf(1.0) == 0.5
    assert d.cdf(-0.5) == 0.0
    assert d.cdf(3.0) == 1.0
    with pytest.raises(ValidationError):
        UniformBids(1.0, 1.0)
    with pytest.raises(ValidationError):
        UniformBids(-1.0, 1.0)


def test_point_mass():
    d = PointMass(0.7)
    assert d.sample(np.random.default_rng(6)) == 0.7
    assert np.all(d.sample(np.random.default_rng(6), 10) == 0.7)
    assert d.cdf(0.69) == 0.0
    assert d.cdf(0.7) == 1.0
    assert d.upper == 0.7


# ----------------------------------------------------------------------
# empirical CDF


def test_empirical_counting():
    cdf = EmpiricalCdf([1.0, 2.0, 3.0])
    assert cdf.cdf(2.0) == pytest.approx(2 / 3)
    assert cdf.cdf(0.5) == 0.0
    assert cdf.cdf(3.0) == 1.0
    assert cdf.count == 3


def test_empirical_extend_from_empty():
    cdf = EmpiricalCdf().extend([0.5])
    assert cdf.cdf(0.5) == 1.0
    assert cdf.count == 1


def test_empirical_extend_merges():
    cdf = EmpiricalCdf([1.0, 3.0]).extend([2.0])
    assert cdf.cdf(2.0) == pytest.approx(2 / 3)
    assert np.array_equal(cdf.samples, [1.0, 2.0, 3.0])


def test_empirical_extend_is_persistent():
    base = EmpiricalCdf([1.0])
    grown = base.extend([0.5, 2.0])
    assert base.count == 1 and grown.count == 3
    assert grown is not base
    assert base.extend([]) is base


def test_empirical_count_grows_per_round():
    cdf = EmpiricalCdf()
    for t in range(1, 11):
        cdf = cdf.extend(np.full(5, 0.1 * t))
        assert cdf.count == 5 * t


def test_empirical_empty_behavior():
    cdf = EmpiricalCdf()
    assert cdf.cdf(1.0) == 0.0
    assert cdf.upper == 0.0
    with pytest.raises(ValidationError):
        cdf.sample(np.random.default_rng(7))


def test_empirical_rejects_bad_samples():
    with pytest.raises(ValidationError):
        EmpiricalCdf([1.0, -0.5])
    with pytest.raises(ValidationError):
        EmpiricalCdf([np.inf])
    with pytest.raises(ValidationError):
        EmpiricalCdf([1.0]).extend([np.nan])


def test_dkw_epsilon_values():
    # sqrt(ln(2/alpha) / (2 m))
    assert dkw_epsilon(100, 0.05) == pytest.approx(
        np.sqrt(np.log(40.0) / 200.0)
    )
    assert dkw_epsilon(400, 0.05) == pytest.approx(dkw_epsilon(100, 0.05) / 2)
    with pytest.raises(ValidationError):
        dkw_epsilon(0)
    with pytest.raises(ValidationError):
        dkw_epsilon(100, 1.5)


def test_dkw_band_coverage():
    # sup-norm deviation of the empirical CDF stays inside the 95% band in at
    # least 95% of trials (the bound is conservative, so usually far more)
    m, trials = 500, 200
    eps = dkw_epsilon(m, 0.05)
    rng = np.random.default_rng(8)
    hits = 0
    for _ in range(trials):
        s = np.sort(rng.uniform(0.0, 1.0, m))
        grid = np.arange(1, m + 1) / m
        sup = max(np.max(grid - s), np.max(s - (grid - 1 / m)))
        hits += sup <= eps
    assert hits >= 0.95 * trials


@given(
    st.lists(st.floats(0.0, 100.0), min_size=1, max_size=50),
    st.lists(st.floats(-10.0, 110.0), min_size=1, max_size=20),
)
@settings(max_examples=100, deadline=None)
def test_empirical_cdf_is_monotone_in_unit_interval(samples, queries):
    cdf = EmpiricalCdf(samples)
    qs = np.sort(np.asarray(queries))
    vals = cdf.cdf(qs)
    assert np.all(vals >= 0.0) and np.all(vals <= 1.0)
    assert np.all(np.diff(vals) >= 0.0)


@given(st.floats(0.01, 5.0), st.floats(0.1, 2.0), st.floats(0.5, 50.0))
@settings(max_examples=50, deadline=None)
def test_parametric_cdfs_monotone(a, b, c):
    dists = [TruncatedLognormal(a - 2.0, b, c), UniformBids(0.0, c), PointMass(a)]
    xs = np.linspace(-1.0, c + 1.0, 101)
    for d in dists:
        vals = np.asarray([d.cdf(float(x)) for x in xs])
        assert np.all((vals >= 0.0) & (vals <= 1.0))
        assert np.all(np.diff(vals) >= -1e-12)


# ----------------------------------------------------------------------
# value model


def test_value_model_degenerate_multiplier_equals_base():
    base = TruncatedLognormal(**VAR1)
    vm = ValueModel(base, 1.0, 1.0)
    got = vm.sample(np.random.default_rng(9), 5000)
    want = base.sample(np.random.default_rng(9), 5000)
    assert np.allclose(got, want)


def test_value_model_clamps_to_bound():
    base = UniformBids(0.0, 1.0)
    vm = ValueModel(base, 1.0, 1.5)
    x = vm.sample(np.random.default_rng(10), 50_000)
    assert np.all(x <= 1.0)
    assert np.any(x == 1.0)  # the markup pushes some mass onto the bound
    assert vm.upper == 1.0


def test_value_model_mean_shift():
    base = UniformBids(0.0, 1.0)
    vm = ValueModel(base, 1.2, 1.2)
    x = vm.sample(np.random.default_rng(11), 200_000)
    # E[min(1.2 U, 1)] = 1.2/2 - 0.2^2/(2*1.2) = 0.58333...
    assert abs(x.mean() - 0.58333) < 0.005


def test_value_model_validation():
    base = UniformBids(0.0, 1.0)
    with pytest.raises(ValidationError):
        ValueModel(base, 0.9, 1.5)
    with pytest.raises(ValidationError):
        ValueModel(base, 1.5, 1.2)


# ----------------------------------------------------------------------
# loader


def test_load_bid_samples_roundtrip(tmp_path):
    p = tmp_path / "bids.txt"
    p.write_text("0.5\n1.5\n")
    cdf = load_bid_samples(p)
    assert cdf.count == 2
    assert np.array_equal(cdf.samples, [0.5, 1.5])
    assert cdf.source == str(p)


def test_load_bid_samples_crlf(tmp_path):
    p = tmp_path / "bids.txt"
    p.write_bytes(b"1.0\r\n2.0\r\n")
    assert load_bid_samples(p).count == 2


def test_load_bid_samples_empty_file(tmp_path):
    p = tmp_path / "empty.txt"
    p.write_text("")
    with pytest.raises(LoadError):
        load_bid_samples(p)


def test_load_bid_samples_cites_line_number(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("1.0\n2.0\nabc\n")
    with pytest.raises(LoadError, match="line 3"):
        load_bid_samples(p)


def test_load_bid_samples_negative_value(tmp_path):
    p = tmp_path / "neg.txt"
    p.write_text("1.0\n-2.0\n")
    with pytest.raises(LoadError, match="line 2"):
        load_bid_samples(p)


def test_load_bid_samples_non_finite(tmp_path):
    p = tmp_path / "inf.txt"
    p.write_text("inf\n")
    with pytest.raises(LoadError, match="line 1"):
        load_bid_samples(p)


def test_load_bid_samples_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_bid_samples(tmp_path / "nope.txt")
