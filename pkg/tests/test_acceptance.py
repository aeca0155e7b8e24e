"""End-to-end acceptance checks, one test per release criterion.

Run with ``pytest tests/test_acceptance.py -v`` for a one-line verdict per
criterion.  Everything here goes through the public API only and recomputes
its evidence from scratch; tolerances are part of the contract and must not
be loosened to accommodate implementation drift.
"""

import numpy as np
import pytest
from scipy.special import comb

from pacesim import (
    AuctionFormat,
    AuctionSpec,
    AuctionSetting,
    BestResponseMap,
    EmpiricalCdf,
    ExpectedResponse,
    ExperimentConfig,
    OfflineProblem,
    PointMass,
    Strategy,
    TruncatedLognormal,
    UniformBids,
    ValueModel,
    clear_auction,
    dual_derivative,
    dual_value,
    run_experiment,
    run_single,
    simulate_run,
    solve_mu_star,
)

pytestmark = pytest.mark.acceptance


def descending_discounts(rng, k):
    """Strictly decreasing CTRs in (0, 1], guaranteed by cumulative products."""
    first = float(rng.uniform(0.5, 1.0))
    ratios = rng.uniform(0.3, 0.95, size=k - 1)
    return tuple(np.round(first * np.cumprod(np.append(1.0, ratios)), 6))


def random_competitor(rng):
    if rng.uniform() < 0.5:
        return UniformBids(0.0, float(rng.uniform(0.5, 2.0)))
    return TruncatedLognormal(float(rng.uniform(-0.8, 0.2)),
                              float(rng.uniform(0.5, 1.2)),
                              float(rng.uniform(3.0, 8.0)))


# ----------------------------------------------------------------------
# 1. best-response oracle equivalence


def first_price_utility_oracle(spec, dist, value, bids):
    """Brute-force expected utility (value - b) * x(b) for first-price,
    with the winning-probability polynomial written out independently."""
    F = np.asarray(dist.cdf(bids), dtype=float)
    n = spec.num_competitors
    x = np.zeros_like(F)
    for i0, a in enumerate(spec.discounts):
        x += a * comb(n, n - i0, exact=True) * F ** (n - i0) * (1.0 - F) ** i0
    return np.where(np.asarray(bids) > 0.0, (value - bids) * x, 0.0)


def test_best_response_matches_halving_and_grid_oracle():
    spec = AuctionSpec(AuctionFormat.GFP, 1, (1.0,))
    tol = 1e-4
    br = BestResponseMap(ExpectedResponse(spec, UniformBids(0.0, 1.0)),
                         refine_tolerance=tol)
    for v in np.linspace(0.02, 1.0, 50):
        assert abs(br.best_response(v) - v / 2.0) <= 2.0 * tol

    for s in range(20):
        rng = np.random.default_rng(7000 + s)
        n = int(rng.integers(1, 6))
        k = int(rng.integers(1, min(n, 3) + 1))
        spec = AuctionSpec(AuctionFormat.GFP, n, descending_discounts(rng, k))
        dist = random_competitor(rng)
        v = float(rng.uniform(0.05, 2.0))
        # utility kinks at the competitor upper bound; solve below grid slack
        b_star = BestResponseMap(ExpectedResponse(spec, dist),
                                 refine_tolerance=1e-7).best_response(v)

        grid = np.linspace(0.0, v, 100_000)
        oracle = first_price_utility_oracle(spec, dist, v, grid)
        at_best = float(first_price_utility_oracle(spec, dist, v,
                                                   np.array([b_star]))[0])
        slack = 1e-6 * max(dist.upper, v)
        assert at_best >= float(oracle.max()) - slack, f"setting seed {7000 + s}"


# ----------------------------------------------------------------------
# 2. offline solver on the closed-form instance


def test_offline_solver_closed_form_instance():
    def problem(copies):
        setting = AuctionSetting(
            AuctionSpec(AuctionFormat.GFP, 1, (1.0,)),
            UniformBids(0.0, 1.0),
            PointMass(0.8),
        )
        return OfflineProblem(auctions=(setting,) * copies,
                              budget_per_round=0.04 * copies)

    single = solve_mu_star(problem(1), rng=0)
    assert abs(single.mu_star - 1.0) <= 1e-2
    kkt, _ = dual_derivative(problem(1), single.mu_star, rng=0)
    assert abs(single.mu_star * kkt) <= 1e-3

    double = solve_mu_star(problem(2), rng=0)
    assert abs(double.mu_star - single.mu_star) <= 1e-2


# ----------------------------------------------------------------------
# 3. closed-form curves vs. simulated auctions


def test_first_price_curves_match_simulation():
    draws = 100_000
    for s in range(10):
        rng = np.random.default_rng(8000 + s)
        n = int(rng.integers(1, 6))
        k = int(rng.integers(1, min(n, 3) + 1))
        spec = AuctionSpec(AuctionFormat.GFP, n, descending_discounts(rng, k))
        dist = random_competitor(rng)
        b = float(rng.uniform(0.05, 0.95) * dist.upper)
        resp = ExpectedResponse(spec, dist)

        ctrs = np.empty(draws)
        pays = np.empty(draws)
        for i in range(draws):
            comp = dist.sample(rng, n)
            outcome = clear_auction(spec, np.append(comp, b), rng)
            ctrs[i] = outcome.ctrs[-1]
            pays[i] = outcome.payments[-1]

        se_x = ctrs.std(ddof=1) / np.sqrt(draws)
        se_p = pays.std(ddof=1) / np.sqrt(draws)
        assert abs(resp.allocation(b) - ctrs.mean()) <= 3.0 * se_x, \
            f"allocation, seed {8000 + s}"
        assert abs(resp.payment(b) - pays.mean()) <= 3.0 * se_p, \
            f"payment, seed {8000 + s}"


# ----------------------------------------------------------------------
# 4. empirical best-response estimation rate


def test_estimated_response_error_decays_at_expected_rate():
    spec = AuctionSpec(AuctionFormat.GFP, 2, (1.0,))
    truth_map = BestResponseMap(ExpectedResponse(spec, UniformBids(0.0, 1.0)),
                                refine_tolerance=1e-6)
    values = np.linspace(0.1, 0.9, 9)
    truth = truth_map.table(values)

    checkpoints = np.array([100, 219, 478, 1046, 2287, 5000])
    n = spec.num_competitors
    sup_dev = np.zeros((10, len(checkpoints)))
    for s in range(10):
        draws = np.random.default_rng(1000 + s).uniform(0.0, 1.0,
                                                        checkpoints[-1] * n)
        for c, t in enumerate(checkpoints):
            est = BestResponseMap(
                ExpectedResponse(spec, EmpiricalCdf(draws[: t * n]))
            )
            sup_dev[s, c] = np.max(np.abs(est.table(values) - truth))

    mean_dev = sup_dev.mean(axis=0)
    slope = np.polyfit(np.log(checkpoints), np.log(mean_dev), 1)[0]
    assert -0.8 <= slope <= -0.3, f"measured slope {slope:.3f}"


# ----------------------------------------------------------------------
# 5. budget safety under randomized configurations


def random_run_config(rng):
    J = int(rng.integers(1, 3))
    settings = []
    for _ in range(J):
        n = int(rng.integers(1, 5))
        k = int(rng.integers(1, min(n, 3) + 1))
        fmt = (AuctionFormat.GFP, AuctionFormat.GSP,
               AuctionFormat.VCG)[rng.integers(3)]
        comp = random_competitor(rng)
        value = ValueModel(comp, 1.0, float(rng.uniform(1.0, 1.6)))
        settings.append(AuctionSetting(
            AuctionSpec(fmt, n, descending_discounts(rng, k)), comp, value))

    upper = max(s.value.upper for s in settings)
    # log-uniform budgets span starvation territory up to slack budgets
    rho = float(np.exp(rng.uniform(np.log(0.005), np.log(1.0)))) * J * upper
    eps_cap = 1.0 / (J * upper)
    eps = float(rng.uniform(0.05, 0.95)) * eps_cap
    return ExperimentConfig(
        settings=tuple(settings),
        horizon=int(rng.integers(20, 60)),
        rho=rho,
        eps_avp=eps,
        eps_baseline=eps,
        seed=int(rng.integers(0, 2**31)),
        refresh_every=int(rng.integers(1, 6)),
        mu_init=0.0 if rng.uniform() < 0.3 else None,
        br_grid_points=64,
        br_mc_samples=400,
    )


def test_budget_never_exceeded_and_depletion_silences_bids():
    rng = np.random.default_rng(31337)
    depleted_runs = 0
    for i in range(200):
        config = random_run_config(rng)
        strategy = Strategy.AVP if i % 2 == 0 else Strategy.BASELINE
        series = run_single(config, strategy, run_index=0, z=0.0)

        budget = config.rho * config.horizon
        assert series.total_spend <= budget + 1e-9 * max(budget, 1.0)

        threshold = config.num_auctions * config.value_bound
        remaining_before = budget - np.append(0.0, np.cumsum(series.spend)[:-1])
        starved = remaining_before < threshold
        if starved.any():
            depleted_runs += 1
            assert not series.bids[starved].any(), \
                f"bid while starved, config seed {config.seed}"
    # the property must not pass vacuously
    assert depleted_runs >= 5


# ----------------------------------------------------------------------
# 6. adaptive pacing beats fixed pacing on the two-auction benchmark


def test_adaptive_pacing_outperforms_fixed_multiplier():
    comp = TruncatedLognormal(-0.3466, 0.8326, 10.0)
    # the 2-3x markup makes the budget bind (mu* = 0.17): regret then grows
    # like t^0.75 and the normalized series has a positive limit; starting
    # the multiplier at zero removes warm-up noise from the window means
    setting = AuctionSetting(
        AuctionSpec(AuctionFormat.GFP, 5, (1.0, 0.5, 0.25)),
        comp, ValueModel(comp, 2.0, 3.0),
    )
    config = ExperimentConfig(settings=(setting, setting), horizon=4000,
                              rho=1.0, runs=20, seed=7, mu_init=0.0)
    result = run_experiment(config)
    avp = result.aggregate(Strategy.AVP)
    base = result.aggregate(Strategy.BASELINE)

    m_a = avp.mean_cum_regret[-1]
    m_b = base.mean_cum_regret[-1]
    combined = float(np.hypot(avp.stderr_cum_regret[-1],
                              base.stderr_cum_regret[-1]))
    assert m_b - m_a >= 3.0 * combined, \
        f"gap {m_b - m_a:.1f} vs 3*stderr {3 * combined:.1f}"

    T = config.horizon
    recent, mid = int(0.9 * T), int(0.75 * T)

    norm_a = avp.mean_normalized_regret
    drift = abs(norm_a[recent:].mean() - norm_a[mid:recent].mean())
    assert drift / norm_a[mid:].mean() <= 0.1

    norm_b = base.mean_normalized_regret
    assert norm_b[recent:].mean() > norm_b[mid:recent].mean()


# ----------------------------------------------------------------------
# 7. truthful-format coincidence of both strategies


def test_truthful_auctions_make_strategies_coincide():
    comp = UniformBids(0.0, 1.0)
    setting = AuctionSetting(
        AuctionSpec(AuctionFormat.VCG, 3, (1.0, 0.6)),
        comp, ValueModel(comp, 1.0, 1.5),
    )
    config = ExperimentConfig(settings=(setting, setting), horizon=300,
                              rho=0.3, seed=5)
    for seed in (11, 4242):
        a = simulate_run(config, Strategy.AVP, seed, z=0.0)
        b = simulate_run(config, Strategy.BASELINE, seed, z=0.0)
        assert np.array_equal(a.bids, b.bids)
        assert np.array_equal(a.spend, b.spend)
        assert np.array_equal(a.mu, b.mu)


# ----------------------------------------------------------------------
# 8. dual derivative consistent with finite differences


def first_price_problem(seed):
    rng = np.random.default_rng(seed)
    J = int(rng.integers(1, 3))
    settings = []
    for _ in range(J):
        n = int(rng.integers(1, 5))
        k = int(rng.integers(1, min(n, 3) + 1))
        comp = random_competitor(rng)
        settings.append(AuctionSetting(
            AuctionSpec(AuctionFormat.GFP, n, descending_discounts(rng, k)),
            comp, ValueModel(comp, 1.0, 1.5)))
    rho = float(rng.uniform(0.05, 0.5)) * max(s.value.upper for s in settings)
    return OfflineProblem(auctions=tuple(settings), budget_per_round=rho,
                          mc_values=20_000, sigma_table_points=4097,
                          br_refine_tolerance=1e-6)


def test_dual_derivative_matches_finite_differences():
    rng = np.random.default_rng(99)
    for pseed in (1, 2, 3):
        problem = first_price_problem(pseed)
        h = 1e-3 * problem.mu_cap
        for _ in range(10):
            mu = float(rng.uniform(h, 0.8 * problem.mu_cap))
            d, d_se = dual_derivative(problem, mu, rng=pseed)
            hi, _ = dual_value(problem, mu + h, rng=pseed)
            lo, _ = dual_value(problem, mu - h, rng=pseed)
            fd = (hi - lo) / (2.0 * h)
            assert abs(fd - d) <= 3.0 * d_se, \
                f"problem {pseed}, mu {mu:.4f}: |{fd:.6f} - {d:.6f}| > 3se"
