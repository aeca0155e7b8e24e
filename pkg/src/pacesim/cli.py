"""Command-line front end.

Subcommands:

* ``simulate``       run a pacing experiment, write CSVs and a manifest
* ``solve-offline``  solve the offline dual and print the solution as JSON
* ``best-response``  tabulate the best-response bid over a value grid
* ``validate``       run a quick self-check suite

Flags override values from ``--config`` files; a manifest written by
``simulate`` is itself accepted as a config, which is what makes reruns
reproduce the original CSVs byte for byte.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from .auctions import AuctionFormat, AuctionSpec, clear_auction
from .distributions import TruncatedLognormal, dkw_epsilon, load_bid_samples
from .errors import ConfigError, PacesimError
from .harness import (
    ExperimentConfig,
    Strategy,
    run_experiment,
)
from .offline import AuctionSetting, OfflineProblem, solve_mu_star
from .pacing import PacingConfig
from .response import BestResponseMap, ExpectedResponse

logger = logging.getLogger(__name__)

# Stock competitor-bid distributions: both have unit mean; the declared value
# bound covers all but < 0.1% of the mass.
_LOGNORMAL_PRESETS = {
    1: {"mu": -0.3466, "sigma": 0.8326, "upper": 10.0},
    2: {"mu": -0.5493, "sigma": 1.0481, "upper": 15.0},
}

_DEFAULT_DISCOUNTS = "1,0.5,0.25"


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated float list: {text!r}")


def _add_setting_flags(parser: argparse.ArgumentParser, multi: bool) -> None:
    if multi:
        parser.add_argument(
            "--setting",
            help="comma-separated auction formats, e.g. gfp,gfp or vcg,gfp",
        )
    else:
        parser.add_argument("--format", choices=[f.value for f in AuctionFormat],
                            default="gfp", help="auction format")
    parser.add_argument("--n", type=int, default=5, help="competitors per auction")
    parser.add_argument("--discounts", type=_float_list, default=None,
                        help=f"position CTRs, default {_DEFAULT_DISCOUNTS}")
    parser.add_argument("--var", type=int, choices=(1, 2), default=1,
                        help="stock lognormal competitor distribution by variance")
    parser.add_argument("--dist-mu", type=float, default=None,
                        help="lognormal log-mean (overrides --var)")
    parser.add_argument("--dist-sigma", type=float, default=None,
                        help="lognormal log-stddev (overrides --var)")
    parser.add_argument("--dist-upper", type=float, default=None,
                        help="value/bid upper bound for the distribution")
    parser.add_argument("--bids-file", default=None,
                        help="file of competitor bid samples, one decimal per line")
    parser.add_argument("--mult", type=_float_list, default=None,
                        help="value multiplier range, default 1,1.5")


def _dist_dict(args) -> dict:
    if args.bids_file is not None:
        out = {"kind": "file", "path": args.bids_file}
        return out
    preset = dict(_LOGNORMAL_PRESETS[args.var])
    if args.dist_mu is not None:
        preset["mu"] = args.dist_mu
    if args.dist_sigma is not None:
        preset["sigma"] = args.dist_sigma
    if args.dist_upper is not None:
        preset["upper"] = args.dist_upper
    return {"kind": "lognormal", **preset}


def _settings_from_flags(args) -> list[dict]:
    formats = [f.strip().lower() for f in args.setting.split(",") if f.strip()]
    if not formats:
        raise ConfigError("--setting must name at least one auction format")
    for f in formats:
        if f not in {fmt.value for fmt in AuctionFormat}:
            raise ConfigError(f"unknown auction format {f!r}")
    discounts = args.discounts if args.discounts is not None \
        else _float_list(_DEFAULT_DISCOUNTS)
    mult = args.mult if args.mult is not None else [1.0, 1.5]
    if len(mult) != 2:
        raise ConfigError("--mult needs exactly two numbers")
    dist = _dist_dict(args)
    return [
        {
            "format": f,
            "n": args.n,
            "discounts": list(discounts),
            "competitor_dist": dist,
            "value": {"multiplier": list(mult)},
        }
        for f in formats
    ]


def _experiment_config(args) -> ExperimentConfig:
    if args.config is not None:
        with open(args.config, "r", encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as err:
                raise ConfigError(f"{args.config}: invalid JSON: {err}") from None
        if isinstance(data, dict) and isinstance(data.get("config"), dict):
            data = data["config"]
        if not isinstance(data, dict):
            raise ConfigError(f"{args.config}: expected a JSON object")
    else:
        data = {}

    if args.setting is not None:
        data["setting"] = _settings_from_flags(args)
    elif "setting" not in data:
        args.setting = "gfp,gfp"
        data["setting"] = _settings_from_flags(args)

    for key, flag in (
        ("T", args.T), ("rho", args.rho), ("runs", args.runs), ("seed", args.seed),
        ("eps_avp", args.eps_avp), ("eps_baseline", args.eps_baseline),
        ("emit_every", args.emit_every), ("mc_values", args.mc_values),
        ("workers", args.workers), ("refresh_every", args.refresh_every),
    ):
        if flag is not None:
            data[key] = flag
    data.setdefault("T", 10_000)
    data.setdefault("rho", 1.0)
    data.setdefault("runs", 50)
    data.setdefault("seed", 0)
    return ExperimentConfig.from_dict(data)


def _check_learning_rates(config: ExperimentConfig, allow_large: bool) -> None:
    """Reject explicitly requested rates at or above 1/(J*U).

    The default schedule T^(-1/4) is exempt: it can exceed the threshold at
    practical horizons and is the standard experimental choice; it runs with
    a warning instead.
    """
    threshold = config.eps_threshold()
    for name, eps in (("eps_avp", config.eps_avp),
                      ("eps_baseline", config.eps_baseline)):
        if eps is not None and eps >= threshold and not allow_large:
            raise _ExitTwo(
                f"{name} = {eps:g} violates the step-size condition "
                f"0 < eps < 1/(J*U) = {threshold:g}; "
                f"pass --allow-large-eps to run anyway"
            )
    for strategy in Strategy:
        eps = config.eps_for(strategy)
        if eps >= threshold:
            logger.warning(
                "%s learning rate %.6g is at or above 1/(J*U) = %.6g",
                strategy.value, eps, threshold,
            )


class _ExitTwo(Exception):
    """CLI-level usage error; maps to exit code 2."""


# ----------------------------------------------------------------------
# subcommands


def _cmd_simulate(args) -> int:
    config = _experiment_config(args)
    _check_learning_rates(config, args.allow_large_eps)
    result = run_experiment(config, output_dir=args.out)
    for strategy in Strategy:
        agg = result.aggregate(strategy)
        print(
            f"{strategy.value}: final mean cumulative regret "
            f"{agg.mean_cum_regret[-1]:.6g} "
            f"(stderr {agg.stderr_cum_regret[-1]:.6g})"
        )
    print(f"benchmark per-round optimum z = {result.z:.6g}, mu* = {result.mu_star:.6g}")
    if args.out:
        print(f"wrote {args.out}/avp.csv, {args.out}/baseline.csv, {args.out}/manifest.json")
    return 0


def _cmd_solve_offline(args) -> int:
    config = _experiment_config(args)
    problem = config.offline_problem()
    if args.tol is not None:
        solution = solve_mu_star(problem, tol=args.tol,
                                 rng=np.random.default_rng(config.seed))
    else:
        solution = solve_mu_star(problem, rng=np.random.default_rng(config.seed))
    out = solution.as_dict()
    out["mu_cap"] = problem.mu_cap
    print(json.dumps(out, indent=2, sort_keys=True))
    return 0


def _single_setting(args) -> AuctionSetting:
    wrapped = argparse.Namespace(**vars(args))
    wrapped.setting = args.format
    data = _settings_from_flags(wrapped)[0]
    from .harness import _setting_from_dict

    return _setting_from_dict(data)


def _cmd_best_response(args) -> int:
    setting = _single_setting(args)
    resp = ExpectedResponse(setting.spec, setting.competitor,
                            mc_samples=args.mc_samples,
                            rng=np.random.default_rng(args.seed))
    brm = BestResponseMap(resp, grid_points=args.grid_points)
    vmax = args.value_max if args.value_max is not None else setting.value.upper
    values = np.linspace(0.0, vmax, args.points)
    lines = ["value,bid"]
    for v in values:
        lines.append(f"{v:.12g},{brm.best_response(float(v)):.12g}")
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_validate(args) -> int:
    failures = 0
    for name, fn in _VALIDATION_CHECKS:
        try:
            fn()
        except Exception as err:  # noqa: BLE001 - report every failure uniformly
            failures += 1
            print(f"FAIL {name}: {err}")
        else:
            print(f"ok   {name}")
    if failures:
        print(f"{failures} check(s) failed")
        return 1
    print("all checks passed")
    return 0


# ----------------------------------------------------------------------
# validate checks


def _check_gfp_example():
    spec = AuctionSpec(AuctionFormat.GFP, num_competitors=2, discounts=(1.0, 0.5))
    out = clear_auction(spec, [0.9, 0.4, 0.7], np.random.default_rng(0))
    assert np.allclose(out.ctrs, [1.0, 0.0, 0.5]), out.ctrs
    assert np.allclose(out.payments, [0.9, 0.0, 0.35]), out.payments


def _check_gsp_example():
    spec = AuctionSpec(AuctionFormat.GSP, num_competitors=2, discounts=(1.0, 0.5))
    out = clear_auction(spec, [0.9, 0.4, 0.7], np.random.default_rng(0))
    assert np.allclose(out.payments, [0.7, 0.0, 0.2]), out.payments


def _check_vcg_second_price():
    rng = np.random.default_rng(7)
    spec = AuctionSpec(AuctionFormat.VCG, num_competitors=3, discounts=(1.0,))
    for _ in range(50):
        bids = rng.uniform(0.1, 1.0, 4)
        out = clear_auction(spec, bids, rng)
        winner = int(np.argmax(out.ctrs))
        second = np.sort(bids)[-2]
        assert abs(out.payments[winner] - second) < 1e-12


def _check_zero_bids():
    spec = AuctionSpec(AuctionFormat.GFP, num_competitors=2, discounts=(1.0,))
    out = clear_auction(spec, [0.0, 0.0, 0.0], np.random.default_rng(0))
    assert not out.ctrs.any() and not out.payments.any()


def _check_closed_form_vs_mc():
    from .distributions import UniformBids

    rng = np.random.default_rng(11)
    spec = AuctionSpec(AuctionFormat.GFP, num_competitors=4, discounts=(1.0, 0.5, 0.25))
    resp = ExpectedResponse(spec, UniformBids(0.0, 1.0))
    b = 0.6
    draws = 20_000
    ctrs = np.empty(draws)
    for i in range(draws):
        profile = np.append(rng.uniform(0.0, 1.0, 4), b)
        ctrs[i] = clear_auction(spec, profile, rng).ctrs[-1]
    se = ctrs.std(ddof=1) / np.sqrt(draws)
    assert abs(ctrs.mean() - resp.allocation(b)) < 5 * se


def _check_offline_instance():
    from .distributions import PointMass, UniformBids

    spec = AuctionSpec(AuctionFormat.GFP, num_competitors=1, discounts=(1.0,))
    problem = OfflineProblem(
        auctions=(AuctionSetting(spec, UniformBids(0.0, 1.0), PointMass(0.8)),),
        budget_per_round=0.04,
        mc_values=64,
    )
    sol = solve_mu_star(problem, rng=np.random.default_rng(3))
    assert abs(sol.mu_star - 1.0) < 0.05, sol.mu_star
    assert abs(sol.complementary_slackness) < 1e-2


def _check_budget_safety():
    from .distributions import UniformBids, ValueModel
    from .harness import ExperimentConfig, Strategy, run_single

    rng = np.random.default_rng(5)
    for trial in range(5):
        spec = AuctionSpec(AuctionFormat.GFP, num_competitors=3, discounts=(1.0, 0.4))
        setting = AuctionSetting(
            spec, UniformBids(0.0, 1.0), ValueModel(UniformBids(0.0, 1.0), 1.0, 1.5)
        )
        config = ExperimentConfig(
            settings=(setting,), horizon=60, rho=float(rng.uniform(0.05, 0.3)),
            runs=1, seed=int(rng.integers(1 << 16)), mc_values=2_000,
            br_grid_points=64, br_mc_samples=500,
        )
        for strategy in Strategy:
            series = run_single(config, strategy, 0)
            assert series.total_spend <= config.rho * config.horizon + 1e-9


def _check_empirical_cdf():
    from .distributions import EmpiricalCdf, UniformBids

    cdf = EmpiricalCdf([0.2, 0.4, 0.4, 0.9])
    assert cdf.cdf(0.4) == 0.75 and cdf.cdf(0.1) == 0.0 and cdf.cdf(1.0) == 1.0
    rng = np.random.default_rng(2)
    dist = UniformBids(0.0, 1.0)
    hits = 0
    trials, m = 60, 400
    for _ in range(trials):
        samples = dist.sample(rng, m)
        emp = EmpiricalCdf(samples)
        grid = np.sort(samples)
        high = np.abs(emp.cdf(grid) - dist.cdf(grid)).max()
        low = np.abs((np.arange(m) / m) - dist.cdf(grid)).max()
        if max(high, low) <= dkw_epsilon(m):
            hits += 1
    assert hits >= int(0.9 * trials), f"{hits}/{trials}"


_VALIDATION_CHECKS = [
    ("gfp clearing example", _check_gfp_example),
    ("gsp clearing example", _check_gsp_example),
    ("vcg single slot is second price", _check_vcg_second_price),
    ("all-zero bids clear to nothing", _check_zero_bids),
    ("closed-form allocation matches simulation", _check_closed_form_vs_mc),
    ("offline solver closed-form instance", _check_offline_instance),
    ("budget safety on random runs", _check_budget_safety),
    ("empirical cdf and dkw band", _check_empirical_cdf),
]


# ----------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pacesim",
        description="Budget pacing across simultaneous position auctions",
    )
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="enable info-level logging")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a pacing experiment")
    sim.add_argument("--config", help="JSON config or manifest file")
    _add_setting_flags(sim, multi=True)
    sim.add_argument("--T", type=int, default=None, help="rounds per run")
    sim.add_argument("--rho", type=float, default=None, help="per-round budget")
    sim.add_argument("--runs", type=int, default=None, help="independent runs")
    sim.add_argument("--seed", type=int, default=None, help="experiment seed")
    sim.add_argument("--eps-avp", type=float, default=None,
                     help="avp learning rate (default T^-0.25)")
    sim.add_argument("--eps-baseline", type=float, default=None,
                     help="baseline learning rate (default T^-0.25)")
    sim.add_argument("--emit-every", type=int, default=None,
                     help="thin CSV rows to every k-th round")
    sim.add_argument("--mc-values", type=int, default=None,
                     help="value draws for the offline benchmark")
    sim.add_argument("--workers", type=int, default=None, help="worker processes")
    sim.add_argument("--refresh-every", type=int, default=None,
                     help="rounds between empirical-CDF refreshes")
    sim.add_argument("--allow-large-eps", action="store_true",
                     help="accept learning rates at or above 1/(J*U)")
    sim.add_argument("--out", default=None, help="output directory for CSVs + manifest")
    sim.set_defaults(func=_cmd_simulate)

    off = sub.add_parser("solve-offline", help="solve the offline dual")
    off.add_argument("--config", help="JSON config or manifest file")
    _add_setting_flags(off, multi=True)
    off.add_argument("--T", type=int, default=None, help=argparse.SUPPRESS)
    off.add_argument("--rho", type=float, default=None, help="per-round budget")
    off.add_argument("--runs", type=int, default=None, help=argparse.SUPPRESS)
    off.add_argument("--seed", type=int, default=None, help="sampling seed")
    off.add_argument("--eps-avp", type=float, default=None, help=argparse.SUPPRESS)
    off.add_argument("--eps-baseline", type=float, default=None, help=argparse.SUPPRESS)
    off.add_argument("--emit-every", type=int, default=None, help=argparse.SUPPRESS)
    off.add_argument("--mc-values", type=int, default=None,
                     help="value draws per auction")
    off.add_argument("--workers", type=int, default=None, help=argparse.SUPPRESS)
    off.add_argument("--refresh-every", type=int, default=None, help=argparse.SUPPRESS)
    off.add_argument("--tol", type=float, default=None,
                     help="bisection tolerance on mu")
    off.set_defaults(func=_cmd_solve_offline)

    br = sub.add_parser("best-response", help="tabulate best-response bids")
    _add_setting_flags(br, multi=False)
    br.add_argument("--value-max", type=float, default=None,
                    help="largest value to tabulate (default: value bound)")
    br.add_argument("--points", type=int, default=50, help="table size")
    br.add_argument("--grid-points", type=int, default=512,
                    help="argmax grid resolution")
    br.add_argument("--mc-samples", type=int, default=20_000,
                    help="Monte Carlo payment draws (gsp/vcg)")
    br.add_argument("--seed", type=int, default=0, help="sampling seed")
    br.add_argument("--out", default=None, help="write the table here instead of stdout")
    br.set_defaults(func=_cmd_best_response)

    val = sub.add_parser("validate", help="run the quick self-check suite")
    val.set_defaults(func=_cmd_validate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except _ExitTwo as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except PacesimError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except FileNotFoundError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
