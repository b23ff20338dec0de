"""Acceptance criteria, each checked at its stated tolerance.

A summary line per criterion is printed at the end of the pytest run.
"""

import math
import time

import numpy as np
import pytest
from scipy import stats

import test_estimators as te
import test_exact_test as tx
import test_gic as tg
from basketmh.core_types import IWRR, RD, RR, Partition
from basketmh.estimators import clopper_pearson, estimate, resolve_weights
from basketmh.exact_test import exact_test, null_distribution, statistic
from basketmh.gic import model_gic, rank_models
from basketmh.gof import gof_test
from basketmh.io import load_dataset, load_scenario
from basketmh.simulation import DESK_REPS, run_study

VEM_CP = [(0.037, 0.710), (0.177, 0.711), (0.003, 0.527), (0.001, 0.196)]
VEM_CP_MISPRINTED = [(0.000, 0.309), (0.209, 0.665)]


def r3(x):
    return round(x, 3)


def c1(f):
    return pytest.mark.criterion(1, "vemurafenib estimates and exact intervals")(f)


@c1
def test_c1_vemurafenib_estimates():
    t0 = time.perf_counter()
    vem = load_dataset("vemurafenib")
    rd, iw = estimate(vem, RD), estimate(vem, IWRR)
    cps = [clopper_pearson(b.y, b.n) for b in vem.baskets]
    elapsed = time.perf_counter() - t0
    assert (r3(rd.point), r3(rd.ci_low), r3(rd.ci_high)) == (0.064, -0.017, 0.146)
    assert (r3(iw.point), r3(iw.ci_low), r3(iw.ci_high)) == (1.429, 0.884, 1.973)
    assert [(r3(lo), r3(hi)) for lo, hi in cps[:4]] == VEM_CP
    assert elapsed < 0.1


@c1
@pytest.mark.xfail(strict=True, reason="published intervals for baskets 5 and 6 are not exact 95% intervals")
def test_c1_vemurafenib_intervals_5_6():
    vem = load_dataset("vemurafenib")
    cps = [clopper_pearson(b.y, b.n) for b in vem.baskets[4:]]
    assert [(r3(lo), r3(hi)) for lo, hi in cps] == VEM_CP_MISPRINTED


@pytest.mark.criterion(2, "imatinib estimates and exact-test p")
def test_c2_imatinib():
    t0 = time.perf_counter()
    ima = load_dataset("imatinib")
    rd, iw = estimate(ima, RD), estimate(ima, IWRR)
    test = exact_test(ima, RD, method="exact")
    elapsed = time.perf_counter() - t0
    assert (r3(rd.point), r3(rd.ci_low), r3(rd.ci_high)) == (0.056, 0.003, 0.110)
    assert (r3(iw.point), r3(iw.ci_low), r3(iw.ci_high)) == (1.564, 1.029, 2.100)
    assert test.distribution.method == "exact"
    assert r3(test.p_value) == 0.012
    assert elapsed < 0.1


@pytest.mark.criterion(3, "vemurafenib exact test and Monte Carlo stability")
def test_c3_exact_matches_binomial_tail():
    vem = load_dataset("vemurafenib")
    t_obs = statistic(vem, np.ones(6))
    assert t_obs == 18
    oracle = sum(math.comb(84, k) * 0.15**k * 0.85 ** (84 - k) for k in range(18, 85))
    assert abs(exact_test(vem, RD, method="exact").p_value - oracle) < 1e-10


@pytest.mark.criterion(3, "vemurafenib exact test and Monte Carlo stability")
def test_c3_mc_within_window_for_most_seeds():
    vem = load_dataset("vemurafenib")
    p_exact = exact_test(vem, RD, method="exact").p_value
    # count ~ Bin(reps, p_exact): chance a seed lands in [0.0650, 0.0770]
    lo, hi = math.ceil(0.065 * 10_000 - 1e-9), math.floor(0.077 * 10_000 + 1e-9)
    analytic = stats.binom.cdf(hi, 10_000, p_exact) - stats.binom.cdf(lo - 1, 10_000, p_exact)
    assert analytic >= 0.95
    seeds = range(1000)
    ps = np.array([exact_test(vem, RD, method="mc", reps=10_000, seed=s).p_value for s in seeds])
    frac = float(np.mean(np.abs(ps - 0.0710) <= 0.006 + 1e-12))
    print(f"MC window: analytic {analytic:.4f}, observed {frac:.3f} over {len(ps)} seeds")
    assert frac >= 0.95


@pytest.mark.criterion(4, "goodness of fit p-values")
def test_c4_gof():
    assert r3(gof_test(load_dataset("vemurafenib"), RD).p_value) == 0.022
    assert r3(gof_test(load_dataset("imatinib"), IWRR).p_value) == 0.784


def c5(f):
    return pytest.mark.criterion(5, "GIC rankings")(f)


@c5
def test_c5_table2():
    vem = load_dataset("vemurafenib")
    t0 = time.perf_counter()
    ranking = rank_models(vem, RD, "two")
    elapsed = time.perf_counter() - t0
    assert len(ranking) == 32
    got = [(r3(r.gic), r.partition.label()) for r in ranking]
    assert got[:5] == [(g, m) for g, m, _ in tg.TABLE2_TOP]
    assert got[-5:] == tg.TABLE2_LAST
    hom = ranking[ranking.rank_of(Partition.single(6)) - 1]
    assert r3(hom.gic) == 47.228
    assert elapsed < 1.0


@c5
def test_c5_three_subclasses():
    vem = load_dataset("vemurafenib")
    p = Partition.from_blocks([[0, 2], [1, 5], [3, 4]], 6)
    assert r3(model_gic(vem, p, RD).gic) == 35.029


@c5
def test_c5_table4():
    ima = load_dataset("imatinib")
    ranking = rank_models(ima, IWRR, "two")
    assert [(r3(r.gic), r.partition.label()) for r in ranking[:10]] == tg.TABLE4_TOP
    low, high = ranking.best.subclasses
    assert (r3(low.point), r3(low.estimate.ci_low), r3(low.estimate.ci_high)) == (0.989, 0.367, 1.611)
    assert (r3(high.point), r3(high.estimate.ci_low), r3(high.estimate.ci_high)) == (2.159, 1.280, 3.038)


@pytest.mark.criterion(6, "estimation simulation at desk scale")
def test_c6_estimation_simulation():
    t0 = time.perf_counter()
    a = run_study(load_scenario("table5_rd_a_2_1"))
    b = run_study(load_scenario("table5_rr_a_2_1"))
    c = run_study(load_scenario("table5_null_b_1_2"))
    elapsed = time.perf_counter() - t0
    assert a.scenario.replicates == b.scenario.replicates == c.scenario.replicates == DESK_REPS
    rd = a.row("MH-RD")
    assert abs(rd.mean - 0.069) <= 0.01
    assert abs(100 * rd.coverage - 93.8) <= 1.5
    assert abs(b.row("MH-iwRR").mean - 1.108) <= 0.03
    assert abs(b.row("MH-RR").mean - 1.151) <= 0.03
    assert abs(100 * c.row("MH-RD").size_exact - 2.1) <= 1.0
    assert elapsed < 60


@pytest.mark.criterion(7, "identification simulation at desk scale")
def test_c7_identification_simulation():
    t0 = time.perf_counter()
    gn = run_study(load_scenario("table7_1gn"))
    ga = run_study(load_scenario("table7_2ga"))
    s5 = run_study(load_scenario("table7_5"))
    elapsed = time.perf_counter() - t0
    for m in (gn, ga, s5):
        assert m.scenario.replicates == DESK_REPS and m.scenario.strategy.value == "two-subclass"
    np.testing.assert_array_less(np.abs(np.array(gn.reject_pct) - [1.7, 1.6, 1.6, 1.4]), 2.0 + 1e-9)
    np.testing.assert_array_less(np.abs(np.array(ga.reject_pct) - [72.1, 72.7, 62.9, 62.8]), 3.5 + 1e-9)
    assert abs(s5.reject_pct[0] - 5.8) <= 3.0
    assert elapsed < 300


def c8(f):
    return pytest.mark.criterion(8, "property suites")(f)


@c8
def test_c8_weight_invariance():
    te.test_weight_invariance_exact()
    te.test_weight_invariance_general()


@c8
def test_c8_rr_equals_iwrr():
    te.test_rr_equals_iwrr_for_common_null()


@c8
def test_c8_variance_identity():
    for n in range(2, 11):
        for pi in (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9):
            te.test_unbiased_variance_identity(n, pi)


@c8
def test_c8_null_pmf_sums_to_one():
    tx.test_exact_pmf_properties()
    for name in ("vemurafenib", "imatinib"):
        t = load_dataset(name)
        for sc in (RD, RR, IWRR):
            d = null_distribution(t, resolve_weights(t, sc), method="exact")
            assert abs(float(np.sum(d.pmf)) - 1.0) < 1e-12


@c8
def test_c8_gic_additivity():
    tg.test_additivity()


@c8
def test_c8_anti_split():
    tg.test_anti_split()


@c8
def test_c8_large_n_consistency():
    for sc in (RD, RR, IWRR):
        for rates in ([0.35, 0.35, 0.3, 0.1, 0.05, 0.05], [0.6, 0.2, 0.45, 0.12, 0.3, 0.08]):
            te.test_large_n_consistency(sc, rates)
