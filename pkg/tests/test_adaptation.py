import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from nr_cba.adaptation import (
    CodebookChoice, UtilityConfig, decide, evaluate_link, label_sample, report_overhead, se_gain, utility,
)
from nr_cba.channel import SHORT_DELAY_SPREAD, make_profile, realize
from nr_cba.codebook import CodebookConfig, build_beam_grid, overhead_tax
from nr_cba.errors import BaselineZero, ConfigError
from nr_cba.link import snr_to_noise_var

CFG = CodebookConfig()
GRID = build_beam_grid(CFG)
DEFAULT = UtilityConfig()


def link(kind, seed, snr_db):
    p = make_profile(kind, 0.833, SHORT_DELAY_SPREAD, seed)
    return evaluate_link(realize(p, 26, 4, (2, 8), seed=seed), GRID, CFG, DEFAULT, snr_to_noise_var(snr_db))


@pytest.mark.parametrize("se,base,expected", [(10, 10, 0.0), (11, 10, 0.1), (5, 10, -0.5)])
def test_gain_examples(se, base, expected):
    assert se_gain(se, base) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("base", [0.0, 1e-13, -1.0])
def test_gain_needs_positive_baseline(base):
    with pytest.raises(BaselineZero):
        se_gain(1.0, base)


def test_utility_examples():
    assert utility(CodebookChoice.TYPE1, 0.3, 0, DEFAULT) == 0.0
    assert utility(CodebookChoice.ETYPE2, 0.10, 713, DEFAULT) == pytest.approx(0.0287, abs=1e-12)
    u = utility(CodebookChoice.ETYPE2, 0.05, 713, DEFAULT)
    assert u == pytest.approx(-0.0213, abs=1e-12)
    assert decide(0.05, 713, DEFAULT).choice == CodebookChoice.TYPE1
    assert decide(0.10, 713, DEFAULT).choice == CodebookChoice.ETYPE2


def test_tie_goes_to_type1():
    r = decide(0.0713, 713, DEFAULT)
    assert r.u1 == pytest.approx(0.0, abs=1e-15)
    assert decide(0.0, 0, DEFAULT).choice == CodebookChoice.TYPE1


@pytest.mark.parametrize("lam", [-0.1, 1.5])
def test_lambda_range(lam):
    with pytest.raises(ConfigError):
        UtilityConfig(lam=lam)


@given(st.floats(-1, 5), st.integers(0, 2000), st.floats(0, 1))
def test_baseline_utility_is_always_zero(gain, tax, lam):
    r = decide(gain, tax, UtilityConfig(lam))
    assert r.u0 == 0.0
    assert r.choice == (CodebookChoice.ETYPE2 if r.u1 > 0 else CodebookChoice.TYPE1)


@given(st.floats(0.01, 100), st.floats(0.01, 100), st.floats(1e-3, 1e3), st.integers(0, 2000))
def test_choice_is_scale_invariant(se2, se1, c, tax):
    g = se_gain(se2, se1)
    assume(abs(g - DEFAULT.lam * tax) > 1e-9)
    assert decide(g, tax, DEFAULT).choice == decide(se_gain(c * se2, c * se1), tax, DEFAULT).choice


@given(st.lists(st.tuples(st.floats(-1, 2), st.integers(0, 2000)), min_size=1, max_size=30),
       st.floats(0, 1), st.floats(0, 1))
def test_etype2_set_shrinks_as_lambda_grows(samples, a, b):
    lo, hi = sorted((a, b))
    pick = lambda lam: {i for i, (g, t) in enumerate(samples) if decide(g, t, UtilityConfig(lam)).choice}
    assert pick(hi) <= pick(lo)


def test_zero_lambda_takes_any_gain():
    assert decide(1e-9, 10_000, UtilityConfig(0.0)).choice == CodebookChoice.ETYPE2


def test_labels_on_reference_scenarios():
    for seed in range(5):
        los = link("los_high_corr", seed, 20)
        assert los.choice == CodebookChoice.TYPE1
        assert los.report.tax_bits > 0 and abs(los.report.gain_type2) < 0.05
        assert link("nlos_rich", seed, 0).choice == CodebookChoice.ETYPE2


def test_label_matches_full_evaluation_and_lambda_sweep():
    noise = snr_to_noise_var(10)
    links = [link(kind, seed, 10) for kind in ("nlos_rich", "nlos_long_delay") for seed in range(3)]
    p = make_profile("nlos_rich", 0.833, SHORT_DELAY_SPREAD, 0)
    report, choice = label_sample(realize(p, 26, 4, (2, 8), seed=0), GRID, CFG, DEFAULT, noise)
    assert choice == links[0].choice and report == links[0].report
    previous = None
    for lam in np.linspace(0, 1e-3, 11):
        chosen = {i for i, l in enumerate(links)
                  if decide(l.report.gain_type2, l.report.tax_bits, UtilityConfig(lam)).choice}
        assert previous is None or chosen <= previous
        previous = chosen
    for l in links:
        assert l.report.tax_bits == overhead_tax(CFG, l.pmi1.rank, l.pmi2.rank)
        assert report_overhead(CFG, l.pmi2) - report_overhead(CFG, l.pmi1) == l.report.tax_bits
        assert l.report.gain_type2 == pytest.approx(l.link2.se / l.link1.se - 1)
