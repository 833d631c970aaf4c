import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vitality.evalx import (DEFAULT_COMBOS, GROUPS, REPORT_COLUMNS, ConcordanceError, ConfigError, GroupTag,
                            ablate, censoring_survival, classification_metrics, concordance, confusion_metrics,
                            default_tau, group_importance, harrell_c, reports_csv, reports_table, resolve_combo,
                            uno_c)
from vitality.features import SURFACE
from vitality.pipeline import MATRIX_COLUMNS
from vitality.survival import BoostedModel, LossKind, TrainConfig
from vitality.survival.tree import RegressionTree

from conftest import ump_signal_fixture

SMALL = TrainConfig(n_rounds=40, min_samples_leaf=5, max_depth=3)


# -- oracles ---------------------------------------------------------------------

def harrell_oracle(risk, t, e):
    num = den = Fraction(0)
    for i, j in itertools.permutations(range(len(t)), 2):
        if not e[i]:
            continue
        if t[i] < t[j] or (t[i] == t[j] and not e[j]):
            den += 1
            num += 1 if risk[i] > risk[j] else Fraction(1, 2) if risk[i] == risk[j] else 0
    return num / den


def km_censoring_oracle(t, e, x):
    """G(x): product over censoring times s <= x of (1 - c_s / n_s); failures at s leave first."""
    g = Fraction(1)
    for s in sorted(set(t)):
        if s > x:
            break
        c = sum(1 for ti, ei in zip(t, e) if ti == s and not ei)
        if c:
            n_s = sum(1 for ti, ei in zip(t, e) if ti > s or (ti == s and not ei))
            g *= 1 - Fraction(c, n_s)
    return g


def uno_oracle(risk, t, e, tau=None):
    num = den = Fraction(0)
    for i, j in itertools.permutations(range(len(t)), 2):
        if not e[i] or (tau is not None and t[i] >= tau):
            continue
        if t[i] < t[j] or (t[i] == t[j] and not e[j]):
            w = 1 / km_censoring_oracle(t, e, t[i]) ** 2
            den += w
            num += w if risk[i] > risk[j] else w / 2 if risk[i] == risk[j] else 0
    return num / den


survival_data = st.integers(2, 8).flatmap(lambda n: st.tuples(
    st.lists(st.integers(0, 4), min_size=n, max_size=n),
    st.lists(st.integers(1, 6), min_size=n, max_size=n),
    st.lists(st.booleans(), min_size=n, max_size=n)))


# -- Harrell ----------------------------------------------------------------------

def test_harrell_examples():
    t = [1.0, 2.0, 3.0, 4.0]
    e = [True] * 4
    assert harrell_c([4, 3, 2, 1], t, e) == 1.0
    assert harrell_c([1, 2, 3, 4], t, e) == 0.0
    risk = [4, 3, 3, 1]
    assert harrell_c(risk, t, e) == float(harrell_oracle(risk, t, e)) == 5.5 / 6
    with pytest.raises(ConcordanceError):
        harrell_c([1, 2], [1.0, 2.0], [False, False])
    with pytest.raises(ValueError):
        harrell_c([1, 2, 3], [1.0, 2.0], [True, True])


@settings(max_examples=300, deadline=None)
@given(survival_data)
def test_both_indices_match_pair_oracles(data):
    risk, t, e = data
    if not any(e[i] and (t[i] < t[j] or (t[i] == t[j] and not e[j]))
               for i in range(len(t)) for j in range(len(t)) if i != j):
        with pytest.raises(ConcordanceError):
            harrell_c(risk, t, e)
        return
    assert harrell_c(risk, t, e) == pytest.approx(float(harrell_oracle(risk, t, e)), abs=1e-12)
    for tau in (None, sorted(t)[len(t) // 2]):
        try:
            expected = uno_oracle(risk, t, e, tau)
        except ZeroDivisionError:   # G hits zero at a needed time, or nothing left below tau
            with pytest.raises(ConcordanceError):
                uno_c(risk, t, e, tau)
            continue
        assert uno_c(risk, t, e, tau) == pytest.approx(float(expected), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6))
def test_complement_and_monotone_invariance(seed):
    rng = np.random.default_rng(seed)
    n = 30
    risk = rng.permutation(n).astype(float)
    t = rng.permutation(n) + 1.0
    e = rng.random(n) < 0.7
    e[0] = True
    t[0] = 0.5
    c = harrell_c(risk, t, e)
    assert c + harrell_c(-risk, t, e) == pytest.approx(1.0, abs=1e-12)
    assert harrell_c(np.exp(risk / 7) + 3, t, e) == c


def test_uno_examples():
    t = np.array([1, 2, 3, 4, 5, 6], float)
    e = np.array([1, 0, 1, 0, 1, 1], bool)
    risk = [6, 5, 4, 3, 1, 2]
    # hand evaluation: G(2-)=1, G(3)=4/5, G(5)=8/15; weighted sums 620/64 over 845/64
    assert uno_c(risk, t, e) == pytest.approx(124 / 169, abs=1e-12)
    times, G = censoring_survival(t, e)
    assert G.tolist() == pytest.approx([1, 0.8, 0.8, 8 / 15, 8 / 15, 8 / 15])
    rng = np.random.default_rng(0)
    r, d = rng.normal(size=40), rng.uniform(1, 50, 40)
    ev = np.ones(40, bool)
    assert uno_c(r, d, ev) == harrell_c(r, d, ev)
    assert uno_c(-d, d, ev, tau=default_tau(d)) == 1.0
    with pytest.raises(ValueError):
        uno_c(r, d, ev, tau=d.max() + 1)


def test_uno_undefined_censoring_survival():
    assert uno_c([3, 1, 2], [1.0, 2.0, 3.0], [True, False, True]) == 1.0
    # an event tied with the last censoring needs G(4) = 0
    with pytest.raises(ConcordanceError):
        uno_c([4, 3, 2, 1], [1.0, 2.0, 4.0, 4.0], [True, False, False, True])


def test_concordance_counts():
    c = concordance([3, 1, 1], [1.0, 2.0, 3.0], [True, True, False])
    assert (c.concordant, c.discordant, c.tied_risk, c.n_pairs) == (2, 0, 1, 3)


# -- classification ----------------------------------------------------------------

def test_classification_examples():
    m = confusion_metrics(3, 0, 4, 271)
    assert m.accuracy == 274 / 278 and abs(m.accuracy - 0.9857) < 1e-3
    assert m.precision == 1.0 and abs(m.recall - 0.4286) < 5e-5
    perfect = classification_metrics([1, 0, 1], [1, 0, 1])
    assert (perfect.accuracy, perfect.precision, perfect.recall, perfect.f1) == (1, 1, 1, 1)
    neg = classification_metrics([0, 0, 0], [1, 0, 1])
    assert neg.recall == 0 and neg.precision == 0 and "precision_undefined" in neg.flags
    assert neg.balanced_accuracy == 0.5
    with pytest.raises(ValueError):
        classification_metrics([1, 0], [1])


# -- combos and ablation -------------------------------------------------------------

def test_resolve_combo():
    assert resolve_combo("S") == SURFACE
    assert resolve_combo("S-stars") == SURFACE[1:]
    assert resolve_combo("S − stars") == SURFACE[1:]
    assert resolve_combo("S+H")[-1] == "hits_score"
    assert len(resolve_combo("All")) == 20 and "hits_score" not in resolve_combo("All")
    for bad in ("Q", "S-weight", "", "S-stars-stars"):
        with pytest.raises(ConfigError):
            resolve_combo(bad)


@pytest.fixture(scope="module")
def ump():
    return ump_signal_fixture(240, seed=1)


def test_ablate_row_set_and_determinism(ump):
    X, d, e = ump
    reports = ablate(X, MATRIX_COLUMNS, d, e, config=SMALL, seed=3)
    assert [r.combo for r in reports] == list(DEFAULT_COMBOS)
    by = {r.combo: r for r in reports}
    assert set(by["S"].features) - set(by["S-stars"].features) == {"stars"}
    assert by["All"].harrell_c >= by["S"].harrell_c
    assert len({(r.n_train, r.n_test, r.tau) for r in reports}) == 1
    again = ablate(X, MATRIX_COLUMNS, d, e, config=SMALL, seed=3)
    assert reports_csv(reports) == reports_csv(again)
    assert reports_csv(reports).splitlines()[0] == ",".join(REPORT_COLUMNS)
    assert reports_table(reports).splitlines()[2].startswith("S ")


def test_ablate_column_permutation_invariant(ump):
    X, d, e = ump
    perm = np.random.default_rng(0).permutation(X.shape[1])
    a = ablate(X, MATRIX_COLUMNS, d, e, combos=["S+U", "U+M+P"], config=SMALL, seed=5)
    b = ablate(X[:, perm], [MATRIX_COLUMNS[i] for i in perm], d, e, combos=["S+U", "U+M+P"], config=SMALL, seed=5)
    assert [(r.harrell_c, r.uno_c) for r in a] == [(r.harrell_c, r.uno_c) for r in b]


def test_ablate_absent_feature(ump):
    X, d, e = ump
    with pytest.raises(ConfigError, match="absent"):
        ablate(X[:, :6], MATRIX_COLUMNS[:6], d, e, combos=["S+U"], config=SMALL)


# -- importance ----------------------------------------------------------------------

def model_with_splits(counts: dict):
    trees = []
    for name, k in counts.items():
        f = list(counts).index(name)
        for _ in range(k):
            trees.append(RegressionTree([f, -1, -1], [0.0, 0.0, 0.0], [1, -1, -1], [2, -1, -1],
                                        [True] * 3, [0.0, 1.0, -1.0]))
    return BoostedModel(trees, 0.1, 0.0, LossKind.AFT_NORMAL, 1.0, list(counts))


def test_group_importance():
    m = model_with_splits({"stars": 4, "commits": 16, "issues": 0, "weight": 9})
    gi = group_importance(m)
    assert gi["S"].score == pytest.approx(8.0, abs=1e-12)
    assert gi["S"].unused == ("issues",) and not gi["S"].flagged
    assert gi["U"].score == pytest.approx(9.0, abs=1e-12)
    assert gi["M"].score == 0.0 and gi["M"].flagged
    assert set(gi) == {t.value for t in GroupTag} == {k.value for k in GROUPS}
