import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vitality.corpus import build_timelines
from vitality.influence import (RAW_SCHEME, EdgeWeight, InteractionLog, build_edges, commit_weight, decay_factor,
                                normalize, run_hits, weight_feature, write_snapshot_csv)
from vitality.timeutil import parse_month

from conftest import ev

MONTH = parse_month("2018-01")


def dense_hits_oracle(W, iters=5000, tol=1e-13):
    """Plain dense alternating power iteration, written out with explicit loops."""
    n_u, n_r = W.shape
    uis = [1.0] * n_u
    pqs = [1.0] * n_r
    for _ in range(iters):
        new_p = [sum(W[u][r] * uis[u] for u in range(n_u)) for r in range(n_r)]
        s = sum(new_p)
        new_p = [v / s for v in new_p]
        new_u = [sum(W[u][r] * new_p[r] for r in range(n_r)) for u in range(n_u)]
        s = sum(new_u)
        new_u = [v / s for v in new_u]
        delta = max(max(abs(a - b) for a, b in zip(new_p, pqs)), max(abs(a - b) for a, b in zip(new_u, uis)))
        pqs, uis = new_p, new_u
        if delta < tol:
            break
    return np.array(pqs), np.array(uis)


def edges_from_matrix(W):
    out = []
    for u in range(W.shape[0]):
        for r in range(W.shape[1]):
            if W[u, r] > 0:
                out.append(EdgeWeight(f"u{u:03d}", f"r{r:03d}", 0.0, 0.0, 0.0, float(W[u, r])))
    return out


# -- formulas -------------------------------------------------------------------

def test_decay_factor_examples():
    assert decay_factor(4, 4) == 0.5
    assert abs(decay_factor(1, 4) - 0.8) <= 1e-12
    assert 0.999 < decay_factor(1, 10**6) < 1.0
    vals = [decay_factor(k, 9) for k in range(1, 10)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize("k,n", [(0, 3), (4, 3), (-1, 1)])
def test_decay_factor_contract(k, n):
    with pytest.raises(ValueError):
        decay_factor(k, n)


def test_commit_weight_examples():
    assert commit_weight(0, 0.7) == 0.0
    assert commit_weight(1, 0.7) == 0.0
    assert abs(commit_weight(100, 0.8) - 12.8) <= 1e-12


def test_single_star_edge():
    tls = build_timelines([ev("2018-01-02T00:00:00Z", "u", "Star")])
    (e,) = build_edges(tls.values(), MONTH)
    assert abs(e.w_total - 0.5) <= 1e-12 and e.w_star == e.w_total


def test_two_issues_on_four_action_repo():
    tls = build_timelines([
        ev("2018-01-02T00:00:00Z", "u", "IssueOpen", thread_id="t1"),
        ev("2018-01-03T00:00:00Z", "u", "IssueOpen", thread_id="t2"),
        ev("2018-01-04T00:00:00Z", "v", "Star"),
        ev("2018-01-05T00:00:00Z", "w", "Fork"),
    ])
    edges = {e.user_id: e for e in build_edges(tls.values(), MONTH)}
    assert abs(edges["u"].w_issue - (2 / 1.25 + 2 / 1.5)) <= 1e-12
    assert abs(edges["u"].w_issue - 2.9333333333333333) <= 1e-12
    assert abs(edges["v"].w_star - 1 / (1 + 3 / 4)) <= 1e-12
    assert abs(edges["w"].w_fork - 4 / 2) <= 1e-12


def test_commit_edge_sums_commits_and_repeat_stars_collapse():
    tls = build_timelines([
        ev("2018-01-02T00:00:00Z", "u", "Commit", loc_changed=100),
        ev("2018-01-03T00:00:00Z", "u", "Star"),
        ev("2018-01-04T00:00:00Z", "u", "Star"),
        ev("2018-01-05T00:00:00Z", "u", "Commit", loc_changed=10),
        ev("2018-01-06T00:00:00Z", "u", "PrMerge", thread_id="t"),   # not an edge class
    ])
    (e,) = build_edges(tls.values(), MONTH)
    n_p = 3  # two commits and the first star
    assert abs(e.w_commit - (8 * 2 / (1 + 1 / n_p) + 8 * 1 / (1 + 3 / n_p))) <= 1e-12
    assert abs(e.w_star - 1 / (1 + 2 / n_p)) <= 1e-12
    assert abs(e.w_total - (e.w_commit + e.w_star)) <= 1e-12


def test_pr_open_counts_as_issue_class_and_raw_scheme():
    tls = build_timelines([ev("2018-01-02T00:00:00Z", "u", "PrOpen", thread_id="t"),
                           ev("2018-01-03T00:00:00Z", "u", "Commit", loc_changed=1000)])
    (e,) = build_edges(tls.values(), MONTH)
    assert abs(e.w_issue - 2 / 1.5) <= 1e-12
    (raw,) = build_edges(tls.values(), MONTH, RAW_SCHEME)
    assert (raw.w_issue, raw.w_commit) == (1.0, 1.0)


def test_zero_weight_pairs_retained_and_cutoff():
    tls = build_timelines([ev("2018-01-02T00:00:00Z", "u", "Commit", loc_changed=1),
                           ev("2018-03-02T00:00:00Z", "v", "Star")])
    edges = build_edges(tls.values(), MONTH)
    assert [(e.user_id, e.w_total) for e in edges] == [("u", 0.0)]
    assert build_edges(tls.values(), MONTH - 1) == []


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 3), st.sampled_from(["Star", "Fork", "IssueOpen", "Commit"]),
                          st.integers(1, 500)), min_size=1, max_size=12),
       st.integers(0, 3), st.sampled_from(["Star", "Fork", "IssueOpen", "Commit"]))
def test_appending_an_interaction_never_decreases_weights(actions, user, kind):
    def make(acts):
        evs = []
        for i, (u, k, loc) in enumerate(acts):
            kw = {"thread_id": f"t{i}"} if k == "IssueOpen" else {}
            if k == "Commit":
                kw["loc_changed"] = loc
            evs.append(ev(f"2018-01-01T00:{i:02d}:00Z", f"u{u}", k, **kw))
        return {(e.user_id, e.repo_id): e.w_total for e in build_edges(build_timelines(evs).values(), MONTH)}

    before = make(actions)
    after = make(actions + [(user, kind, 50)])
    for key, w in before.items():
        assert after[key] >= w - 1e-12
        assert w >= 0


# -- HITS -----------------------------------------------------------------------

def test_hits_examples():
    s = run_hits([EdgeWeight("u", "r", 0, 0, 0, 2.5)])
    assert s.pqs == {"r": 1.0} and s.uis == {"u": 1.0}
    s = run_hits([EdgeWeight("u", "r1", 1, 0, 0, 0), EdgeWeight("u", "r2", 3, 0, 0, 0)])
    assert s.pqs["r1"] == pytest.approx(0.25, abs=1e-12)
    assert s.pqs["r2"] == pytest.approx(0.75, abs=1e-12)
    assert weight_feature(None, s, ["r1", "r2", "r9"]) == {"r1": s.pqs["r1"], "r2": s.pqs["r2"], "r9": 0.0}
    sym = run_hits([EdgeWeight(u, r, 1, 0, 0, 0) for u in ("a", "b") for r in ("r1", "r2")])
    assert sym.pqs["r1"] == pytest.approx(sym.pqs["r2"], abs=1e-15)
    star3 = run_hits([EdgeWeight("a", r, 1, 0, 0, 0) for r in ("x", "y", "z")])
    assert all(v == pytest.approx(1 / 3, abs=1e-12) for v in star3.pqs.values())


def test_hits_degenerate_graphs():
    s = run_hits([])
    assert (s.pqs, s.uis, s.iterations, s.converged) == ({}, {}, 0, True)
    s = run_hits([EdgeWeight("a", "x", 0, 0, 0, 0), EdgeWeight("b", "y", 0, 0, 0, 0)])
    assert s.pqs == {"x": 0.5, "y": 0.5} and s.uis == {"a": 0.5, "b": 0.5}
    with pytest.raises(ValueError):
        run_hits([], tol=0)
    s = run_hits([EdgeWeight("a", "x", 1, 0, 0, 0), EdgeWeight("b", "x", 1, 0, 0, 0),
                  EdgeWeight("b", "y", 1, 0, 0, 0)], max_iter=1)
    assert s.iterations == 1


@pytest.mark.parametrize("seed", range(30))
def test_hits_matches_dense_oracle_small(seed):
    rng = np.random.default_rng(seed)
    n_u, n_r = int(rng.integers(1, 3)), int(rng.integers(1, 3))
    W = rng.uniform(0.1, 5, size=(n_u, n_r)) * (rng.random((n_u, n_r)) < 0.8)
    W[rng.integers(n_u), rng.integers(n_r)] += 1.0
    keep_u, keep_r = W.sum(1) > 0, W.sum(0) > 0
    W = W[keep_u][:, keep_r]
    s = run_hits(edges_from_matrix(W), tol=1e-13, max_iter=5000)
    p, u = dense_hits_oracle(W)
    assert np.allclose([s.pqs[f"r{r:03d}"] for r in range(W.shape[1])], p, atol=1e-6)
    assert np.allclose([s.uis[f"u{i:03d}"] for i in range(W.shape[0])], u, atol=1e-6)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.01, 100))
def test_hits_scale_invariant(seed, c):
    rng = np.random.default_rng(seed)
    W = rng.uniform(0, 3, size=(6, 4)) * (rng.random((6, 4)) < 0.6)
    W[:, 0] += 0.5
    a = run_hits(edges_from_matrix(W))
    b = run_hits(edges_from_matrix(W * c))
    for r in a.pqs:
        assert abs(a.pqs[r] - b.pqs[r]) < 1e-8


def test_snapshot_on_corpus_sums_to_one(corpus):
    tls, _, _ = corpus
    log = InteractionLog(tls.values())
    capped = log.snapshot(parse_month("2017-06"))
    assert capped.iterations <= 100
    s = log.snapshot(parse_month("2017-06"), max_iter=2000)
    assert s.converged
    assert abs(sum(s.pqs.values()) - 1) < 1e-9 and abs(sum(s.uis.values()) - 1) < 1e-9
    ref = run_hits(log.edges(parse_month("2017-06")), max_iter=2000)
    for r, v in ref.pqs.items():
        assert abs(s.pqs[r] - v) < 1e-12


# -- normalisation ---------------------------------------------------------------

def test_normalize_examples():
    n = normalize({"a": 1, "b": 2, "c": 3, "d": 4})
    assert [n[k].pct_rank for k in "abcd"] == [0.25, 0.5, 0.75, 1.0]
    n = normalize({"a": 2.0, "b": 2.0, "c": 2.0})
    assert all(v.zscore == 0 and v.pct_rank == pytest.approx(2 / 3) for v in n.values())
    n = normalize({"a": math.e, "b": math.e ** 3})
    assert n["a"].zscore == pytest.approx(-1, abs=1e-12) and n["b"].zscore == pytest.approx(1, abs=1e-12)
    with pytest.raises(ValueError):
        normalize({})


def test_normalize_ties_and_zeros():
    n = normalize({"a": 0.0, "b": 0.0, "c": 1.0, "d": 4.0})
    assert n["a"].pct_rank == n["b"].pct_rank == 0.375
    assert n["a"].zscore == n["b"].zscore == min(n["c"].zscore, n["d"].zscore)
    assert all(0 < v.pct_rank <= 1 for v in n.values())


def test_snapshot_csv(tmp_path):
    rows = [(MONTH, k, v) for k, v in normalize({"a": 0.25, "b": 0.75}).items()]
    write_snapshot_csv(tmp_path / "s.csv", rows)
    text = (tmp_path / "s.csv").read_text().splitlines()
    assert text[0] == "month,repo_id,weight,weight_rank_pct,weight_zscore"
    assert text[1].startswith("2018-01,a,0.25,0.5,")
