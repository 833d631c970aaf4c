import json
from collections import Counter

import pytest

from vitality.corpus import (CessationLabel, EventFormatError, EventKind, build_timelines, ingest_events,
                             iter_event_lines, iter_label_lines, load_timelines, observed_duration,
                             parse_events, parse_labels, save_timelines)
from vitality.synthetic import default_scenario, generate_events, generate_synthetic_corpus
from vitality.timeutil import month_index, parse_instant

from conftest import ceased, ev


def line(**rec):
    return json.dumps(rec)


def test_three_events_two_months():
    tls = build_timelines([
        ev("2018-01-03T10:00:00Z", "a", "Star"),
        ev("2018-01-20T10:00:00Z", "b", "Commit", loc_changed=12),
        ev("2018-02-02T10:00:00Z", "c", "IssueOpen", thread_id="t1"),
    ])
    tl = tls["r1"]
    assert len(tl.months) == 2
    jan, feb = tl.months
    assert (jan.stars, jan.commits, jan.issues, jan.loc_sum) == (1, 1, 0, 12)
    assert (feb.stars, feb.commits, feb.issues) == (0, 0, 1)
    assert jan.per_user_actions == {"a": 1, "b": 1}


def test_empty_stream():
    assert ingest_events([], {}) == {}


def test_min_stars_filter():
    evs = [ev(f"2018-01-{d:02d}T00:00:00Z", f"u{d}", "Star") for d in range(1, 32)]
    evs += [ev("2018-01-01T00:00:00Z", f"v{d}", "Star", repo="r2") for d in range(32)]
    tls = build_timelines(evs, min_stars=32)
    assert set(tls) == {"r2"}


def test_repeat_stars_all_counted_in_buckets():
    tls = build_timelines([ev("2018-01-01T00:00:00Z", "a", "Star"), ev("2018-01-02T00:00:00Z", "a", "Star")])
    assert tls["r1"].months[0].stars == 2


def test_parse_errors_report_line_numbers():
    lines = [
        line(repo_id="r", user_id="u", kind="Star", timestamp="2018-01-01T00:00:00Z"),
        "{not json",
        line(repo_id="r", user_id="u", kind="Star", timestamp="2018-01-01T00:00:00Z", loc_changed=3),
        line(repo_id="r", user_id="u", kind="IssueComment", timestamp="2018-01-01T00:00:00Z"),
        line(repo_id="r", user_id="u", kind="Teleport", timestamp="2018-01-01T00:00:00Z"),
        line(repo_id="r", kind="Star", timestamp="2018-01-01T00:00:00Z"),
        line(repo_id="r", user_id="u", kind="Star", timestamp="2018-01-01T00:00:00Z", thread_id="x"),
    ]
    with pytest.raises(EventFormatError) as err:
        parse_events(lines)
    assert err.value.lineno == 2
    events, errors = parse_events(lines, on_error="skip")
    assert len(events) == 1
    assert [e.lineno for e in errors] == [2, 3, 4, 5, 6, 7]


def test_unknown_fields_ignored():
    events, _ = parse_events([line(repo_id="r", user_id="u", kind="Fork",
                                   timestamp="2018-01-01T00:00:00Z", colour="blue")])
    assert events[0].kind is EventKind.FORK


def test_label_invariant():
    with pytest.raises(ValueError):
        CessationLabel("r", cessation_time=parse_instant("2018-01-01"))
    with pytest.raises(EventFormatError):
        parse_labels([json.dumps({"repo_id": "r", "status": "Ceased"})])


def test_late_events_kept_but_not_bucketed(caplog):
    evs = [
        ev("2018-01-05T00:00:00Z", "a", "Commit", loc_changed=3),
        ev("2018-03-01T00:00:00Z", "a", "Commit", loc_changed=3),   # exactly at cessation: included
        ev("2018-03-09T00:00:00Z", "b", "Star"),                     # after cessation
    ]
    tls = build_timelines(evs, {"r1": ceased("r1", "2018-03-01T00:00:00Z")})
    tl = tls["r1"]
    assert tl.late_events == 1
    assert len(tl.events) == 3
    assert tl.months[-1].month == month_index(parse_instant("2018-03-01"))
    assert tl.months[-1].commits == 1 and tl.months[-1].stars == 0
    assert "after cessation_time" in caplog.text


def test_events_after_observation_end_dropped():
    evs = [ev("2018-01-05T00:00:00Z", "a", "Star"), ev("2018-06-05T00:00:00Z", "b", "Star")]
    tls = build_timelines(evs, observation_end=parse_instant("2018-03-01"))
    assert len(tls["r1"].events) == 1
    assert len(tls["r1"].months) == 3


def _timeline(created, label=None):
    return build_timelines([ev(created, "a", "Star")], {"r1": label} if label else None,
                           observation_end=parse_instant("2022-01-01"))["r1"]


def test_observed_duration_examples():
    end = parse_instant("2020-01-01")
    tl = _timeline("2015-01-01T00:00:00Z", ceased("r1", "2016-01-01T00:00:00Z"))
    assert observed_duration(tl, end) == (12.0, True)
    tl = _timeline("2015-01-01T00:00:00Z")
    assert observed_duration(tl, parse_instant("2016-01-01")) == (12.0, False)
    tl = _timeline("2015-01-01T00:00:00Z", ceased("r1", "2021-01-01T00:00:00Z"))
    assert observed_duration(tl, end) == (60.0, False)


def test_observed_duration_monotone_for_censored():
    tl = _timeline("2015-01-01T00:00:00Z")
    ends = ["2016-01-01", "2016-06-15", "2017-03-02", "2019-12-31"]
    d = [observed_duration(tl, parse_instant(e))[0] for e in ends]
    assert d == sorted(d)


def test_bucket_totals_match_brute_force_recount(corpus):
    tls, _, _ = corpus
    field = {"Star": "stars", "Commit": "commits", "IssueOpen": "issues", "PrOpen": "prs",
             "TagPush": "tags", "IssueComment": "comments", "PrComment": "comments", "Fork": "forks",
             "PrMerge": "merges"}
    for rid in list(tls)[::37]:
        tl = tls[rid]
        want = Counter()
        for e in tl.events:
            if tl.label.cessation_time is not None and e.timestamp > tl.label.cessation_time:
                continue
            if e.kind.value in field:
                want[(month_index(e.timestamp), field[e.kind.value])] += 1
        for b in tl.months:
            for name in ("stars", "commits", "issues", "prs", "tags", "comments", "forks", "merges"):
                assert b.count(name) == want[(b.month, name)]
            attributable = sum(b.count(n) for n in ("stars", "commits", "issues", "prs", "tags", "comments",
                                                    "forks", "merges"))
            assert sum(b.per_user_actions.values()) == attributable
        months = [b.month for b in tl.months]
        assert months == list(range(tl.first_month, tl.first_month + len(months)))


def test_serialize_reingest_roundtrip(corpus, tmp_path):
    tls, _, obs_end = corpus
    sub = {k: tls[k] for k in list(tls)[:25]}
    events = list(iter_event_lines(sub.values()))
    labels = parse_labels(iter_label_lines(sub.values()))
    again = ingest_events(events, labels, observation_end=obs_end)
    assert again == sub
    save_timelines(tmp_path / "t.json", sub, obs_end)
    loaded, end2 = load_timelines(tmp_path / "t.json")
    assert loaded == sub and end2 == obs_end


def test_synthetic_deterministic():
    scenario = {"archetypes": {"Healthy": 3, "Decaying": 3, "AbruptCease": 2, "QuietMaintained": 2}}
    a = list(iter_event_lines(generate_synthetic_corpus(scenario, 7).values()))
    b = list(iter_event_lines(generate_synthetic_corpus(scenario, 7).values()))
    c = list(iter_event_lines(generate_synthetic_corpus(scenario, 8).values()))
    assert a == b
    assert a != c


def test_synthetic_decaying_all_ceased():
    tls = generate_synthetic_corpus({"archetypes": {"Decaying": 10}}, 3)
    assert len(tls) == 10
    assert all(t.label.ceased and t.label.cessation_time is not None for t in tls.values())


def test_decaying_commits_strictly_decrease(corpus):
    tls, kinds, _ = corpus
    decaying = [r for r, k in kinds.items() if k == "Decaying"]
    assert decaying
    for rid in decaying:
        tl = tls[rid]
        c = month_index(tl.label.cessation_time)
        commits = [tl.bucket(m).commits for m in range(c - 6, c)]
        assert all(a > b for a, b in zip(commits, commits[1:])), (rid, commits)


@pytest.mark.parametrize("bad", [
    {"archetypes": {"Healthy": 0}},
    {"archetypes": {"Healthy": -2}},
    {"archetypes": {"Zombie": 3}},
    {"archetypes": {}},
    {"archetypes": {"Healthy": 1}, "user_pool": 10},
])
def test_scenario_validation(bad):
    with pytest.raises(ValueError):
        generate_events(bad, 0)


def test_default_scenario_shape(corpus):
    tls, kinds, _ = corpus
    assert len(tls) >= 200
    assert Counter(kinds.values()) == Counter(default_scenario()["archetypes"])
