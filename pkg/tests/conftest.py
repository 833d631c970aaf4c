import pytest

from vitality.corpus import CessationLabel, EventKind, RepoEvent, Source, Status, build_timelines
from vitality.pipeline import InfluenceCache, horizon_table, survival_table
from vitality.synthetic import default_scenario, generate_events
from vitality.timeutil import parse_instant


def ev(ts, user, kind, repo="r1", **kw):
    """Shorthand event constructor used across the test modules."""
    return RepoEvent(parse_instant(ts), repo, user, EventKind(kind), **kw)


def ceased(repo, when, created=None):
    return CessationLabel(repo, Status.CEASED, parse_instant(when), Source.ARCHIVED,
                          created_at=None if created is None else parse_instant(created))


@pytest.fixture(scope="session")
def corpus():
    """Bundled scenario at seed 0: (timelines, archetypes, observation_end)."""
    events, labels, kinds, obs_end = generate_events(default_scenario(), 0)
    return build_timelines(events, labels, observation_end=obs_end), kinds, obs_end


@pytest.fixture(scope="session")
def tables(corpus):
    tls, _, obs_end = corpus
    cache = InfluenceCache(tls)
    st = survival_table(tls, obs_end, cache)
    ht = horizon_table(tls, parse_instant("2018-07-01"), 6, cache)
    return st, ht


def ump_signal_fixture(n=300, seed=0):
    """Survival data whose signal lives only in the U, M and P columns; S and H are noise."""
    import numpy as np
    from vitality.features import EVOLUTION, MAINTAINER_CENTRIC, SURFACE, USER_CENTRIC
    from vitality.pipeline import MATRIX_COLUMNS

    rng = np.random.default_rng(seed)
    latent = rng.normal(size=n)
    X = np.empty((n, len(MATRIX_COLUMNS)))
    for j, name in enumerate(MATRIX_COLUMNS):
        if name in USER_CENTRIC + MAINTAINER_CENTRIC + EVOLUTION[:3]:
            X[:, j] = latent * rng.choice([-1.0, 1.0]) + rng.normal(0, 0.4, n)
        else:
            X[:, j] = rng.normal(size=n) * (100.0 if name in SURFACE else 1.0)
    t = np.exp(3.0 - 0.8 * latent + rng.normal(0, 0.25, n))
    c = rng.uniform(5, 120, n)
    return X, np.minimum(t, c), t <= c


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
