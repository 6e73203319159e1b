import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from didlab.dgp import ScenarioSpec, generate
from didlab.matching import (
    Distance,
    MatchingError,
    MatchKind,
    MatchStrategy,
    PropensitySeparationError,
    feature_matrix,
    greedy_match,
    match_panel,
    propensity_log_odds,
    subset_panel,
)

from helpers import panel_from_wide

NO_REPL = dict(replacement=False)


def test_feature_shapes():
    data = generate(ScenarioSpec.protocol_default("s4", "a", n_units=20, master_seed=1))
    for kind, width in [("pre_outcomes", 5), ("pre_first_diffs", 4), ("pre_covariates", 5)]:
        ids, groups, F = feature_matrix(data, MatchStrategy(kind))
        assert F.shape == (20, width)
        assert len(ids) == len(groups) == 20
    s2 = generate(ScenarioSpec.protocol_default("s2", n_units=20, master_seed=1))
    assert feature_matrix(s2, MatchStrategy("pre_covariates"))[2].shape == (20, 1)


def test_first_differences():
    y = np.array([[1, 3, 6, 10, 15, 0, 0], [0, 0, 0, 0, 0, 0, 0]], dtype=float)
    data = panel_from_wide([1, 0], np.zeros_like(y), y, first_post_time=6)
    F = feature_matrix(data, MatchStrategy("pre_first_diffs"))[2]
    np.testing.assert_array_equal(F[0], [2, 3, 4, 5])


def test_first_differences_need_two_pre_periods():
    y = np.zeros((2, 3))
    data = panel_from_wide([1, 0], y, y, first_post_time=2)
    with pytest.raises(MatchingError):
        feature_matrix(data, MatchStrategy("pre_first_diffs"))


def test_two_by_two_example():
    features = np.array([10.0, 20.0, 11.0, 100.0])
    groups = np.array([1, 1, 0, 0])
    ids = np.array([1, 2, 3, 4])
    m = greedy_match(features, groups, MatchStrategy(**NO_REPL), ids)
    # treated 10 is farther from the comparison centroid 55.5, so it goes first
    assert m.pairs == [(1, 3), (2, 4)]
    m = greedy_match(features, groups, MatchStrategy(), ids)
    assert sorted(m.pairs) == [(1, 3), (2, 3)]


@pytest.mark.parametrize("replacement", [True, False])
def test_identical_sets_pair_perfectly(replacement):
    rng = np.random.default_rng(0)
    F = rng.normal(size=(10, 3))
    features = np.vstack([F, F[::-1]])
    groups = np.repeat([1, 0], 10)
    m = greedy_match(features, groups, MatchStrategy(replacement=replacement))
    assert len(m) == 10 and np.all(m.distances == 0)


def test_greedy_local_optimality_without_replacement():
    rng = np.random.default_rng(21)
    F = rng.normal(size=(50, 2))
    groups = (rng.random(50) < 0.4).astype(int)
    m = greedy_match(F, groups, MatchStrategy(**NO_REPL))
    S = (F - F.mean(0)) / F.std(0, ddof=1)
    used = set()
    for t, c, d in zip(m.treated_ids, m.comparison_ids, m.distances):
        assert groups[t] == 1 and groups[c] == 0
        avail = [j for j in np.flatnonzero(groups == 0) if j not in used]
        best = min(np.linalg.norm(S[t] - S[j]) for j in avail)
        assert d == pytest.approx(best, abs=1e-12)
        assert np.linalg.norm(S[t] - S[c]) == pytest.approx(d, abs=1e-12)
        used.add(c)
    assert len(set(m.comparison_ids.tolist())) == len(m)
    assert len(m) == min((groups == 1).sum(), (groups == 0).sum())


def test_with_replacement_takes_global_nearest():
    rng = np.random.default_rng(22)
    F = rng.normal(size=(50, 3))
    groups = (rng.random(50) < 0.5).astype(int)
    m = greedy_match(F, groups, MatchStrategy())
    S = (F - F.mean(0)) / F.std(0, ddof=1)
    comp = np.flatnonzero(groups == 0)
    for t, c in m.pairs:
        dists = np.linalg.norm(S[comp] - S[t], axis=1)
        assert c == comp[np.argmin(dists)]
    assert len(m.unmatched) == 0


def test_unmatched_when_comparisons_run_out():
    features = np.arange(5.0)
    groups = np.array([1, 1, 1, 0, 0])
    m = greedy_match(features, groups, MatchStrategy(**NO_REPL))
    assert len(m) == 2 and len(m.unmatched) == 1


def test_empty_group():
    with pytest.raises(MatchingError):
        greedy_match(np.arange(3.0), np.ones(3), MatchStrategy())


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(4, 30), replacement=st.booleans())
def test_row_order_invariance(seed, n, replacement):
    rng = np.random.default_rng(seed)
    F = rng.integers(0, 4, size=(n, 2)).astype(float)  # coarse values force ties
    groups = np.arange(n) % 2
    ids = np.arange(100, 100 + n)
    strategy = MatchStrategy(replacement=replacement)
    m1 = greedy_match(F, groups, strategy, ids)
    perm = rng.permutation(n)
    m2 = greedy_match(F[perm], groups[perm], strategy, ids[perm])
    assert sorted(m1.pairs) == sorted(m2.pairs)
    if not replacement:
        flat = m1.treated_ids.tolist() + m1.comparison_ids.tolist()
        assert len(flat) == len(set(flat))


def _panel_with_groups(n_treated, n_comparison, seed=0):
    rng = np.random.default_rng(seed)
    n = n_treated + n_comparison
    y = rng.normal(size=(n, 10))
    groups = np.r_[np.ones(n_treated, int), np.zeros(n_comparison, int)]
    return panel_from_wide(groups, rng.normal(size=(n, 10)), y, first_post_time=6)


def test_subset_identity_when_all_matched():
    data = _panel_with_groups(30, 30)
    sub, m = match_panel(data, MatchStrategy(**NO_REPL))
    assert len(m) == 30
    for col in ("unit", "time", "group", "post", "x", "y"):
        assert np.array_equal(getattr(sub, col), getattr(data, col))


@pytest.mark.parametrize("n_t, n_c, expected", [(400, 400, 800), (300, 500, 600)])
def test_subset_counts(n_t, n_c, expected):
    data = _panel_with_groups(n_t, n_c, seed=1)
    for replacement in (False, True):
        sub, _ = match_panel(data, MatchStrategy(replacement=replacement))
        assert sub.n_units == expected
        assert sub.is_balanced()
        assert np.all(np.isin(sub.cluster, data.unit))


def test_reused_comparisons_share_a_cluster():
    features = np.array([10.0, 10.5, 11.0, 100.0])
    groups = np.array([1, 1, 0, 0])
    data = panel_from_wide(groups, np.zeros((4, 3)), np.arange(12.0).reshape(4, 3), first_post_time=3)
    m = greedy_match(features, groups, MatchStrategy(), np.array([1, 2, 3, 4]))
    sub = subset_panel(data, m)
    assert sub.n_units == 4
    assert sorted(np.unique(sub.cluster).tolist()) == [1, 2, 3]
    clone = sub.unit_ids[-1]
    assert clone == 5
    np.testing.assert_array_equal(sub.y[sub.unit == clone], data.y[data.unit == 3])


def test_subset_empty_match():
    data = _panel_with_groups(3, 3)
    m = greedy_match(np.arange(6.0), np.array([1, 1, 1, 0, 0, 0]), MatchStrategy())
    empty = type(m)(m.treated_ids[:0], m.comparison_ids[:0], m.distances[:0], m.unmatched[:0])
    with pytest.raises(MatchingError):
        subset_panel(data, empty)


def _smd(x, g):
    a, b = x[g == 1], x[g == 0]
    return abs(a.mean() - b.mean()) / np.sqrt((a.var(ddof=1) + b.var(ddof=1)) / 2)


def test_s2_covariate_matching_reduces_imbalance():
    before, after = [], []
    for r in range(20):
        data = generate(ScenarioSpec.protocol_default("s2", master_seed=5, replicate_index=r))
        sub, _ = match_panel(data, MatchStrategy("pre_covariates"))
        x0 = data.wide("x")[:, 0]
        before.append(_smd(x0, data.unit_groups()))
        after.append(_smd(sub.wide("x")[:, 0], sub.unit_groups()))
    assert np.mean(after) < 0.2 * np.mean(before)


def test_propensity_log_odds_matches_statsmodels():
    sm = pytest.importorskip("statsmodels.api")
    rng = np.random.default_rng(8)
    F = rng.normal(size=(300, 2))
    groups = (rng.random(300) < 1 / (1 + np.exp(-(0.5 * F[:, 0] - F[:, 1])))).astype(int)
    eta = propensity_log_odds(F, groups)
    Z = sm.add_constant(F)
    ref = Z @ sm.Logit(groups, Z).fit(disp=0, tol=1e-12).params
    np.testing.assert_allclose(eta, ref, atol=1e-6)


def test_propensity_separation():
    F = np.r_[np.linspace(-2, -1, 10), np.linspace(1, 2, 10)]
    groups = np.repeat([0, 1], 10)
    with pytest.raises(PropensitySeparationError, match="euclidean"):
        greedy_match(F, groups, MatchStrategy(distance="propensity"))


def test_propensity_mode_matches_on_scalar_score():
    data = generate(ScenarioSpec.protocol_default("s3", n_units=200, master_seed=2))
    sub, m = match_panel(data, MatchStrategy("pre_outcomes", Distance.PROPENSITY_LOGIT))
    assert len(m) == int((data.unit_groups() == 1).sum())
    assert sub.is_balanced()


def test_match_csv(tmp_path):
    m = greedy_match(np.array([10.0, 20.0, 11.0, 100.0]), np.array([1, 1, 0, 0]), MatchStrategy(**NO_REPL))
    text = m.to_csv(tmp_path / "m.csv")
    assert text.splitlines()[0] == "treated_id,comparison_id,distance"
    assert (tmp_path / "m.csv").read_text() == text
    assert len(text.splitlines()) == 3


def test_strategy_validation():
    with pytest.raises(ValueError):
        MatchStrategy(ratio=2)
    assert MatchStrategy("pre_outcomes").kind is MatchKind.PRE_OUTCOMES
