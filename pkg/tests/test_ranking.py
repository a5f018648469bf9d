import itertools

import numpy as np
import pytest
import scipy.stats
from hypothesis import given, settings, strategies as st

from bavd.ranking import (DegenerateRankingError, SetResult, average_ranks, count_imperfect,
                          kendall_tau_b, rank_segmentations, set_table_csv, summarize_experiment,
                          summary_csv, wilcoxon_signed_rank)

TABLE1_AVD_RANKS = [1, 2, 3, 5, 7, 6, 8, 9, 11, 10, 4]
TABLE1_AVD = [0, 0.308, 0.455, 9.836, 10.138, 10.111, 10.213, 10.345, 10.638, 10.628, 9.768]
TABLE1_BAVD = [0, 0.314, 0.467, 23.487, 24.925, 24.928, 25.394, 25.435, 25.613, 25.690, 25.843]


def table(values, name="m"):
    return rank_segmentations([(f"m{k:02d}", k, v) for k, v in enumerate(values)], name)


def enumerate_wilcoxon_p(diffs):
    """2 * P(T <= W) over every sign assignment of the observed |d| ranks."""
    d = [x for x in diffs if x != 0]
    ranks = scipy.stats.rankdata(np.abs(d))
    w = min(sum(r for r, x in zip(ranks, d) if x > 0), sum(r for r, x in zip(ranks, d) if x < 0))
    hits = total = 0
    for signs in itertools.product((0, 1), repeat=len(d)):
        total += 1
        hits += sum(r for r, s in zip(ranks, signs) if s) <= w + 1e-9
    return w, min(1.0, 2 * hits / total)


def test_rank_examples():
    t = table([0, 0.3, 0.5])
    assert t.ranks == [1, 2, 3] and t.tau == 1 and t.perfect
    t = table([0, 0.2, 0.2, 0.9])
    assert t.ranks == [1, 2.5, 2.5, 4]


def test_table1_avd_ordering():
    t = table(TABLE1_AVD, "avd")
    assert t.ranks == TABLE1_AVD_RANKS
    assert t.tau < 1 and not t.perfect
    assert t.tau == pytest.approx(scipy.stats.kendalltau(TABLE1_AVD_RANKS, range(11))[0], abs=1e-12)
    b = table(TABLE1_BAVD, "bavd")
    assert b.perfect
    assert count_imperfect([t]) == 1 and count_imperfect([b]) == 0


def test_rows_in_error_count_order():
    t = rank_segmentations([("c", 2, 5.0), ("a", 0, 0.0), ("b", 1, 9.0)])
    assert [r.member for r in t.rows] == ["a", "b", "c"]
    assert [r.rank for r in t.rows] == [1, 3, 2]


def test_rank_errors():
    with pytest.raises(ValueError, match="non-finite"):
        table([0, float("nan")])
    with pytest.raises(ValueError):
        table([0])


def test_tau_unit_cases():
    p = list(range(1, 12))
    assert kendall_tau_b(p, p) == 1
    assert kendall_tau_b(p, p[::-1]) == -1
    swapped = p[:4] + [p[5], p[4]] + p[6:]
    # 55 pairs, exactly one discordant
    assert kendall_tau_b(p, swapped) == pytest.approx(53 / 55, abs=1e-12)


def test_tau_errors():
    with pytest.raises(ValueError, match="length mismatch"):
        kendall_tau_b([1, 2], [1, 2, 3])
    with pytest.raises(DegenerateRankingError, match="degenerate ranking"):
        kendall_tau_b([1, 1, 1], [1, 2, 3])


seqs = st.integers(2, 12).flatmap(lambda n: st.tuples(
    st.lists(st.integers(0, 4), min_size=n, max_size=n),
    st.lists(st.integers(0, 4), min_size=n, max_size=n)))


@settings(max_examples=200, deadline=None)
@given(ab=seqs)
def test_tau_b_matches_scipy_and_is_symmetric(ab):
    a, b = ab
    if len(set(a)) < 2 or len(set(b)) < 2:
        with pytest.raises(DegenerateRankingError):
            kendall_tau_b(a, b)
        return
    expected = scipy.stats.kendalltau(a, b, variant="b")[0]
    assert kendall_tau_b(a, b) == pytest.approx(expected, abs=1e-12)
    assert kendall_tau_b(a, b) == kendall_tau_b(b, a)


@settings(max_examples=100, deadline=None)
@given(perm=st.permutations(list(range(9))))
def test_tau_tie_free_simple_formula(perm):
    n = len(perm)
    c = sum(1 for i, j in itertools.combinations(range(n), 2) if perm[i] < perm[j])
    d = n * (n - 1) // 2 - c
    assert kendall_tau_b(list(range(n)), perm) == pytest.approx((c - d) / (n * (n - 1) / 2), abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(values=st.lists(st.integers(0, 1000), min_size=3, max_size=11, unique=True))
def test_rank_invariant_to_monotone_transform(values):
    t1 = table([float(v) for v in values])
    t2 = table([np.exp(v / 100) * 3 + 1 for v in values])
    assert t1.ranks == t2.ranks and t1.tau == t2.tau


def test_wilcoxon_unit_cases():
    assert wilcoxon_signed_rank([(0.5, 0.5)] * 5) == (0.0, 1.0)
    w, p = wilcoxon_signed_rank([(0, 1), (0, 2), (0, 3)])
    assert w == 0 and p == pytest.approx(0.25, abs=1e-12)
    w, p = wilcoxon_signed_rank([(0, k) for k in range(1, 7)])
    assert w == 0 and p == pytest.approx(0.03125, abs=1e-12)
    with pytest.raises(ValueError):
        wilcoxon_signed_rank([])


@settings(max_examples=80, deadline=None)
@given(d=st.lists(st.integers(-20, 20).filter(bool), min_size=1, max_size=10, unique_by=abs))
def test_wilcoxon_exact_matches_enumeration(d):
    w, p = wilcoxon_signed_rank([(0.0, float(x)) for x in d])
    w_o, p_o = enumerate_wilcoxon_p(d)
    assert w == w_o and p == pytest.approx(p_o, abs=1e-12)
    if len(d) > 1:
        assert p == pytest.approx(scipy.stats.wilcoxon(d, method="exact").pvalue, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(d=st.lists(st.integers(-6, 6).filter(bool), min_size=1, max_size=10))
def test_wilcoxon_exact_with_ties_matches_enumeration(d):
    w, p = wilcoxon_signed_rank([(0.0, float(x)) for x in d])
    w_o, p_o = enumerate_wilcoxon_p(d)
    assert w == pytest.approx(w_o) and p == pytest.approx(p_o, abs=1e-12)


def test_wilcoxon_normal_approximation(rng):
    d = rng.normal(0.3, 1.0, 40)
    w, p = wilcoxon_signed_rank([(0.0, x) for x in d])
    ref = scipy.stats.wilcoxon(d, method="approx", correction=True)
    assert w == pytest.approx(ref.statistic) and p == pytest.approx(ref.pvalue, rel=1e-9)


def _set(phantom, i, avd_vals, bavd_vals):
    return SetResult(phantom, i, table(avd_vals, "avd"), table(bavd_vals, "bavd"))


def test_summarize_single_perfect():
    s = summarize_experiment([_set("p", 0, [0, 1, 2], [0, 1, 2])])
    g = s.phantoms[0]
    assert (g.mean_tau_avd, g.mean_tau_bavd, g.imperfect_avd, g.imperfect_bavd, g.p_value) == \
        (1.0, 1.0, 0, 0, 1.0)


def test_summarize_significant_improvement():
    perfect = list(range(11))
    swapped = [0, 1, 2, 4, 3, 5, 6, 7, 8, 9, 10]
    sets = [_set("p", i, swapped if i < 6 else perfect, perfect) for i in range(20)]
    s = summarize_experiment(sets)
    g = s.phantoms[0]
    assert g.imperfect_avd == 6 and g.imperfect_bavd == 0
    assert g.p_value == pytest.approx(2 / 64, abs=1e-12) and g.p_value < 0.05
    assert g.mean_tau_bavd > g.mean_tau_avd


def test_summarize_groups_and_pools():
    sets = [_set("b", 0, [0, 2, 1], [0, 1, 2]), _set("a", 0, [0, 1, 2], [0, 1, 2]),
            _set("a", 1, [0, 2, 1], [0, 2, 1])]
    s = summarize_experiment(sets)
    assert [g.name for g in s.phantoms] == ["a", "b"]
    assert s.pooled.n_sets == 3 and s.pooled.imperfect_avd == 2 and s.pooled.imperfect_bavd == 1
    assert count_imperfect([x.avd for x in sets]) == count_imperfect([x.avd for x in sets[::-1]])


def test_count_imperfect_mixed():
    tabs = [table([0, 1, 2])] * 17 + [table([0, 2, 1])] * 3
    assert count_imperfect(tabs) == 3
    assert count_imperfect([]) == 0


def test_csv_outputs():
    a, b = table(TABLE1_AVD, "avd"), table(TABLE1_BAVD, "bavd")
    text = set_table_csv(a, b)
    lines = text.split("\n")
    assert lines[0] == "member,error_count,avd,avd_rank,bavd,bavd_rank"
    assert lines[4] == "m03,3,9.836,5,23.487,4"
    assert text.endswith("\n") and "\r" not in text
    g = summarize_experiment([SetResult("p", 0, a, b)]).phantoms[0]
    assert summary_csv(g).split("\n")[0] == "metric,mean_tau,imperfect_count,p_value"


def test_average_ranks():
    np.testing.assert_array_equal(average_ranks([3, 1, 3, 2]), [3.5, 1, 3.5, 2])
