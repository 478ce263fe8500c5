import itertools
from fractions import Fraction

import pytest

from detnet.capacity import (
    ModelInconsistency,
    _ratio,
    alpha_upper_bound,
    family_schedules,
    full_information_alpha,
    normalized_sum_rate,
    sum_capacity_bracket,
    sum_capacity_upper,
)
from detnet.generators import gen_interference, gen_random_k2k
from detnet.localview import ConsistencyClass, all_views, consistent_networks, source_view
from detnet.scheduling import conflict_graph, evaluate_schedule, mil_from_skeleton, Schedule

from conftest import layered, path


def _two_unknown():
    links = {("s1", "r1"): 1, ("s2", "r2"): 2, ("r1", "d1"): 2, ("r1", "d2"): 1, ("r2", "d2"): 1}
    return layered([["s1", "s2"], ["r1", "r2"], ["d1", "d2"]], links, [("s1", "d1"), ("s2", "d2")])


def test_bracket_single_path():
    br = sum_capacity_bracket(path([3, 2, 3]))
    assert br.lower == br.upper == 2
    assert br.exact


def test_bracket_clean_pairs():
    br = sum_capacity_bracket(gen_interference(2, [[2, 0], [0, 3]]))
    assert (br.lower, br.upper, br.exact) == (5, 5, True)


def test_bracket_full222(full222):
    # pinned from the cut enumeration and the strategy search
    br = sum_capacity_bracket(full222)
    assert (br.lower, br.upper) == (1, 1)


def test_bracket_lower_never_exceeds_upper():
    for i in range(15):
        n = gen_random_k2k(61, i, 2, 2)
        br = sum_capacity_bracket(n, budget=500)
        assert 0 <= br.lower <= br.upper


def test_ratio_conventions():
    assert _ratio(Fraction(0), Fraction(0)) == 1
    with pytest.raises(ModelInconsistency):
        _ratio(Fraction(1), Fraction(0))


def test_alpha_interference_free_full_information():
    n = gen_interference(2, [[2, 0], [0, 3]])
    cls = ConsistencyClass.from_views(list(all_views(n).values()), [1, 2, 3])
    assert cls.size() == 1
    assert normalized_sum_rate("mil", cls).alpha == 1


def test_alpha_silent_is_zero(full222):
    cls = ConsistencyClass.from_view(source_view(full222, 0), [1])
    assert normalized_sum_rate("silent", cls).alpha == 0


def test_alpha_mil_two_unknown_gains():
    n = _two_unknown()
    cls = ConsistencyClass.from_view(source_view(n, 0), [1, 2])
    rep = normalized_sum_rate("mil", cls)
    sched = mil_from_skeleton(n.skeleton)
    ratios = []
    for m in consistent_networks(cls):
        ratios.append(evaluate_schedule(sched, m).sum_rate / sum_capacity_upper(m)[0])
    assert len(ratios) == 4
    assert rep.alpha == min(ratios)
    assert [x.ratio for x in rep.members] == ratios
    assert source_view(rep.witness, 0) == source_view(n, 0)


def test_alpha_in_unit_interval_and_witness_in_class():
    for i in range(10):
        n = gen_random_k2k(67, i, 2, 2)
        view = source_view(n, 0)
        cls = ConsistencyClass.from_view(view, [1, 2])
        for strat in ("mir", "mil", "coding"):
            rep = normalized_sum_rate(strat, cls)
            assert 0 <= rep.alpha <= 1
            assert source_view(rep.witness, 0) == view


def test_alpha_monotone_in_class_size():
    n = _two_unknown()
    full = ConsistencyClass.from_views(list(all_views(n).values()), [1, 2])
    known = [l for l, _ in full.known_gains]
    prev = None
    for drop in range(len(known) + 1):
        cls = full.restrict(known[drop:])
        a = normalized_sum_rate("mil", cls).alpha
        if prev is not None:
            assert a <= prev
        prev = a


def test_full_information_alpha(full222):
    a, br = full_information_alpha(full222)
    assert br.exact and a == 1


def brute_maximal_sets(graph):
    n = len(graph.vertices)
    edges = set(graph.edges)
    indep = [s for k in range(n + 1) for s in itertools.combinations(range(n), k)
             if not any((a, b) in edges for a, b in itertools.combinations(s, 2))]
    return [s for s in indep if not any(set(s) < set(t) for t in indep)]


def test_alpha_upper_bound_examples():
    clean = gen_interference(2, [[1, 0], [0, 2]])
    cls = ConsistencyClass.from_view(source_view(clean, 0), [1, 2])
    assert alpha_upper_bound(cls, "mil")[0] == 1
    assert alpha_upper_bound(cls, "silent")[0] == 0


def test_alpha_upper_bound_mil_brute_force():
    n = _two_unknown()
    cls = ConsistencyClass.from_view(source_view(n, 0), [1, 2])
    graph = conflict_graph(n.skeleton, "mil")
    sets = brute_maximal_sets(graph)
    members = list(consistent_networks(cls))
    uppers = [sum_capacity_upper(m)[0] for m in members]
    best = Fraction(0)
    for T in (1, 2):
        for combo in itertools.combinations_with_replacement(sets, T):
            s = Schedule("mil", T, graph.vertices, tuple(combo))
            best = max(best, min(evaluate_schedule(s, m).sum_rate / u for m, u in zip(members, uppers)))
    assert alpha_upper_bound(cls, "mil", max_period=2)[0] == best


def test_family_monotonicity():
    for i in range(6):
        n = gen_random_k2k(71, i, 2, 2)
        cls = ConsistencyClass.from_view(source_view(n, 0), [1, 2])
        if cls.size() > 16:
            continue
        mil = alpha_upper_bound(cls, "mil", max_period=2)[0]
        mir = alpha_upper_bound(cls, "mir", max_period=2)[0]
        assert mil >= mir
