"""Sum-capacity brackets and normalized sum-rate (alpha) evaluation.

All quantities are exact Fractions.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

from .coding import best_coding, compile_schedule, strategy_rates
from .detmodel import DetNetwork, iter_cuts, rank_of_rows, transfer_rows, unicast_min_cut
from .localview import CapExceeded, ConsistencyClass, consistent_networks
from .scheduling import (
    DEFAULT_CAPS,
    Schedule,
    conflict_graph,
    empty_schedule,
    evaluate_schedule,
    frac_str,
    maximal_independent_sets,
    mir_schedule,
    mil_schedule,
    schedule_from_view,
)
from .localview import LocalView

DEFAULT_CUT_NODES = 16
DEFAULT_SCHEDULE_CAP = 20000


class ModelInconsistency(ArithmeticError):
    """A strategy claims positive rate on a network with zero capacity bound."""


@dataclass(frozen=True)
class CapacityBracket:
    lower: Fraction
    upper: Fraction
    notes: str = ""

    @property
    def exact(self) -> bool:
        return self.lower == self.upper

    def to_dict(self) -> Dict[str, Any]:
        return {"lower": frac_str(self.lower), "upper": frac_str(self.upper), "exact": self.exact, "notes": self.notes}


def sum_capacity_upper(network: DetNetwork, max_cut_nodes: int = DEFAULT_CUT_NODES) -> Tuple[Fraction, bool]:
    """Cut-set bound on the sum rate.

    For every node two-coloring, the pairs it separates are bounded jointly
    by the cut rank and every other pair by its own min cut.  Returns the
    bound and whether the full cut enumeration ran (False: only the sum of
    single-pair min cuts was used).
    """
    single = [unicast_min_cut(network, i) for i in range(network.k)]
    plain = Fraction(sum(single))
    ids = list(network.skeleton.node_ids())
    if len(ids) > max_cut_nodes:
        return plain, False
    best = plain
    for cut in iter_cuts(ids):
        separated = [i for i, (s, d) in enumerate(network.pairs) if cut.separates(s, d)]
        if not separated:
            continue
        near = [n for n in ids if n in cut.near]
        far = [n for n in ids if n not in cut.near]
        value = rank_of_rows(transfer_rows(network, near, far)) + sum(
            single[i] for i in range(network.k) if i not in separated
        )
        if value < best:
            best = Fraction(value)
    return best, True


def sum_capacity_bracket(
    network: DetNetwork,
    max_block: int = 2,
    budget: int = 4000,
    max_cut_nodes: int = DEFAULT_CUT_NODES,
    seed: int = 0,
) -> CapacityBracket:
    upper, full = sum_capacity_upper(network, max_cut_nodes)
    notes = "" if full else f"cut enumeration skipped (> {max_cut_nodes} nodes); upper is the sum of single-pair min cuts"
    lower = Fraction(0)
    for fn in (mir_schedule, mil_schedule):
        try:
            lower = max(lower, fn(network)[1].sum_rate)
        except CapExceeded:
            notes = (notes + "; " if notes else "") + f"{fn.__name__} over cap"
    _, rep = best_coding(network, max_block, budget=budget, target=upper, seed=seed)
    lower = max(lower, rep.sum_rate)
    return CapacityBracket(lower, upper, notes)


# --------------------------------------------------------------------------
# normalized sum-rate


def _ratio(rate: Fraction, upper: Fraction) -> Fraction:
    if upper == 0:
        if rate == 0:
            return Fraction(1)
        raise ModelInconsistency(f"rate {rate} claimed on a network with zero capacity bound")
    return Fraction(rate) / upper


Runner = Union[str, Schedule, Callable[[DetNetwork], Fraction]]


def _plan(strategy: Runner, cls: ConsistencyClass, caps: Optional[Mapping[str, int]]) -> Tuple[str, Callable[[DetNetwork], Fraction]]:
    """Turn a strategy name into a per-member sum-rate function.

    The schedule is fixed from the class skeleton before any member is seen,
    so the decision cannot depend on gains outside common knowledge.
    """
    if isinstance(strategy, Schedule):
        return strategy.kind, lambda n: evaluate_schedule(strategy, n).sum_rate
    if callable(strategy):
        return getattr(strategy, "__name__", "custom"), strategy
    view = LocalView(cls.owner or "", cls.skeleton, cls.known_gains, ())
    if strategy == "coding":
        sched = schedule_from_view(view, "mil", caps)
        return "coding", lambda n: strategy_rates(n, compile_schedule(sched, n)).sum_rate
    sched = schedule_from_view(view, strategy, caps)
    return strategy, lambda n: evaluate_schedule(sched, n).sum_rate


@dataclass(frozen=True)
class MemberResult:
    rate: Fraction
    upper: Fraction
    ratio: Fraction
    exact: Optional[bool]


@dataclass(frozen=True)
class AlphaReport:
    strategy_name: str
    alpha: Fraction
    witness: DetNetwork
    members: Tuple[MemberResult, ...]

    @property
    def exact_flags(self) -> Tuple[Optional[bool], ...]:
        return tuple(m.exact for m in self.members)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "strategy": self.strategy_name,
            "alpha": frac_str(self.alpha),
            "witness": self.witness.to_dict(),
            "members": [
                {"rate": frac_str(m.rate), "upper": frac_str(m.upper), "ratio": frac_str(m.ratio), "exact": m.exact}
                for m in self.members
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


class _UpperCache:
    def __init__(self, cls: ConsistencyClass, exact_check: bool, max_block: int, budget: int) -> None:
        self.members = list(consistent_networks(cls))
        self.uppers: List[Fraction] = []
        self.lowers: List[Optional[Fraction]] = []
        for n in self.members:
            if exact_check:
                br = sum_capacity_bracket(n, max_block, budget)
                self.uppers.append(br.upper)
                self.lowers.append(br.lower)
            else:
                self.uppers.append(sum_capacity_upper(n)[0])
                self.lowers.append(None)


def normalized_sum_rate(
    strategy: Runner,
    cls: ConsistencyClass,
    *,
    caps: Optional[Mapping[str, int]] = None,
    exact_check: bool = False,
    max_block: int = 2,
    budget: int = 2000,
    _cache: Optional[_UpperCache] = None,
) -> AlphaReport:
    """Worst case over the class of achieved sum-rate / cut-set upper bound (0/0 counts as 1)."""
    name, rate_of = _plan(strategy, cls, caps)
    cache = _cache or _UpperCache(cls, exact_check, max_block, budget)
    results = []
    alpha: Optional[Fraction] = None
    witness = None
    for n, up, lo in zip(cache.members, cache.uppers, cache.lowers):
        r = rate_of(n)
        ratio = _ratio(r, up)
        results.append(MemberResult(r, up, ratio, None if lo is None else lo == up))
        if alpha is None or ratio < alpha:
            alpha, witness = ratio, n
    return AlphaReport(name, alpha, witness, tuple(results))


def family_schedules(cls: ConsistencyClass, family: str, max_period: int, cap: int = DEFAULT_SCHEDULE_CAP) -> List[Schedule]:
    """Every period <= max_period multiset of maximal independent sets of the family's conflict graph."""
    if family == "silent":
        return [empty_schedule()]
    kind = "mir" if family == "mis" else family
    graph = conflict_graph(cls.skeleton, kind)
    if not graph.vertices:
        return [Schedule(family, 1, (), ((),))]
    sets = maximal_independent_sets(graph, range(len(graph.vertices)), DEFAULT_CAPS["independent_sets"])
    total = 0
    from math import comb

    for T in range(1, max_period + 1):
        total += comb(len(sets) + T - 1, T)
    if total > cap:
        raise CapExceeded(f"{family} schedule family", total, cap)
    out = []
    for T in range(1, max_period + 1):
        for combo in itertools.combinations_with_replacement(range(len(sets)), T):
            out.append(Schedule(family, T, graph.vertices, tuple(sets[c] for c in combo)))
    return out


def alpha_upper_bound(
    cls: ConsistencyClass,
    family: str,
    max_period: int = 3,
    schedule_cap: int = DEFAULT_SCHEDULE_CAP,
) -> Tuple[Fraction, Optional[Schedule]]:
    """Best worst-case alpha over every schedule of the family up to ``max_period``."""
    cache = _UpperCache(cls, False, 1, 0)
    best: Optional[Fraction] = None
    arg = None
    for sched in family_schedules(cls, family, max_period, schedule_cap):
        alpha = None
        for n, up in zip(cache.members, cache.uppers):
            ratio = _ratio(evaluate_schedule(sched, n).sum_rate, up)
            if alpha is None or ratio < alpha:
                alpha = ratio
            if best is not None and alpha <= best:
                break
        if best is None or alpha > best:
            best, arg = alpha, sched
    return best, arg


def full_information_alpha(network: DetNetwork, max_block: int = 2, budget: int = 4000) -> Tuple[Fraction, CapacityBracket]:
    """Best coding strategy with full information: lower / upper of the bracket."""
    br = sum_capacity_bracket(network, max_block, budget)
    return _ratio(br.lower, br.upper), br
