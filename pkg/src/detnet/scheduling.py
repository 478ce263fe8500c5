"""Conflict graphs and MIS / MIR / MIL time-sharing schedules.

Schedules are built from the topology skeleton.  With ``views`` given, the
scheduler only uses what every node shares (the skeleton) and weighs all
links as unit gains, so each node recomputes the same schedule.  Without
views it is the full-information benchmark and weighs routes by their true
gains.  Rates are always evaluated against the true gains.
"""

from __future__ import annotations

import itertools
import json
import math
import random
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .detmodel import DetNetwork, Link, NodeId, Skeleton, propagate
from .localview import CapExceeded, LocalView, Route, pair_routes
from .rational_lp import maximize

DEFAULT_CAPS = {
    "coloring_vertices": 12,
    "mil_vertices": 16,
    "independent_sets": 4096,
}


def frac_str(x: Fraction) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


def parse_frac(s: str) -> Fraction:
    return Fraction(s)


# --------------------------------------------------------------------------
# conflict relations


def route_conflict(r1: Route, r2: Route, skeleton: Skeleton) -> bool:
    """Routes conflict when they share a node or one leaks into the other's receivers."""
    if r1 == r2:
        raise ValueError("a route does not conflict with itself")
    if set(r1.nodes) & set(r2.nodes):
        return True
    for a, b in ((r1, r2), (r2, r1)):
        own = set(b.links)
        for u in a.nodes[:-1]:
            for v in b.nodes[1:]:
                if (u, v) not in own and skeleton.has_link(u, v):
                    return True
    return False


def link_conflict(l1: Link, l2: Link, skeleton: Skeleton) -> bool:
    if l1 == l2:
        raise ValueError("a link does not conflict with itself")
    (u1, v1), (u2, v2) = l1, l2
    if u1 == u2 or v1 == v2:
        return True
    return skeleton.has_link(u1, v2) or skeleton.has_link(u2, v1)


@dataclass(frozen=True)
class Vertex:
    """A schedulable unit: a whole route (hop is None) or one hop of a route."""

    route: Route
    hop: Optional[int] = None

    @property
    def link(self) -> Link:
        if self.hop is None:
            raise ValueError("whole-route vertex has no single link")
        return self.route.links[self.hop]

    def label(self) -> str:
        base = self.route.label()
        if self.hop is None:
            return base
        u, v = self.link
        return f"{base}@{u}->{v}"


def vertex_conflict(a: Vertex, b: Vertex, skeleton: Skeleton) -> bool:
    if a.hop is None and b.hop is None:
        return route_conflict(a.route, b.route, skeleton)
    if a.hop is None or b.hop is None:
        raise ValueError("cannot mix route and link vertices")
    if a.link == b.link:
        return a.route != b.route
    return link_conflict(a.link, b.link, skeleton)


@dataclass(frozen=True)
class ConflictGraph:
    vertices: Tuple[Vertex, ...]
    edges: Tuple[Tuple[int, int], ...]

    def adjacency(self) -> List[int]:
        adj = [0] * len(self.vertices)
        for i, j in self.edges:
            adj[i] |= 1 << j
            adj[j] |= 1 << i
        return adj

    def is_independent(self, members: Iterable[int]) -> bool:
        adj = self.adjacency()
        mask = 0
        for i in members:
            mask |= 1 << i
        return all(not (adj[i] & mask) for i in members)

    def to_dict(self) -> Dict[str, Any]:
        return {"vertices": [v.label() for v in self.vertices], "edges": [list(e) for e in self.edges]}


def build_conflict_graph(vertices: Sequence[Vertex], skeleton: Skeleton) -> ConflictGraph:
    edges = tuple(
        (i, j)
        for i, j in itertools.combinations(range(len(vertices)), 2)
        if vertex_conflict(vertices[i], vertices[j], skeleton)
    )
    return ConflictGraph(tuple(vertices), edges)


def route_vertices(skeleton: Skeleton) -> List[Vertex]:
    return [Vertex(r) for r in pair_routes(skeleton)]


def link_vertices(skeleton: Skeleton) -> List[Vertex]:
    return [Vertex(r, h) for r in pair_routes(skeleton) for h in range(len(r.links))]


def conflict_graph(skeleton: Skeleton, kind: str) -> ConflictGraph:
    """Conflict graph of a strategy family, from the skeleton alone."""
    if kind in ("mis", "mir"):
        return build_conflict_graph(route_vertices(skeleton), skeleton)
    if kind == "mil":
        return build_conflict_graph(link_vertices(skeleton), skeleton)
    raise ValueError(f"unknown schedule kind {kind!r}")


# --------------------------------------------------------------------------
# schedules and rates


@dataclass(frozen=True)
class Schedule:
    kind: str
    period: int
    vertices: Tuple[Vertex, ...]
    slots: Tuple[Tuple[int, ...], ...]

    def activity(self) -> List[int]:
        """Number of slots each vertex is active in."""
        counts = [0] * len(self.vertices)
        for s in self.slots:
            for i in s:
                counts[i] += 1
        return counts

    def fraction(self, i: int) -> Fraction:
        return Fraction(self.activity()[i], self.period)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "period": self.period,
            "vertices": [v.label() for v in self.vertices],
            "slots": [[self.vertices[i].label() for i in s] for s in self.slots],
        }


@dataclass(frozen=True)
class RateReport:
    per_pair_rate: Tuple[Fraction, ...]
    strategy_name: str

    @property
    def sum_rate(self) -> Fraction:
        return sum(self.per_pair_rate, Fraction(0))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "strategy": self.strategy_name,
            "per_pair_rate": [frac_str(r) for r in self.per_pair_rate],
            "sum_rate": frac_str(self.sum_rate),
        }


def schedule_json(schedule: Schedule, report: RateReport) -> str:
    d = schedule.to_dict()
    d["rates"] = [frac_str(r) for r in report.per_pair_rate]
    d["sum_rate"] = frac_str(report.sum_rate)
    return json.dumps(d, sort_keys=True)


def route_bits_per_period(schedule: Schedule, network: DetNetwork) -> Dict[Route, int]:
    """Bits each scheduled route carries per period (bottleneck over its hops)."""
    counts = schedule.activity()
    per_hop: Dict[Route, Dict[int, int]] = {}
    out: Dict[Route, int] = {}
    for i, v in enumerate(schedule.vertices):
        if v.hop is None:
            g = min(network.gain(a, b) for a, b in v.route.links)
            out[v.route] = out.get(v.route, 0) + counts[i] * g
        else:
            per_hop.setdefault(v.route, {})[v.hop] = counts[i] * network.gain(*v.link)
    for r, hops in per_hop.items():
        if len(hops) == len(r.links):
            out[r] = min(hops.values())
        else:
            out[r] = 0
    return out


def evaluate_schedule(schedule: Schedule, network: DetNetwork, name: Optional[str] = None) -> RateReport:
    """Closed-form rates of a schedule on a (true) network."""
    rates = [Fraction(0)] * network.k
    if schedule.period > 0:
        for r, bits in route_bits_per_period(schedule, network).items():
            rates[r.pair] += Fraction(bits, schedule.period)
    return RateReport(tuple(rates), name or schedule.kind)


def empty_schedule(kind: str = "silent") -> Schedule:
    return Schedule(kind, 1, (), ((),))


# --------------------------------------------------------------------------
# exact combinatorics


def min_coloring(graph: ConflictGraph, members: Sequence[int]) -> List[List[int]]:
    """Minimum proper coloring of the induced subgraph; lexicographically first in DFS order."""
    adj = graph.adjacency()
    members = list(members)
    if not members:
        return []
    for T in range(1, len(members) + 1):
        color = {}

        def place(idx: int, used: int) -> bool:
            if idx == len(members):
                return True
            v = members[idx]
            for c in range(min(used + 1, T)):
                if all(color.get(u) != c for u in members[:idx] if (adj[v] >> u) & 1):
                    color[v] = c
                    if place(idx + 1, max(used, c + 1)):
                        return True
                    del color[v]
            return False

        if place(0, 0):
            classes = [[] for _ in range(T)]
            for v in members:
                classes[color[v]].append(v)
            return classes
    raise AssertionError("unreachable")


def maximal_independent_sets(graph: ConflictGraph, members: Sequence[int], cap: int) -> List[Tuple[int, ...]]:
    """All maximal independent sets of the induced subgraph, sorted."""
    adj = graph.adjacency()
    members = sorted(members)
    mset = 0
    for v in members:
        mset |= 1 << v
    found: List[Tuple[int, ...]] = []

    def grow(idx: int, chosen: List[int], blocked: int) -> None:
        if idx == len(members):
            # maximal iff every unchosen member has a neighbor in chosen
            cmask = 0
            for c in chosen:
                cmask |= 1 << c
            for v in members:
                if not (cmask >> v) & 1 and not (adj[v] & cmask):
                    return
            found.append(tuple(chosen))
            if len(found) > cap:
                raise CapExceeded("maximal independent set enumeration", len(found), cap)
            return
        v = members[idx]
        if not (blocked >> v) & 1:
            chosen.append(v)
            grow(idx + 1, chosen, blocked | adj[v])
            chosen.pop()
        grow(idx + 1, chosen, blocked)

    grow(0, [], 0)
    return sorted(found)


def _check_views(network: DetNetwork, views: Optional[Iterable[LocalView]]) -> bool:
    """True for the gain-oblivious (distributed) mode."""
    if views is None:
        return False
    views = list(views) if not isinstance(views, Mapping) else list(views.values())
    for v in views:
        if v.skeleton != network.skeleton:
            raise ValueError(f"view of {v.owner!r} has a different skeleton")
    return True


def _route_weight(route: Route, network: Optional[DetNetwork]) -> int:
    if network is None:
        return 1
    return min(network.gain(a, b) for a, b in route.links)


# --------------------------------------------------------------------------
# MIS


def mis_from_skeleton(skeleton: Skeleton) -> Schedule:
    if skeleton.layers != 1:
        raise ValueError("MIS scheduling needs a single-layer network")
    graph = conflict_graph(skeleton, "mis")
    classes = min_coloring(graph, range(len(graph.vertices)))
    if not classes:
        return Schedule("mis", 1, graph.vertices, ((),))
    return Schedule("mis", len(classes), graph.vertices, tuple(tuple(c) for c in classes))


def mis_schedule(network: DetNetwork, views: Optional[Iterable[LocalView]] = None) -> Tuple[Schedule, RateReport]:
    """Color the pair conflict graph; each pair transmits at its direct gain in its slot."""
    _check_views(network, views)
    sched = mis_from_skeleton(network.skeleton)
    return sched, evaluate_schedule(sched, network, "mis")


# --------------------------------------------------------------------------
# MIR


def _mir_search(skeleton: Skeleton, weights: Optional[DetNetwork], caps: Mapping[str, int]) -> Schedule:
    graph = conflict_graph(skeleton, "mir")
    n = len(graph.vertices)
    if n > caps["coloring_vertices"]:
        raise CapExceeded("MIR route conflict graph", n, caps["coloring_vertices"])
    w = [_route_weight(v.route, weights) for v in graph.vertices]
    best_key = None
    best: Optional[Tuple[List[List[int]], int]] = None
    # subsets in order of size then lexicographic index tuple
    for size in range(1, n + 1):
        for subset in itertools.combinations(range(n), size):
            classes = min_coloring(graph, subset)
            value = Fraction(sum(w[i] for i in subset), len(classes))
            key = (value, -len(classes))
            if best_key is None or key > best_key:
                best_key, best = key, (classes, len(classes))
    if best is None:
        return Schedule("mir", 1, graph.vertices, ((),))
    classes, T = best
    return Schedule("mir", T, graph.vertices, tuple(tuple(c) for c in classes))


def mir_greedy(skeleton: Skeleton) -> Schedule:
    """Non-optimal fallback: first route of every pair, greedy coloring."""
    graph = conflict_graph(skeleton, "mir")
    chosen, seen = [], set()
    for i, v in enumerate(graph.vertices):
        if v.route.pair not in seen:
            seen.add(v.route.pair)
            chosen.append(i)
    adj = graph.adjacency()
    classes: List[List[int]] = []
    for v in chosen:
        for c in classes:
            if not any((adj[v] >> u) & 1 for u in c):
                c.append(v)
                break
        else:
            classes.append([v])
    if not classes:
        return Schedule("mir-greedy", 1, graph.vertices, ((),))
    return Schedule("mir-greedy", len(classes), graph.vertices, tuple(tuple(c) for c in classes))


def mir_from_skeleton(skeleton: Skeleton, caps: Optional[Mapping[str, int]] = None) -> Schedule:
    return _mir_search(skeleton, None, {**DEFAULT_CAPS, **(caps or {})})


def mir_schedule(
    network: DetNetwork,
    views: Optional[Iterable[LocalView]] = None,
    caps: Optional[Mapping[str, int]] = None,
    fallback: bool = False,
) -> Tuple[Schedule, RateReport]:
    """Best route selection + minimum coloring of the induced route conflict graph."""
    distributed = _check_views(network, views)
    caps = {**DEFAULT_CAPS, **(caps or {})}
    try:
        sched = _mir_search(network.skeleton, None if distributed else network, caps)
    except CapExceeded:
        if not fallback:
            raise
        sched = mir_greedy(network.skeleton)
    return sched, evaluate_schedule(sched, network, sched.kind)


# --------------------------------------------------------------------------
# MIL


def _layout(boundary_plans: Sequence[Sequence[Tuple[Tuple[int, ...], int]]], period: int) -> Tuple[Tuple[int, ...], ...]:
    """Merge per-boundary (set, slot count) plans into one slot sequence."""
    slots: List[List[int]] = [[] for _ in range(period)]
    for plan in boundary_plans:
        t = 0
        for members, count in plan:
            for _ in range(count):
                slots[t].extend(members)
                t += 1
    return tuple(tuple(sorted(s)) for s in slots)


def _mil_search(skeleton: Skeleton, weights: Optional[DetNetwork], caps: Mapping[str, int]) -> Schedule:
    graph = conflict_graph(skeleton, "mil")
    n = len(graph.vertices)
    if n > caps["mil_vertices"]:
        raise CapExceeded("MIL link conflict graph", n, caps["mil_vertices"])
    if n == 0:
        return Schedule("mil", 1, graph.vertices, ((),))
    routes: List[Route] = []
    for v in graph.vertices:
        if v.route not in routes:
            routes.append(v.route)
    ridx = {r: i for i, r in enumerate(routes)}
    boundaries = sorted({v.hop for v in graph.vertices})
    sets: List[Tuple[int, Tuple[int, ...]]] = []
    for b in boundaries:
        members = [i for i, v in enumerate(graph.vertices) if v.hop == b]
        for s in maximal_independent_sets(graph, members, caps["independent_sets"]):
            sets.append((b, s))
    nr, ns = len(routes), len(sets)
    # variables: t_r (nr) then lambda_S (ns)
    c = [Fraction(1)] * nr + [Fraction(0)] * ns
    A: List[List[Fraction]] = []
    bvec: List[Fraction] = []
    for i, v in enumerate(graph.vertices):
        row = [Fraction(0)] * (nr + ns)
        row[ridx[v.route]] = Fraction(1)
        g = weights.gain(*v.link) if weights is not None else 1
        for j, (_, s) in enumerate(sets):
            if i in s:
                row[nr + j] = Fraction(-g)
        A.append(row)
        bvec.append(Fraction(0))
    for b in boundaries:
        row = [Fraction(0)] * (nr + ns)
        for j, (bb, _) in enumerate(sets):
            if bb == b:
                row[nr + j] = Fraction(1)
        A.append(row)
        bvec.append(Fraction(1))
    _, x = maximize(c, A, bvec)
    lam = list(x[nr:])
    # idle time on a boundary goes to its most used set; rates can only grow
    for b in boundaries:
        idx = [j for j, (bb, _) in enumerate(sets) if bb == b]
        slack = 1 - sum(lam[j] for j in idx)
        if slack > 0:
            top = max(idx, key=lambda j: (lam[j], -j))
            lam[top] += slack
    period = 1
    for val in lam:
        period = period * val.denominator // math.gcd(period, val.denominator)
    plans = []
    for b in boundaries:
        plans.append([(s, int(lam[j] * period)) for j, (bb, s) in enumerate(sets) if bb == b and lam[j] > 0])
    return Schedule("mil", period, graph.vertices, _layout(plans, period))


def mil_from_skeleton(skeleton: Skeleton, caps: Optional[Mapping[str, int]] = None) -> Schedule:
    return _mil_search(skeleton, None, {**DEFAULT_CAPS, **(caps or {})})


def mil_schedule(
    network: DetNetwork,
    views: Optional[Iterable[LocalView]] = None,
    caps: Optional[Mapping[str, int]] = None,
) -> Tuple[Schedule, RateReport]:
    """Exact time-sharing of per-hop independent sets with relay buffering."""
    distributed = _check_views(network, views)
    sched = _mil_search(network.skeleton, None if distributed else network, {**DEFAULT_CAPS, **(caps or {})})
    return sched, evaluate_schedule(sched, network, "mil")


def schedule_from_view(view: LocalView, kind: str, caps: Optional[Mapping[str, int]] = None) -> Schedule:
    """What a node computes locally: depends on its view's skeleton only."""
    if kind == "mis":
        return mis_from_skeleton(view.skeleton)
    if kind == "mir":
        return mir_from_skeleton(view.skeleton, caps)
    if kind == "mil":
        return mil_from_skeleton(view.skeleton, caps)
    if kind == "silent":
        return empty_schedule()
    raise ValueError(f"unknown schedule kind {kind!r}")


def schedule_is_valid(schedule: Schedule, skeleton: Skeleton) -> bool:
    """Every slot is an independent set of the schedule's conflict graph."""
    if not schedule.vertices:
        return True
    graph = build_conflict_graph(schedule.vertices, skeleton)
    return all(graph.is_independent(s) for s in schedule.slots)


# --------------------------------------------------------------------------
# simulation


class SimulationMismatch(AssertionError):
    pass


@dataclass
class SimulationResult:
    periods: int
    delivered_last_period: Tuple[int, ...]
    delivered_total: Tuple[int, ...]


def simulate_schedule(schedule: Schedule, network: DetNetwork, seed: int = 0, periods: Optional[int] = None) -> SimulationResult:
    """Bit-level simulation of a schedule over several periods.

    Relays keep a FIFO per route and forward at most the route's per-period
    rate in each period; within a slot the boundaries fire in layer order.
    Every received bit is checked against what was sent.
    """
    rng = random.Random(seed)
    q = network.q
    target = route_bits_per_period(schedule, network)
    if periods is None:
        periods = network.layers + 1
    active_hops: List[List[Tuple[Route, int]]] = []
    for s in schedule.slots:
        hops = []
        for i in s:
            v = schedule.vertices[i]
            if v.hop is None:
                hops.extend((v.route, h) for h in range(len(v.route.links)))
            else:
                hops.append((v.route, v.hop))
        active_hops.append(hops)
    buffers: Dict[Tuple[Route, NodeId], deque] = {}
    sent: Dict[Route, List[int]] = {r: [] for r in target}
    got: Dict[Route, List[int]] = {r: [] for r in target}
    last = [0] * network.k
    for p in range(periods):
        forwarded: Dict[Tuple[Route, int], int] = {}
        for r, R in target.items():
            bits = [rng.getrandbits(1) for _ in range(R)]
            sent[r].extend(bits)
            buffers.setdefault((r, r.nodes[0]), deque()).extend(bits)
        delivered_before = {r: len(got[r]) for r in target}
        for hops in active_hops:
            for b in range(network.layers):
                tx: Dict[NodeId, int] = {}
                moves = []
                for r, h in hops:
                    if h != b or r not in target:
                        continue
                    u, v = r.links[h]
                    g = network.gain(u, v)
                    buf = buffers.setdefault((r, u), deque())
                    n = min(g, len(buf), target[r] - forwarded.get((r, h), 0))
                    if n <= 0:
                        continue
                    payload = [buf.popleft() for _ in range(n)]
                    x = sum(bit << j for j, bit in enumerate(payload))
                    if u in tx:
                        raise SimulationMismatch(f"node {u} drives two links in one slot")
                    tx[u] = x
                    moves.append((r, h, u, v, g, payload))
                    forwarded[(r, h)] = forwarded.get((r, h), 0) + n
                if not tx:
                    continue
                rx = propagate(network, tx)
                for r, h, u, v, g, payload in moves:
                    y = rx[v]
                    decoded = [(y >> (q - g + j)) & 1 for j in range(len(payload))]
                    if decoded != payload:
                        raise SimulationMismatch(f"interference corrupted {r.label()} hop {h}")
                    if h == len(r.links) - 1:
                        got[r].extend(decoded)
                    else:
                        buffers.setdefault((r, v), deque()).extend(decoded)
        for r in target:
            if got[r] != sent[r][: len(got[r])]:
                raise SimulationMismatch(f"route {r.label()} delivered bits out of order")
        last = [0] * network.k
        for r in target:
            last[r.pair] += len(got[r]) - delivered_before[r]
    total = [0] * network.k
    for r in target:
        total[r.pair] += len(got[r])
    return SimulationResult(periods, tuple(last), tuple(total))


def achieved_rates(schedule: Schedule, network: DetNetwork, seed: int = 0) -> RateReport:
    """Closed-form rates, confirmed by simulation in steady state."""
    for v in schedule.vertices:
        for l in v.route.links:
            if not network.skeleton.has_link(*l):
                raise ValueError(f"schedule references unknown link {l}")
    report = evaluate_schedule(schedule, network)
    sim = simulate_schedule(schedule, network, seed)
    for i in range(network.k):
        if Fraction(sim.delivered_last_period[i], schedule.period) != report.per_pair_rate[i]:
            raise SimulationMismatch(
                f"pair {i}: simulated {sim.delivered_last_period[i]} bits/period, claimed {report.per_pair_rate[i]}"
            )
    return report
