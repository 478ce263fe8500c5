"""Linear GF(2) block coding at relays.

A strategy works on blocks of T channel uses.  Layers are pipelined block
by block: a node at layer l sends its block for message block b during
block period b + l, having received all of it in the period before, so its
encoding may be any linear map of its whole received block.  Within a block
the slots are still sent one at a time through ``propagate``.

Signals are tracked symbolically: every transmitted or received coordinate
is a row bitset over the stacked message bits of all pairs.
"""

from __future__ import annotations

import itertools
import json
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .detmodel import DetNetwork, NodeId, propagate, unicast_min_cut
from .gf2 import GF2Matrix, independent_columns, left_annihilating_decoder, parity, rank_of_rows
from .localview import CapExceeded
from .scheduling import RateReport, Schedule, mil_schedule, mir_schedule, route_bits_per_period

DEFAULT_FAMILY_CAP = 1 << 16
DEFAULT_BUDGET = 4000


class StrategyError(ValueError):
    pass


@dataclass(frozen=True)
class LinearStrategy:
    block: int
    q: int
    injections: Tuple[GF2Matrix, ...]  # per pair: qT x m_i
    encoders: Tuple[Tuple[NodeId, GF2Matrix], ...]  # per relay: qT x qT

    @property
    def message_lengths(self) -> Tuple[int, ...]:
        return tuple(m.ncols for m in self.injections)

    def encoder_map(self) -> Dict[NodeId, GF2Matrix]:
        return dict(self.encoders)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "block": self.block,
            "q": self.q,
            "injections": [{"cols": m.ncols, "rows": m.to_hex()} for m in self.injections],
            "encoders": [{"node": n, "rows": m.to_hex()} for n, m in self.encoders],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "LinearStrategy":
        n = d["q"] * d["block"]
        inj = tuple(GF2Matrix.from_hex(x["rows"], x["cols"]) for x in d["injections"])
        enc = tuple((x["node"], GF2Matrix.from_hex(x["rows"], n)) for x in d["encoders"])
        return cls(d["block"], d["q"], inj, enc)


def relay_nodes(network: DetNetwork) -> List[NodeId]:
    """Nodes strictly between the source and destination layers."""
    return [n for n, l in network.nodes if 0 < l < network.layers]


def zero_strategy(network: DetNetwork, block: int = 1) -> LinearStrategy:
    n = network.q * block
    return LinearStrategy(
        block,
        network.q,
        tuple(GF2Matrix.zeros(n, 0) for _ in range(network.k)),
        tuple((v, GF2Matrix.zeros(n, n)) for v in relay_nodes(network)),
    )


def forwarding_strategy(network: DetNetwork, block: int = 1) -> LinearStrategy:
    """Every source sends qT fresh bits, every relay re-sends what it hears."""
    n = network.q * block
    return LinearStrategy(
        block,
        network.q,
        tuple(GF2Matrix.identity(n) for _ in range(network.k)),
        tuple((v, GF2Matrix.identity(n)) for v in relay_nodes(network)),
    )


def _check_dims(network: DetNetwork, strategy: LinearStrategy) -> None:
    n = network.q * strategy.block
    if strategy.q != network.q:
        raise StrategyError(f"strategy q={strategy.q} but network q={network.q}")
    if len(strategy.injections) != network.k:
        raise StrategyError("one injection matrix per pair is required")
    for m in strategy.injections:
        if m.nrows != n:
            raise StrategyError("injection matrix has the wrong number of rows")
    enc = strategy.encoder_map()
    if set(enc) != set(relay_nodes(network)):
        raise StrategyError("encoders must cover exactly the relay nodes")
    for v, m in enc.items():
        if m.shape != (n, n):
            raise StrategyError(f"encoder of {v} has shape {m.shape}, expected {(n, n)}")


@dataclass(frozen=True)
class TransferMap:
    """Received block at every destination as rows over all message bits."""

    block: int
    q: int
    offsets: Tuple[int, ...]
    lengths: Tuple[int, ...]
    received: Tuple[Tuple[NodeId, Tuple[int, ...]], ...]
    destinations: Tuple[NodeId, ...]

    def rows_at(self, node: NodeId) -> Tuple[int, ...]:
        return dict(self.received)[node]

    def column_mask(self, pair: int) -> int:
        return ((1 << self.lengths[pair]) - 1) << self.offsets[pair]

    def G(self, source: int, dest: int) -> GF2Matrix:
        """Transfer matrix from message bits of ``source`` to the block at destination ``dest``."""
        rows = self.rows_at(self.destinations[dest])
        off, m = self.offsets[source], self.lengths[source]
        return GF2Matrix(tuple((r >> off) & ((1 << m) - 1) for r in rows), m)


def _symbolic_rows(network: DetNetwork, strategy: LinearStrategy) -> Tuple[Dict[NodeId, List[int]], List[int], List[int]]:
    q, T = network.q, strategy.block
    n = q * T
    offsets, lengths = [], []
    off = 0
    for m in strategy.injections:
        offsets.append(off)
        lengths.append(m.ncols)
        off += m.ncols
    tx: Dict[NodeId, List[int]] = {}
    for i, s in enumerate(network.sources):
        tx[s] = [r << offsets[i] for r in strategy.injections[i].rows]
    rx: Dict[NodeId, List[int]] = {v: [0] * n for v, _ in network.nodes}
    enc = strategy.encoder_map()
    by_layer: Dict[int, List[NodeId]] = {}
    for v, l in network.nodes:
        by_layer.setdefault(l, []).append(v)
    for layer in range(network.layers):
        for u in by_layer.get(layer, []):
            if layer > 0:
                if u in enc:
                    y = rx[u]
                    out = []
                    for erow in enc[u].rows:
                        acc = 0
                        k = 0
                        while erow:
                            if erow & 1:
                                acc ^= y[k]
                            erow >>= 1
                            k += 1
                        out.append(acc)
                    tx[u] = out
            x = tx.get(u)
            if not x:
                continue
            for v in network.skeleton.successors(u):
                g = network.gain(u, v)
                shift = q - g
                yv = rx[v]
                for t in range(T):
                    base = t * q
                    for i in range(shift, q):
                        yv[base + i] ^= x[base + i - shift]
    return rx, offsets, lengths


def end_to_end_transfer(network: DetNetwork, strategy: LinearStrategy) -> TransferMap:
    _check_dims(network, strategy)
    rx, offsets, lengths = _symbolic_rows(network, strategy)
    dests = network.destinations
    return TransferMap(
        strategy.block,
        network.q,
        tuple(offsets),
        tuple(lengths),
        tuple((d, tuple(rx[d])) for d in dests),
        dests,
    )


def decodable_rate(transfer: TransferMap, pair: int) -> int:
    """rank([G_int | G_sig]) - rank(G_int) at the pair's destination."""
    rows = transfer.rows_at(transfer.destinations[pair])
    total = 0
    for i in range(len(transfer.lengths)):
        total |= transfer.column_mask(i)
    int_mask = total & ~transfer.column_mask(pair)
    return rank_of_rows(r & total for r in rows) - rank_of_rows(r & int_mask for r in rows)


def strategy_rates(network: DetNetwork, strategy: LinearStrategy, name: str = "coding") -> RateReport:
    tm = end_to_end_transfer(network, strategy)
    return RateReport(tuple(Fraction(decodable_rate(tm, i), strategy.block) for i in range(network.k)), name)


def _columns(rows: Sequence[int], offset: int, length: int) -> List[int]:
    """Columns offset..offset+length-1 of a row list, each as a bitset over rows."""
    cols = []
    for c in range(offset, offset + length):
        col = 0
        for i, r in enumerate(rows):
            if (r >> c) & 1:
                col |= 1 << i
        cols.append(col)
    return cols


def prune(network: DetNetwork, strategy: LinearStrategy) -> LinearStrategy:
    """Keep, per pair, a set of message bits decodable bit-by-bit; drop the rest.

    Dropping bits only shrinks interference, so each kept bit stays decodable.
    """
    tm = end_to_end_transfer(network, strategy)
    keep = []
    for i in range(network.k):
        rows = tm.rows_at(network.destinations[i])
        sig = _columns(rows, tm.offsets[i], tm.lengths[i])
        others = []
        for j in range(network.k):
            if j != i:
                others.extend(_columns(rows, tm.offsets[j], tm.lengths[j]))
        keep.append(independent_columns(sig, list(range(len(sig))), others))
    inj = tuple(m.select_columns(cols) for m, cols in zip(strategy.injections, keep))
    return LinearStrategy(strategy.block, strategy.q, inj, strategy.encoders)


def decoders(network: DetNetwork, strategy: LinearStrategy) -> List[Optional[List[int]]]:
    """Per pair, one functional on the received block per message bit (None if not all bits decodable)."""
    tm = end_to_end_transfer(network, strategy)
    out = []
    n = network.q * strategy.block
    for i in range(network.k):
        rows = tm.rows_at(network.destinations[i])
        sig = _columns(rows, tm.offsets[i], tm.lengths[i])
        others = []
        for j in range(network.k):
            if j != i:
                others.extend(_columns(rows, tm.offsets[j], tm.lengths[j]))
        out.append(left_annihilating_decoder(sig, others, n))
    return out


def simulate_block(network: DetNetwork, strategy: LinearStrategy, messages: Sequence[int]) -> Dict[NodeId, int]:
    """Run one block slot by slot; returns the received block (qT-bit int) per node."""
    q, T = network.q, strategy.block
    n = q * T
    tx: Dict[NodeId, int] = {}
    for i, s in enumerate(network.sources):
        tx[s] = strategy.injections[i].apply(messages[i])
    rx: Dict[NodeId, int] = {v: 0 for v, _ in network.nodes}
    enc = strategy.encoder_map()
    layer_of = dict(network.nodes)
    mask = (1 << q) - 1
    for layer in range(network.layers):
        senders = [u for u, l in network.nodes if l == layer]
        for u in senders:
            if layer > 0 and u in enc:
                tx[u] = enc[u].apply(rx[u])
        for t in range(T):
            slot = {u: (tx.get(u, 0) >> (t * q)) & mask for u in senders}
            got = propagate(network, slot)
            for v, y in got.items():
                if layer_of[v] == layer + 1 and y:
                    rx[v] |= y << (t * q)
    return rx


def verify_strategy(network: DetNetwork, strategy: LinearStrategy, trials: int = 100, seed: int = 0) -> bool:
    """Random-message simulation: every pair recovers exactly its decodable rate in bits."""
    strategy = prune(network, strategy)
    tm = end_to_end_transfer(network, strategy)
    dec = decoders(network, strategy)
    for i in range(network.k):
        if dec[i] is None or len(dec[i]) != decodable_rate(tm, i):
            return False
    rng = random.Random(seed)
    for _ in range(trials):
        msgs = [rng.getrandbits(m) if m else 0 for m in strategy.message_lengths]
        rx = simulate_block(network, strategy, msgs)
        for i, d in enumerate(network.destinations):
            y = rx[d]
            got = sum(parity(w & y) << j for j, w in enumerate(dec[i]))
            if got != msgs[i]:
                return False
    return True


# --------------------------------------------------------------------------
# schedules as coding strategies


def compile_schedule(schedule: Schedule, network: DetNetwork) -> LinearStrategy:
    """On/off forwarding strategy with block = schedule period that realises the schedule's rates."""
    q, T = network.q, schedule.period
    n = q * T
    bits = route_bits_per_period(schedule, network)
    # slots in which each (route, hop) is active
    active: Dict[Tuple[Any, int], List[int]] = {}
    for t, s in enumerate(schedule.slots):
        for i in s:
            v = schedule.vertices[i]
            hops = range(len(v.route.links)) if v.hop is None else [v.hop]
            for h in hops:
                active.setdefault((v.route, h), []).append(t)

    def positions(route, h: int, count: int) -> List[Tuple[int, int]]:
        """(slot, top-bit index) of the first ``count`` bits carried on hop h."""
        g = network.gain(*route.links[h])
        out = []
        for t in active.get((route, h), []):
            for j in range(g):
                if len(out) < count:
                    out.append((t, j))
        return out

    inj_rows = [[0] * n for _ in range(network.k)]
    msg_len = [0] * network.k
    enc_rows: Dict[NodeId, List[int]] = {v: [0] * n for v in relay_nodes(network)}
    for route in sorted(bits):
        R = bits[route]
        if R == 0:
            continue
        pair = route.pair
        base = msg_len[pair]
        msg_len[pair] += R
        for b, (t, j) in enumerate(positions(route, 0, R)):
            inj_rows[pair][t * q + j] |= 1 << (base + b)
        for h in range(1, len(route.links)):
            u = route.nodes[h]
            g_in = network.gain(*route.links[h - 1])
            incoming = positions(route, h - 1, R)
            outgoing = positions(route, h, R)
            for (ti, ji), (to, jo) in zip(incoming, outgoing):
                # bit ji of the sender lands at received index q - g_in + ji
                enc_rows[u][to * q + jo] |= 1 << (ti * q + q - g_in + ji)
    injections = tuple(
        GF2Matrix(tuple(r & ((1 << msg_len[i]) - 1) for r in inj_rows[i]), msg_len[i]) for i in range(network.k)
    )
    encoders = tuple((v, GF2Matrix(tuple(enc_rows[v]), n)) for v in relay_nodes(network))
    return LinearStrategy(T, q, injections, encoders)


# --------------------------------------------------------------------------
# search


@dataclass
class SearchResult:
    strategy: LinearStrategy
    report: RateReport
    exhaustive: bool
    evaluated: int


def _objective(rates: Sequence[int], objective: str) -> int:
    if objective == "sum":
        return sum(rates)
    if objective == "min-pair":
        return min(rates) if rates else 0
    raise ValueError(f"unknown objective {objective!r}")


class _Evaluator:
    """Fast repeated evaluation with all matrices held as plain row lists."""

    def __init__(self, network: DetNetwork, block: int, pairs: Optional[Sequence[int]] = None) -> None:
        self.network = network
        self.block = block
        self.n = network.q * block
        self.relays = relay_nodes(network)
        self.pairs = list(range(network.k)) if pairs is None else list(pairs)
        # encoder slots: active sources first, then relays
        self.slots: List[Tuple[str, Any]] = [("src", i) for i in self.pairs] + [("relay", v) for v in self.relays]

    def strategy(self, mats: Sequence[Tuple[int, ...]]) -> LinearStrategy:
        n = self.n
        inj = []
        pos = {i: k for k, i in enumerate(self.pairs)}
        for i in range(self.network.k):
            if i in pos:
                inj.append(GF2Matrix(tuple(mats[pos[i]]), n))
            else:
                inj.append(GF2Matrix.zeros(n, 0))
        off = len(self.pairs)
        enc = tuple((v, GF2Matrix(tuple(mats[off + k]), n)) for k, v in enumerate(self.relays))
        return LinearStrategy(self.block, self.network.q, tuple(inj), enc)

    def rates(self, mats: Sequence[Tuple[int, ...]]) -> List[int]:
        strat = self.strategy(mats)
        tm = end_to_end_transfer(self.network, strat)
        return [decodable_rate(tm, i) for i in range(self.network.k)]


def _random_matrix(rng: random.Random, n: int) -> Tuple[int, ...]:
    return tuple(rng.getrandbits(n) for _ in range(n))


def strategy_search(
    network: DetNetwork,
    T: int,
    objective: str = "sum",
    *,
    pairs: Optional[Sequence[int]] = None,
    family_cap: int = DEFAULT_FAMILY_CAP,
    budget: int = DEFAULT_BUDGET,
    target: Optional[int] = None,
    seeds: Iterable[LinearStrategy] = (),
    seed: int = 0,
    exhaustive_only: bool = False,
) -> SearchResult:
    """Best linear strategy with block length T over full qT x qT encoders.

    Sources outside ``pairs`` stay silent.  The family is enumerated
    exhaustively when it has at most ``family_cap`` members; otherwise a
    seeded local search (per-node coordinate moves with random restarts)
    runs for ``budget`` evaluations, stopping early once ``target``
    (objective value in bits per block) is reached.  ``exhaustive_only``
    turns the fallback into a CapExceeded refusal.
    """
    ev = _Evaluator(network, T, pairs)
    n = ev.n
    nslots = len(ev.slots)
    bits_per_node = n * n
    family = 2 ** (bits_per_node * nslots)
    evaluated = 0
    best_val = -1
    best_mats: Optional[List[Tuple[int, ...]]] = None

    def consider(mats: List[Tuple[int, ...]]) -> int:
        nonlocal best_val, best_mats, evaluated
        evaluated += 1
        val = _objective([r for i, r in enumerate(ev.rates(mats)) if i in ev.pairs], objective)
        if val > best_val:
            best_val, best_mats = val, list(mats)
        return val

    def done() -> bool:
        return target is not None and best_val >= target

    def finish(exhaustive: bool) -> SearchResult:
        strat = prune(network, ev.strategy(best_mats))
        return SearchResult(strat, strategy_rates(network, strat), exhaustive, evaluated)

    if family <= family_cap:
        for flat in range(family):
            mats = []
            for k in range(nslots):
                chunk = (flat >> (k * bits_per_node)) & ((1 << bits_per_node) - 1)
                mats.append(tuple((chunk >> (r * n)) & ((1 << n) - 1) for r in range(n)))
            consider(mats)
            if done():
                break
        return finish(True)
    if exhaustive_only:
        raise CapExceeded("coding strategy family", family, family_cap)

    rng = random.Random(seed)
    ident = tuple(1 << i for i in range(n))
    starts: List[List[Tuple[int, ...]]] = [[ident] * nslots]
    for s in seeds:
        if s.block == T and s.q == network.q:
            full = []
            for i in ev.pairs:
                m = s.injections[i]
                full.append(tuple(r for r in m.rows) if m.ncols == n else tuple(r & ((1 << n) - 1) for r in m.rows))
            enc = s.encoder_map()
            full.extend(tuple(enc[v].rows) for v in ev.relays)
            starts.append(full)
    for st in starts:
        consider(st)
    enumerate_node = bits_per_node <= 9
    while evaluated < budget and not done():
        cur = starts.pop(0) if starts else [_random_matrix(rng, n) for _ in range(nslots)]
        cur_val = consider(cur)
        improved = True
        while improved and evaluated < budget and not done():
            improved = False
            for k in range(nslots):
                if enumerate_node:
                    cands = []
                    for flat in range(1 << bits_per_node):
                        cands.append(tuple((flat >> (r * n)) & ((1 << n) - 1) for r in range(n)))
                else:
                    cands = []
                    for r in range(n):
                        for c in range(n):
                            m = list(cur[k])
                            m[r] ^= 1 << c
                            cands.append(tuple(m))
                    cands.extend(_random_matrix(rng, n) for _ in range(32))
                for m in cands:
                    trial = list(cur)
                    trial[k] = m
                    val = consider(trial)
                    if val > cur_val:
                        cur, cur_val, improved = trial, val, True
                    if done() or evaluated >= budget:
                        break
                if done() or evaluated >= budget:
                    break
    return finish(False)


def best_coding(
    network: DetNetwork,
    max_block: int = 2,
    *,
    budget: int = DEFAULT_BUDGET,
    target: Optional[Fraction] = None,
    include_schedules: bool = True,
    seed: int = 0,
    family_cap: int = DEFAULT_FAMILY_CAP,
) -> Tuple[LinearStrategy, RateReport]:
    """Best sum-rate over searched blocks 1..max_block and compiled full-information schedules."""
    cands: List[Tuple[LinearStrategy, RateReport]] = []
    if include_schedules:
        for fn in (mir_schedule, mil_schedule):
            try:
                sched, _ = fn(network)
            except CapExceeded:
                continue
            strat = compile_schedule(sched, network)
            cands.append((strat, strategy_rates(network, strat)))
    for T in range(1, max_block + 1):
        tgt = None if target is None else int(target * T) if (target * T).denominator == 1 else None
        res = strategy_search(network, T, "sum", family_cap=family_cap, budget=budget, target=tgt, seed=seed)
        cands.append((res.strategy, res.report))
        if target is not None and res.report.sum_rate >= target:
            break
    best = cands[0]
    for c in cands[1:]:
        if c[1].sum_rate > best[1].sum_rate:
            best = c
    return best[0], RateReport(best[1].per_pair_rate, "coding")


def single_pair_capacity_by_search(network: DetNetwork, pair: int, max_block: int = 2, budget: int = 20000, seed: int = 0) -> Fraction:
    """Best single-pair rate found by search (others silent), stopping at the min cut."""
    mc = unicast_min_cut(network, pair)
    best = Fraction(0)
    for T in range(1, max_block + 1):
        res = strategy_search(network, T, "sum", pairs=[pair], budget=budget, target=mc * T, seed=seed)
        best = max(best, res.report.per_pair_rate[pair])
        if best >= mc:
            break
    return best
