"""Layered linear deterministic networks over GF(2).

Each node transmits a q-bit vector.  A link of gain n delivers the top n
bits of the transmitted vector into the bottom n positions at the receiver,
and a receiver sees the xor of everything arriving on its incoming links.
Bit j of a signal int is entry j+1 of the vector (bit 0 is the top).
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Any, Dict, FrozenSet, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

from .gf2 import GF2Matrix, rank_of_rows

NodeId = str
Link = Tuple[NodeId, NodeId]

MAX_CUT_NODES = 20


class NetworkError(ValueError):
    """Raised for malformed network descriptions."""


@dataclass(frozen=True)
class Skeleton:
    """Topology without gains: the part of the network every node knows."""

    layers: int
    nodes: Tuple[Tuple[NodeId, int], ...]
    links: Tuple[Link, ...]
    pairs: Tuple[Tuple[NodeId, NodeId], ...]

    @property
    def k(self) -> int:
        return len(self.pairs)

    @property
    def sources(self) -> Tuple[NodeId, ...]:
        return tuple(s for s, _ in self.pairs)

    @property
    def destinations(self) -> Tuple[NodeId, ...]:
        return tuple(d for _, d in self.pairs)

    def layer_of(self, node: NodeId) -> int:
        return self._layer_map()[node]

    def _layer_map(self) -> Dict[NodeId, int]:
        cache = self.__dict__.get("_lm")
        if cache is None:
            cache = dict(self.nodes)
            object.__setattr__(self, "_lm", cache)
        return cache

    def successors(self, node: NodeId) -> Tuple[NodeId, ...]:
        cache = self.__dict__.get("_succ")
        if cache is None:
            cache = {n: [] for n, _ in self.nodes}
            for u, v in self.links:
                cache[u].append(v)
            cache = {n: tuple(vs) for n, vs in cache.items()}
            object.__setattr__(self, "_succ", cache)
        return cache[node]

    def predecessors(self, node: NodeId) -> Tuple[NodeId, ...]:
        cache = self.__dict__.get("_pred")
        if cache is None:
            cache = {n: [] for n, _ in self.nodes}
            for u, v in self.links:
                cache[v].append(u)
            cache = {n: tuple(us) for n, us in cache.items()}
            object.__setattr__(self, "_pred", cache)
        return cache[node]

    def link_set(self) -> FrozenSet[Link]:
        cache = self.__dict__.get("_ls")
        if cache is None:
            cache = frozenset(self.links)
            object.__setattr__(self, "_ls", cache)
        return cache

    def has_link(self, u: NodeId, v: NodeId) -> bool:
        return (u, v) in self.link_set()

    def node_ids(self) -> Tuple[NodeId, ...]:
        return tuple(n for n, _ in self.nodes)


@dataclass(frozen=True)
class DetNetwork:
    skeleton: Skeleton
    gains: Tuple[Tuple[Link, int], ...]
    q: int

    @property
    def layers(self) -> int:
        return self.skeleton.layers

    @property
    def nodes(self) -> Tuple[Tuple[NodeId, int], ...]:
        return self.skeleton.nodes

    @property
    def links(self) -> Tuple[Link, ...]:
        return self.skeleton.links

    @property
    def pairs(self) -> Tuple[Tuple[NodeId, NodeId], ...]:
        return self.skeleton.pairs

    @property
    def k(self) -> int:
        return self.skeleton.k

    @property
    def sources(self) -> Tuple[NodeId, ...]:
        return self.skeleton.sources

    @property
    def destinations(self) -> Tuple[NodeId, ...]:
        return self.skeleton.destinations

    def gain_map(self) -> Dict[Link, int]:
        cache = self.__dict__.get("_gm")
        if cache is None:
            cache = dict(self.gains)
            object.__setattr__(self, "_gm", cache)
        return cache

    def gain(self, u: NodeId, v: NodeId) -> int:
        return self.gain_map().get((u, v), 0)

    def with_gains(self, gains: Mapping[Link, int]) -> "DetNetwork":
        """Same skeleton, new gains (every skeleton link must get a positive gain)."""
        return build_network(
            {
                "layers": self.layers,
                "nodes": [{"id": n, "layer": l} for n, l in self.nodes],
                "links": [{"from": u, "to": v, "gain": gains[(u, v)]} for u, v in self.links],
                "pairs": [{"source": s, "destination": d} for s, d in self.pairs],
            }
        )

    def to_dict(self) -> Dict[str, Any]:
        gm = self.gain_map()
        return {
            "layers": self.layers,
            "nodes": [{"id": n, "layer": l} for n, l in self.nodes],
            "links": [{"from": u, "to": v, "gain": gm[(u, v)]} for u, v in self.links],
            "pairs": [{"source": s, "destination": d} for s, d in self.pairs],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


_TOP_FIELDS = {"layers", "nodes", "links", "pairs"}


def _check_fields(obj: Mapping[str, Any], allowed: set, what: str) -> None:
    if not isinstance(obj, Mapping):
        raise NetworkError(f"{what} must be an object")
    extra = set(obj) - allowed
    if extra:
        raise NetworkError(f"unknown field(s) in {what}: {sorted(extra)}")
    missing = allowed - set(obj)
    if missing:
        raise NetworkError(f"missing field(s) in {what}: {sorted(missing)}")


def _node_sort_key(item: Tuple[NodeId, int]) -> Tuple[int, str]:
    return (item[1], item[0])


def build_network(spec: Mapping[str, Any]) -> DetNetwork:
    """Validate a network description (the JSON file schema) and build a DetNetwork."""
    _check_fields(spec, _TOP_FIELDS, "network")
    layers = spec["layers"]
    if not isinstance(layers, int) or isinstance(layers, bool) or layers < 1:
        raise NetworkError("layers must be a positive integer")

    layer_of: Dict[NodeId, int] = {}
    for nd in spec["nodes"]:
        _check_fields(nd, {"id", "layer"}, "node")
        nid, lay = nd["id"], nd["layer"]
        if not isinstance(nid, str):
            raise NetworkError("node id must be a string")
        if not isinstance(lay, int) or isinstance(lay, bool) or not 0 <= lay <= layers:
            raise NetworkError(f"node {nid!r} has layer outside [0, {layers}]")
        if nid in layer_of:
            raise NetworkError(f"duplicate node {nid!r}")
        layer_of[nid] = lay

    gains: Dict[Link, int] = {}
    seen: set = set()
    for lk in spec["links"]:
        _check_fields(lk, {"from", "to", "gain"}, "link")
        u, v, g = lk["from"], lk["to"], lk["gain"]
        if u not in layer_of or v not in layer_of:
            raise NetworkError(f"link {u!r}->{v!r} references an unknown node")
        if not isinstance(g, int) or isinstance(g, bool) or g < 0:
            raise NetworkError(f"link {u!r}->{v!r} gain must be a nonnegative integer")
        if layer_of[v] != layer_of[u] + 1:
            raise NetworkError(f"non-layered link {u!r}->{v!r}")
        if (u, v) in seen:
            raise NetworkError(f"duplicate link {u!r}->{v!r}")
        seen.add((u, v))
        if g > 0:
            gains[(u, v)] = g

    pairs: List[Tuple[NodeId, NodeId]] = []
    for p in spec["pairs"]:
        _check_fields(p, {"source", "destination"}, "pair")
        s, d = p["source"], p["destination"]
        if s not in layer_of or d not in layer_of:
            raise NetworkError(f"pair ({s!r}, {d!r}) references an unknown node")
        if layer_of[s] != 0:
            raise NetworkError(f"source {s!r} is not in layer 0")
        if layer_of[d] != layers:
            raise NetworkError(f"destination {d!r} is not in layer {layers}")
        pairs.append((s, d))
    if not pairs:
        raise NetworkError("source/destination count mismatch: no unicast pairs")
    srcs = [s for s, _ in pairs]
    dsts = [d for _, d in pairs]
    if len(set(srcs)) != len(srcs) or len(set(dsts)) != len(dsts):
        raise NetworkError("source/destination count mismatch: repeated source or destination")

    if not gains:
        raise NetworkError("q = 0: network has no links with positive gain")
    q = max(gains.values())

    nodes = tuple(sorted(layer_of.items(), key=_node_sort_key))
    order = {n: i for i, (n, _) in enumerate(nodes)}
    links = tuple(sorted(gains, key=lambda l: (order[l[0]], order[l[1]])))
    skel = Skeleton(layers=layers, nodes=nodes, links=links, pairs=tuple(pairs))
    return DetNetwork(skeleton=skel, gains=tuple((l, gains[l]) for l in links), q=q)


def load_network(text: str) -> DetNetwork:
    return build_network(json.loads(text))


def shift_matrix(q: int, n: int) -> GF2Matrix:
    """q x q down-shift by q - n: the top n input bits land in the bottom n outputs."""
    if q < 1:
        raise ValueError("q must be positive")
    if not 0 <= n <= q:
        raise ValueError(f"gain {n} out of range [0, {q}]")
    off = q - n
    return GF2Matrix(tuple((1 << (i - off)) if i >= off else 0 for i in range(q)), q)


def shift_vector(q: int, n: int, x: int) -> int:
    """Apply shift_matrix(q, n) to a q-bit int vector."""
    return (x << (q - n)) & ((1 << q) - 1)


def propagate(network: DetNetwork, transmit: Mapping[NodeId, int]) -> Dict[NodeId, int]:
    """One channel use: received vector at every node. Missing transmitters are silent."""
    q = network.q
    received = {n: 0 for n, _ in network.nodes}
    for (u, v), g in network.gains:
        x = transmit.get(u, 0)
        if x:
            received[v] ^= shift_vector(q, g, x)
    return received


@dataclass(frozen=True)
class Cut:
    """Near side of a node two-coloring; everything else is on the far side."""

    near: FrozenSet[NodeId]

    def separates(self, source: NodeId, destination: NodeId) -> bool:
        return source in self.near and destination not in self.near


def transfer_rows(network: DetNetwork, near: Iterable[NodeId], far: Iterable[NodeId]) -> List[int]:
    """Rows of the cross-cut transfer matrix (near transmitters -> far receivers)."""
    q = network.q
    near = list(near)
    near_idx = {n: i for i, n in enumerate(near)}
    rows: List[int] = []
    for v in far:
        block = [0] * q
        any_link = False
        for u in network.skeleton.predecessors(v):
            if u in near_idx:
                g = network.gain(u, v)
                off = q - g
                base = near_idx[u] * q
                for i in range(off, q):
                    block[i] |= 1 << (base + i - off)
                any_link = True
        if any_link:
            rows.extend(block)
    return rows


def cut_rank(network: DetNetwork, cut: Cut, active_sources: Iterable[int] = ()) -> int:
    """GF(2) rank of the transfer matrix across the cut."""
    for i in active_sources:
        s, d = network.pairs[i]
        if not cut.separates(s, d):
            raise NetworkError(f"cut does not separate active pair {i}")
    ids = network.skeleton.node_ids()
    near = [n for n in ids if n in cut.near]
    far = [n for n in ids if n not in cut.near]
    return rank_of_rows(transfer_rows(network, near, far))


def route_nodes(skel: Skeleton, source: NodeId, destination: NodeId) -> List[NodeId]:
    """Nodes lying on at least one directed path from source to destination."""
    fwd = {source}
    for n, _ in sorted(skel.nodes, key=_node_sort_key):
        if n in fwd:
            fwd.update(skel.successors(n))
    bwd = {destination}
    for n, _ in sorted(skel.nodes, key=_node_sort_key, reverse=True):
        if n in bwd:
            bwd.update(skel.predecessors(n))
    both = fwd & bwd
    return [n for n in skel.node_ids() if n in both]


def iter_cuts(free: Sequence[NodeId], fixed_near: Iterable[NodeId] = ()) -> Iterator[Cut]:
    """All 2-colorings of ``free`` with ``fixed_near`` always on the near side."""
    base = frozenset(fixed_near)
    for mask in range(1 << len(free)):
        yield Cut(base | frozenset(n for i, n in enumerate(free) if (mask >> i) & 1))


def unicast_min_cut(network: DetNetwork, pair: int) -> int:
    """Min over cuts separating the pair; other sources silent.

    Cuts are enumerated over the subnetwork of nodes on some route of the
    pair, which has the same capacity as the whole network.
    """
    s, d = network.pairs[pair]
    relevant = route_nodes(network.skeleton, s, d)
    if not relevant:
        return 0
    free = [n for n in relevant if n not in (s, d)]
    if len(free) > MAX_CUT_NODES:
        raise NetworkError(f"{len(free)} free nodes exceeds the cut enumeration cap of {MAX_CUT_NODES}")
    best: Optional[int] = None
    for cut in iter_cuts(free, fixed_near=[s]):
        near = [n for n in relevant if n in cut.near]
        far = [n for n in relevant if n not in cut.near]
        r = rank_of_rows(transfer_rows(network, near, far))
        if best is None or r < best:
            best = r
            if best == 0:
                break
    return best or 0
