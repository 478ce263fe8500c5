"""Routes, route-based local views, and the networks consistent with a view."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Any, Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

from .detmodel import DetNetwork, Link, NodeId, Skeleton, build_network

DEFAULT_CLASS_CAP = 4096


class CapExceeded(RuntimeError):
    """An exhaustive search or enumeration would exceed its configured cap."""

    def __init__(self, what: str, required: int, cap: int) -> None:
        super().__init__(f"{what}: requires {required}, cap is {cap}")
        self.what = what
        self.required = required
        self.cap = cap


@dataclass(frozen=True, order=True)
class Route:
    """Path from the source of pair ``src`` to the destination of pair ``dst``."""

    src: int
    dst: int
    nodes: Tuple[NodeId, ...]

    @property
    def pair(self) -> int:
        if self.src != self.dst:
            raise ValueError("cross route has no unicast pair")
        return self.src

    @property
    def links(self) -> Tuple[Link, ...]:
        return tuple(zip(self.nodes[:-1], self.nodes[1:]))

    def label(self) -> str:
        return f"{self.src}>{self.dst}:" + "-".join(self.nodes)


def _paths(skel: Skeleton, start: NodeId, end: NodeId) -> List[Tuple[NodeId, ...]]:
    order = {n: i for i, n in enumerate(skel.node_ids())}
    out: List[Tuple[NodeId, ...]] = []

    def walk(path: List[NodeId]) -> None:
        here = path[-1]
        if here == end:
            out.append(tuple(path))
            return
        for nxt in sorted(skel.successors(here), key=order.__getitem__):
            path.append(nxt)
            walk(path)
            path.pop()

    walk([start])
    return out


def _skel(obj: Any) -> Skeleton:
    return obj.skeleton if isinstance(obj, (DetNetwork, LocalView)) else obj


def enumerate_routes(network: Any, source: int, destination: int) -> List[Route]:
    """All layered paths from source ``source`` to destination ``destination``."""
    skel = _skel(network)
    s = skel.pairs[source][0]
    d = skel.pairs[destination][1]
    return [Route(source, destination, p) for p in _paths(skel, s, d)]


def pair_routes(network: Any) -> List[Route]:
    """Every route of every unicast pair (source i to destination i)."""
    skel = _skel(network)
    return [r for i in range(skel.k) for r in enumerate_routes(skel, i, i)]


@dataclass(frozen=True)
class LocalView:
    owner: NodeId
    skeleton: Skeleton
    known_gains: Tuple[Tuple[Link, int], ...]
    known_routes: Tuple[Route, ...]

    def gain_map(self) -> Dict[Link, int]:
        return dict(self.known_gains)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "owner": self.owner,
            "known_gains": [{"from": u, "to": v, "gain": g} for (u, v), g in self.known_gains],
            "route_count": len(self.known_routes),
        }


def _make_view(owner: NodeId, network: DetNetwork, routes: Iterable[Route]) -> LocalView:
    routes = tuple(sorted(set(routes)))
    links = {l for r in routes for l in r.links}
    gains = tuple((l, g) for l, g in network.gains if l in links)
    return LocalView(owner=owner, skeleton=network.skeleton, known_gains=gains, known_routes=routes)


def _source_routes(network: DetNetwork, source: int) -> List[Route]:
    return [r for d in range(network.k) for r in enumerate_routes(network, source, d)]


def source_view(network: DetNetwork, source: int) -> LocalView:
    """A source knows every route from itself to every destination."""
    return _make_view(network.sources[source], network, _source_routes(network, source))


def node_view(network: DetNetwork, node: NodeId) -> LocalView:
    """Union of the views of all sources having a route through ``node``."""
    if node in network.sources:
        return source_view(network, network.sources.index(node))
    routes: List[Route] = []
    for i in range(network.k):
        mine = _source_routes(network, i)
        if any(node in r.nodes for r in mine):
            routes.extend(mine)
    return _make_view(node, network, routes)


def all_views(network: DetNetwork) -> Dict[NodeId, LocalView]:
    return {n: node_view(network, n) for n in network.skeleton.node_ids()}


def default_gain_domain(q: int) -> Tuple[int, ...]:
    return tuple(range(1, q + 1))


@dataclass(frozen=True)
class ConsistencyClass:
    """Networks sharing a skeleton and a set of known gains."""

    skeleton: Skeleton
    known_gains: Tuple[Tuple[Link, int], ...]
    gain_domain: Tuple[int, ...]
    owner: Optional[NodeId] = None
    cap: int = DEFAULT_CLASS_CAP

    @classmethod
    def from_view(cls, view: LocalView, gain_domain: Sequence[int], cap: int = DEFAULT_CLASS_CAP) -> "ConsistencyClass":
        return cls(view.skeleton, view.known_gains, tuple(gain_domain), view.owner, cap)

    @classmethod
    def from_views(cls, views: Sequence[LocalView], gain_domain: Sequence[int], cap: int = DEFAULT_CLASS_CAP) -> "ConsistencyClass":
        """Networks consistent with all the given views at once."""
        if not views:
            raise ValueError("no views")
        skel = views[0].skeleton
        known: Dict[Link, int] = {}
        for v in views:
            if v.skeleton != skel:
                raise ValueError("views disagree on the skeleton")
            for l, g in v.known_gains:
                if known.setdefault(l, g) != g:
                    raise ValueError(f"views disagree on the gain of {l}")
        order = {l: i for i, l in enumerate(skel.links)}
        return cls(skel, tuple(sorted(known.items(), key=lambda kv: order[kv[0]])), tuple(gain_domain), None, cap)

    def unknown_links(self) -> Tuple[Link, ...]:
        known = dict(self.known_gains)
        return tuple(l for l in self.skeleton.links if l not in known)

    def size(self) -> int:
        return len(self.gain_domain) ** len(self.unknown_links())

    def restrict(self, known_links: Iterable[Link]) -> "ConsistencyClass":
        """Sub-knowledge: keep only the listed known links (a larger class)."""
        keep = set(known_links)
        return ConsistencyClass(
            self.skeleton,
            tuple((l, g) for l, g in self.known_gains if l in keep),
            self.gain_domain,
            self.owner,
            self.cap,
        )


def consistent_networks(cls: ConsistencyClass) -> Iterator[DetNetwork]:
    """Every network matching the class, in a fixed order (last unknown link varies fastest)."""
    if not cls.gain_domain:
        raise ValueError("gain_domain is empty")
    if any(g < 1 for g in cls.gain_domain):
        raise ValueError("gain_domain must be positive; the skeleton fixes connectivity")
    unknown = cls.unknown_links()
    required = cls.size()
    if required > cls.cap:
        raise CapExceeded("consistency class enumeration", required, cls.cap)
    known = dict(cls.known_gains)
    skel = cls.skeleton
    domain = sorted(set(cls.gain_domain))
    for combo in itertools.product(domain, repeat=len(unknown)):
        gains = dict(known)
        gains.update(zip(unknown, combo))
        yield build_network(
            {
                "layers": skel.layers,
                "nodes": [{"id": n, "layer": l} for n, l in skel.nodes],
                "links": [{"from": u, "to": v, "gain": gains[(u, v)]} for u, v in skel.links],
                "pairs": [{"source": s, "destination": d} for s, d in skel.pairs],
            }
        )
