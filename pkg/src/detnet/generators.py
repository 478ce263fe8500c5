"""Topology generators.

Random topologies draw from numpy's Philox counter-based generator keyed by
(seed, instance index), so a seed gives the same networks on every platform
and independently of how instances are split across workers.
"""

from __future__ import annotations

import itertools
from typing import Any, Dict, List, Mapping, Sequence

import numpy as np

from .detmodel import DetNetwork, NetworkError, build_network


def philox(seed: int, index: int = 0) -> np.random.Generator:
    if seed < 0 or index < 0:
        raise ValueError("seed and index must be nonnegative")
    return np.random.Generator(np.random.Philox(key=(seed << 64) | index))


def _matrix(obj: Any, rows: int, cols: int, what: str) -> List[List[int]]:
    try:
        m = [[int(x) for x in row] for row in obj]
    except (TypeError, ValueError):
        raise NetworkError(f"malformed gain spec: {what} must be a {rows}x{cols} integer matrix") from None
    if len(m) != rows or any(len(r) != cols for r in m):
        raise NetworkError(f"malformed gain spec: {what} must be {rows}x{cols}")
    if any(x < 0 for r in m for x in r):
        raise NetworkError(f"malformed gain spec: {what} has negative gains")
    return m


def _spec(layers: Sequence[Sequence[str]], links: List[Dict[str, Any]], k: int) -> Dict[str, Any]:
    return {
        "layers": len(layers) - 1,
        "nodes": [{"id": n, "layer": l} for l, ids in enumerate(layers) for n in ids],
        "links": links,
        "pairs": [{"source": layers[0][i], "destination": layers[-1][i]} for i in range(k)],
    }


def gen_k2k(k: int, gains: Mapping[str, Any]) -> DetNetwork:
    """k sources, 2 relays, k destinations.

    ``gains`` holds ``sources_to_relays`` (k x 2) and ``relays_to_destinations``
    (2 x k); zero entries leave the link out.
    """
    if k < 1:
        raise NetworkError("k must be at least 1")
    if not isinstance(gains, Mapping) or set(gains) != {"sources_to_relays", "relays_to_destinations"}:
        raise NetworkError("malformed gain spec: need sources_to_relays and relays_to_destinations")
    up = _matrix(gains["sources_to_relays"], k, 2, "sources_to_relays")
    down = _matrix(gains["relays_to_destinations"], 2, k, "relays_to_destinations")
    srcs = [f"s{i + 1}" for i in range(k)]
    relays = ["r1", "r2"]
    dsts = [f"d{i + 1}" for i in range(k)]
    links = [{"from": srcs[i], "to": relays[j], "gain": up[i][j]} for i in range(k) for j in range(2)]
    links += [{"from": relays[j], "to": dsts[i], "gain": down[j][i]} for j in range(2) for i in range(k)]
    return build_network(_spec([srcs, relays, dsts], links, k))


def gen_interference(k: int, gain_matrix: Sequence[Sequence[int]]) -> DetNetwork:
    """Single-layer k-user network: link s_i -> d_j with gain entry (i, j)."""
    m = _matrix(gain_matrix, k, k, "gain_matrix")
    srcs = [f"s{i + 1}" for i in range(k)]
    dsts = [f"d{i + 1}" for i in range(k)]
    links = [{"from": srcs[i], "to": dsts[j], "gain": m[i][j]} for i in range(k) for j in range(k)]
    return build_network(_spec([srcs, dsts], links, k))


def gen_random_layered(seed: int, layers: int, width: int, density: float, max_gain: int, index: int = 0) -> DetNetwork:
    """``width`` nodes in every layer; sources/destinations are the first and last layer."""
    if layers < 1 or width < 1 or max_gain < 1:
        raise ValueError("layers, width and max_gain must be positive")
    if not 0.0 <= density <= 1.0:
        raise ValueError("density must be in [0, 1]")
    rng = philox(seed, index)
    names = [[f"s{i + 1}" for i in range(width)]]
    names += [[f"v{l}_{i + 1}" for i in range(width)] for l in range(1, layers)]
    names += [[f"d{i + 1}" for i in range(width)]]
    links = []
    for l in range(layers):
        for u in names[l]:
            for v in names[l + 1]:
                present = rng.random() < density
                g = int(rng.integers(1, max_gain + 1))
                if present:
                    links.append({"from": u, "to": v, "gain": g})
    return build_network(_spec(names, links, width))


def gen_single_pair(seed: int, index: int, max_layers: int = 3, max_width: int = 3, max_gain: int = 3, density: float = 0.7) -> DetNetwork:
    """Random single-pair layered network (one source, one destination)."""
    rng = philox(seed, index)
    L = int(rng.integers(1, max_layers + 1))
    names = [["s"]] + [[f"v{l}_{i + 1}" for i in range(int(rng.integers(1, max_width + 1)))] for l in range(1, L)] + [["d"]]
    links = []
    for l in range(L):
        for u in names[l]:
            for v in names[l + 1]:
                present = rng.random() < density
                g = int(rng.integers(0, max_gain + 1))
                if present:
                    links.append({"from": u, "to": v, "gain": g})
    if not any(x["gain"] for x in links):
        first = (names[0][0], names[1][0])
        links = [x for x in links if (x["from"], x["to"]) != first]
        links.append({"from": first[0], "to": first[1], "gain": 1})
    return build_network(_spec(names, links, 1))


def k2k_instances(k: int, max_gain: int) -> List[DetNetwork]:
    """Every k x 2 x k network with gains in [0, max_gain] (non-empty ones), in a fixed order."""
    out = []
    cells = 4 * k
    for combo in itertools.product(range(max_gain + 1), repeat=cells):
        up = [list(combo[2 * i : 2 * i + 2]) for i in range(k)]
        down = [list(combo[2 * k + j * k : 2 * k + (j + 1) * k]) for j in range(2)]
        try:
            out.append(gen_k2k(k, {"sources_to_relays": up, "relays_to_destinations": down}))
        except NetworkError:
            continue
    return out


def gen_random_k2k(seed: int, index: int, k: int, max_gain: int) -> DetNetwork:
    """Random k x 2 x k network with gains uniform in [0, max_gain]; redrawn until non-empty."""
    rng = philox(seed, index)
    while True:
        up = rng.integers(0, max_gain + 1, size=(k, 2)).tolist()
        down = rng.integers(0, max_gain + 1, size=(2, k)).tolist()
        try:
            return gen_k2k(k, {"sources_to_relays": up, "relays_to_destinations": down})
        except NetworkError:
            continue


GENERATORS = {
    "random_k2k": lambda p, seed, i: gen_random_k2k(seed, i, p["k"], p["max_gain"]),
    "k2k": lambda p, seed, i: gen_k2k(p["k"], p["gains"]),
    "interference": lambda p, seed, i: gen_interference(p["k"], p["gain_matrix"]),
    "random_layered": lambda p, seed, i: gen_random_layered(seed, p["layers"], p["width"], p["density"], p["max_gain"], i),
    "single_pair": lambda p, seed, i: gen_single_pair(seed, i, p.get("max_layers", 3), p.get("max_width", 3), p.get("max_gain", 3)),
}
