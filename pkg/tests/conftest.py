from __future__ import annotations

import json
from pathlib import Path
from typing import Dict, List, Sequence

import pytest

from detnet.detmodel import DetNetwork, build_network

FIXTURES = Path(__file__).parent / "fixtures"


def layered(layers: Sequence[Sequence[str]], links: Dict[tuple, int], pairs: Sequence[tuple]) -> DetNetwork:
    return build_network(
        {
            "layers": len(layers) - 1,
            "nodes": [{"id": n, "layer": l} for l, ids in enumerate(layers) for n in ids],
            "links": [{"from": u, "to": v, "gain": g} for (u, v), g in links.items()],
            "pairs": [{"source": s, "destination": d} for s, d in pairs],
        }
    )


def path(gains: Sequence[int]) -> DetNetwork:
    names = ["s"] + [f"v{i}" for i in range(1, len(gains))] + ["d"]
    return layered([[n] for n in names], {(names[i], names[i + 1]): g for i, g in enumerate(gains)}, [("s", "d")])


def load_fixture(name: str) -> dict:
    return json.loads((FIXTURES / name).read_text())


@pytest.fixture
def full222() -> DetNetwork:
    from detnet.generators import gen_k2k

    return gen_k2k(2, {"sources_to_relays": [[1, 1], [1, 1]], "relays_to_destinations": [[1, 1], [1, 1]]})


def random_net(seed: int, index: int, layers: int, width: int, density: float = 0.7, max_gain: int = 3) -> DetNetwork:
    """gen_random_layered, skipping draws with no links."""
    from detnet.detmodel import NetworkError
    from detnet.generators import gen_random_layered

    while True:
        try:
            return gen_random_layered(seed, layers, width, density, max_gain, index=index)
        except NetworkError:
            index += 1_000_003


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS, _line
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for num in sorted(RESULTS):
            terminalreporter.write_line(_line(num, *RESULTS[num]))
