"""Instance files, the worked-example fixture, and random network generators.

Instance file layout (JSON)::

    {
      "seller": "s",
      "seller_neighbors": ["a", "b"],
      "buyers": [
        {"id": "a", "valuation": "1", "neighbors": ["s"]},
        {"id": "b", "valuation": "7/3", "neighbors": ["s"]}
      ]
    }

Valuations are integer or ``p/q`` strings so they load as exact rationals.
Node ids may be strings or integers. A top-level ``"comment"`` key is
ignored.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any

import networkx as nx

from .graph import Network, Node, ProfileError


class InstanceError(ValueError):
    """Malformed instance file; the message carries the offending position."""


FIXTURE_COMMENT = (
    "Fourteen-buyer example network. Only part of its shape is pinned down by "
    "text (cut sets, descendant sets, prices); edges and valuations that no "
    "stated fact constrains were chosen freely and may differ from the "
    "original drawing."
)

FIXTURE_EDGES = [
    ("s", "a"), ("s", "b"), ("s", "c"), ("s", "d"),
    ("d", "i"),
    ("b", "e"), ("b", "f"), ("b", "g"), ("b", "h"),
    ("f", "j"), ("g", "j"), ("j", "l"),
    ("h", "k"), ("k", "l"),
    ("l", "m"), ("m", "n"),
]  # fmt: skip

FIXTURE_VALUATIONS = {
    "a": 1, "b": 2, "c": 3, "d": 4, "e": 8, "f": 4, "g": 6,
    "h": 11, "i": 7, "j": 5, "k": 10, "l": 13, "m": 14, "n": 1,
}  # fmt: skip


def fixture_network() -> Network:
    return Network.from_edges("s", FIXTURE_VALUATIONS, FIXTURE_EDGES)


# -- file I/O ----------------------------------------------------------------


def parse_rational(text: Any, where: str) -> Fraction:
    if isinstance(text, bool) or not isinstance(text, (int, str)):
        raise InstanceError(f"{where}: valuation must be an integer or 'p/q' string")
    try:
        value = Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise InstanceError(f"{where}: bad rational {text!r} ({exc})") from None
    if value < 0:
        raise InstanceError(f"{where}: valuation {text!r} is negative")
    return value


def format_rational(value: Fraction) -> str:
    return str(value.numerator) if value.denominator == 1 else str(value)


def network_from_dict(data: Any) -> Network:
    if not isinstance(data, dict):
        raise InstanceError("top level: expected an object")
    for key in ("seller", "seller_neighbors", "buyers"):
        if key not in data:
            raise InstanceError(f"top level: missing key {key!r}")
    seller = data["seller"]
    buyers = data["buyers"]
    if not isinstance(buyers, list):
        raise InstanceError("buyers: expected a list")

    valuation: dict[Node, Fraction] = {}
    declared: dict[Node, list] = {seller: list(data["seller_neighbors"])}
    for idx, rec in enumerate(buyers):
        where = f"buyers[{idx}]"
        if not isinstance(rec, dict) or "id" not in rec:
            raise InstanceError(f"{where}: expected an object with an 'id'")
        bid = rec["id"]
        if bid == seller:
            raise InstanceError(f"{where}: id {bid!r} collides with the seller")
        if bid in valuation:
            raise InstanceError(f"{where}: duplicate id {bid!r}")
        valuation[bid] = parse_rational(rec.get("valuation"), f"{where}.valuation")
        declared[bid] = list(rec.get("neighbors", []))

    for idx, node in enumerate([seller, *valuation]):
        where = "seller_neighbors" if idx == 0 else f"buyers[{idx - 1}].neighbors"
        for other in declared[node]:
            if other not in declared:
                raise InstanceError(f"{where}: unknown node {other!r}")
            if other == node:
                raise InstanceError(f"{where}: self-loop at {node!r}")
            if node not in declared[other]:
                raise InstanceError(
                    f"{where}: asymmetric edge {node!r} -> {other!r}"
                    f" ({other!r} does not list {node!r})"
                )
    try:
        return Network(
            seller, valuation, {n: frozenset(v) for n, v in declared.items()}
        )
    except ProfileError as exc:
        raise InstanceError(str(exc)) from None


def network_to_dict(network: Network, comment: str | None = None) -> dict:
    def order(nodes):
        return sorted(nodes, key=lambda n: (type(n).__name__, n))

    out: dict[str, Any] = {}
    if comment:
        out["comment"] = comment
    out["seller"] = network.seller
    out["seller_neighbors"] = order(network.neighbors_of(network.seller))
    out["buyers"] = [
        {
            "id": b,
            "valuation": format_rational(network.valuation[b]),
            "neighbors": order(network.neighbors_of(b)),
        }
        for b in order(network.valuation)
    ]
    return out


def load_instance(path: str | Path) -> Network:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return network_from_dict(data)


def save_instance(network: Network, path: str | Path, comment: str | None = None) -> None:
    Path(path).write_text(json.dumps(network_to_dict(network, comment), indent=2) + "\n")


# -- generators ----------------------------------------------------------------


@dataclass(frozen=True)
class GeneratorSpec:
    kind: str
    n: int
    p: float = 0.3
    k: int = 4
    beta: float = 0.2

    def __post_init__(self) -> None:
        if self.kind not in GENERATORS:
            raise ValueError(f"unknown generator {self.kind!r}; pick one of {sorted(GENERATORS)}")
        if self.n < 1:
            raise ValueError("generator needs n >= 1")
        if not 0 <= self.p <= 1 or not 0 <= self.beta <= 1:
            raise ValueError("probability parameters must lie in [0, 1]")
        if self.kind == "watts_strogatz" and not 2 <= self.k <= self.n:
            raise ValueError("watts_strogatz needs 2 <= k <= n")


@dataclass(frozen=True)
class ValuationSpec:
    kind: str = "uniform_int"
    lo: int = 0
    hi: int = 20
    scale: float = 5.0

    def __post_init__(self) -> None:
        if self.kind not in ("uniform_int", "exponential"):
            raise ValueError(f"unknown valuation distribution {self.kind!r}")
        if self.kind == "uniform_int" and not 0 <= self.lo <= self.hi:
            raise ValueError("uniform_int needs 0 <= lo <= hi")
        if self.kind == "exponential" and self.scale <= 0:
            raise ValueError("exponential needs scale > 0")

    def draw(self, rng: random.Random) -> Fraction:
        if self.kind == "uniform_int":
            return Fraction(rng.randint(self.lo, self.hi))
        return Fraction(int(rng.expovariate(1 / self.scale)))


def _erdos_renyi(spec: GeneratorSpec, seed: int) -> nx.Graph:
    return nx.gnp_random_graph(spec.n + 1, spec.p, seed=seed)


def _watts_strogatz(spec: GeneratorSpec, seed: int) -> nx.Graph:
    return nx.watts_strogatz_graph(spec.n + 1, spec.k, spec.beta, seed=seed)


def _random_tree(spec: GeneratorSpec, seed: int) -> nx.Graph:
    rng = random.Random(seed)
    graph = nx.Graph()
    graph.add_node(0)
    for node in range(1, spec.n + 1):
        graph.add_edge(node, rng.randrange(node))
    return graph


def _star(spec: GeneratorSpec, seed: int) -> nx.Graph:
    return nx.star_graph(spec.n)


GENERATORS = {
    "erdos_renyi": _erdos_renyi,
    "watts_strogatz": _watts_strogatz,
    "random_tree": _random_tree,
    "star": _star,
}


def generate_network(spec: GeneratorSpec, valuations: ValuationSpec, seed: int) -> Network:
    """Node 0 is the seller, buyers are ``1..n``."""
    graph = GENERATORS[spec.kind](spec, seed)
    rng = random.Random(seed ^ 0x5EED)
    values = {b: valuations.draw(rng) for b in range(1, spec.n + 1)}
    return Network.from_edges(0, values, graph.edges())


def random_small_network(seed: int, max_buyers: int = 10) -> Network:
    """Mixed-density random instance used by the property sweeps."""
    rng = random.Random(seed)
    n = rng.randint(1, max_buyers)
    kind = rng.choice(["erdos_renyi", "erdos_renyi", "watts_strogatz", "random_tree"])
    if kind == "watts_strogatz" and n < 3:
        kind = "erdos_renyi"
    spec = GeneratorSpec(
        kind,
        n,
        p=rng.choice([0.15, 0.3, 0.5, 0.8]),
        k=2 if kind != "watts_strogatz" else rng.choice([2, min(4, n)]),
        beta=rng.choice([0.1, 0.3, 0.6]),
    )
    valuations = ValuationSpec("uniform_int", 0, rng.choice([3, 10, 30]))
    net = generate_network(spec, valuations, rng.getrandbits(63))
    if not net.neighbors_of(0) and n:
        # keep the market non-empty
        extra = rng.randint(1, n)
        return Network.from_edges(
            0, net.valuation, [*((u, v) for u, v in _edges(net)), (0, extra)]
        )
    return net


def _edges(net: Network):
    for e in net.edges():
        u, v = sorted(e)
        yield u, v
