"""Topology and identifier generators for experiments.

Everything is deterministic given ``(seed, repetition)``.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field, fields

from keyflood.errors import ConfigError
from keyflood.keys import is_bitstring, key_length
from keyflood.network import Network

TOPOLOGIES = ("path", "cycle", "grid", "star", "complete", "random")
ID_SCHEMES = ("uniform", "adversarial", "late_divergence", "explicit")


@dataclass
class ExperimentConfig:
    topology: str = "random"
    n: int = 10
    p: float = 0.3
    ids: str = "uniform"
    min_id_length: int = 1
    max_id_length: int = 16
    id_length: int = 64          # long identifiers of the adversarial families
    short_length: int = 8        # the unique short identifier (adversarial)
    short_position: int | None = None
    explicit_ids: list[str] = field(default_factory=list)
    shuffle_links: bool = True
    variant: str = "message_terminating"
    seed: int = 0
    repetitions: int = 1
    budget: int | None = None
    workers: int = 1
    out_dir: str = "."

    def validate(self) -> None:
        if self.topology not in TOPOLOGIES:
            raise ConfigError(f"unknown topology {self.topology!r}")
        if self.ids not in ID_SCHEMES:
            raise ConfigError(f"unknown identifier scheme {self.ids!r}")
        if self.n < 1:
            raise ConfigError("n must be at least 1")
        if not 0 <= self.p <= 1:
            raise ConfigError("edge probability must lie in [0, 1]")
        if self.min_id_length < 0 or self.max_id_length < self.min_id_length:
            raise ConfigError("identifier length range is empty")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be at least 1")

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


def rng_for(seed: int, repetition: int = 0) -> random.Random:
    return random.Random(f"keyflood:{seed}:{repetition}")


# -- topologies -------------------------------------------------------------------


def topology_edges(kind: str, n: int, p: float = 0.3, rng: random.Random | None = None,
                   max_attempts: int = 10_000) -> list[tuple[int, int]]:
    if n < 1:
        raise ConfigError("n must be at least 1")
    if kind == "path":
        return [(i, i + 1) for i in range(n - 1)]
    if kind == "cycle":
        edges = [(i, i + 1) for i in range(n - 1)]
        if n >= 3:
            edges.append((n - 1, 0))
        return edges
    if kind == "star":
        return [(0, i) for i in range(1, n)]
    if kind == "complete":
        return [(i, j) for i in range(n) for j in range(i + 1, n)]
    if kind == "grid":
        cols = math.ceil(math.sqrt(n))
        edges = []
        for v in range(n):
            if (v + 1) % cols and v + 1 < n:
                edges.append((v, v + 1))
            if v + cols < n:
                edges.append((v, v + cols))
        return edges
    if kind == "random":
        rng = rng or random.Random(0)
        for _ in range(max_attempts):
            edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
            if _connected(n, edges):
                return edges
        raise ConfigError(f"no connected G({n}, {p}) after {max_attempts} attempts")
    raise ConfigError(f"unknown topology {kind!r}")


def _connected(n: int, edges) -> bool:
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for u, v in edges:
        parent[find(u)] = find(v)
    return len({find(v) for v in range(n)}) == 1


def build_network(ids, edges, rng: random.Random | None = None) -> Network:
    """Network over ``edges``; link orders are shuffled when ``rng`` is given."""
    nbrs: list[list[int]] = [[] for _ in ids]
    for u, v in edges:
        nbrs[u].append(v)
        nbrs[v].append(u)
    for lst in nbrs:
        lst.sort()
        if rng is not None:
            rng.shuffle(lst)
    return Network(tuple(ids), tuple(tuple(lst) for lst in nbrs))


# -- identifiers ------------------------------------------------------------------


def random_bits(rng: random.Random, length: int) -> str:
    return format(rng.getrandbits(length), f"0{length}b") if length else ""


def uniform_ids(n: int, lo: int, hi: int, rng: random.Random) -> list[str]:
    capacity = sum(1 << k for k in range(lo, hi + 1))
    if capacity < n:
        raise ConfigError(f"only {capacity} identifiers of length {lo}..{hi} exist")
    seen: set[str] = set()
    ids = []
    while len(ids) < n:
        x = random_bits(rng, rng.randint(lo, hi))
        if x not in seen:
            seen.add(x)
            ids.append(x)
    return ids


def _far_node(edges, n: int) -> int:
    net = Network.from_edges(["0" * (i + 1) for i in range(n)], edges)
    eccs = [net.eccentricity(v) for v in range(n)]
    return eccs.index(max(eccs))


def adversarial_ids(n: int, edges, long_length: int, short_length: int, rng: random.Random,
                    position: int | None = None) -> list[str]:
    """One short identifier at a node of maximal eccentricity, the rest long."""
    if long_length <= short_length:
        raise ConfigError("long identifiers must be longer than the short one")
    if n - 1 > (1 << long_length):
        raise ConfigError("too few long identifiers for this many nodes")
    where = _far_node(edges, n) if position is None else position
    if not 0 <= where < n:
        raise ConfigError(f"short identifier position {where} out of range")
    ids = uniform_ids(n - 1, long_length, long_length, rng)
    ids.insert(where, random_bits(rng, short_length))
    return ids


def late_divergence_ids(n: int, edges, length: int, rng: random.Random,
                        position: int | None = None) -> list[str]:
    """Equal-length identifiers sharing all but a short tail.

    The tail is the node's rank by distance from the minimal node, so every
    node's neighbour towards the minimum holds a smaller identifier that is
    only told apart in the last few bits.  This forces the restarting
    baseline to resend whole keys at every hop.
    """
    width = max(1, (n - 1).bit_length())
    if length <= width:
        raise ConfigError(f"identifier length must exceed the {width}-bit rank tail")
    where = _far_node(edges, n) if position is None else position
    net = Network.from_edges(["0" * (i + 1) for i in range(n)], edges)
    dist = net.distances_from(where)
    order = sorted(range(n), key=lambda v: (dist[v], v))
    common = random_bits(rng, length - width)
    ids = [""] * n
    for rank, v in enumerate(order):
        ids[v] = common + format(rank, f"0{width}b")
    return ids


def id_length_for_key(target: int) -> int:
    """Longest identifier length whose key is the shortest key of length >= target."""
    length = 0
    while key_length(length) < target:
        length = max(1, length * 2)
    return length


def generate(config: ExperimentConfig, repetition: int = 0) -> Network:
    config.validate()
    rng = rng_for(config.seed, repetition)
    edges = topology_edges(config.topology, config.n, config.p, rng)
    if config.ids == "uniform":
        ids = uniform_ids(config.n, config.min_id_length, config.max_id_length, rng)
    elif config.ids == "adversarial":
        ids = adversarial_ids(config.n, edges, config.id_length, config.short_length, rng,
                              config.short_position)
    elif config.ids == "late_divergence":
        ids = late_divergence_ids(config.n, edges, config.id_length, rng, config.short_position)
    else:
        ids = list(config.explicit_ids)
        if len(ids) != config.n:
            raise ConfigError(f"{len(ids)} explicit identifiers for {config.n} nodes")
        if len(set(ids)) != len(ids):
            raise ConfigError("explicit identifiers must be pairwise distinct")
        if not all(is_bitstring(x) for x in ids):
            raise ConfigError("explicit identifiers must be bit strings")
    return build_network(ids, edges, rng if config.shuffle_links else None)
