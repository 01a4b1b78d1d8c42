"""Connected networks with identifiers and per-node link numbering."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

from keyflood.errors import ConfigError
from keyflood.keys import is_bitstring, shortlex_min


@dataclass(frozen=True)
class Network:
    """``links[v][i]`` is the neighbour reached through link ``i`` of node ``v``.

    Link indices are 0-based; the order of ``links[v]`` is the node's link
    index function.
    """

    ids: tuple[str, ...]
    links: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        n = len(self.ids)
        if n == 0:
            raise ConfigError("a network needs at least one node")
        if len(self.links) != n:
            raise ConfigError("links and ids disagree on the number of nodes")
        if len(set(self.ids)) != n:
            raise ConfigError("identifiers must be pairwise distinct")
        for x in self.ids:
            if not is_bitstring(x):
                raise ConfigError(f"identifier {x!r} is not a bit string")
        for v, nbrs in enumerate(self.links):
            if len(set(nbrs)) != len(nbrs):
                raise ConfigError(f"node {v} has parallel links")
            for u in nbrs:
                if not 0 <= u < n or u == v:
                    raise ConfigError(f"node {v} has an invalid link to {u}")
                if v not in self.links[u]:
                    raise ConfigError(f"link {v}-{u} is not indexed at both ends")
        if len(self.distances_from(0)) != n:
            raise ConfigError("network is not connected")

    @classmethod
    def from_edges(cls, ids: Sequence[str], edges: Iterable[tuple[int, int]]) -> Network:
        """Build a network whose link order is ascending neighbour index."""
        nbrs: list[set[int]] = [set() for _ in ids]
        for u, v in edges:
            nbrs[u].add(v)
            nbrs[v].add(u)
        return cls(tuple(ids), tuple(tuple(sorted(s)) for s in nbrs))

    @property
    def n(self) -> int:
        return len(self.ids)

    def degree(self, v: int) -> int:
        return len(self.links[v])

    @cached_property
    def reverse(self) -> tuple[tuple[int, ...], ...]:
        """``reverse[v][i]`` is the index of the same link at the far end."""
        return tuple(
            tuple(self.links[u].index(v) for u in nbrs)
            for v, nbrs in enumerate(self.links))

    def edges(self) -> list[tuple[int, int]]:
        return [(v, u) for v, nbrs in enumerate(self.links) for u in nbrs if v < u]

    def link_to(self, v: int, u: int) -> int:
        return self.links[v].index(u)

    def distances_from(self, src: int) -> dict[int, int]:
        dist = {src: 0}
        queue = deque([src])
        while queue:
            v = queue.popleft()
            for u in self.links[v]:
                if u not in dist:
                    dist[u] = dist[v] + 1
                    queue.append(u)
        return dist

    def eccentricity(self, v: int) -> int:
        return max(self.distances_from(v).values())

    @cached_property
    def diameter(self) -> int:
        return max(self.eccentricity(v) for v in range(self.n))

    @cached_property
    def min_node(self) -> int:
        """Node holding the shortlex-minimal identifier."""
        return self.ids.index(shortlex_min(self.ids))
