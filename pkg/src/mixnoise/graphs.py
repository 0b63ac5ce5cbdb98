"""Neighbor graphs over pixel sets.

A graph is stored as one neighbor index array per pixel. Graphs must be
symmetric (i in neighbors[n] iff n in neighbors[i]); the spatial prior and
the chromatic schedule both rely on that.
"""
from __future__ import annotations

import numpy as np

from .errors import ConfigurationError


class NeighborGraph:
    """Symmetric adjacency over ``n_nodes`` pixels."""

    def __init__(self, neighbors: list[np.ndarray]):
        self.neighbors = [np.asarray(v, dtype=np.intp) for v in neighbors]
        self.n_nodes = len(self.neighbors)
        self._check_symmetric()

    def _check_symmetric(self) -> None:
        sets = [set(v.tolist()) for v in self.neighbors]
        for n, vn in enumerate(sets):
            if n in vn:
                raise ConfigurationError(f"node {n} lists itself as a neighbor")
            for i in vn:
                if i < 0 or i >= self.n_nodes:
                    raise ConfigurationError(f"node {n} has out-of-range neighbor {i}")
                if n not in sets[i]:
                    raise ConfigurationError(f"asymmetric edge ({n}, {i})")

    def degree(self) -> np.ndarray:
        return np.array([len(v) for v in self.neighbors], dtype=np.intp)

    def edges(self) -> list[tuple[int, int]]:
        """Unordered edges, each listed once."""
        out = []
        for n, vn in enumerate(self.neighbors):
            for i in vn.tolist():
                if i > n:
                    out.append((n, i))
        return out


def grid_graph(height: int, width: int) -> NeighborGraph:
    """4-neighbor lattice in row-major order; borders truncate (no wraparound)."""
    neighbors = []
    for r in range(height):
        for c in range(width):
            v = []
            if r > 0:
                v.append((r - 1) * width + c)
            if r < height - 1:
                v.append((r + 1) * width + c)
            if c > 0:
                v.append(r * width + c - 1)
            if c < width - 1:
                v.append(r * width + c + 1)
            neighbors.append(np.array(v, dtype=np.intp))
    return NeighborGraph(neighbors)


def complete_graph(n: int) -> NeighborGraph:
    idx = np.arange(n, dtype=np.intp)
    return NeighborGraph([idx[idx != i] for i in range(n)])


def path_graph(n: int) -> NeighborGraph:
    neighbors = []
    for i in range(n):
        v = [j for j in (i - 1, i + 1) if 0 <= j < n]
        neighbors.append(np.array(v, dtype=np.intp))
    return NeighborGraph(neighbors)


def empty_graph(n: int) -> NeighborGraph:
    return NeighborGraph([np.array([], dtype=np.intp) for _ in range(n)])
