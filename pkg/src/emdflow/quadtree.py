"""Randomly shifted quadtree with per-cell net points.

Geometry is kept in integer form as much as possible. A position ``p`` is
mapped to ``u = (p - origin) / (2 * delta)`` in ``[0, 1)^d``; the level-l
cell of ``p`` is ``floor(u * 2**l)`` and its level-l subcell (in global
subcell coordinates) is ``floor(u * k * 2**l)`` where ``k = 1 / eps0``.
Coarser indices are derived from finer ones by integer shifts, which keeps
nesting exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .instance import Instance


class QuadtreeError(RuntimeError):
    pass


class NotCoveredError(LookupError):
    """Position is not inside any retained cell of the requested level."""


def choose_eps0(eps: float, L: int, d: int) -> float:
    """Largest ``1/(2k)`` not exceeding ``eps / (3 d (L + 1))``."""
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    bound = eps / (3 * d * (L + 1))
    k = max(1, math.ceil(round(1.0 / (2.0 * bound), 9)))
    return 1.0 / (2 * k)


def _inverse_even(eps0: float) -> int:
    k = round(1.0 / eps0)
    if k < 2 or k % 2 or abs(1.0 / k - eps0) > 1e-12 * k:
        raise ValueError(f"1/eps0 must be an even integer, got eps0={eps0!r}")
    return k


def _row_keys(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.int64)
    return a.view(np.dtype((np.void, 8 * a.shape[1]))).ravel()


@dataclass(frozen=True)
class GridShift:
    x: np.ndarray
    origin: np.ndarray


@dataclass(frozen=True)
class CellId:
    level: int
    coords: tuple


@dataclass(frozen=True)
class NetPointId:
    level: int
    cell: CellId
    sub: tuple
    position: tuple = field(compare=False)


@dataclass
class Level:
    """Retained cells of one level.

    ``coords`` rows are sorted by their byte keys so that ``keys`` supports
    ``searchsorted`` lookups; ``point_cell[i]`` is the cell of point i and
    ``parent[c]`` the index of the parent cell one level up.
    """

    coords: np.ndarray
    keys: np.ndarray
    point_cell: np.ndarray
    parent: np.ndarray

    def __len__(self):
        return len(self.coords)

    def lookup(self, coords: np.ndarray) -> np.ndarray:
        """Cell index for each row of ``coords``, -1 where not retained."""
        q = _row_keys(coords)
        pos = np.searchsorted(self.keys, q)
        pos = np.minimum(pos, len(self.keys) - 1)
        hit = self.keys[pos] == q
        return np.where(hit, pos, -1)


def sample_shift(inst: Instance, seed: int) -> GridShift:
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.0, inst.delta, size=inst.d)
    return GridShift(x, x - inst.delta)


def _unit_coords(points: np.ndarray, shift: GridShift, delta: float) -> np.ndarray:
    u = (points - shift.origin) / (2.0 * delta)
    if np.any(u < 0) or np.any(u > 1):
        raise QuadtreeError("point outside the root cell")
    return np.minimum(u, np.nextafter(1.0, 0.0))


def build_levels(inst: Instance, shift: GridShift) -> list[Level]:
    """Retained cells per level, refining until every point is alone."""
    n, d = inst.n, inst.d
    u = _unit_coords(inst.points, shift, inst.delta)
    cap = max(0, math.ceil(math.log2(2 * math.sqrt(d) * inst.delta))) + 64
    cap = min(cap, 60)
    levels: list[Level] = []
    for lvl in range(cap + 1):
        coords = np.floor(u * 2.0**lvl).astype(np.int64)
        keys = _row_keys(coords)
        uniq, first, inverse = np.unique(keys, return_index=True, return_inverse=True)
        inverse = inverse.ravel()
        if lvl == 0:
            parent = np.full(len(uniq), -1, dtype=np.int64)
        else:
            parent = levels[-1].point_cell[first]
        levels.append(Level(coords[first], uniq, inverse.astype(np.int64), parent))
        if len(uniq) == n:
            return levels
    raise QuadtreeError("level cap exceeded: coincident points escaped merging or aspect ratio is too large")


class Quadtree:
    """Shifted grid hierarchy over an instance.

    Net points of level l are numbered ``net_offset[l] + cell * K + local``
    with ``K = k**d`` and ``local`` the row-major index of the subcell
    inside its cell.
    """

    def __init__(self, inst: Instance, shift: GridShift, levels: list[Level], eps0: float):
        self.k = _inverse_even(eps0)
        self.eps0 = 1.0 / self.k
        self.shift = shift
        self.delta = inst.delta
        self.d = inst.d
        self.n = inst.n
        self.levels = levels
        self.L = len(levels) - 1
        if self.L + math.log2(self.k) > 62:
            raise QuadtreeError("hierarchy too deep for 64-bit subcell coordinates")
        self.K = self.k**self.d
        counts = np.array([len(lv) for lv in levels], dtype=np.int64) * self.K
        self.net_offset = np.concatenate([[0], np.cumsum(counts)])
        self.num_net_points = int(self.net_offset[-1])
        self.point_sub = self._point_subcells(inst)
        self._net_subs_cache: dict[int, np.ndarray] = {}

    @property
    def origin(self) -> np.ndarray:
        return self.shift.origin

    def side(self, level: int) -> float:
        """Cell side length at ``level``."""
        return 2.0 ** (1 - level) * self.delta

    def _point_subcells(self, inst: Instance) -> np.ndarray:
        if inst.n == 0:
            return np.zeros((0, self.d), dtype=np.int64)
        u = _unit_coords(inst.points, self.shift, self.delta)
        sub = np.floor(u * (2.0**self.L * self.k)).astype(np.int64)
        cell = self.levels[self.L].coords[self.levels[self.L].point_cell]
        return np.clip(sub, cell * self.k, cell * self.k + self.k - 1)

    # -- numbering helpers -------------------------------------------------

    def local_index(self, rel: np.ndarray) -> np.ndarray:
        out = np.zeros(len(rel), dtype=np.int64)
        for axis in range(self.d):
            out = out * self.k + rel[:, axis]
        return out

    def local_coords(self, local: np.ndarray) -> np.ndarray:
        local = np.asarray(local, dtype=np.int64)
        out = np.empty((len(local), self.d), dtype=np.int64)
        for axis in range(self.d - 1, -1, -1):
            out[:, axis] = local % self.k
            local = local // self.k
        return out

    def net_index(self, level: int, subs: np.ndarray) -> np.ndarray:
        """Net-point index for global subcell coords at ``level``; -1 if the cell is not retained."""
        subs = np.asarray(subs, dtype=np.int64).reshape(-1, self.d)
        cells = subs // self.k
        ci = self.levels[level].lookup(cells)
        local = self.local_index(subs - cells * self.k)
        idx = self.net_offset[level] + ci * self.K + local
        return np.where(ci >= 0, idx, -1)

    def point_subs(self, level: int) -> np.ndarray:
        """Global level-``level`` subcell coords of every point of P."""
        return self.point_sub >> (self.L - level)

    def point_net(self, level: int) -> np.ndarray:
        """Net index of N_level(p) for every point of P."""
        subs = self.point_subs(level)
        cells = self.levels[level].point_cell
        coords = self.levels[level].coords[cells]
        return self.net_offset[level] + cells * self.K + self.local_index(subs - coords * self.k)

    def net_subs(self, level: int) -> np.ndarray:
        """Global subcell coords of all level-``level`` net points, in index order."""
        if level not in self._net_subs_cache:
            coords = self.levels[level].coords
            rel = self.local_coords(np.arange(self.K))
            subs = (coords[:, None, :] * self.k + rel[None, :, :]).reshape(-1, self.d)
            self._net_subs_cache[level] = subs
        return self._net_subs_cache[level]

    def net_positions(self, level: int) -> np.ndarray:
        h = self.side(level) / self.k
        return self.origin + (self.net_subs(level) + 0.5) * h

    def net_level(self, index: np.ndarray) -> np.ndarray:
        return np.searchsorted(self.net_offset, index, side="right") - 1

    def net_parent(self, level: int) -> np.ndarray:
        """Index of the parent net point N_{level-1}(u) for every u in N_level."""
        if level == 0:
            raise ValueError("level-0 net points have no parent")
        subs = self.net_subs(level) >> 1
        cells = self.levels[level].parent[np.arange(len(self.levels[level])).repeat(self.K)]
        coords = self.levels[level - 1].coords[cells]
        return self.net_offset[level - 1] + cells * self.K + self.local_index(subs - coords * self.k)

    # -- public lookups ----------------------------------------------------

    def _unit(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=np.float64).reshape(self.d)
        u = (p - self.origin) / (2.0 * self.delta)
        if np.any(u < 0) or np.any(u >= 1):
            raise NotCoveredError("point outside the root cell")
        return u

    def cell_of(self, p, level: int) -> CellId:
        """Cell of ``level`` containing ``p`` (half-open on every axis)."""
        if not 0 <= level <= self.L:
            raise ValueError("level out of range")
        u = self._unit(p)
        return CellId(level, tuple(int(c) for c in np.floor(u * 2.0**level)))

    def net_point_of(self, v, level: int) -> NetPointId:
        """Center of the level-``level`` subcell containing ``v``.

        Raises NotCoveredError when that subcell belongs to a cell that was
        not retained.
        """
        if not 0 <= level <= self.L:
            raise ValueError("level out of range")
        u = self._unit(v)
        sub = np.floor(u * (2.0**level * self.k)).astype(np.int64)
        cell = sub // self.k
        if self.levels[level].lookup(cell[None, :])[0] < 0:
            raise NotCoveredError(f"no retained level-{level} cell covers the position")
        h = self.side(level) / self.k
        pos = self.origin + (sub + 0.5) * h
        return NetPointId(
            level,
            CellId(level, tuple(int(c) for c in cell)),
            tuple(int(s) for s in sub - cell * self.k),
            tuple(float(x) for x in pos),
        )

    def cell_counts(self) -> list[int]:
        return [len(lv) for lv in self.levels]


def build(inst: Instance, eps0: float, seed: int) -> Quadtree:
    """Randomly shifted quadtree for ``inst`` with subcell ratio ``eps0``."""
    shift = sample_shift(inst, seed)
    return Quadtree(inst, shift, build_levels(inst, shift), eps0)
