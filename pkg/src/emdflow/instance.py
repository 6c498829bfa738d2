"""Transportation instances, transportation maps and their cost accounting."""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np


class InstanceError(ValueError):
    """Raised when an instance cannot be parsed or fails validation."""


class ParseError(InstanceError):
    pass


class DimensionError(InstanceError):
    pass


class SupplyImbalanceError(InstanceError):
    """Supplies do not sum to zero after merging duplicate points."""


@dataclass(frozen=True)
class Instance:
    """Weighted point set in R^d with integer supplies summing to zero.

    Coordinates are translated so that the bounding box starts at the
    origin; ``delta`` is the largest side of that box (1.0 for degenerate
    boxes so that the grid is never empty).

    Attributes
    ----------
    points : ndarray, shape (n, d)
        Distinct points, every coordinate in ``[0, delta]``.
    supplies : ndarray, shape (n,)
        Nonzero integer supplies.
    d : int
    delta : float
    offset : ndarray, shape (d,)
        Translation removed at load time (input = points + offset).
    """

    points: np.ndarray
    supplies: np.ndarray
    d: int
    delta: float
    offset: np.ndarray = field(default=None)

    @classmethod
    def from_arrays(cls, points, supplies, *, merge=True) -> "Instance":
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        mu = np.asarray(supplies)
        if mu.size and not np.all(np.equal(np.mod(mu, 1), 0)):
            raise InstanceError("supplies must be integers")
        mu = mu.astype(np.int64)
        if pts.ndim != 2 or pts.shape[0] != mu.shape[0]:
            raise DimensionError("points and supplies disagree in length")
        d = pts.shape[1]
        if d < 1:
            raise DimensionError("dimension must be at least 1")
        if not np.all(np.isfinite(pts)):
            raise InstanceError("non-finite coordinate")
        if merge and len(pts):
            pts, mu = _merge_duplicates(pts, mu)
        if int(mu.sum()) != 0:
            raise SupplyImbalanceError(f"supplies sum to {int(mu.sum())}, expected 0")
        keep = mu != 0
        pts, mu = pts[keep], mu[keep]
        if len(pts):
            lo = pts.min(axis=0)
            side = float((pts.max(axis=0) - lo).max())
        else:
            lo = np.zeros(d)
            side = 0.0
        pts = pts - lo
        delta = side if side > 0 else 1.0
        return cls(np.ascontiguousarray(pts), mu, d, delta, lo)

    @property
    def n(self) -> int:
        return len(self.supplies)

    @property
    def total_supply(self) -> int:
        """U, the total positive supply."""
        return int(self.supplies[self.supplies > 0].sum())

    @property
    def sources(self) -> np.ndarray:
        """Indices into ``points`` of P+, in input order."""
        return np.flatnonzero(self.supplies > 0)

    @property
    def sinks(self) -> np.ndarray:
        """Indices into ``points`` of P-, in input order."""
        return np.flatnonzero(self.supplies < 0)

    @property
    def tau(self) -> float:
        """Numeric floor below which flow amounts are treated as zero."""
        return 1e-9 * max(1, self.total_supply)


def _merge_duplicates(pts, mu):
    rows = np.ascontiguousarray(pts).view(np.dtype((np.void, pts.itemsize * pts.shape[1]))).ravel()
    _, first, inverse = np.unique(rows, return_index=True, return_inverse=True)
    merged = np.bincount(inverse, weights=mu, minlength=len(first)).astype(np.int64)
    order = np.argsort(first, kind="stable")
    return pts[first[order]], merged[order]


def load_instance(text) -> Instance:
    """Parse the whitespace-separated instance format.

    Lines starting with ``#`` and blank lines are ignored. The first data
    line holds the dimension ``d``; each following line holds ``d``
    coordinates and one signed integer supply.

    ``text`` may be a string or a readable text stream.
    """
    if isinstance(text, str):
        text = io.StringIO(text)
    d = None
    coords, supplies = [], []
    for lineno, raw in enumerate(text, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if d is None:
            if len(fields) != 1:
                raise ParseError(f"line {lineno}: expected the dimension on its own line")
            try:
                d = int(fields[0])
            except ValueError:
                raise ParseError(f"line {lineno}: bad dimension {fields[0]!r}") from None
            if d < 1:
                raise DimensionError(f"line {lineno}: dimension must be >= 1")
            continue
        if len(fields) != d + 1:
            raise DimensionError(f"line {lineno}: expected {d} coordinates and a supply, got {len(fields)} fields")
        try:
            xs = [float(v) for v in fields[:d]]
            s = int(fields[d])
        except ValueError:
            raise ParseError(f"line {lineno}: malformed row {line!r}") from None
        coords.append(xs)
        supplies.append(s)
    if d is None:
        raise ParseError("empty instance: missing dimension line")
    pts = np.array(coords, dtype=np.float64).reshape(len(coords), d)
    return Instance.from_arrays(pts, np.array(supplies, dtype=np.int64))


def format_instance(inst: Instance) -> str:
    lines = [str(inst.d)]
    for p, s in zip(inst.points + inst.offset, inst.supplies):
        lines.append(" ".join(repr(float(x)) for x in p) + f" {int(s)}")
    return "\n".join(lines) + "\n"


@dataclass
class TransportMap:
    """Flow from P+ to P-, stored as parallel arrays.

    ``sources[k]`` indexes ``inst.sources``, ``sinks[k]`` indexes
    ``inst.sinks`` and ``amounts[k]`` is the mass moved between them.
    """

    sources: np.ndarray
    sinks: np.ndarray
    amounts: np.ndarray

    def __post_init__(self):
        self.sources = np.asarray(self.sources, dtype=np.int64)
        self.sinks = np.asarray(self.sinks, dtype=np.int64)
        self.amounts = np.asarray(self.amounts, dtype=np.float64)

    def __len__(self):
        return len(self.amounts)

    @classmethod
    def empty(cls):
        return cls(np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0))

    def scaled(self, factor: float) -> "TransportMap":
        return TransportMap(self.sources.copy(), self.sinks.copy(), self.amounts * factor)

    def to_text(self) -> str:
        return "".join(f"{i} {j} {a!r}\n" for i, j, a in zip(self.sources.tolist(), self.sinks.tolist(), self.amounts.tolist()))


def _check_indices(inst: Instance, m: TransportMap):
    ns, nt = len(inst.sources), len(inst.sinks)
    if len(m) and (m.sources.min() < 0 or m.sources.max() >= ns or m.sinks.min() < 0 or m.sinks.max() >= nt):
        raise IndexError("transport map index out of range")


def map_cost(inst: Instance, m: TransportMap) -> float:
    """Total Euclidean cost sum(amount * ||p - q||_2) of a map."""
    _check_indices(inst, m)
    if not len(m):
        return 0.0
    p = inst.points[inst.sources[m.sources]]
    q = inst.points[inst.sinks[m.sinks]]
    return float(np.dot(m.amounts, np.linalg.norm(p - q, axis=1)))


@dataclass
class FeasibilityReport:
    ok: bool
    source_violations: dict
    sink_violations: dict
    negative_entries: list

    def __bool__(self):
        return self.ok


def map_feasible(inst: Instance, m: TransportMap, tol: float = 0.0) -> FeasibilityReport:
    """Check that ``m`` ships exactly the supplies, up to ``tol * max(1, U)``.

    Violations map a P+ (or P-) index to the signed shortfall
    ``expected - shipped``.
    """
    _check_indices(inst, m)
    bound = tol * max(1, inst.total_supply)
    out = np.bincount(m.sources, weights=m.amounts, minlength=len(inst.sources))
    inn = np.bincount(m.sinks, weights=m.amounts, minlength=len(inst.sinks))
    need_out = inst.supplies[inst.sources].astype(float)
    need_in = -inst.supplies[inst.sinks].astype(float)
    src_gap = need_out - out
    snk_gap = need_in - inn
    src_bad = {int(i): float(src_gap[i]) for i in np.flatnonzero(np.abs(src_gap) > bound)}
    snk_bad = {int(j): float(snk_gap[j]) for j in np.flatnonzero(np.abs(snk_gap) > bound)}
    neg = [int(k) for k in np.flatnonzero(m.amounts < 0)]
    return FeasibilityReport(not (src_bad or snk_bad or neg), src_bad, snk_bad, neg)
