"""Preconditioned min-cost flow solve with a multiplicative-weights core.

The flow problem ``min ||f||_c s.t. A f = b`` is rewritten with
``g = C f`` and the sketch B as ``min ||g||_1 s.t. M g = B b / s`` where
``M = B A C^-1 / s`` has columns of l1 norm at most one. M is applied
through its factors and never stored. A value search
over the optimum ``t`` calls a Hedge-style feasibility routine; refinement
stages re-solve for the residual, and the bottom-up router closes the
final gap exactly.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import _backend
from .flow import apply_incidence, flow_cost
from .graph import Graph
from .sketch import Sketch, apply_B, route_flow, sketch_norm

log = logging.getLogger(__name__)


class SolverFailure(RuntimeError):
    """The value search found no feasible scale on its grid."""


@dataclass
class PreconditionedSystem:
    """``M = R A_w``: edge e maps to ``w[e] (R[:, tails[e]] - R[:, heads[e]])``.

    For a flow problem ``R`` is the sketch B, ``A`` the incidence matrix and
    ``w = 1 / (c s)``; M is never formed, so one application costs
    ``O(|E| + nnz(B))``. A head of ``-1`` drops the second term, which lets
    :meth:`from_matrix` wrap an explicit matrix.
    """

    graph: Graph | None
    sketch: Sketch | None
    R: sp.csr_matrix
    RT: sp.csr_matrix
    tails: np.ndarray
    heads: np.ndarray
    w: np.ndarray
    scale: float
    kappa_bound: float

    @classmethod
    def from_matrix(cls, M, kappa_bound: float = 1.0) -> "PreconditionedSystem":
        R = sp.csr_matrix(M, dtype=np.float64)
        m = R.shape[1]
        return cls(None, None, R, R.T.tocsr(), np.arange(m, dtype=np.int64), np.full(m, -1, dtype=np.int64), np.ones(m), 1.0, kappa_bound)

    @property
    def num_edges(self) -> int:
        return len(self.tails)

    @property
    def num_rows(self) -> int:
        return self.R.shape[0]

    def _spread(self, x: np.ndarray) -> np.ndarray:
        nv = self.R.shape[1]
        has = self.heads >= 0
        v = np.bincount(self.tails, weights=x, minlength=nv)
        return v - np.bincount(self.heads[has], weights=x[has], minlength=nv)

    def apply(self, g: np.ndarray) -> np.ndarray:
        return self.R @ self._spread(self.w * np.asarray(g, dtype=np.float64))

    def apply_transpose(self, y: np.ndarray) -> np.ndarray:
        z = self.RT @ np.asarray(y, dtype=np.float64)
        out = z[self.tails]
        has = self.heads >= 0
        out[has] -= z[self.heads[has]]
        return self.w * out

    def columns(self, edges) -> sp.csc_matrix:
        """Explicit columns of M for the given edge ids."""
        edges = np.asarray(edges, dtype=np.int64)
        D = _column_block(self.R.tocsc(), self.tails[edges], self.heads[edges])
        return (D @ sp.diags(self.w[edges])).tocsc()

    def column_norms(self, chunk: int = 1 << 18) -> np.ndarray:
        return column_norms(self.R, self.tails, self.heads, self.w, chunk)

    def target(self, b: np.ndarray) -> np.ndarray:
        """Normalized right-hand side ``B b / s``."""
        return apply_B(self.sketch, b) / self.scale

    def to_flow(self, g: np.ndarray) -> np.ndarray:
        return g / self.graph.costs


def _column_block(Rc: sp.csc_matrix, t: np.ndarray, h: np.ndarray) -> sp.csc_matrix:
    """``R[:, t] - R[:, h]`` column by column, with no head term where ``h < 0``."""
    D = Rc[:, t]
    has = h >= 0
    if has.any():
        # absent heads read column 0 and are zeroed by the diagonal
        D = D - Rc[:, np.where(has, h, 0)] @ sp.diags(has.astype(np.float64))
    return D


def column_norms(R, tails, heads, w, chunk: int = 1 << 18) -> np.ndarray:
    """l1 norm of every column of ``R A_w``, computed in edge chunks."""
    Rc = sp.csc_matrix(R)
    out = np.empty(len(tails))
    for lo in range(0, len(tails), chunk):
        D = _column_block(Rc, tails[lo : lo + chunk], heads[lo : lo + chunk])
        out[lo : lo + chunk] = np.asarray(abs(D).sum(axis=0)).ravel() * np.abs(w[lo : lo + chunk])
    return out


def normalize(g: Graph, s: Sketch) -> PreconditionedSystem:
    """Preconditioned system ``B A C^-1 / s`` with the largest column l1 norm equal to one."""
    B = s.to_sparse()
    B.sort_indices()
    BT = B.T.tocsr()
    BT.sort_indices()
    inv = 1.0 / g.costs
    colnorm = column_norms(B, g.tails, g.heads, inv)
    scale = float(colnorm.max()) if len(colnorm) else 1.0
    return PreconditionedSystem(g, s, B, BT, g.tails, g.heads, inv / scale, scale, s.gamma)


def mwu_budget(eps: float, m: int) -> int:
    return math.ceil(8.0 / eps**2 * math.log(2 * max(m, 1)))


@dataclass
class Feasibility:
    status: str  # "solution", "certificate" or "exhausted"
    g: np.ndarray | None
    rounds: int
    certificate: np.ndarray | None = None


def mwu_feasibility(sys: PreconditionedSystem, target: np.ndarray, t: float, eps: float, max_rounds: int | None = None) -> Feasibility:
    """Look for ``g`` with ``||g||_1 <= t`` and ``||M g - target||_1 <= eps * t``.

    Returns the scaled solution, or an averaged sign vector ``ybar`` proving
    that no ``g`` with ``||g||_1 <= 1`` solves ``M g = target / t``, or
    reports that the round budget ran out.
    """
    if not (t > 0 and 0 < eps < 1):
        raise ValueError("need t > 0 and 0 < eps < 1")
    if max_rounds is None:
        max_rounds = mwu_budget(eps, sys.num_edges)
    tgt = np.asarray(target, dtype=np.float64) / t
    status, g, rounds, ysum, gacc = _backend.kernels.mwu_run(sys.R, sys.RT, sys.tails, sys.heads, sys.w, tgt, eps / 2.0, eps, int(max_rounds))
    if status == _backend.kernels.SUCCESS:
        assert np.abs(g).sum() <= 1.0 + 1e-9
        assert np.abs(sys.apply(g) - tgt).sum() <= eps * (1 + 1e-9) + 1e-15
        return Feasibility("solution", t * g, rounds)
    if status == _backend.kernels.CERTIFICATE:
        ybar = ysum / rounds
        if certificate_holds(sys, ybar, tgt):
            return Feasibility("certificate", None, rounds, ybar)
    return Feasibility("exhausted", None, rounds)


def certificate_holds(sys: PreconditionedSystem, ybar: np.ndarray, scaled_target: np.ndarray) -> bool:
    """``ybar . target < -max|M^T ybar|`` rules out every g with ``||g||_1 <= 1``."""
    return float(ybar @ scaled_target) < -float(np.abs(sys.apply_transpose(ybar)).max(initial=0.0))


@dataclass
class SearchResult:
    t: float
    g: np.ndarray
    calls: int
    rounds: int
    certificate: np.ndarray | None = None


def value_search(sys: PreconditionedSystem, target: np.ndarray, eps: float, max_rounds: int | None = None) -> SearchResult:
    """First grid value ``t = s ||target||_1 (1 + eps)^k`` with a successful MWU call.

    In cost units the optimum lies in ``[||B b||_1, gamma ||B b||_1]`` and
    ``||B b||_1 = s ||target||_1``, so ``k`` runs up to
    ``ceil(log_{1+eps} gamma)``. Certificates and exhausted budgets both
    move on to the next grid value.
    """
    lower = sys.scale * float(np.abs(target).sum())
    m = sys.num_edges
    if lower == 0.0:
        return SearchResult(0.0, np.zeros(m), 0, 0)
    kmax = math.ceil(math.log(sys.kappa_bound) / math.log1p(eps))
    calls = rounds = 0
    cert = None
    for k in range(kmax + 1):
        t = lower * (1 + eps) ** k
        res = mwu_feasibility(sys, target, t, eps, max_rounds)
        calls += 1
        rounds += res.rounds
        if res.status == "solution":
            return SearchResult(t, res.g, calls, rounds, cert)
        if res.certificate is not None:
            cert = res.certificate
    raise SolverFailure(f"no feasible value among {kmax + 1} grid points")


@dataclass
class SolveReport:
    flow: np.ndarray
    cost: float
    mwu_rounds: int
    stages: int
    residual_sketch_norm: float
    certificate: np.ndarray | None = None
    history: list = field(default_factory=list)


def solve_flow(g: Graph, q, s: Sketch, b: np.ndarray, eps: float, sys: PreconditionedSystem | None = None, max_stages: int | None = None) -> SolveReport:
    """(1 + O(eps))-approximate min-cost flow for supplies ``b``, exactly feasible.

    Stage 0 runs the value search at accuracy ``eps``; later stages re-solve
    the residual ``b - A f`` at accuracy 1/2. A stage that fails to shrink
    the residual sketch norm is discarded and ends the refinement. The
    router then routes what is left.
    """
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    b = np.asarray(b, dtype=np.float64)
    m = g.num_edges
    base = sketch_norm(s, b)
    if base == 0.0:
        return SolveReport(np.zeros(m), 0.0, 0, 0, 0.0)
    if sys is None:
        sys = normalize(g, s)
    gamma = s.gamma
    if max_stages is None:
        max_stages = math.ceil(math.log2(gamma**2 / eps)) + 4
    floor = eps / gamma**2 * base
    f = np.zeros(m)
    resid = b.copy()
    rnorm = base
    total_rounds = 0
    stages = 0
    cert = None
    history = [rnorm]
    stage_eps = min(eps, 0.5)
    for stage in range(max_stages):
        if rnorm <= floor:
            break
        res = value_search(sys, sys.target(resid), stage_eps if stage == 0 else 0.5)
        total_rounds += res.rounds
        if stage == 0:
            cert = res.certificate
        step = sys.to_flow(res.g)
        new_resid = resid - apply_incidence(g, step)
        new_norm = sketch_norm(s, new_resid)
        log.debug("stage %d: t=%.6g calls=%d rounds=%d residual %.6g -> %.6g", stage, res.t, res.calls, res.rounds, rnorm, new_norm)
        if stage > 0 and new_norm >= rnorm:
            break
        f += step
        resid, rnorm = new_resid, new_norm
        stages += 1
        history.append(rnorm)
    f += route_flow(s, q, g, resid)
    return SolveReport(f, flow_cost(g, f), total_rounds, stages, rnorm, cert, history)
