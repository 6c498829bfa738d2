"""Pure Python/numpy versions of the hot kernels.

Each function mirrors the compiled version in ``_kernels.pyx`` operation
for operation, so both backends produce the same floating point results.
"""

import numpy as np

NAME = "python"

SUCCESS, CERTIFICATE, EXHAUSTED = 0, 1, 2
# Relative slack so that exact ties (common on lattice-valued systems) are
# never reported as separating.
CERT_MARGIN = 1e-12


def cancel_groups(ids, group_ptr, delta, flow, base, e2_base, K, npairs):
    """Cancel opposite surpluses pairwise inside each group along E2 edges.

    ``ids`` holds vertex ids of one level sorted by group, then by id.
    A positive surplus at u and a negative one at v are settled by sending
    ``min(delta[u], -delta[v])`` from v to u.
    """
    for gi in range(len(group_ptr) - 1):
        lo, hi = group_ptr[gi], group_ptr[gi + 1]
        ip = jn = lo
        while True:
            while ip < hi and delta[ids[ip]] <= 0.0:
                ip += 1
            while jn < hi and delta[ids[jn]] >= 0.0:
                jn += 1
            if ip >= hi or jn >= hi:
                break
            u, v = int(ids[ip]), int(ids[jn])
            x = min(delta[u], -delta[v])
            cu, lu = divmod(u - base, K)
            lv = (v - base) % K
            a, b = (lu, lv) if lu < lv else (lv, lu)
            e = e2_base + cu * npairs + a * (2 * K - a - 1) // 2 + (b - a - 1)
            # flow v -> u; edges point from the lower id to the higher one
            flow[e] += x if v < u else -x
            delta[u] -= x
            delta[v] += x


def mwu_run(R, RT, tails, heads, w, target, eta, tol, max_rounds):
    """Multiplicative-weights search for g with ||g||_1 <= 1 and ||M g - target||_1 <= tol.

    ``M = R A_w`` where ``A_w`` maps edge e to ``w[e] (1_tails[e] - 1_heads[e])``
    (no head term when ``heads[e] < 0``) and ``R`` is CSR with ``RT`` its
    transpose. Returns ``(status, g, rounds, ysum, gacc)``: ``gacc`` is the
    cumulative ``M^T y`` and ``ysum`` the sum of the sign vectors, so the
    running average certificate is ``ysum / rounds`` with
    ``M^T ybar = gacc / rounds``.
    """
    nv = R.shape[1]
    m = len(tails)
    has_head = heads >= 0
    hidx = np.where(has_head, heads, 0)

    def forward(x):
        v = np.bincount(tails, weights=x, minlength=nv)
        return v - np.bincount(hidx, weights=np.where(has_head, x, 0.0), minlength=nv)

    gacc = np.zeros(m)
    ysum = np.zeros(R.shape[0])
    g = np.zeros(m)
    for rnd in range(max_rounds + 1):
        z = eta * gacc
        zmax = np.abs(z).max() if m else 0.0
        wp = np.exp(-z - zmax)
        wm = np.exp(z - zmax)
        g = (wp - wm) / (wp.sum() + wm.sum())
        r = R @ forward(w * g) - target
        if np.abs(r).sum() <= tol:
            return SUCCESS, g, rnd, ysum, gacc
        if rnd == max_rounds:
            break
        y = np.where(r >= 0.0, 1.0, -1.0)
        ysum += y
        zv = RT @ y
        gacc += w * (zv[tails] - np.where(has_head, zv[hidx], 0.0))
        yb, gmax = ysum @ target, np.abs(gacc).max()
        if yb + gmax < -CERT_MARGIN * (abs(yb) + gmax):
            return CERTIFICATE, g, rnd + 1, ysum, gacc
    return EXHAUSTED, g, max_rounds, ysum, gacc


def cancel_sweep(tails, heads, values, order, n, tau):
    """Run Cancel-Vertex on every vertex of ``order`` and return the P x P flow.

    Returns arrays ``(src, dst, amount)`` with ``amount > 0`` meaning flow
    from ``src`` to ``dst``, both point ids below ``n``.
    """
    from .rounding import SparseFlow, cancel_vertex

    f = SparseFlow.from_edges(tails, heads, values, tau)
    for u in order:
        cancel_vertex(f, int(u), tau)
    return f.point_entries(n)
