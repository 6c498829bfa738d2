"""Incidence operator of the graph and the cost norm.

A flow is a dense vector over oriented edges; a positive entry moves flow
from the tail (lower id) to the head.
"""

import numpy as np

from .graph import Graph
from .instance import Instance


def supply_vector(inst: Instance, g: Graph) -> np.ndarray:
    b = np.zeros(g.num_vertices)
    b[: inst.n] = inst.supplies
    return b


def apply_incidence(g: Graph, f: np.ndarray) -> np.ndarray:
    """Divergence (net outflow) at every vertex."""
    V = g.num_vertices
    return np.bincount(g.tails, weights=f, minlength=V) - np.bincount(g.heads, weights=f, minlength=V)


def apply_incidence_transpose(g: Graph, y: np.ndarray) -> np.ndarray:
    return y[g.tails] - y[g.heads]


def flow_cost(g: Graph, f: np.ndarray) -> float:
    return float(np.dot(g.costs, np.abs(f)))
