"""Fund-stock bipartite holdings graphs and their centralities."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import EmptyGraph, NonPositiveLog
from .ingest import HoldingsSnapshot

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 1000


class Side(str, enum.Enum):
    OVERWEIGHT = "overweight"
    UNDERWEIGHT = "underweight"


class CentralityKind(str, enum.Enum):
    DEGREE = "degree"
    WEIGHTED_DEGREE = "weighted_degree"
    EIGENVECTOR = "eigenvector"

    @classmethod
    def parse(cls, text: str) -> "CentralityKind":
        key = text.strip().lower().replace("-", "_")
        aliases = {"weighteddegree": "weighted_degree", "weighted": "weighted_degree", "eigen": "eigenvector"}
        return cls(aliases.get(key, key))


@dataclass(frozen=True)
class CrowdGraph:
    """Weighted bipartite graph; edges are (fund_index, stock_index, weight > 0)."""

    fund_ids: tuple[str, ...]
    stock_ids: tuple[str, ...]
    edges: tuple[tuple[int, int, float], ...]
    side: Side

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def weights(self) -> np.ndarray:
        return np.array([w for _, _, w in self.edges], dtype=float)

    def biadjacency(self) -> np.ndarray:
        """Dense funds x stocks matrix of edge weights."""
        mat = np.zeros((len(self.fund_ids), len(self.stock_ids)))
        for f, s, w in self.edges:
            mat[f, s] = w
        return mat

    def adjacency(self) -> np.ndarray:
        """Symmetric (funds + stocks) square adjacency, funds first."""
        b = self.biadjacency()
        nf, ns = b.shape
        a = np.zeros((nf + ns, nf + ns))
        a[:nf, nf:] = b
        a[nf:, :nf] = b.T
        return a


def graph_from_triples(triples: Iterable[tuple[str, str, float]], side: Side) -> CrowdGraph:
    """Build a graph from (fund_id, stock_id, weight) with isolated nodes omitted."""
    triples = sorted(triples)
    funds = sorted({f for f, _, _ in triples})
    stocks = sorted({s for _, s, _ in triples})
    fidx = {f: i for i, f in enumerate(funds)}
    sidx = {s: i for i, s in enumerate(stocks)}
    edges = []
    last = None
    for f, s, w in triples:
        if (f, s) == last:
            raise ValueError(f"duplicate edge {f}-{s}")
        if not w > 0:
            raise ValueError(f"edge {f}-{s} has non-positive weight {w!r}")
        last = (f, s)
        edges.append((fidx[f], sidx[s], float(w)))
    return CrowdGraph(tuple(funds), tuple(stocks), tuple(edges), side)


def _triples(graph: CrowdGraph) -> list[tuple[str, str, float]]:
    return [(graph.fund_ids[f], graph.stock_ids[s], w) for f, s, w in graph.edges]


def normalized_active_weight(fund_weight: float, benchmark_weight: float, market_cap: float) -> float:
    """Active weight divided by the natural log of the dollar market cap."""
    if not market_cap > 1.0:
        raise NonPositiveLog(f"market cap {market_cap!r} gives ln(cap) <= 0")
    return (fund_weight - benchmark_weight) / math.log(market_cap)


def build_split_graphs(snapshot: HoldingsSnapshot) -> tuple[CrowdGraph, CrowdGraph]:
    """Overweight and underweight graphs; both store edge magnitudes."""
    over, under = [], []
    for h in snapshot.holdings:
        w = normalized_active_weight(
            h.weight, snapshot.benchmark_weights.get(h.stock_id, 0.0), snapshot.market_caps[h.stock_id]
        )
        if w > 0:
            over.append((h.fund_id, h.stock_id, w))
        elif w < 0:
            under.append((h.fund_id, h.stock_id, -w))
    return graph_from_triples(over, Side.OVERWEIGHT), graph_from_triples(under, Side.UNDERWEIGHT)


def median_filter(graph: CrowdGraph) -> CrowdGraph:
    """Keep only edges strictly heavier than the graph's median edge weight."""
    if not graph.edges:
        return graph
    threshold = float(np.median(graph.weights()))
    return graph_from_triples([t for t in _triples(graph) if t[2] > threshold], graph.side)


@dataclass(frozen=True)
class CentralityVector:
    kind: CentralityKind
    values: dict[str, float]
    converged: bool = True
    iterations: int = 0
    fund_values: dict[str, float] = field(default_factory=dict, compare=False, repr=False)


def degree_centrality(graph: CrowdGraph) -> CentralityVector:
    """Share of the graph's funds linked to each stock."""
    n_funds = len(graph.fund_ids)
    neighbours: dict[int, set[int]] = {}
    for f, s, _ in graph.edges:
        neighbours.setdefault(s, set()).add(f)
    values = {graph.stock_ids[s]: len(fs) / n_funds for s, fs in sorted(neighbours.items())}
    return CentralityVector(CentralityKind.DEGREE, values)


def weighted_degree_centrality(graph: CrowdGraph) -> CentralityVector:
    strength = np.zeros(len(graph.stock_ids))
    for _, s, w in graph.edges:
        strength[s] += w
    values = {sid: float(v) for sid, v in zip(graph.stock_ids, strength)}
    return CentralityVector(CentralityKind.WEIGHTED_DEGREE, values)


def power_iteration(
    biadjacency: np.ndarray, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER
) -> tuple[np.ndarray, np.ndarray, bool, int]:
    """Dominant eigenvector of [[0, B], [B.T, 0]] by power iteration.

    Returns the fund block, the stock block, the convergence flag and the
    iteration count. The full vector (funds, stocks) has unit L2 norm.

    The spectrum of a bipartite adjacency is symmetric about zero, so the
    plain iterate x <- Ax alternates between two vectors and never settles.
    Each sweep here updates the fund block from the stocks and then the
    stock block from the fresh fund block, which is power iteration on the
    squared adjacency; each block is renormalised to 1/sqrt(2), the share
    it has in the dominant eigenvector of a bipartite graph.
    """
    b = np.asarray(biadjacency, dtype=float)
    nf, ns = b.shape
    half = 1.0 / math.sqrt(2.0)
    x = np.full(nf + ns, 1.0 / math.sqrt(nf + ns))
    v = x[nf:].copy()
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        u = b @ v
        u *= half / np.linalg.norm(u)
        v = b.T @ u
        v *= half / np.linalg.norm(v)
        x_new = np.concatenate([u, v])
        delta = np.max(np.abs(x_new - x))
        x = x_new
        if delta < tol:
            converged = True
            break
    return x[:nf], x[nf:], converged, it


def eigenvector_centrality(
    graph: CrowdGraph, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER
) -> CentralityVector:
    if not graph.edges:
        raise EmptyGraph(f"{graph.side.value} graph has no edges")
    u, v, converged, iterations = power_iteration(graph.biadjacency(), tol, max_iter)
    return CentralityVector(
        CentralityKind.EIGENVECTOR,
        {sid: float(val) for sid, val in zip(graph.stock_ids, v)},
        converged=converged,
        iterations=iterations,
        fund_values={fid: float(val) for fid, val in zip(graph.fund_ids, u)},
    )


def centrality(
    graph: CrowdGraph,
    kind: CentralityKind,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> CentralityVector:
    """Dispatch on ``kind``; an edgeless graph yields an empty vector for every kind."""
    kind = CentralityKind(kind)
    if not graph.edges:
        return CentralityVector(kind, {})
    if kind is CentralityKind.DEGREE:
        return degree_centrality(graph)
    if kind is CentralityKind.WEIGHTED_DEGREE:
        return weighted_degree_centrality(graph)
    return eigenvector_centrality(graph, tol, max_iter)
