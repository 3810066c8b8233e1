"""Per-node flow calculus on balanced open flow networks.

From a network's weight matrix this layer derives the row-normalized
transition matrix of the embedded random walk, the fundamental matrix
U = (I - W)^-1 of its interior block, and the per-node quantities:

    through_flow      A  total flow leaving the node
    dissipation       D  flow sent directly to the sink
    source_inflow     S  flow received directly from the source
    circulating_flow  F  flow passed on to other interior nodes (A - D)
    source_flux       phi  source flow arriving through all paths
    impact            C  total flow generated per unit of the node's own
                         recirculation, phi * rowsum(U) / diag(U)

For a balanced certified network, source_flux equals through_flow up to
numerical error; that redundancy is surfaced as a consistency check.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from ._linalg import DENSE_THRESHOLD, AbsorbingSolver, fundamental_diagonals
from .errors import ZeroOutflowRow
from .network import FlowNetwork

STATS_HEADER = ("item", "A", "D", "S", "F", "C", "phi")


@dataclass(frozen=True)
class TransitionMatrix:
    """Row-normalized walk matrix over (source, interior..., sink)."""

    items: tuple[str, ...]
    matrix: sp.csr_matrix

    @property
    def n_interior(self) -> int:
        return len(self.items)

    @cached_property
    def interior(self) -> sp.csr_matrix:
        n = self.n_interior
        return self.matrix[1 : n + 1, 1 : n + 1].tocsr()

    def source_row(self) -> np.ndarray:
        """Walk-start distribution over interior nodes."""
        n = self.n_interior
        return np.asarray(self.matrix[0, 1 : n + 1].todense()).ravel()

    def dissipation_column(self) -> np.ndarray:
        """Per-interior-node probability of stepping straight to the sink."""
        n = self.n_interior
        return np.asarray(self.matrix[1 : n + 1, n + 1].todense()).ravel()


def transition_matrix(net: FlowNetwork) -> TransitionMatrix:
    """Normalize each row of the weight matrix by its out-flow.

    The sink row stays identically zero (walks stop there). Interior rows
    with zero out-flow would strand walkers and raise ZeroOutflowRow;
    balancing guarantees they cannot occur.
    """
    flow = net.flow.tocsr()
    out = np.asarray(flow.sum(axis=1)).ravel()
    interior = np.arange(1, net.n_interior + 1)
    dead = interior[out[interior] <= 0.0]
    if dead.size:
        raise ZeroOutflowRow([net.label(i) for i in dead])
    scale = np.zeros_like(out)
    nonzero = out > 0
    scale[nonzero] = 1.0 / out[nonzero]
    M = sp.diags(scale) @ flow
    return TransitionMatrix(items=net.items, matrix=M.tocsr())


class FundamentalMatrix:
    """Query interface for U = (I - W)^-1 over the interior block.

    Rows, columns, diagonals, and row sums come from triangular solves
    against one LU factorization; the full matrix is only materialized on
    request and only below the dense threshold.
    """

    def __init__(self, tm: TransitionMatrix, dense_threshold: int = DENSE_THRESHOLD):
        self.items = tm.items
        self.transition = tm
        self.dense_threshold = dense_threshold
        self._solver = AbsorbingSolver(tm.interior, dense_threshold)
        self._diagonals: tuple[np.ndarray, np.ndarray] | None = None

    @property
    def n(self) -> int:
        return len(self.items)

    def solve(self, b: np.ndarray) -> np.ndarray:
        return self._solver.solve(b)

    def solve_transpose(self, b: np.ndarray) -> np.ndarray:
        return self._solver.solve_transpose(b)

    def row(self, i: int) -> np.ndarray:
        return self._solver.row(i)

    def column(self, j: int) -> np.ndarray:
        return self._solver.column(j)

    def row_sums(self) -> np.ndarray:
        """Expected total interior visits for a walk started at each node."""
        return self._solver.row_sums()

    def diagonal(self) -> np.ndarray:
        """Expected visits to each node by walks started there (>= 1)."""
        if self._diagonals is None:
            self._diagonals = fundamental_diagonals(
                self.transition.interior, self.dense_threshold
            )
        return self._diagonals[0]

    def squared_diagonal(self) -> np.ndarray:
        """diag(U^2), computed per recurrent component alongside diag(U)."""
        if self._diagonals is None:
            self.diagonal()
        return self._diagonals[1]

    def matrix(self) -> np.ndarray:
        """Dense U. Guarded: refuses above the dense threshold."""
        if self.n > self.dense_threshold:
            raise MemoryError(
                f"dense fundamental matrix of order {self.n} exceeds threshold "
                f"{self.dense_threshold}"
            )
        return self.solve(np.eye(self.n))

    def identity_residual(self) -> float:
        """max-norm of U (I - W) - I; direct check of the factorization."""
        U = self.matrix()
        W = self.transition.interior.toarray()
        res = U @ (np.eye(self.n) - W) - np.eye(self.n)
        return float(np.abs(res).max()) if self.n else 0.0

    def condition_estimate(self) -> float:
        return self._solver.condition_estimate()


def fundamental_matrix(
    tm: TransitionMatrix, dense_threshold: int = DENSE_THRESHOLD
) -> FundamentalMatrix:
    return FundamentalMatrix(tm, dense_threshold)


@dataclass(frozen=True)
class NodeFlowStats:
    """Flow calculus results over interior nodes, parallel arrays."""

    items: tuple[str, ...]
    through_flow: np.ndarray
    dissipation: np.ndarray
    source_inflow: np.ndarray
    circulating_flow: np.ndarray
    source_flux: np.ndarray
    impact: np.ndarray

    def __len__(self) -> int:
        return len(self.items)

    def flux_residual(self) -> float:
        """Largest relative gap between source_flux and through_flow."""
        denom = np.maximum(np.abs(self.through_flow), 1e-300)
        return float(np.max(np.abs(self.source_flux - self.through_flow) / denom)) if len(self) else 0.0

    def columns(self) -> dict[str, np.ndarray]:
        return {
            "A": self.through_flow,
            "D": self.dissipation,
            "S": self.source_inflow,
            "F": self.circulating_flow,
            "C": self.impact,
            "phi": self.source_flux,
        }

    def totals(self) -> dict[str, float]:
        return {name: float(col.sum()) for name, col in self.columns().items()}


def node_flows(
    net: FlowNetwork,
    fm: FundamentalMatrix | None = None,
    dense_threshold: int = DENSE_THRESHOLD,
) -> NodeFlowStats:
    """Compute all per-node flow quantities for a balanced network.

    Needs only a handful of solves against one factorization, so it scales
    to large sparse networks without forming U.
    """
    if fm is None:
        fm = fundamental_matrix(transition_matrix(net), dense_threshold)
    n = net.n_interior
    flow = net.flow.tocsr()
    interior = slice(1, n + 1)
    A = np.asarray(flow.sum(axis=1)).ravel()[interior]
    D = np.asarray(flow[interior, net.sink_index].todense()).ravel()
    S = np.asarray(flow[net.source_index, interior].todense()).ravel()
    phi = fm.solve_transpose(S)
    C = phi * fm.row_sums() / fm.diagonal()
    return NodeFlowStats(
        items=net.items,
        through_flow=A,
        dissipation=D,
        source_inflow=S,
        circulating_flow=A - D,
        source_flux=phi,
        impact=C,
    )


def flow_impact(fm: FundamentalMatrix, source_flows: np.ndarray) -> np.ndarray:
    """Impact in factored form: (U^T s) * (U 1) / diag(U)."""
    return fm.solve_transpose(source_flows) * fm.row_sums() / fm.diagonal()


def flow_impact_double_sum(fm: FundamentalMatrix, source_flows: np.ndarray) -> np.ndarray:
    """Impact as the explicit double sum over inflow paths j and onward
    paths k, contracted against a materialized U. Dense-only cross-check
    for the factored form.
    """
    U = fm.matrix()
    return np.einsum("j,ji,ik->i", source_flows, U, U) / np.diag(U)


def write_stats_csv(path, stats: NodeFlowStats) -> None:
    cols = stats.columns()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(STATS_HEADER)
        for i, item in enumerate(stats.items):
            writer.writerow([item] + [repr(float(cols[c][i])) for c in STATS_HEADER[1:]])


def read_stats_csv(path) -> NodeFlowStats:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != STATS_HEADER:
            raise ValueError(f"unexpected stats header {header!r}")
        items: list[str] = []
        rows: list[list[float]] = []
        for row in reader:
            items.append(row[0])
            rows.append([float(x) for x in row[1:]])
    data = np.array(rows) if rows else np.zeros((0, 6))
    return NodeFlowStats(
        items=tuple(items),
        through_flow=data[:, 0],
        dissipation=data[:, 1],
        source_inflow=data[:, 2],
        circulating_flow=data[:, 3],
        impact=data[:, 4],
        source_flux=data[:, 5],
    )
