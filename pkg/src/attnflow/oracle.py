"""Independent verification engines: synthetic network generators, a
Monte Carlo random-walk simulator, and exact path enumeration for DAGs.

The simulator shares no code with the matrix calculus: walkers step
through the row-normalized weights with a seeded portable generator
(numpy PCG64), so its estimates are an independent check on every
analytic quantity. Enumeration is a second, noise-free oracle for small
acyclic networks.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.csgraph as csgraph

from .errors import InvalidSpec, MismatchedNetworks, NotCertified, StepCapWarning
from .flowcalc import NodeFlowStats, transition_matrix
from .ingest import SessionLog
from .network import FlowNetwork, build_flow_network, validate

STEP_CAP = 1_000_000

# Batches are sized so scratch matrices stay near this many entries.
_BATCH_ENTRY_BUDGET = 8_000_000

_FAMILIES = (
    "chain",
    "star",
    "random-tree",
    "random-cyclic",
    "session-log",
    "planted-dissipation",
)


@dataclass(frozen=True)
class GeneratorSpec:
    """Recipe for a deterministic synthetic network or session log.

    weight_scale multiplies all base weights; recirculation sets the
    fraction of backward (cycle-forming) interior edges for the cyclic
    family; exponent plants a dissipation-vs-throughflow power law for
    the planted-dissipation family; avg_degree tunes interior density.
    """

    family: str
    size: int
    weight_scale: float = 1.0
    recirculation: float = 0.2
    seed: int = 0
    exponent: float | None = None
    avg_degree: float | None = None

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise InvalidSpec(f"unknown family {self.family!r}; choose from {_FAMILIES}")
        if self.size < 1:
            raise InvalidSpec(f"size must be >= 1, got {self.size}")
        if self.weight_scale <= 0:
            raise InvalidSpec("weight_scale must be positive")
        if not 0.0 <= self.recirculation <= 1.0:
            raise InvalidSpec("recirculation must be in [0, 1]")


def _names(n: int) -> list[str]:
    width = len(str(n))
    return [f"n{i:0{width}d}" for i in range(1, n + 1)]


def _gen_chain(spec: GeneratorSpec) -> dict[tuple[str, str], float]:
    names = _names(spec.size)
    w = spec.weight_scale
    edges = {("__source__", names[0]): w}
    for a, b in zip(names, names[1:]):
        edges[(a, b)] = w
    edges[(names[-1], "__sink__")] = w
    return edges


def _gen_star(spec: GeneratorSpec) -> dict[tuple[str, str], float]:
    if spec.size < 2:
        raise InvalidSpec("star needs size >= 2 (hub plus leaves)")
    names = _names(spec.size)
    hub, leaves = names[0], names[1:]
    w = spec.weight_scale
    edges = {("__source__", hub): w * len(leaves)}
    for leaf in leaves:
        edges[(hub, leaf)] = w
        edges[(leaf, "__sink__")] = w
    return edges


def _gen_tree(spec: GeneratorSpec) -> dict[tuple[str, str], float]:
    rng = np.random.default_rng(spec.seed)
    n = spec.size
    names = _names(n)
    parent = [0] * n
    for i in range(1, n):
        parent[i] = int(rng.integers(0, i))
    subtree = np.ones(n, dtype=np.int64)
    for i in range(n - 1, 0, -1):
        subtree[parent[i]] += subtree[i]
    w = spec.weight_scale
    edges = {("__source__", names[0]): float(subtree[0]) * w}
    for i in range(1, n):
        edges[(names[parent[i]], names[i])] = float(subtree[i]) * w
    for i in range(n):
        edges[(names[i], "__sink__")] = w
    return edges


def _gen_cyclic(spec: GeneratorSpec) -> dict[tuple[str, str], float]:
    """Random interior digraph with guaranteed source and sink edges at
    every node, so the result is certified and all D, S are positive.

    Forward edges are windowed to keep the matrix banded; backward
    (cycle-forming) edges stay within disjoint 64-node blocks so
    recurrent components remain small enough for exact per-component
    diagonal computations at any overall size.
    """
    rng = np.random.default_rng(spec.seed)
    n = spec.size
    names = _names(n)
    degree = spec.avg_degree if spec.avg_degree is not None else min(6.0, max(1.0, n / 4))
    fwd_window = max(1, min(n - 1, 200))
    block = 64
    base = max(1, round(spec.weight_scale))
    interior: dict[tuple[int, int], int] = {}
    for i in range(n):
        k = rng.poisson(degree)
        for _ in range(k):
            if rng.random() < spec.recirculation:
                lo = (i // block) * block
                j = int(rng.integers(lo, i + 1))
            else:
                hi = min(n - 1, i + fwd_window)
                if i >= hi:
                    continue
                j = int(rng.integers(i + 1, hi + 1))
            w = int(rng.integers(1, 2 * base + 1))
            interior[(i, j)] = interior.get((i, j), 0) + w
    in_w = np.zeros(n, dtype=np.int64)
    out_w = np.zeros(n, dtype=np.int64)
    for (i, j), w in interior.items():
        out_w[i] += w
        in_w[j] += w
    edges: dict[tuple[str, str], float] = {}
    for (i, j), w in interior.items():
        edges[(names[i], names[j])] = float(w)
    for i in range(n):
        edges[("__source__", names[i])] = float(base + max(0, out_w[i] - in_w[i]))
        edges[(names[i], "__sink__")] = float(base + max(0, in_w[i] - out_w[i]))
    return edges


def _gen_planted(spec: GeneratorSpec) -> dict[tuple[str, str], float]:
    """Descending chain whose dissipation follows D = c * A**exponent
    exactly, noise free, while staying balanced and certified.
    """
    alpha = spec.exponent if spec.exponent is not None else 0.8
    n = spec.size
    if n < 3:
        raise InvalidSpec("planted-dissipation needs size >= 3")
    names = _names(n)
    a_max = 1000.0 * spec.weight_scale
    a_min = a_max / 100.0
    A = a_max * (a_min / a_max) ** (np.arange(n) / (n - 1))
    c = a_min ** (1.0 - alpha) if alpha <= 1.0 else a_max ** (1.0 - alpha)
    D = c * A**alpha
    F = A - D
    edges: dict[tuple[str, str], float] = {}
    S_prev_pass = 0.0
    for i, name in enumerate(names):
        s = A[i] - S_prev_pass
        if s <= 0:
            raise InvalidSpec(f"exponent {alpha} breaks positivity at node {i + 1}")
        edges[("__source__", name)] = float(s)
        edges[(name, "__sink__")] = float(D[i])
        if i + 1 < n:
            edges[(name, names[i + 1])] = float(F[i])
        S_prev_pass = F[i]
    return edges


def _gen_session_log(spec: GeneratorSpec) -> SessionLog:
    """Log whose session-closed network has exactly ``size`` items, each
    with positive direct source flow and dissipation.

    One singleton session per item pins D and S above zero; additional
    multi-item sessions with a heavy-tailed item popularity create the
    interior transitions and audience overlap.
    """
    rng = np.random.default_rng(spec.seed)
    n = spec.size
    names = _names(n)
    sessions: dict[str, list[list[str]]] = {}
    for i, name in enumerate(names):
        sessions[f"u{i + 1:05d}"] = [[name]]
    popularity = 1.0 / np.arange(1, n + 1) ** 0.8
    popularity /= popularity.sum()
    n_extra = max(1, int(round(3 * n * spec.weight_scale)))
    for k in range(n_extra):
        length = 1 + int(rng.geometric(0.35))
        picks = rng.choice(n, size=length, p=popularity)
        sessions[f"x{k + 1:06d}"] = [[names[i] for i in picks]]
    return SessionLog(sessions=sessions)


def generate(spec: GeneratorSpec):
    """Deterministic network (or session log) from a GeneratorSpec."""
    if spec.family == "session-log":
        return _gen_session_log(spec)
    builders = {
        "chain": _gen_chain,
        "star": _gen_star,
        "random-tree": _gen_tree,
        "random-cyclic": _gen_cyclic,
        "planted-dissipation": _gen_planted,
    }
    return build_flow_network(builders[spec.family](spec))


@dataclass
class WalkEstimate:
    """Monte Carlo tallies over interior nodes plus derived estimates.

    visit_* accumulate every arrival (through-flow semantics); fp_*
    record only the first arrival per walker (first-passage semantics);
    absorption counts the last interior node before the sink.
    """

    items: tuple[str, ...]
    n_walkers: int
    seed: int
    total_flow: float
    visit_sum: np.ndarray
    visit_sumsq: np.ndarray
    absorption: np.ndarray
    first_arrival: np.ndarray
    fp_sum: np.ndarray
    fp_sumsq: np.ndarray
    fp_count: np.ndarray
    cap_exceeded: int = 0
    subtree_sum: np.ndarray | None = None

    def through_flow_estimate(self) -> tuple[np.ndarray, np.ndarray]:
        """(A_hat, standard error) from per-walker visit counts."""
        n = self.n_walkers
        mean = self.visit_sum / n
        var = np.maximum(self.visit_sumsq / n - mean**2, 0.0) * n / max(n - 1, 1)
        return self.total_flow * mean, self.total_flow * np.sqrt(var / n)

    def dissipation_estimate(self) -> tuple[np.ndarray, np.ndarray]:
        """(D_hat, binomial standard error) from absorption counts."""
        n = self.n_walkers
        p = self.absorption / n
        return self.total_flow * p, self.total_flow * np.sqrt(p * (1 - p) / n)

    def source_inflow_estimate(self) -> tuple[np.ndarray, np.ndarray]:
        n = self.n_walkers
        p = self.first_arrival / n
        return self.total_flow * p, self.total_flow * np.sqrt(p * (1 - p) / n)

    def source_distance_estimate(self) -> tuple[np.ndarray, np.ndarray]:
        """(l_hat, standard error) over walkers that reached each node."""
        with np.errstate(divide="ignore", invalid="ignore"):
            mean = np.where(self.fp_count > 0, self.fp_sum / self.fp_count, np.nan)
            var = np.where(
                self.fp_count > 1,
                (self.fp_sumsq - self.fp_count * mean**2) / np.maximum(self.fp_count - 1, 1),
                0.0,
            )
            se = np.sqrt(np.maximum(var, 0.0) / np.maximum(self.fp_count, 1))
        return mean, se

    def impact_estimate(self) -> tuple[np.ndarray, np.ndarray] | None:
        """(C_hat, crude standard error); valid on acyclic networks only,
        where impact equals flow times expected onward visit count.
        """
        if self.subtree_sum is None:
            return None
        n = self.n_walkers
        mean = self.subtree_sum / n
        return self.total_flow * mean, self.total_flow * np.sqrt(np.maximum(mean, 0.0) / n)


def _batch_size(n_nodes: int, n_walkers: int) -> int:
    return max(1024, min(n_walkers, _BATCH_ENTRY_BUDGET // max(n_nodes, 1)))


def simulate_walkers(
    net: FlowNetwork,
    n_walkers: int,
    seed: int = 0,
    step_cap: int = STEP_CAP,
    track_subtree: bool = False,
) -> WalkEstimate:
    """Drop seeded random walkers at the source and tally their paths.

    Deterministic given (network, n_walkers, seed): walkers are processed
    in fixed-size batches with SeedSequence-spawned child streams, so the
    result is independent of any execution schedule. Walkers still alive
    at step_cap are counted in cap_exceeded and excluded from absorption.
    """
    if n_walkers < 1:
        raise ValueError("n_walkers must be >= 1")
    report = validate(net)
    if not report.certified:
        raise NotCertified(
            f"network not certified (max residual {report.max_residual:.3g}, "
            f"{len(report.unreachable_from_source)} unreachable, "
            f"{len(report.cannot_reach_sink)} trapped)"
        )
    M = transition_matrix(net).matrix.tocsr()
    n_total = M.shape[0]
    sink = net.sink_index
    data = M.data
    indptr = M.indptr
    indices = M.indices
    cum = np.concatenate([[0.0], np.cumsum(data)])
    row_mass = cum[indptr[1:]] - cum[indptr[:-1]]

    visit_sum = np.zeros(n_total)
    visit_sumsq = np.zeros(n_total)
    absorption = np.zeros(n_total)
    first_arrival = np.zeros(n_total)
    fp_sum = np.zeros(n_total)
    fp_sumsq = np.zeros(n_total)
    fp_count = np.zeros(n_total)
    subtree_sum = np.zeros(n_total) if track_subtree else None
    cap_exceeded = 0

    batch = _batch_size(n_total, n_walkers)
    n_batches = -(-n_walkers // batch)
    streams = np.random.SeedSequence(seed).spawn(n_batches)
    done = 0
    for child in streams:
        b = min(batch, n_walkers - done)
        done += b
        rng = np.random.default_rng(child)
        pos = np.zeros(b, dtype=np.int64)
        alive = np.arange(b)
        visits = np.zeros((b, n_total), dtype=np.int32)
        first_step = np.zeros((b, n_total), dtype=np.int32)
        length = np.zeros(b, dtype=np.int64)
        step = 0
        while alive.size and step < step_cap:
            step += 1
            p = pos[alive]
            u = rng.random(alive.size)
            start = indptr[p]
            target = cum[start] + u * row_mass[p]
            k = np.searchsorted(cum, target, side="right")
            k = np.minimum(np.maximum(k - 1, start), indptr[p + 1] - 1)
            nxt = indices[k]
            pos[alive] = nxt
            hit_sink = nxt == sink
            if hit_sink.any():
                absorption += np.bincount(p[hit_sink], minlength=n_total)
                length[alive[hit_sink]] = step - 1
            arrive = alive[~hit_sink]
            tgt = nxt[~hit_sink]
            if arrive.size:
                if step == 1:
                    first_arrival += np.bincount(tgt, minlength=n_total)
                visits[arrive, tgt] += 1
                new = first_step[arrive, tgt] == 0
                if new.any():
                    nt = tgt[new]
                    fp_sum += step * np.bincount(nt, minlength=n_total)
                    fp_sumsq += step * step * np.bincount(nt, minlength=n_total)
                    fp_count += np.bincount(nt, minlength=n_total)
                    first_step[arrive[new], nt] = step
            alive = alive[~hit_sink]
        if alive.size:
            cap_exceeded += alive.size
            length[alive] = step
        visit_sum += visits.sum(axis=0, dtype=np.float64)
        visit_sumsq += (visits.astype(np.float64) ** 2).sum(axis=0)
        if track_subtree:
            onward = (length[:, None] - first_step + 1) * (first_step > 0)
            subtree_sum += onward.sum(axis=0, dtype=np.float64)
    if cap_exceeded:
        warnings.warn(
            f"{cap_exceeded} walkers hit the {step_cap}-step cap", StepCapWarning
        )

    interior = slice(1, net.n_interior + 1)
    return WalkEstimate(
        items=net.items,
        n_walkers=n_walkers,
        seed=seed,
        total_flow=net.total_source_outflow(),
        visit_sum=visit_sum[interior],
        visit_sumsq=visit_sumsq[interior],
        absorption=absorption[interior],
        first_arrival=first_arrival[interior],
        fp_sum=fp_sum[interior],
        fp_sumsq=fp_sumsq[interior],
        fp_count=fp_count[interior],
        cap_exceeded=cap_exceeded,
        subtree_sum=subtree_sum[interior] if track_subtree else None,
    )


def write_estimates_csv(path, est: WalkEstimate) -> None:
    """Stats-schema mirror with _hat suffixes; impact column only when
    subtree tracking was on.
    """
    import csv as _csv

    a_hat, _ = est.through_flow_estimate()
    d_hat, _ = est.dissipation_estimate()
    s_hat, _ = est.source_inflow_estimate()
    l_hat, _ = est.source_distance_estimate()
    c = est.impact_estimate()
    header = ["item", "A_hat", "D_hat", "S_hat", "F_hat", "l_hat"]
    if c is not None:
        header.append("C_hat")
    with open(path, "w", newline="") as fh:
        writer = _csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for i, item in enumerate(est.items):
            row = [
                item,
                repr(float(a_hat[i])),
                repr(float(d_hat[i])),
                repr(float(s_hat[i])),
                repr(float(a_hat[i] - d_hat[i])),
                "" if math.isnan(l_hat[i]) else repr(float(l_hat[i])),
            ]
            if c is not None:
                row.append(repr(float(c[0][i])))
            writer.writerow(row)


@dataclass(frozen=True)
class Offender:
    item: str
    quantity: str
    z: float
    analytic: float
    estimated: float


@dataclass(frozen=True)
class ComparisonReport:
    """Per-quantity z-score summary of simulator vs analytic results."""

    n_walkers: int
    multiplier: float
    pass_fraction: dict[str, float]
    overall_pass_fraction: float
    passed: bool
    worst: tuple[Offender, ...]

    def to_dict(self) -> dict:
        return {
            "n_walkers": self.n_walkers,
            "multiplier": self.multiplier,
            "pass_fraction": dict(self.pass_fraction),
            "overall_pass_fraction": self.overall_pass_fraction,
            "passed": self.passed,
            "worst": [
                {
                    "item": o.item,
                    "quantity": o.quantity,
                    "z": o.z,
                    "analytic": o.analytic,
                    "estimated": o.estimated,
                }
                for o in self.worst
            ],
        }


def _zscores(analytic: np.ndarray, estimate: np.ndarray, se: np.ndarray) -> np.ndarray:
    diff = estimate - analytic
    z = np.zeros_like(diff)
    with np.errstate(divide="ignore", invalid="ignore"):
        nonzero = se > 0
        z[nonzero] = diff[nonzero] / se[nonzero]
    # zero standard error means a deterministic tally: any real gap is an
    # outright failure, not a borderline z
    exact = ~nonzero & (np.abs(diff) > 1e-9 * np.maximum(np.abs(analytic), 1.0))
    z[exact] = np.inf
    return z


def compare(
    est: WalkEstimate,
    stats: NodeFlowStats,
    source_distance: np.ndarray | None = None,
    multiplier: float = 3.0,
    min_pass_fraction: float = 0.95,
) -> ComparisonReport:
    """z-score the simulator against analytic per-node values.

    Covers through-flow, dissipation, and (when given) source distances;
    a node passes a quantity when |z| <= multiplier, and the report
    passes when every quantity's pass fraction reaches min_pass_fraction.
    """
    if est.items != stats.items:
        raise MismatchedNetworks(
            f"estimate has {len(est.items)} items, stats {len(stats.items)}; "
            "node tables differ"
        )
    z_by: dict[str, np.ndarray] = {}
    a_hat, a_se = est.through_flow_estimate()
    z_by["A"] = _zscores(stats.through_flow, a_hat, a_se)
    d_hat, d_se = est.dissipation_estimate()
    z_by["D"] = _zscores(stats.dissipation, d_hat, d_se)
    if source_distance is not None:
        l_hat, l_se = est.source_distance_estimate()
        mask = np.isfinite(np.asarray(source_distance)) & (est.fp_count > 0)
        z_l = np.zeros(len(est.items))
        z_l[mask] = _zscores(
            np.asarray(source_distance)[mask], l_hat[mask], l_se[mask]
        )
        z_by["l"] = z_l

    fractions = {
        q: float(np.mean(np.abs(z) <= multiplier)) for q, z in z_by.items()
    }
    overall = float(np.mean([fractions[q] for q in fractions]))
    offenders = [
        Offender(
            item=est.items[i],
            quantity=q,
            z=float(z[i]),
            analytic=float(
                {"A": stats.through_flow, "D": stats.dissipation}.get(
                    q, source_distance if source_distance is not None else stats.through_flow
                )[i]
            ),
            estimated=float({"A": a_hat, "D": d_hat}.get(q, est.source_distance_estimate()[0])[i]),
        )
        for q, z in z_by.items()
        for i in np.argsort(-np.abs(z))[:3]
    ]
    offenders.sort(key=lambda o: -abs(o.z) if math.isfinite(o.z) else -math.inf)
    return ComparisonReport(
        n_walkers=est.n_walkers,
        multiplier=multiplier,
        pass_fraction=fractions,
        overall_pass_fraction=overall,
        passed=all(f >= min_pass_fraction for f in fractions.values()),
        worst=tuple(offenders[:5]),
    )


@dataclass(frozen=True)
class EnumerationResult:
    """Exact walk statistics from exhaustive path enumeration on a DAG."""

    items: tuple[str, ...]
    total_flow: float
    visit_prob: np.ndarray
    absorb_prob: np.ndarray
    first_arrival_prob: np.ndarray
    arrival_step_mean: np.ndarray
    subtree_flow: np.ndarray
    n_paths: int

    def through_flow(self) -> np.ndarray:
        return self.total_flow * self.visit_prob

    def dissipation(self) -> np.ndarray:
        return self.total_flow * self.absorb_prob

    def source_distance(self) -> np.ndarray:
        """On a DAG every arrival is a first arrival, so the average
        arrival step is both t_0i and l_0i.
        """
        return self.arrival_step_mean

    def impact(self) -> np.ndarray:
        return self.total_flow * self.subtree_flow


def enumerate_walks(net: FlowNetwork, max_nodes: int = 16) -> EnumerationResult:
    """Walk every source-to-sink path of an acyclic network exactly.

    Each interior arrival at probability q and depth d contributes q to
    the node's visit mass, q*d to its step mass, and q to the running
    subtree mass of every node on the current path. Exponential in
    pathology, so guarded by max_nodes.
    """
    n = net.n_interior
    if n > max_nodes:
        raise ValueError(f"enumeration limited to {max_nodes} interior nodes, got {n}")
    M = transition_matrix(net).matrix.tocsr()
    order, _ = _topological_or_raise(M, net)
    del order
    sink = net.sink_index
    rows: list[list[tuple[int, float]]] = []
    for i in range(M.shape[0]):
        lo, hi = M.indptr[i], M.indptr[i + 1]
        rows.append(list(zip(M.indices[lo:hi].tolist(), M.data[lo:hi].tolist())))

    visit = np.zeros(n + 2)
    absorb = np.zeros(n + 2)
    first = np.zeros(n + 2)
    steps = np.zeros(n + 2)
    subtree = np.zeros(n + 2)
    n_paths = 0
    path: list[int] = []

    def walk(node: int, q: float, depth: int) -> None:
        nonlocal n_paths
        for child, prob in rows[node]:
            mass = q * prob
            if child == sink:
                absorb[node] += mass
                n_paths += 1
                continue
            visit[child] += mass
            steps[child] += mass * (depth + 1)
            if depth == 0:
                first[child] += mass
            path.append(child)
            for member in path:
                subtree[member] += mass
            walk(child, mass, depth + 1)
            path.pop()

    walk(net.source_index, 1.0, 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        mean_steps = np.where(visit > 0, steps / visit, np.nan)
    interior = slice(1, n + 1)
    return EnumerationResult(
        items=net.items,
        total_flow=net.total_source_outflow(),
        visit_prob=visit[interior],
        absorb_prob=absorb[interior],
        first_arrival_prob=first[interior],
        arrival_step_mean=mean_steps[interior],
        subtree_flow=subtree[interior],
        n_paths=n_paths,
    )


def _topological_or_raise(M, net: FlowNetwork):
    """Reject cyclic interiors; enumeration would not terminate."""
    n = net.n_interior
    W = M[1 : n + 1, 1 : n + 1]
    n_comp, labels = csgraph.connected_components(W, directed=True, connection="strong")
    if n_comp != n or W.diagonal().any():
        raise ValueError("network interior has cycles; enumeration requires a DAG")
    return labels, n_comp
