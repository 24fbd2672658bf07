"""Time-varying communication graphs, Laplacian algebra, and robustness metrics.

The module covers the static side of the toolkit: simple undirected graphs,
finite mode libraries with piecewise-constant switching schedules,
connectivity in the integral ("persistently exciting") sense, exact
r-robustness and vertex-connectivity computation, and the proximity-based
Laplacian partition used by the local observers.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CapabilityError, ConfigurationError

# Eigenvalues within ZERO_TOL * ||L|| of zero are treated as zero; rank
# decisions use singular values against max_dim * sigma_max * RANK_RTOL.
ZERO_TOL = 1e-9
RANK_RTOL = 1e-12

R_ROBUSTNESS_EXACT_CAP = 12
VERTEX_CONNECTIVITY_EXACT_CAP = 12


def _canonical_edges(edges) -> tuple:
    canon = []
    for i, j in edges:
        i, j = int(i), int(j)
        if i == j:
            raise ValueError(f"self-loop ({i},{j}) not allowed")
        canon.append((i, j) if i < j else (j, i))
    canon.sort()
    for a, b in itertools.pairwise(canon):
        if a == b:
            raise ValueError(f"duplicate edge {a}")
    return tuple(canon)


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph on nodes ``0..node_count-1``.

    Edges are stored canonically as sorted ``(i, j)`` pairs with ``i < j``.
    """

    node_count: int
    edges: tuple

    def __post_init__(self):
        if self.node_count < 2:
            raise ValueError("graph needs at least 2 nodes")
        object.__setattr__(self, "edges", _canonical_edges(self.edges))
        for i, j in self.edges:
            if not (0 <= i < self.node_count and 0 <= j < self.node_count):
                raise ValueError(f"edge ({i},{j}) out of range for N={self.node_count}")

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.node_count, self.node_count))
        for i, j in self.edges:
            a[i, j] = a[j, i] = 1.0
        return a

    def neighbors(self, i: int) -> tuple:
        return tuple(sorted({j for e in self.edges for j in e if i in e} - {i}))

    def degree(self, i: int) -> int:
        return sum(1 for e in self.edges if i in e)

    def has_edge(self, i: int, j: int) -> bool:
        return (min(i, j), max(i, j)) in set(self.edges)

    def is_connected(self) -> bool:
        return _components(self) == 1

    def subgraph(self, nodes) -> "Graph":
        """Induced subgraph, renumbered by the sorted order of ``nodes``."""
        kept = sorted(set(nodes))
        index = {v: k for k, v in enumerate(kept)}
        edges = [
            (index[i], index[j]) for i, j in self.edges if i in index and j in index
        ]
        return Graph(len(kept), tuple(edges))

    def drop_edges(self, removed) -> "Graph":
        removed = {(min(i, j), max(i, j)) for i, j in removed}
        return Graph(self.node_count, tuple(e for e in self.edges if e not in removed))


def complete_graph(n: int) -> Graph:
    return Graph(n, tuple(itertools.combinations(range(n), 2)))


def path_graph(n: int) -> Graph:
    return Graph(n, tuple((k, k + 1) for k in range(n - 1)))


def star_graph(n: int, hub: int = 0) -> Graph:
    return Graph(n, tuple((hub, k) for k in range(n) if k != hub))


def union_graph(graphs) -> Graph:
    graphs = list(graphs)
    n = graphs[0].node_count
    edges = set()
    for g in graphs:
        if g.node_count != n:
            raise ValueError("graphs must share node_count")
        edges.update(g.edges)
    return Graph(n, tuple(sorted(edges)))


def _components(g: Graph) -> int:
    seen = [False] * g.node_count
    nbrs = {i: [] for i in range(g.node_count)}
    for i, j in g.edges:
        nbrs[i].append(j)
        nbrs[j].append(i)
    count = 0
    for root in range(g.node_count):
        if seen[root]:
            continue
        count += 1
        stack = [root]
        seen[root] = True
        while stack:
            u = stack.pop()
            for w in nbrs[u]:
                if not seen[w]:
                    seen[w] = True
                    stack.append(w)
    return count


@dataclass(frozen=True)
class SwitchingNetwork:
    """Finite library of graph modes plus a right-continuous switching schedule.

    ``schedule`` is an ordered tuple of ``(start_time, mode_index)`` with the
    first start at t=0; mode k is active on ``[t_k, t_{k+1})``.
    """

    modes: tuple
    schedule: tuple
    horizon: float

    def __post_init__(self):
        if not self.modes:
            raise ValueError("at least one mode required")
        n = self.modes[0].node_count
        if n < 3:
            raise ValueError("switching network needs N >= 3 agents")
        if any(g.node_count != n for g in self.modes):
            raise ValueError("all modes must share node_count")
        sched = tuple((float(t), int(m)) for t, m in self.schedule)
        object.__setattr__(self, "schedule", sched)
        times = [t for t, _ in sched]
        if not times or times[0] != 0.0:
            raise ValueError("schedule must start at t=0")
        if any(b <= a for a, b in itertools.pairwise(times)):
            raise ValueError("schedule times must be strictly increasing")
        if any(not 0 <= m < len(self.modes) for _, m in sched):
            raise ValueError("schedule references unknown mode index")
        if self.horizon <= times[-1]:
            raise ValueError("horizon must exceed the last switch time")

    @property
    def node_count(self) -> int:
        return self.modes[0].node_count

    def mode_at(self, t: float) -> int:
        idx = 0
        for start, m in self.schedule:
            if start <= t:
                idx = m
            else:
                break
        return idx

    def graph_at(self, t: float) -> Graph:
        return self.modes[self.mode_at(t)]

    def breakpoints(self) -> tuple:
        return tuple(t for t, _ in self.schedule)

    def segments(self, t0: float, t1: float):
        """Yield ``(start, end, mode_index)`` covering [t0, t1] exactly."""
        if t0 < -1e-12 or t1 > self.horizon + 1e-12:
            raise ConfigurationError(
                f"window [{t0}, {t1}] outside horizon [0, {self.horizon}]"
            )
        cuts = [t0] + [t for t, _ in self.schedule if t0 < t < t1] + [t1]
        for a, b in itertools.pairwise(cuts):
            if b > a:
                yield a, b, self.mode_at(a)


def static_network(g: Graph, horizon: float) -> SwitchingNetwork:
    return SwitchingNetwork((g,), ((0.0, 0),), horizon)


# ---------------------------------------------------------------------------
# Laplacian algebra
# ---------------------------------------------------------------------------


def laplacian(g: Graph) -> np.ndarray:
    """Unit-weight Laplacian L = D - A; PSD with L @ 1 = 0 and ||L|| <= N."""
    a = g.adjacency()
    return np.diag(a.sum(axis=1)) - a


def projection_matrix(n: int) -> np.ndarray:
    """Helmert-style orthonormal basis of the hyperplane orthogonal to 1_n.

    Returns Q of shape (n-1, n) with Q @ 1 = 0, Q @ Q.T = I and
    Q.T @ Q = I - (1/n) 1 1^T.
    """
    if n < 2:
        raise ValueError("projection matrix needs n >= 2")
    q = np.zeros((n - 1, n))
    for k in range(1, n):
        q[k - 1, :k] = 1.0
        q[k - 1, k] = -float(k)
        q[k - 1] /= math.sqrt(k * (k + 1))
    return q


def algebraic_connectivity(lap: np.ndarray) -> float:
    """Second-smallest eigenvalue of a symmetric zero-row-sum matrix.

    Values within ``ZERO_TOL * ||L||`` of zero are clamped to exactly 0.
    """
    lap = np.asarray(lap, dtype=float)
    if lap.shape[0] != lap.shape[1] or not np.allclose(lap, lap.T, atol=1e-12):
        raise ValueError("input must be a symmetric matrix")
    vals = np.linalg.eigvalsh(lap)
    lam2 = float(vals[1])
    scale = max(1.0, float(np.linalg.norm(lap, 2)))
    return 0.0 if abs(lam2) <= ZERO_TOL * scale else lam2


def integral_laplacian(net: SwitchingNetwork, t: float, window: float) -> np.ndarray:
    """Duration-weighted mean (1/T) * integral of L_sigma over [t, t+T].

    Exact for the piecewise-constant schedule; symmetric PSD with zero row
    sums.
    """
    if window <= 0:
        raise ValueError("window must be positive")
    acc = np.zeros((net.node_count, net.node_count))
    for a, b, m in net.segments(t, t + window):
        acc += (b - a) * laplacian(net.modes[m])
    return acc / window


def integral_adjacency(net: SwitchingNetwork, t: float, window: float) -> np.ndarray:
    if window <= 0:
        raise ValueError("window must be positive")
    acc = np.zeros((net.node_count, net.node_count))
    for a, b, m in net.segments(t, t + window):
        acc += (b - a) * net.modes[m].adjacency()
    return acc / window


def _window_starts(net: SwitchingNetwork, window: float, grid_points: int = 100):
    """Window starts: schedule breakpoints, breakpoints - T, and a uniform grid.

    The integrand is piecewise constant, so the infimum over window starts is
    attained on this finite set once it contains every breakpoint and every
    breakpoint minus T.
    """
    last = net.horizon - window
    if last < -1e-12:
        raise ConfigurationError("horizon shorter than the PE window")
    last = max(last, 0.0)
    starts = set(np.linspace(0.0, last, grid_points))
    for t, _ in net.schedule:
        for cand in (t, t - window):
            if -1e-12 <= cand <= last + 1e-12:
                starts.add(min(max(cand, 0.0), last))
    return sorted(starts)


@dataclass(frozen=True, eq=False)
class PEReport:
    """Connectivity of a switching network in the integral sense.

    ``mu`` is the uniform-in-time margin min_t lambda_min(Q Lbar(t,T) Q^T)
    clamped at 0; ``lambda2_integral`` is lambda_2 of the averaged Laplacian
    at the minimizing window start; ``equivalence_gap`` is the largest
    observed |lambda_min(Q Lbar Q^T) - lambda_2(Lbar)| over the sampled
    windows.  ``effective_graph`` keeps the edges whose time-averaged
    adjacency stays positive uniformly over window starts; ``delta_floor``
    is the smallest such uniform average (0 when there are no edges).
    """

    mu: float
    window_T: float
    effective_graph: Graph
    effective_weights: np.ndarray = field(repr=False)
    lambda2_integral: float
    delta_floor: float
    equivalence_gap: float


def pe_margin(net: SwitchingNetwork, window: float, grid_points: int = 100) -> PEReport:
    """PE margin of the network for windows of length ``window``.

    Verifies the spectral equivalence lambda_min(Q Lbar Q^T) = lambda_2(Lbar)
    on every sampled window to 1e-9.
    """
    n = net.node_count
    q = projection_matrix(n)
    mu = math.inf
    lam2_at_min = math.inf
    gap = 0.0
    min_weights = np.full((n, n), math.inf)
    for t in _window_starts(net, window, grid_points):
        lbar = integral_laplacian(net, t, window)
        lam_min = float(np.linalg.eigvalsh(q @ lbar @ q.T)[0])
        lam2 = algebraic_connectivity(lbar)
        gap = max(gap, abs(max(lam_min, 0.0) - lam2))
        if lam_min < mu:
            mu = lam_min
            lam2_at_min = lam2
        min_weights = np.minimum(min_weights, integral_adjacency(net, t, window))
    scale = max(1.0, float(n))
    if abs(mu) <= ZERO_TOL * scale:
        mu = 0.0
    positive = min_weights > ZERO_TOL
    edges = tuple(
        (i, j) for i in range(n) for j in range(i + 1, n) if positive[i, j]
    )
    weights = np.where(positive, min_weights, 0.0)
    delta_floor = float(min(weights[i, j] for i, j in edges)) if edges else 0.0
    return PEReport(
        mu=max(mu, 0.0),
        window_T=window,
        effective_graph=Graph(n, edges),
        effective_weights=weights,
        lambda2_integral=lam2_at_min,
        delta_floor=delta_floor,
        equivalence_gap=gap,
    )


def effective_edge_set(
    net: SwitchingNetwork, window: float, delta: float, grid_points: int = 100
) -> Graph:
    """Edges whose time-averaged adjacency is >= delta for every window start."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    n = net.node_count
    min_weights = np.full((n, n), math.inf)
    for t in _window_starts(net, window, grid_points):
        min_weights = np.minimum(min_weights, integral_adjacency(net, t, window))
    edges = tuple(
        (i, j)
        for i in range(n)
        for j in range(i + 1, n)
        if min_weights[i, j] >= delta - 1e-12
    )
    return Graph(n, edges)


# ---------------------------------------------------------------------------
# Robustness metrics
# ---------------------------------------------------------------------------


def vertex_connectivity(g: Graph) -> int:
    """Exact vertex connectivity; complete graphs return N-1 by convention.

    Brute force over cut candidates up to N=12; max-flow (networkx) above.
    """
    n = g.node_count
    if not g.is_connected():
        return 0
    if len(g.edges) == n * (n - 1) // 2:
        return n - 1
    if n > VERTEX_CONNECTIVITY_EXACT_CAP:
        import networkx as nx

        h = nx.Graph()
        h.add_nodes_from(range(n))
        h.add_edges_from(g.edges)
        return int(nx.node_connectivity(h))
    for k in range(1, n - 1):
        for cut in itertools.combinations(range(n), k):
            remainder = g.subgraph(set(range(n)) - set(cut))
            if not remainder.is_connected():
                return k
    return n - 1


def r_robustness(g: Graph) -> int:
    """Exact r-robustness by enumeration of disjoint subset pairs.

    r(G) is the largest r such that for every pair of nonempty disjoint
    subsets, some node in one of them has at least r neighbors outside its
    own subset.  O(3^N); capped at N <= 12.
    """
    n = g.node_count
    if n > R_ROBUSTNESS_EXACT_CAP:
        raise CapabilityError(
            f"exact r-robustness capped at N={R_ROBUSTNESS_EXACT_CAP}; "
            "use a construction certificate for larger graphs"
        )
    if not g.is_connected():
        return 0
    adj_bits = [0] * n
    for i, j in g.edges:
        adj_bits[i] |= 1 << j
        adj_bits[j] |= 1 << i
    full = (1 << n) - 1
    best = math.ceil(n / 2)

    def pair_reach(s1: int, s2: int, need: int) -> int:
        reach = 0
        for s in (s1, s2):
            outside = full & ~s
            m = s
            while m:
                low = m & -m
                i = low.bit_length() - 1
                reach = max(reach, (adj_bits[i] & outside).bit_count())
                if reach >= need:
                    return reach
                m ^= low
        return reach

    for s1 in range(1, full + 1):
        low1 = s1 & -s1
        comp = full & ~s1
        # only pair with subsets whose members sit above s1's lowest bit;
        # every unordered pair is still visited once
        comp &= ~(low1 - 1)
        s2 = comp
        while s2:
            reach = pair_reach(s1, s2, best)
            if reach < best:
                best = reach
                if best == 0:
                    return 0
            s2 = (s2 - 1) & comp
    return best


def khop_neighbors(g: Graph, i: int, k: int) -> frozenset:
    """Nodes j != i reachable from i by a path of exactly k edges (k in {1, 2}).

    With this convention a 1-hop neighbor that also closes a triangle (or
    shares another common neighbor) with i appears in the 2-hop set as well.
    """
    if k not in (1, 2):
        raise ValueError("k must be 1 or 2")
    one = set(g.neighbors(i))
    if k == 1:
        return frozenset(one)
    two = set()
    for m in one:
        two.update(g.neighbors(m))
    two.discard(i)
    return frozenset(two)


@dataclass(frozen=True, eq=False)
class LaplacianPartition:
    """Proximity-based partition of the Laplacian from node ``owner``'s view.

    Node ordering is [ {owner} + 1-hop | 2-hop-only | rest ]; ``lprime`` is
    the star Laplacian of the owner with its 1-hop neighbors, ``lrest`` is
    the block encoding the 2-hop nodes' connections back into the 1-hop set,
    and the tilde blocks absorb everything the owner cannot infer from those
    proximity graphs: l11 = lprime + ltilde and l22 = lrest + ldoubletilde.
    """

    owner: int
    one_hop_set: tuple  # owner first, then its sorted 1-hop neighbors
    two_hop_set: tuple  # 2-hop reachable nodes outside the 1-hop set
    rest_set: tuple
    l11: np.ndarray
    l12: np.ndarray
    l21: np.ndarray
    l22: np.ndarray
    l23: np.ndarray
    l32: np.ndarray
    l33: np.ndarray
    lprime: np.ndarray
    ltilde: np.ndarray
    ldoubletilde: np.ndarray
    lrest: np.ndarray

    @property
    def ordering(self) -> tuple:
        return self.one_hop_set + self.two_hop_set + self.rest_set

    def two_hop_members(self) -> tuple:
        return self.one_hop_set + self.two_hop_set

    def two_hop_laplacian(self) -> np.ndarray:
        """Laplacian of the 2-hop proximity graph on ``two_hop_members()``."""
        top = np.hstack([self.l11, self.l12])
        bottom = np.hstack([self.l21, self.lrest])
        return np.vstack([top, bottom])

    def reassemble(self) -> np.ndarray:
        """Permute the blocks back to the original node ordering (bit-exact)."""
        blocks = np.block(
            [
                [self.l11, self.l12, np.zeros((len(self.one_hop_set), len(self.rest_set)))],
                [self.l21, self.l22, self.l23],
                [np.zeros((len(self.rest_set), len(self.one_hop_set))), self.l32, self.l33],
            ]
        )
        order = np.array(self.ordering)
        inv = np.empty_like(order)
        inv[order] = np.arange(order.size)
        return blocks[np.ix_(inv, inv)]


def partition_laplacian(g: Graph, owner: int) -> LaplacianPartition:
    if not 0 <= owner < g.node_count:
        raise ValueError(f"node {owner} out of range")
    one = sorted(khop_neighbors(g, owner, 1))
    v_prime = (owner, *one)
    two_only = tuple(sorted(khop_neighbors(g, owner, 2) - set(v_prime)))
    rest = tuple(
        sorted(set(range(g.node_count)) - set(v_prime) - set(two_only))
    )
    order = np.array(v_prime + two_only + rest)
    lap = laplacian(g)[np.ix_(order, order)]
    n1, n2 = len(v_prime), len(two_only)
    l11 = lap[:n1, :n1]
    l12 = lap[:n1, n1 : n1 + n2]
    l21 = lap[n1 : n1 + n2, :n1]
    l22 = lap[n1 : n1 + n2, n1 : n1 + n2]
    l23 = lap[n1 : n1 + n2, n1 + n2 :]
    l32 = lap[n1 + n2 :, n1 : n1 + n2]
    l33 = lap[n1 + n2 :, n1 + n2 :]
    lprime = np.zeros((n1, n1))
    lprime[0, 0] = len(one)
    for k in range(1, n1):
        lprime[k, k] = 1.0
        lprime[0, k] = lprime[k, 0] = -1.0
    # 2-hop nodes' degrees within the 2-hop proximity graph count only their
    # edges back into the 1-hop set
    lrest = np.diag(-l21.sum(axis=1)) if n2 else np.zeros((0, 0))
    return LaplacianPartition(
        owner=owner,
        one_hop_set=v_prime,
        two_hop_set=two_only,
        rest_set=rest,
        l11=l11,
        l12=l12,
        l21=l21,
        l22=l22,
        l23=l23,
        l32=l32,
        l33=l33,
        lprime=lprime,
        ltilde=l11 - lprime,
        ldoubletilde=l22 - lrest,
        lrest=lrest,
    )


# ---------------------------------------------------------------------------
# Bound chain and removal resilience
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundChainReport:
    """ceil(mu_hat/2) <= r <= kappa <= N-1 on the effective graph."""

    mu: float
    mu_hat: float
    r: int
    kappa: int
    upper: int
    is_complete: bool
    chain_holds: bool
    noncomplete_bound_holds: bool


def check_bound_chain(
    net: SwitchingNetwork, window: float, grid_points: int = 100
) -> BoundChainReport:
    report = pe_margin(net, window, grid_points)
    eff = report.effective_graph
    r = r_robustness(eff)
    kappa = vertex_connectivity(eff)
    n = eff.node_count
    is_complete = len(eff.edges) == n * (n - 1) // 2
    mu_hat = report.lambda2_integral
    chain = (
        math.ceil(mu_hat / 2 - 1e-12) <= r <= kappa <= n - 1
        and mu_hat >= report.mu - 1e-9
    )
    noncomplete = True if is_complete else (mu_hat <= kappa + 1e-9)
    return BoundChainReport(
        mu=report.mu,
        mu_hat=mu_hat,
        r=r,
        kappa=kappa,
        upper=n - 1,
        is_complete=is_complete,
        chain_holds=chain,
        noncomplete_bound_holds=noncomplete,
    )


@dataclass(frozen=True)
class ReducedNetwork:
    network: SwitchingNetwork
    kept_nodes: tuple
    index_map: dict  # old node id -> new node id


def remove_nodes(net: SwitchingNetwork, removed) -> ReducedNetwork:
    removed = set(removed)
    if not removed <= set(range(net.node_count)):
        raise ValueError("removed nodes out of range")
    kept = tuple(sorted(set(range(net.node_count)) - removed))
    if not kept:
        raise ValueError("cannot remove every node")
    if len(kept) < 3:
        raise ValueError("fewer than 3 agents would remain")
    modes = tuple(g.subgraph(kept) for g in net.modes)
    reduced = SwitchingNetwork(modes, net.schedule, net.horizon)
    return ReducedNetwork(
        network=reduced,
        kept_nodes=kept,
        index_map={old: new for new, old in enumerate(kept)},
    )


# ---------------------------------------------------------------------------
# Certified r-robust construction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CertifiedGraph:
    """Graph plus the r-robustness certificate earned by its construction."""

    graph: Graph
    certified_r: int
    seed_clique: int
    attachment_order: tuple


def generate_r_robust_preferential(
    n: int, r: int, seed, max_degree: int | None = None
) -> CertifiedGraph:
    """Grow an r-robust graph by preferential attachment from a K_{2r+1} seed.

    Each added node attaches to r distinct existing nodes drawn with
    probability proportional to degree, which preserves r-robustness of the
    seed clique; the certificate removes any need for enumeration.  An
    optional degree cap redirects attachments away from saturated nodes.
    """
    if r < 1:
        raise ValueError("r must be >= 1")
    clique = 2 * r + 1
    if n < clique:
        raise ValueError(f"need n >= 2r+1 = {clique}")
    if max_degree is not None and max_degree < clique - 1:
        raise ValueError("max_degree below the seed clique degree")
    rng = np.random.default_rng(seed)
    edges = set(itertools.combinations(range(clique), 2))
    degree = [clique - 1] * clique + [0] * (n - clique)
    attachments = []
    for new in range(clique, n):
        eligible = [
            v
            for v in range(new)
            if max_degree is None or degree[v] < max_degree
        ]
        if len(eligible) < r:
            raise ValueError("degree cap leaves too few attachment targets")
        weights = np.array([degree[v] for v in eligible], dtype=float)
        weights /= weights.sum()
        chosen = rng.choice(eligible, size=r, replace=False, p=weights)
        for v in sorted(int(c) for c in chosen):
            edges.add((min(v, new), max(v, new)))
            degree[v] += 1
            degree[new] += 1
        attachments.append((new, tuple(sorted(int(c) for c in chosen))))
    return CertifiedGraph(
        graph=Graph(n, tuple(sorted(edges))),
        certified_r=r,
        seed_clique=clique,
        attachment_order=tuple(attachments),
    )


def adversary_classification(g: Graph, malicious) -> tuple:
    """(F_total, F_local) of a malicious set on a static (effective) graph."""
    malicious = set(malicious)
    f_total = len(malicious)
    f_local = 0
    for i in range(g.node_count):
        if i in malicious:
            continue
        f_local = max(f_local, len(malicious & set(g.neighbors(i))))
    return f_total, f_local
