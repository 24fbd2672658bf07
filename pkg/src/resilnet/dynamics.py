"""Closed-loop simulation of the switched double-integrator network.

Plant model: each agent is a double integrator driven by the relative-position
consensus protocol u_i = -alpha * sum_j (p~_i - p~_j) - gamma * v_i, plus an
injected signal for malicious agents.  Stacked, the closed loop is a switched
linear system xdot = A_sigma x + B_A u_A with A_sigma = [[0, I], [-alpha L,
-gamma I]].  Deception attacks enter through named waveforms; DoS attacks
nullify scheduled edge subsets.  Integration is fixed-step RK4 with every
topology boundary aligned to the step grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .graphs import Graph, SwitchingNetwork, laplacian, projection_matrix

_GRID_RTOL = 1e-9


@dataclass(frozen=True)
class Gains:
    alpha: float
    gamma: float

    def __post_init__(self):
        if self.alpha <= 0 or self.gamma <= 0:
            raise ValueError("control gains must be strictly positive")


@dataclass(frozen=True, eq=False)
class SystemState:
    """Stacked relative-position errors and velocities at time t."""

    p_tilde: np.ndarray
    v: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        p = np.asarray(self.p_tilde, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if p.shape != v.shape or p.ndim != 1:
            raise ValueError("p_tilde and v must be 1-D vectors of equal length")
        if not (np.isfinite(p).all() and np.isfinite(v).all()):
            raise ValueError("state entries must be finite")
        object.__setattr__(self, "p_tilde", p)
        object.__setattr__(self, "v", v)

    @property
    def node_count(self) -> int:
        return self.p_tilde.size

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.p_tilde, self.v])


# ---------------------------------------------------------------------------
# Attacks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AttackSignal:
    """Named waveform: ramp (slope*t), constant, or sinusoid."""

    kind: str
    slope: float = 0.0
    value: float = 0.0
    amplitude: float = 0.0
    frequency: float = 0.0
    phase: float = 0.0

    def __post_init__(self):
        if self.kind not in ("ramp", "constant", "sinusoid"):
            raise ValueError(f"unknown signal kind {self.kind!r}")

    def __call__(self, t: float) -> float:
        if self.kind == "ramp":
            return self.slope * t
        if self.kind == "constant":
            return self.value
        return self.amplitude * math.sin(
            2.0 * math.pi * self.frequency * t + self.phase
        )


def ramp(slope: float) -> AttackSignal:
    return AttackSignal(kind="ramp", slope=slope)


def constant(value: float) -> AttackSignal:
    return AttackSignal(kind="constant", value=value)


def sinusoid(amplitude: float, frequency: float, phase: float = 0.0) -> AttackSignal:
    return AttackSignal(
        kind="sinusoid", amplitude=amplitude, frequency=frequency, phase=phase
    )


@dataclass(frozen=True)
class DeceptionAttack:
    agent: int
    activation_time: float
    signal: AttackSignal

    def value(self, t: float) -> float:
        return self.signal(t) if t >= self.activation_time else 0.0


def injection_vector(attacks, n: int, t: float) -> np.ndarray:
    u = np.zeros(n)
    for atk in attacks:
        u[atk.agent] += atk.value(t)
    return u


# ---------------------------------------------------------------------------
# DoS schedules
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DoSRandomSpec:
    """Counted-trials link nullification over a window split into ``trials``
    equal sub-intervals.

    scheme="event": per sub-interval, with probability ``success_prob`` one
    uniformly drawn link is nullified, so the dropout count over the window
    is Binomial(trials, success_prob).  scheme="per_edge": per sub-interval
    every link is independently nullified with probability ``success_prob``
    (a much heavier barrage).
    """

    trials: int
    success_prob: float
    seed: int
    scheme: str = "event"

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not 0.0 <= self.success_prob <= 1.0:
            raise ValueError("success_prob must lie in [0, 1]")
        if self.scheme not in ("event", "per_edge"):
            raise ValueError(f"unknown DoS scheme {self.scheme!r}")


@dataclass(frozen=True)
class DoSInterval:
    start: float
    duration: float
    dropped_edges: tuple | None = None
    random: DoSRandomSpec | None = None

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("DoS duration must be positive")
        if (self.dropped_edges is None) == (self.random is None):
            raise ValueError("specify exactly one of dropped_edges or random")


@dataclass(frozen=True)
class DoSSchedule:
    intervals: tuple

    def realize(self, candidate_edges) -> tuple:
        """Expand to sorted ``(t0, t1, frozenset(dropped))`` sub-intervals."""
        candidate_edges = sorted(
            (min(i, j), max(i, j)) for i, j in candidate_edges
        )
        out = []
        for iv in self.intervals:
            if iv.dropped_edges is not None:
                dropped = frozenset(
                    (min(i, j), max(i, j)) for i, j in iv.dropped_edges
                )
                out.append((iv.start, iv.start + iv.duration, dropped))
                continue
            rng = np.random.default_rng(iv.random.seed)
            dt = iv.duration / iv.random.trials
            for k in range(iv.random.trials):
                if iv.random.scheme == "per_edge":
                    draws = rng.random(len(candidate_edges))
                    dropped = frozenset(
                        e
                        for e, x in zip(candidate_edges, draws)
                        if x < iv.random.success_prob
                    )
                else:
                    hit = rng.random() < iv.random.success_prob
                    pick = int(rng.integers(0, len(candidate_edges)))
                    dropped = (
                        frozenset((candidate_edges[pick],)) if hit else frozenset()
                    )
                out.append((iv.start + k * dt, iv.start + (k + 1) * dt, dropped))
        out.sort(key=lambda seg: seg[0])
        for (a0, a1, _), (b0, _, _) in zip(out, out[1:]):
            if b0 < a1 - 1e-12:
                raise ConfigurationError("DoS intervals must not overlap")
        return tuple(out)

    def total_declared_duration(self, t: float, window: float) -> float:
        """Declared attack time inside [t, t+window] (realized disconnection
        time is measured on the simulated trace instead)."""
        total = 0.0
        for iv in self.intervals:
            lo = max(t, iv.start)
            hi = min(t + window, iv.start + iv.duration)
            total += max(0.0, hi - lo)
        return total


# ---------------------------------------------------------------------------
# Closed-loop matrices and control
# ---------------------------------------------------------------------------


def closed_loop_matrix(g: Graph, gains: Gains) -> np.ndarray:
    """A_sigma = [[0, I], [-alpha L, -gamma I]]; col(1, 0) is always in its
    nullspace."""
    return closed_loop_from_laplacian(laplacian(g), gains)


def closed_loop_from_laplacian(lap: np.ndarray, gains: Gains) -> np.ndarray:
    n = lap.shape[0]
    top = np.hstack([np.zeros((n, n)), np.eye(n)])
    bottom = np.hstack([-gains.alpha * lap, -gains.gamma * np.eye(n)])
    return np.vstack([top, bottom])


def control_input(
    state: SystemState, g: Graph, gains: Gains, attacks=(), t: float | None = None
) -> np.ndarray:
    """Per-agent control: nominal 1-hop consensus term plus any active
    injection."""
    t = state.t if t is None else t
    lap = laplacian(g)
    u = -gains.alpha * (lap @ state.p_tilde) - gains.gamma * state.v
    return u + injection_vector(attacks, state.node_count, t)


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SimulationTrace:
    """Fixed-step record of a closed-loop run.

    ``segments`` lists the realized constant-topology intervals as
    ``(t0, t1, mode_index, edges, dos_active)``; they cover [0, horizon]
    exactly and are what graph metrics over the *realized* network use.
    """

    t: np.ndarray
    p_tilde: np.ndarray  # (steps+1, N)
    v: np.ndarray
    mode_index: np.ndarray
    dos_active: np.ndarray
    segments: tuple
    step_h: float

    @property
    def node_count(self) -> int:
        return self.p_tilde.shape[1]

    def state_at(self, k: int) -> SystemState:
        return SystemState(self.p_tilde[k], self.v[k], float(self.t[k]))

    def final_state(self) -> SystemState:
        return self.state_at(len(self.t) - 1)


def _on_grid(value: float, h: float) -> bool:
    k = round(value / h)
    return abs(value - k * h) <= _GRID_RTOL * max(1.0, abs(value))


def build_edge_timeline(
    net: SwitchingNetwork,
    dos: DoSSchedule | None,
    horizon: float,
    step_h: float,
    removed_edges=frozenset(),
) -> tuple:
    """Merge schedule and DoS boundaries into constant-edge segments.

    Schedule breakpoints must fall on the step grid; DoS sub-interval
    boundaries are snapped to it.  Returns ``(t0, t1, mode, edges,
    dos_active)`` tuples covering [0, horizon].
    """
    for t, _ in net.schedule:
        if not _on_grid(t, step_h):
            raise ConfigurationError(
                f"schedule breakpoint {t} is not a multiple of step {step_h}"
            )
    removed_edges = frozenset((min(i, j), max(i, j)) for i, j in removed_edges)
    union_edges = set()
    for g in net.modes:
        union_edges.update(g.edges)
    drops = dos.realize(sorted(union_edges)) if dos is not None else ()
    cuts = {0.0, horizon}
    cuts.update(t for t, _ in net.schedule if t < horizon)
    for a, b, _ in drops:
        for x in (a, b):
            snapped = round(x / step_h) * step_h
            if 0.0 < snapped < horizon:
                cuts.add(snapped)
    cuts = sorted(cuts)
    timeline = []
    for a, b in zip(cuts, cuts[1:]):
        mid = 0.5 * (a + b)
        mode = net.mode_at(mid)
        edges = set(net.modes[mode].edges)
        dos_now = False
        for d0, d1, dropped in drops:
            if d0 - 1e-12 <= mid <= d1 + 1e-12:
                dos_now = True
                edges -= dropped
                break
        edges -= removed_edges
        timeline.append((a, b, mode, frozenset(edges), dos_now))
    return tuple(timeline)


def _rk4_step(a_mat, x, b_fun, t, h):
    k1 = a_mat @ x + b_fun(t)
    k2 = a_mat @ (x + 0.5 * h * k1) + b_fun(t + 0.5 * h)
    k3 = a_mat @ (x + 0.5 * h * k2) + b_fun(t + 0.5 * h)
    k4 = a_mat @ (x + h * k3) + b_fun(t + h)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def simulate(
    net: SwitchingNetwork,
    gains: Gains,
    initial: SystemState,
    attacks=(),
    dos: DoSSchedule | None = None,
    step_h: float = 1e-3,
    horizon: float | None = None,
) -> SimulationTrace:
    """Fixed-step RK4 integration of the switched closed loop.

    The active mode (with DoS-nullified edges) is constant within each step;
    deception inputs are evaluated at the RK4 stage times.
    """
    n = net.node_count
    if initial.node_count != n:
        raise ConfigurationError("initial state dimension != network size")
    horizon = net.horizon if horizon is None else horizon
    if horizon > net.horizon + 1e-12:
        raise ConfigurationError("horizon exceeds the network schedule")
    if not _on_grid(horizon, step_h):
        raise ConfigurationError("horizon must be a multiple of the step")
    steps = round(horizon / step_h)
    timeline = build_edge_timeline(net, dos, horizon, step_h)

    t_arr = np.arange(steps + 1) * step_h
    p_arr = np.empty((steps + 1, n))
    v_arr = np.empty((steps + 1, n))
    mode_arr = np.empty(steps + 1, dtype=int)
    dos_arr = np.zeros(steps + 1, dtype=bool)
    x = initial.stacked().copy()
    p_arr[0], v_arr[0] = x[:n], x[n:]

    def forcing(t):
        b = np.zeros(2 * n)
        b[n:] = injection_vector(attacks, n, t)
        return b

    seg_idx = 0
    a_mat = None
    for k in range(steps):
        t = k * step_h
        while seg_idx + 1 < len(timeline) and t >= timeline[seg_idx][1] - 1e-12:
            seg_idx += 1
            a_mat = None
        t0, t1, mode, edges, dos_now = timeline[seg_idx]
        if a_mat is None:
            a_mat = closed_loop_matrix(Graph(n, tuple(edges)), gains)
        mode_arr[k] = mode
        dos_arr[k] = dos_now
        x = _rk4_step(a_mat, x, forcing, t, step_h)
        p_arr[k + 1], v_arr[k + 1] = x[:n], x[n:]
    mode_arr[steps] = timeline[-1][2]
    dos_arr[steps] = timeline[-1][4]
    return SimulationTrace(
        t=t_arr,
        p_tilde=p_arr,
        v=v_arr,
        mode_index=mode_arr,
        dos_active=dos_arr,
        segments=timeline,
        step_h=step_h,
    )


def output_vector(state: SystemState) -> np.ndarray:
    """Consensus output Y = col(Q p~, v); zero iff all pairwise formation
    errors and velocities vanish."""
    q = projection_matrix(state.node_count)
    return np.concatenate([q @ state.p_tilde, state.v])


def output_series(trace: SimulationTrace) -> np.ndarray:
    q = projection_matrix(trace.node_count)
    return np.hstack([trace.p_tilde @ q.T, trace.v])


# ---------------------------------------------------------------------------
# Stability constants
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StabilityConstants:
    eta: float
    lambda_chi: float
    lambda_x: float
    kappa_x: float
    kappa_u: float
    beta: float
    mu: float
    window_T: float
    n_agents: int

    def envelope(self, t, t0: float, x0_norm: float):
        """Exponential output envelope kappa_x * exp(-lambda_x (t-t0)) * |x0|."""
        return self.kappa_x * np.exp(-self.lambda_x * (np.asarray(t) - t0)) * x0_norm


def stability_constants(
    mu: float,
    window: float,
    gains: Gains,
    n_agents: int,
    beta: float = 1.0,
    lambda_x_fraction: float = 0.9,
) -> StabilityConstants:
    """Finite-gain stability constants for a (mu, T)-PE-connected network.

    eta = -1/(2T) ln(1 - (a/g) mu T / (1 + (a/g)^2 N^2 T^2)), lambda_chi =
    eta e^{-2 eta T}, and the output gains come from the coordinate change
    C = [[I/gamma, -Q/gamma], [0, I]].
    """
    if mu <= 0:
        raise ValueError("degenerate connectivity: stability constants need mu > 0")
    if mu > n_agents + 1e-9:
        raise ValueError("mu cannot exceed the agent count")
    if not 0.0 < lambda_x_fraction < 1.0:
        raise ValueError("lambda_x_fraction must lie in (0, 1)")
    ratio = gains.alpha / gains.gamma
    arg = 1.0 - (ratio * mu * window) / (1.0 + ratio**2 * n_agents**2 * window**2)
    eta = -math.log(arg) / (2.0 * window)
    lambda_chi = eta * math.exp(-2.0 * eta * window)
    lambda_x = lambda_x_fraction * lambda_chi
    q = projection_matrix(n_agents)
    c = np.block(
        [
            [np.eye(n_agents - 1) / gains.gamma, -q / gains.gamma],
            [np.zeros((n_agents, n_agents - 1)), np.eye(n_agents)],
        ]
    )
    c_norm = float(np.linalg.norm(c, 2))
    c_inv_norm = float(np.linalg.norm(np.linalg.inv(c), 2))
    hi = max(1.0 / lambda_chi, beta)
    kappa_x = c_norm * math.sqrt(hi / min(gains.gamma / (gains.alpha * n_agents), beta)) * c_inv_norm
    kappa_u = c_norm * hi / (lambda_x * min(gains.gamma / (2.0 * gains.alpha * n_agents), beta / 2.0))
    return StabilityConstants(
        eta=eta,
        lambda_chi=lambda_chi,
        lambda_x=lambda_x,
        kappa_x=kappa_x,
        kappa_u=kappa_u,
        beta=beta,
        mu=mu,
        window_T=window,
        n_agents=n_agents,
    )


def damping_condition_holds(consts: StabilityConstants, gains: Gains) -> bool:
    """Positive-definiteness of the Lyapunov damping matrix (the sufficient
    'large gamma' condition; deliberately conservative)."""
    n = consts.n_agents
    off = -(gains.alpha / gains.gamma) * (consts.beta + 1.0 / consts.lambda_chi) * n / 2.0
    m = np.array(
        [
            [1.0 - consts.lambda_x / consts.lambda_chi, off],
            [off, consts.beta * (gains.gamma - gains.alpha * n / gains.gamma - consts.lambda_x)],
        ]
    )
    return bool(m[0, 0] > 0 and np.linalg.det(m) > 0)


# ---------------------------------------------------------------------------
# Trace metrics
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ConsensusMetrics:
    t: np.ndarray
    max_position_gap: np.ndarray
    max_speed: np.ndarray


def consensus_metrics(trace: SimulationTrace, cooperative=None) -> ConsensusMetrics:
    """Max pairwise position gap and max speed over the cooperative set."""
    idx = (
        np.arange(trace.node_count)
        if cooperative is None
        else np.array(sorted(cooperative), dtype=int)
    )
    p = trace.p_tilde[:, idx]
    v = trace.v[:, idx]
    return ConsensusMetrics(
        t=trace.t,
        max_position_gap=p.max(axis=1) - p.min(axis=1),
        max_speed=np.abs(v).max(axis=1),
    )


def realized_disconnection_time(trace: SimulationTrace, window: float) -> float:
    """Worst-case time per window during which the realized instantaneous
    graph was disconnected (the measurable form of the DoS budget)."""
    from .graphs import algebraic_connectivity, laplacian as lap_of

    disconnected = []
    n = trace.node_count
    for t0, t1, _, edges, _ in trace.segments:
        g = Graph(n, tuple(edges))
        if algebraic_connectivity(lap_of(g)) <= 0.0:
            disconnected.append((t0, t1))
    if not disconnected:
        return 0.0
    starts = [max(0.0, seg[0] - window) for seg in disconnected] + [
        seg[0] for seg in disconnected
    ]
    worst = 0.0
    horizon = trace.t[-1]
    for t in starts:
        t = min(max(t, 0.0), max(horizon - window, 0.0))
        total = sum(
            max(0.0, min(t + window, b) - max(t, a)) for a, b in disconnected
        )
        worst = max(worst, total)
    return worst
