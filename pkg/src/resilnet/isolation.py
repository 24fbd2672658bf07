"""Concurrent detection, isolation, and resilient cooperation.

The rescue loop advances the plant one step at a time; every cooperative
agent then steps its local observer against fresh measurements, tests each
1-hop neighbor's residual against its threshold, and permanently severs any
link whose residual exceeds it.  Isolation is a state-dependent switch: the
pruned network is what both the plant and every observer see from the next
tick on.  A trimming-based DP-MSR baseline is included for comparison runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import (
    DoSSchedule,
    Gains,
    SimulationTrace,
    StabilityConstants,
    SystemState,
    _rk4_step,
    build_edge_timeline,
    closed_loop_matrix,
    injection_vector,
    stability_constants,
)
from .errors import ConfigurationError
from .graphs import Graph, SwitchingNetwork, pe_margin, remove_nodes, PEReport
from .observers import (
    ObserverGain,
    ObserverState,
    ThresholdRule,
    design_gain,
    gain_matrix,
    make_record,
    two_hop_view,
)


@dataclass(frozen=True)
class IsolationEvent:
    t: float
    detector: int
    isolated: int
    residual: float
    threshold: float


@dataclass(frozen=True)
class DetectorSettings:
    """Observer-side knobs of a rescue run.

    ``reinit_policy`` controls what happens to an observer's estimate when
    its model changes: "retain" (default) carries retained members' estimates
    through membership changes and mask-fills only newly added ones;
    "membership" performs the full masked restart on any membership change;
    "model" restarts on any model change (most conservative).  The threshold
    clock restarts on every model change under all three.
    """

    threshold: ThresholdRule = ThresholdRule(kind="constant", value=0.95)
    w_budget: float | None = None  # None = auto from the certified reinit bound
    dwell: int = 1
    one_hop_only: bool = False
    pe_window: float = 1.0
    gain_k1: float = 0.3
    gain_kc: float = 1.5
    residual_log_stride: int = 10
    reinit_policy: str = "retain"
    retain_grace: float = 1.0

    def __post_init__(self):
        if self.reinit_policy not in ("retain", "membership", "model"):
            raise ValueError(f"unknown reinit policy {self.reinit_policy!r}")


@dataclass(frozen=True, eq=False)
class RescueProblem:
    """Materialized inputs of one detection-and-cooperation run."""

    net: SwitchingNetwork
    gains: Gains
    initial: SystemState
    attacks: tuple = ()
    dos: DoSSchedule | None = None
    step_h: float = 1e-3
    horizon: float | None = None
    detector: DetectorSettings = field(default_factory=DetectorSettings)

    @property
    def malicious(self) -> frozenset:
        return frozenset(a.agent for a in self.attacks)

    @property
    def cooperative(self) -> tuple:
        return tuple(sorted(set(range(self.net.node_count)) - self.malicious))


@dataclass(frozen=True, eq=False)
class RescueRun:
    """Outcome log of one run: who isolated whom, and the pruned edge set."""

    problem: RescueProblem
    events: tuple
    removed_edges: frozenset
    cooperative: tuple
    consts: StabilityConstants | None

    def isolated_by(self, malicious: int) -> frozenset:
        return frozenset(e.detector for e in self.events if e.isolated == malicious)


@dataclass(frozen=True, eq=False)
class RescueResult:
    trace: SimulationTrace
    run: RescueRun
    residual_log: tuple  # ResidualRecord entries at the logging stride


def _auto_w_budget(problem: RescueProblem, consts: StabilityConstants | None) -> float:
    """Reinit error budget: after a masked restart the error is at most the
    stacked velocity norm, bounded attack-free by sqrt(N) kappa_x |x0|."""
    v0 = float(np.max(np.abs(problem.initial.v), initial=0.0))
    if consts is None:
        return max(2.0 * v0, 1.0)
    x0 = float(np.linalg.norm(problem.initial.stacked()))
    n = problem.net.node_count
    return max(2.0 * v0, float(np.sqrt(n)) * consts.kappa_x * x0)


def run_rescue(problem: RescueProblem) -> RescueResult:
    """Algorithm core: plant step, observer steps, hypothesis tests, pruning.

    Detectors run on the ground-truth cooperative agents (malicious agents do
    not execute the defense).  A verdict against neighbor j removes edge
    (i, j) from every mode starting at the next tick and reconfigures every
    observer whose model changed.
    """
    net, gains, settings = problem.net, problem.gains, problem.detector
    n = net.node_count
    horizon = problem.horizon if problem.horizon is not None else net.horizon
    h = problem.step_h
    steps = round(horizon / h)
    if abs(steps * h - horizon) > 1e-9 * max(1.0, horizon):
        raise ConfigurationError("horizon must be a multiple of the step")

    consts = None
    x0_norm = float(np.linalg.norm(problem.initial.stacked()))
    if settings.threshold.kind == "analytic":
        report = pe_margin(net, settings.pe_window)
        if report.mu <= 0:
            raise ConfigurationError(
                "analytic thresholds require a positive PE margin"
            )
        consts = stability_constants(report.mu, settings.pe_window, gains, n)
    w_budget = (
        settings.w_budget
        if settings.w_budget is not None
        else _auto_w_budget(problem, consts)
    )
    certified = settings.threshold.kind == "analytic"

    base_timeline = build_edge_timeline(net, problem.dos, horizon, h)
    detectors = problem.cooperative
    removed: set = set()
    observers: dict[int, ObserverState] = {}
    gain_cache: dict = {}
    dwell_counters: dict = {}
    flagged: dict[int, frozenset] = {i: frozenset() for i in detectors}
    events: list[IsolationEvent] = []
    residual_log: list = []

    t_arr = np.arange(steps + 1) * h
    p_arr = np.empty((steps + 1, n))
    v_arr = np.empty((steps + 1, n))
    mode_arr = np.empty(steps + 1, dtype=int)
    dos_arr = np.zeros(steps + 1, dtype=bool)
    x = problem.initial.stacked().copy()
    p_arr[0], v_arr[0] = x[:n], x[n:]

    def forcing(t):
        b = np.zeros(2 * n)
        b[n:] = injection_vector(problem.attacks, n, t)
        return b

    def observer_gain(view) -> ObserverGain:
        # the fast structured gain depends only on the view size; certified
        # designs depend on the whole model
        key = (
            (view.owner, view.a_model.tobytes()) if certified else view.size
        )
        gain = gain_cache.get(key)
        if gain is None:
            if certified:
                gain = design_gain(view, k_consensus=settings.gain_kc)
            else:
                gain = ObserverGain(
                    h_matrix=gain_matrix(view, settings.gain_k1, settings.gain_kc),
                    k1=settings.gain_k1,
                    kappa_e=None,
                    lambda_e=None,
                    spectral_abscissa=None,
                )
            gain_cache[key] = gain
        return gain

    realized_segments: list = []
    seg_idx = 0
    current_edges: frozenset | None = None
    a_mat = None
    graph_eff = None
    neighbor_map: dict = {}

    for k in range(steps):
        t = k * h
        while seg_idx + 1 < len(base_timeline) and t >= base_timeline[seg_idx][1] - 1e-12:
            seg_idx += 1
        _, _, mode, base_edges, dos_now = base_timeline[seg_idx]
        eff_edges = frozenset(e for e in base_edges if e not in removed)
        if eff_edges != current_edges:
            current_edges = eff_edges
            graph_eff = Graph(n, tuple(sorted(eff_edges)))
            a_mat = closed_loop_matrix(graph_eff, gains)
            neighbor_map = {i: graph_eff.neighbors(i) for i in detectors}
            for i in detectors:
                view = two_hop_view(graph_eff, i, gains, settings.one_hop_only)
                obs = observers.get(i)
                if (
                    obs is not None
                    and view.members == obs.view.members
                    and np.array_equal(view.a_model, obs.view.a_model)
                ):
                    continue
                gain = observer_gain(view)
                if obs is None:
                    obs = ObserverState(view, gain, w_budget, t, settings.retain_grace)
                    observers[i] = obs
                    obs.reinit(view.measure(x[:n], x[n:]), t)
                elif settings.reinit_policy != "model" and view.members == obs.view.members:
                    # pure edge change: swap the model, keep the estimate
                    obs.reconfigure(view, gain, keep_state=True)
                elif settings.reinit_policy == "retain":
                    obs.remap(view, gain, view.measure(x[:n], x[n:]), t)
                else:
                    obs.reconfigure(view, gain)
                    obs.reinit(view.measure(x[:n], x[n:]), t)
            realized_segments.append([t, t + h, mode, eff_edges, dos_now])
        else:
            realized_segments[-1][1] = t + h

        mode_arr[k] = mode
        dos_arr[k] = dos_now

        y_starts = {i: observers[i].view.measure(x[:n], x[n:]) for i in detectors}
        x = _rk4_step(a_mat, x, forcing, t, h)
        p_arr[k + 1], v_arr[k + 1] = x[:n], x[n:]
        t_next = (k + 1) * h

        log_now = (k + 1) % settings.residual_log_stride == 0
        for i in detectors:
            obs = observers[i]
            y_end = obs.view.measure(x[:n], x[n:])
            obs.step(y_starts[i], h, y_end)
            nbrs = neighbor_map[i]
            if not nbrs:
                continue
            res = obs.neighbor_residuals(y_end, nbrs)
            eps = np.array(
                [
                    settings.threshold.evaluate(
                        t_next, obs, t0=0.0, x0_norm=x0_norm, consts=consts
                    )
                ]
                * len(nbrs)
            )
            exceeded = np.abs(res) > eps
            new_flags = set()
            for j, r, e, hit in zip(nbrs, res, eps, exceeded):
                key = (i, j)
                if hit:
                    dwell_counters[key] = dwell_counters.get(key, 0) + 1
                    if dwell_counters[key] >= settings.dwell:
                        new_flags.add(j)
                else:
                    dwell_counters[key] = 0
            prior = flagged[i]
            for j in sorted(new_flags - prior):
                edge = (min(i, j), max(i, j))
                if edge not in removed:
                    removed.add(edge)
                events.append(
                    IsolationEvent(
                        t=t_next,
                        detector=i,
                        isolated=j,
                        residual=float(res[nbrs.index(j)]),
                        threshold=float(eps[nbrs.index(j)]),
                    )
                )
            flagged[i] = frozenset(prior | new_flags)
            if log_now:
                residual_log.append(
                    make_record(t_next, i, nbrs, res, eps, flagged[i])
                )

    mode_arr[steps] = realized_segments[-1][2]
    dos_arr[steps] = realized_segments[-1][4]
    trace = SimulationTrace(
        t=t_arr,
        p_tilde=p_arr,
        v=v_arr,
        mode_index=mode_arr,
        dos_active=dos_arr,
        segments=tuple((a, b, m, e, d) for a, b, m, e, d in realized_segments),
        step_h=h,
    )
    run = RescueRun(
        problem=problem,
        events=tuple(events),
        removed_edges=frozenset(removed),
        cooperative=detectors,
        consts=consts,
    )
    return RescueResult(trace=trace, run=run, residual_log=tuple(residual_log))


def post_isolation_connectivity(run: RescueRun, window: float | None = None) -> PEReport:
    """PE margin of the cooperative network after all isolations: drop the
    ground-truth malicious nodes and every permanently removed edge."""
    problem = run.problem
    window = window if window is not None else problem.detector.pe_window
    modes = tuple(g.drop_edges(run.removed_edges) for g in problem.net.modes)
    pruned = SwitchingNetwork(modes, problem.net.schedule, problem.net.horizon)
    if problem.malicious:
        pruned = remove_nodes(pruned, problem.malicious).network
    return pe_margin(pruned, window)


def isolation_complete(run: RescueRun, effective: Graph) -> bool:
    """Every malicious agent with a cooperative 1-hop neighbor on the
    effective graph was isolated by all such neighbors."""
    malicious = run.problem.malicious
    for m in sorted(malicious):
        coop_nbrs = set(effective.neighbors(m)) - malicious
        if coop_nbrs and not coop_nbrs <= run.isolated_by(m):
            return False
    return True


# ---------------------------------------------------------------------------
# DP-MSR baseline
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DPMSRConfig:
    f_max: int
    sample_time: float = 1e-3
    gains: Gains = field(default_factory=lambda: Gains(alpha=1.0, gamma=3.0))

    def __post_init__(self):
        if self.f_max < 0:
            raise ValueError("f_max must be >= 0")
        if self.sample_time <= 0:
            raise ValueError("sample_time must be positive")


def _trimmed_control(p: np.ndarray, v: np.ndarray, nbrs, i: int, f: int, gains: Gains):
    diffs = sorted(((p[i] - p[j], j) for j in nbrs), key=lambda x: (x[0], x[1]))
    kept = diffs[f : len(diffs) - f] if len(diffs) > 2 * f else []
    return -gains.alpha * sum(d for d, _ in kept) - gains.gamma * v[i]


def dp_msr_run(problem: RescueProblem, cfg: DPMSRConfig) -> SimulationTrace:
    """Zero-order-hold discretization of the consensus protocol with MSR-style
    trimming: each cooperative agent sorts its neighbors' relative-position
    values, discards the f_max largest and smallest, and applies the control
    to the remainder.  Malicious agents run the untrimmed protocol plus their
    injection."""
    net = problem.net
    n = net.node_count
    horizon = problem.horizon if problem.horizon is not None else net.horizon
    ts = cfg.sample_time
    steps = round(horizon / ts)
    timeline = build_edge_timeline(net, problem.dos, horizon, ts)
    malicious = problem.malicious

    t_arr = np.arange(steps + 1) * ts
    p_arr = np.empty((steps + 1, n))
    v_arr = np.empty((steps + 1, n))
    mode_arr = np.empty(steps + 1, dtype=int)
    dos_arr = np.zeros(steps + 1, dtype=bool)
    p = problem.initial.p_tilde.copy()
    v = problem.initial.v.copy()
    p_arr[0], v_arr[0] = p, v

    seg_idx = 0
    nbrs_of = None
    for k in range(steps):
        t = k * ts
        while seg_idx + 1 < len(timeline) and t >= timeline[seg_idx][1] - 1e-12:
            seg_idx += 1
            nbrs_of = None
        _, _, mode, edges, dos_now = timeline[seg_idx]
        if nbrs_of is None:
            g = Graph(n, tuple(sorted(edges)))
            nbrs_of = [g.neighbors(i) for i in range(n)]
        mode_arr[k] = mode
        dos_arr[k] = dos_now
        u = np.empty(n)
        for i in range(n):
            if i in malicious:
                u[i] = (
                    -cfg.gains.alpha * sum(p[i] - p[j] for j in nbrs_of[i])
                    - cfg.gains.gamma * v[i]
                    + injection_vector(problem.attacks, n, t)[i]
                )
            else:
                u[i] = _trimmed_control(p, v, nbrs_of[i], i, cfg.f_max, cfg.gains)
        # exact ZOH update of the double integrator
        p = p + ts * v + 0.5 * ts * ts * u
        v = v + ts * u
        p_arr[k + 1], v_arr[k + 1] = p, v
    mode_arr[steps] = timeline[-1][2]
    dos_arr[steps] = timeline[-1][4]
    return SimulationTrace(
        t=t_arr,
        p_tilde=p_arr,
        v=v_arr,
        mode_index=mode_arr,
        dos_active=dos_arr,
        segments=timeline,
        step_h=ts,
    )
