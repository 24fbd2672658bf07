"""Reconfigurable local attack detectors built on 2-hop proximity dynamics.

Each agent reconstructs the subsystem spanned by itself, its 1-hop and its
2-hop neighbors (positions of all of them plus its own velocity are
measurable).  A Luenberger-style observer with a structured gain tracks that
subsystem; whatever the model cannot explain -- couplings into deeper nodes
plus injected attack signals -- shows up in the measurement residual, which a
per-neighbor threshold turns into an attack-free / attacked verdict.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .dynamics import Gains
from .errors import ConfigurationError, DesignFailureError
from .graphs import RANK_RTOL, Graph, khop_neighbors, laplacian

GAIN_LADDER = (0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0, 500.0, 1000.0)
HURWITZ_MARGIN = 0.1


@dataclass(frozen=True, eq=False)
class TwoHopView:
    """An agent's locally reconstructible subsystem in one communication mode.

    ``members`` (owner first) are the agents whose positions the owner
    measures; ``a_model`` is the known part of their joint dynamics.  The
    coupling blocks collect everything acting on the members that the owner
    cannot see (edges among 2-hop nodes and into the remainder); they are
    analysis-only and never enter the observer.
    """

    owner: int
    members: tuple
    rest: tuple
    a_model: np.ndarray
    c_meas: np.ndarray
    coupling_members: np.ndarray
    coupling_rest: np.ndarray
    gains: Gains
    one_hop_only: bool = False

    @property
    def size(self) -> int:
        return len(self.members)

    def member_index(self, node: int) -> int:
        return self.members.index(node)

    def measure(self, p_tilde: np.ndarray, v: np.ndarray) -> np.ndarray:
        idx = np.array(self.members)
        return np.concatenate([p_tilde[idx], [v[self.owner]]])

    def member_state(self, p_tilde: np.ndarray, v: np.ndarray) -> np.ndarray:
        idx = np.array(self.members)
        return np.concatenate([p_tilde[idx], v[idx]])

    def rest_state(self, p_tilde: np.ndarray, v: np.ndarray) -> np.ndarray:
        idx = np.array(self.rest, dtype=int)
        return np.concatenate([p_tilde[idx], v[idx]])

    def coupling(self, p_tilde: np.ndarray, v: np.ndarray) -> np.ndarray:
        """True value of the unknown perturbation rho(x_I, x_R)."""
        return self.coupling_members @ self.member_state(
            p_tilde, v
        ) + self.coupling_rest @ self.rest_state(p_tilde, v)

    def b_attack(self, suspected) -> np.ndarray:
        """Input columns of malicious members (analysis only)."""
        cols = [j for j in suspected if j in self.members]
        m = len(self.members)
        b = np.zeros((2 * m, len(cols)))
        for k, j in enumerate(cols):
            b[m + self.member_index(j), k] = 1.0
        return b


def _model_blocks(g: Graph, owner: int, one_hop_only: bool):
    """Member ordering is (owner, then sorted ids) so that the estimate's
    numbering survives mode switches that change edges but not membership."""
    one = khop_neighbors(g, owner, 1)
    if one_hop_only:
        member_set = {owner} | set(one)
    else:
        member_set = {owner} | set(one) | set(khop_neighbors(g, owner, 2))
    members = (owner, *sorted(member_set - {owner}))
    rest = tuple(sorted(set(range(g.node_count)) - member_set))
    index = {v: k for k, v in enumerate(members)}
    m = len(members)
    lap = laplacian(g)
    order = np.array(members + rest)
    perm = lap[np.ix_(order, order)]
    lmm = perm[:m, :m]
    lmr = perm[:m, m:]
    # the model keeps only the edges the owner can infer: its own star, plus
    # (for the 2-hop view) edges among 1-hop neighbors and from 1-hop out to
    # 2-hop nodes -- never edges between two strictly-2-hop nodes
    l_model = np.zeros((m, m))
    two_only = member_set - {owner} - set(one)
    for u, w in g.edges:
        if u not in member_set or w not in member_set:
            continue
        if one_hop_only and owner not in (u, w):
            continue
        if u in two_only and w in two_only:
            continue
        a, b = index[u], index[w]
        l_model[a, a] += 1.0
        l_model[b, b] += 1.0
        l_model[a, b] -= 1.0
        l_model[b, a] -= 1.0
    return members, rest, l_model, lmm, lmr


def two_hop_view(
    g: Graph, owner: int, gains: Gains, one_hop_only: bool = False
) -> TwoHopView:
    members, rest, l_model, lmm, lmr = _model_blocks(g, owner, one_hop_only)
    m, r = len(members), len(rest)
    a_model = np.block(
        [
            [np.zeros((m, m)), np.eye(m)],
            [-gains.alpha * l_model, -gains.gamma * np.eye(m)],
        ]
    )
    c_meas = np.zeros((m + 1, 2 * m))
    c_meas[:m, :m] = np.eye(m)
    c_meas[m, m] = 1.0  # owner velocity; owner is first in the ordering
    coupling_members = np.zeros((2 * m, 2 * m))
    coupling_members[m:, :m] = -gains.alpha * (lmm - l_model)
    coupling_rest = np.zeros((2 * m, 2 * r))
    coupling_rest[m:, :r] = -gains.alpha * lmr
    return TwoHopView(
        owner=owner,
        members=members,
        rest=rest,
        a_model=a_model,
        c_meas=c_meas,
        coupling_members=coupling_members,
        coupling_rest=coupling_rest,
        gains=gains,
        one_hop_only=one_hop_only,
    )


def pbh_observability(view: TwoHopView) -> bool:
    """PBH rank test of (A_model, C) at every eigenvalue of A_model."""
    a, c = view.a_model, view.c_meas
    dim = a.shape[0]
    for lam in np.linalg.eigvals(a):
        stacked = np.vstack([lam * np.eye(dim) - a, c.astype(complex)])
        sv = np.linalg.svd(stacked, compute_uv=False)
        tol = max(stacked.shape) * sv[0] * RANK_RTOL
        if np.sum(sv > tol) < dim:
            return False
    return True


# ---------------------------------------------------------------------------
# Gain design
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ObserverGain:
    h_matrix: np.ndarray
    k1: float
    kappa_e: float | None
    lambda_e: float | None
    spectral_abscissa: float | None


def gain_matrix(view: TwoHopView, k1: float, k_consensus: float = 1.5) -> np.ndarray:
    """Structured gain [[0, 0], [H, k1 e1]] with H = k1 I + k_c 11^T/|I|.

    H is symmetric PD; the rank-one term damps the shared (consensus
    direction) estimation error much faster than the per-node terms, which
    keeps an attack's residual signature localized to the injecting
    neighbor instead of leaking into every component.
    """
    m = view.size
    h = np.zeros((2 * m, m + 1))
    h[m:, :m] = k1 * np.eye(m) + k_consensus * np.ones((m, m)) / m
    h[m, m] = k1
    return h


def decay_envelope(a_bar: np.ndarray) -> tuple:
    """Certified (kappa_e, lambda_e) with ||exp(A t)|| <= kappa_e e^{-lambda_e t}.

    Normal matrices get the exact envelope (kappa_e = 1, spectral abscissa);
    otherwise the Lyapunov solution of A^T P + P A = -I yields lambda_e =
    1 / (2 lambda_max(P)) and kappa_e = sqrt(cond(P)).
    """
    scale = max(1.0, float(np.linalg.norm(a_bar, "fro")))
    if np.linalg.norm(a_bar @ a_bar.T - a_bar.T @ a_bar, "fro") <= 1e-10 * scale**2:
        abscissa = float(np.max(np.linalg.eigvals(a_bar).real))
        if abscissa >= 0:
            raise DesignFailureError("matrix is not Hurwitz")
        return 1.0, -abscissa
    p = scipy.linalg.solve_continuous_lyapunov(a_bar.T, -np.eye(a_bar.shape[0]))
    p = 0.5 * (p + p.T)
    eigs = np.linalg.eigvalsh(p)
    if eigs[0] <= 0:
        raise DesignFailureError("Lyapunov solution not positive definite")
    lambda_e = 1.0 / (2.0 * eigs[-1])
    kappa_e = math.sqrt(eigs[-1] / eigs[0])
    return kappa_e, lambda_e


def design_gain(
    view: TwoHopView,
    margin: float = HURWITZ_MARGIN,
    validate_grid: int = 0,
    k_consensus: float = 1.5,
) -> ObserverGain:
    """Deterministic gain design: escalate k1 until the Hurwitz margin holds,
    then certify the decay envelope via the Lyapunov route.

    ``validate_grid`` > 0 additionally samples ||exp(A t)|| on [0, 10] and
    checks it stays under the envelope.
    """
    for k1 in GAIN_LADDER:
        h = gain_matrix(view, k1, k_consensus)
        a_bar = view.a_model - h @ view.c_meas
        abscissa = float(np.max(np.linalg.eigvals(a_bar).real))
        if abscissa <= -margin:
            kappa_e, lambda_e = decay_envelope(a_bar)
            gain = ObserverGain(
                h_matrix=h,
                k1=k1,
                kappa_e=kappa_e,
                lambda_e=lambda_e,
                spectral_abscissa=abscissa,
            )
            if validate_grid:
                ok, worst = validate_envelope(a_bar, gain, points=validate_grid)
                if not ok:
                    raise DesignFailureError(
                        f"sampled exponential exceeded envelope by {worst:.3e}"
                    )
            return gain
    raise DesignFailureError("gain ladder exhausted without a Hurwitz margin")


def validate_envelope(
    a_bar: np.ndarray, gain: ObserverGain, t_max: float = 10.0, points: int = 1000
) -> tuple:
    """Sample ||exp(A t)|| on a uniform grid against the certified envelope.

    Returns (ok, worst_excess); stepping by a precomputed propagator keeps
    the cost at one small matmul + SVD per grid point.
    """
    dt = t_max / (points - 1)
    prop = scipy.linalg.expm(a_bar * dt)
    cur = np.eye(a_bar.shape[0])
    worst = 0.0
    for k in range(points):
        t = k * dt
        bound = gain.kappa_e * math.exp(-gain.lambda_e * t)
        norm = float(np.linalg.norm(cur, 2))
        worst = max(worst, norm - bound * (1.0 + 1e-9))
        cur = cur @ prop
    return worst <= 0.0, worst


# ---------------------------------------------------------------------------
# Observer state machine
# ---------------------------------------------------------------------------


class ObserverState:
    """Mutable per-agent detector: estimate, gain, decay constants, reinit clock.

    ``w_budget`` bounds the estimation error right after a reinitialization
    and anchors the analytic threshold.
    """

    def __init__(
        self,
        view: TwoHopView,
        gain: ObserverGain,
        w_budget: float,
        t0: float,
        retain_grace: float = 1.0,
    ):
        self.view = view
        self.gain = gain
        self.w_budget = float(w_budget)
        self.retain_grace = float(retain_grace)
        self.x_hat = np.zeros(2 * view.size)
        self.last_reinit = float(t0)
        self.last_model_change = float(t0)
        self.t = float(t0)
        self._departed: dict = {}
        self._refresh_propagators()

    def _refresh_propagators(self):
        self._a_bar = self.view.a_model - self.gain.h_matrix @ self.view.c_meas

    def reconfigure(self, view: TwoHopView, gain: ObserverGain, keep_state: bool = False):
        """Swap in the model of a new mode.

        ``keep_state`` carries the running estimate across the switch, which
        is only meaningful when the member set (and hence the state
        numbering) is unchanged; the threshold clock restarts either way.
        """
        if keep_state and view.members != self.view.members:
            raise ConfigurationError("cannot keep state across a membership change")
        self.view = view
        self.gain = gain
        if not keep_state:
            self.x_hat = np.zeros(2 * view.size)
        self.last_model_change = self.t
        self._refresh_propagators()

    def reinit(self, y: np.ndarray, t: float):
        """Masked restart: copy measured positions and the owner's velocity,
        zero the unmeasured velocities."""
        m = self.view.size
        self.x_hat = np.zeros(2 * m)
        self.x_hat[:m] = y[:m]
        self.x_hat[m] = y[m]
        self.last_reinit = float(t)
        self.last_model_change = float(t)
        self.t = float(t)

    def remap(self, view: TwoHopView, gain: ObserverGain, y: np.ndarray, t: float):
        """Warm reconfiguration across a membership change: members retained
        from the old view keep their position and velocity estimates (the
        residual signature survives the switch); members that recently left
        and return within ``retain_grace`` are restored from the departure
        cache; genuinely new members get the masked fill (measured position,
        zero velocity)."""
        old_view, old_x = self.view, self.x_hat
        old_m = old_view.size
        old_index = {node: k for k, node in enumerate(old_view.members)}
        new_members = set(view.members)
        for node, j in old_index.items():
            if node not in new_members:
                self._departed[node] = (old_x[j], self.t)
        self._departed = {
            node: rec
            for node, rec in self._departed.items()
            if self.t - rec[1] <= self.retain_grace
        }
        m = len(view.members)
        x = np.zeros(2 * m)
        for k, node in enumerate(view.members):
            j = old_index.get(node)
            if j is not None:
                x[k] = old_x[j]
                x[m + k] = old_x[old_m + j]
            elif node in self._departed:
                # restore the cached position estimate: the accumulated
                # residual signature survives the absence; the velocity
                # estimate restarts at zero like a masked fill (re-estimating
                # it from scratch is stable, dead-reckoning it is not)
                x[k] = self._departed.pop(node)[0]
            else:
                x[k] = y[k]
        self.view = view
        self.gain = gain
        self.x_hat = x
        self.last_model_change = float(t)
        self.t = float(t)
        self._refresh_propagators()

    def step(self, y_start: np.ndarray, h: float, y_end: np.ndarray | None = None):
        """One RK4 step of x^dot = A x^ + H (y - C x^).

        The measurement at the midpoint stage is linearly interpolated when
        the end-of-step sample is supplied, otherwise held constant.
        """
        if y_end is None:
            y_end = y_start
        y_mid = 0.5 * (y_start + y_end)
        a, hm = self._a_bar, self.gain.h_matrix
        x = self.x_hat
        k1 = a @ x + hm @ y_start
        k2 = a @ (x + 0.5 * h * k1) + hm @ y_mid
        k3 = a @ (x + 0.5 * h * k2) + hm @ y_mid
        k4 = a @ (x + h * k3) + hm @ y_end
        self.x_hat = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        self.t += h

    def residual(self, y: np.ndarray) -> np.ndarray:
        if y.shape[0] != self.view.c_meas.shape[0]:
            raise ConfigurationError("measurement dimension mismatch")
        return y - self.view.c_meas @ self.x_hat

    def neighbor_residuals(self, y: np.ndarray, neighbors) -> np.ndarray:
        r = self.residual(y)
        return np.array([r[self.view.member_index(j)] for j in neighbors])


def observer_step(
    obs: ObserverState,
    y: np.ndarray,
    mode_changed: bool,
    step_h: float,
    y_end: np.ndarray | None = None,
) -> np.ndarray:
    """Advance one step (reinitializing first on a mode change) and return the
    residual against the freshest measurement."""
    if mode_changed:
        obs.reinit(y, obs.t)
    obs.step(y, step_h, y_end)
    return obs.residual(y if y_end is None else y_end)


# ---------------------------------------------------------------------------
# Thresholds and hypothesis testing
# ---------------------------------------------------------------------------


def residual_threshold(
    t: float,
    t_k: float,
    t0: float,
    kappa_e: float,
    lambda_e: float,
    kappa_r: float,
    w_budget: float,
    x0_norm: float,
    lambda_x: float,
) -> float:
    """Attack-free residual bound for t >= t_k >= t0 within one mode:

    eps = kappa_e w e^{-lambda_e (t-t_k)}
          + (kappa_r/lambda_e) |x0| e^{-lambda_x (t_k-t0)} (1 - e^{-lambda_e (t-t_k)})
    """
    if not t >= t_k >= t0:
        raise ValueError("need t >= t_k >= t0")
    decay = math.exp(-lambda_e * (t - t_k))
    return kappa_e * w_budget * decay + (kappa_r / lambda_e) * x0_norm * math.exp(
        -lambda_x * (t_k - t0)
    ) * (1.0 - decay)


@dataclass(frozen=True)
class ThresholdRule:
    """Threshold policy: the analytic bound, a constant, or a + b e^{-c t}."""

    kind: str = "analytic"
    value: float = 0.95
    amplitude: float = 0.0
    rate: float = 1.0
    offset: float = 0.0

    def __post_init__(self):
        if self.kind not in ("analytic", "constant", "exponential"):
            raise ValueError(f"unknown threshold kind {self.kind!r}")

    def evaluate(
        self,
        t: float,
        obs: ObserverState,
        t0: float = 0.0,
        x0_norm: float = 0.0,
        consts=None,
    ) -> float:
        if self.kind == "constant":
            return self.value
        if self.kind == "exponential":
            return self.amplitude * math.exp(-self.rate * t) + self.offset
        if consts is None:
            raise ConfigurationError("analytic threshold needs stability constants")
        if obs.gain.kappa_e is None or obs.gain.lambda_e is None:
            raise ConfigurationError("analytic threshold needs certified decay constants")
        kappa_r = consts.kappa_x * obs.gain.kappa_e * obs.view.gains.alpha
        return residual_threshold(
            t,
            obs.last_model_change,
            t0,
            obs.gain.kappa_e,
            obs.gain.lambda_e,
            kappa_r,
            obs.w_budget,
            x0_norm,
            consts.lambda_x,
        )


@dataclass(frozen=True)
class ResidualRecord:
    """Per-neighbor residual snapshot of one detector at one sample time."""

    t: float
    owner: int
    neighbors: tuple
    residuals: tuple
    thresholds: tuple
    verdicts: tuple  # "null" | "attacked"


def hypothesis_test(record: ResidualRecord, prior_flags=frozenset()) -> frozenset:
    """Flag neighbor j iff |r^{i,j}| strictly exceeds its threshold; verdicts
    are sticky across calls via ``prior_flags``."""
    flagged = set(prior_flags)
    for j, r, eps in zip(record.neighbors, record.residuals, record.thresholds):
        if abs(r) > eps:
            flagged.add(j)
    return frozenset(flagged)


def make_record(
    t: float, owner: int, neighbors, residuals, thresholds, flagged
) -> ResidualRecord:
    return ResidualRecord(
        t=t,
        owner=owner,
        neighbors=tuple(neighbors),
        residuals=tuple(float(r) for r in residuals),
        thresholds=tuple(float(e) for e in thresholds),
        verdicts=tuple("attacked" if j in flagged else "null" for j in neighbors),
    )
