import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from resilnet.dynamics import Gains, SystemState, closed_loop_matrix, simulate
from resilnet.errors import ConfigurationError
from resilnet.graphs import (
    Graph,
    complete_graph,
    path_graph,
    star_graph,
    static_network,
)
from resilnet.observers import (
    ObserverState,
    ThresholdRule,
    decay_envelope,
    design_gain,
    gain_matrix,
    hypothesis_test,
    make_record,
    observer_step,
    pbh_observability,
    residual_threshold,
    two_hop_view,
    validate_envelope,
)
from resilnet.scenarios import random_connected_graph

GAINS = Gains(1.0, 3.0)


def test_two_hop_view_complete_graph():
    view = two_hop_view(complete_graph(5), 2, GAINS)
    assert view.members[0] == 2
    assert set(view.members) == set(range(5))
    assert view.rest == ()
    assert np.count_nonzero(view.coupling_members) == 0
    assert view.coupling_rest.size == 0


def test_two_hop_view_path_coupling_structure():
    # path 0-1-2-3-4 seen from node 0: members {0,1,2}, rest {3,4};
    # the unknown coupling enters through edge (2,3) only
    view = two_hop_view(path_graph(5), 0, GAINS)
    assert view.members == (0, 1, 2)
    assert view.rest == (3, 4)
    m = view.size
    # velocity row of member 2 is driven by rest position of node 3
    row = view.coupling_rest[m + view.member_index(2)]
    assert row[0] == pytest.approx(GAINS.alpha)  # -alpha * (-1) on node 3
    assert np.count_nonzero(view.coupling_rest[: m + 2]) == 0
    # the member block compensates the boundary degree
    assert view.coupling_members[m + 2, 2] == pytest.approx(-GAINS.alpha)


def test_two_hop_view_star_hub_sees_all():
    view = two_hop_view(star_graph(6), 0, GAINS)
    assert set(view.members) == set(range(6))
    assert view.rest == ()


def test_view_measure_and_coupling_consistency(rng):
    g = random_connected_graph(rng, 7)
    gview = two_hop_view(g, 3, GAINS)
    p = rng.uniform(-2, 2, 7)
    v = rng.uniform(-1, 1, 7)
    full = closed_loop_matrix(g, GAINS) @ np.concatenate([p, v])
    local = gview.a_model @ gview.member_state(p, v) + gview.coupling(p, v)
    idx = np.array(gview.members)
    m = gview.size
    assert np.allclose(local[:m], full[: g.node_count][idx], atol=1e-12)
    assert np.allclose(local[m:], full[g.node_count :][idx], atol=1e-12)


def test_one_hop_ablation_view():
    g = Graph(4, ((0, 1), (0, 2), (1, 2), (2, 3)))
    view = two_hop_view(g, 0, GAINS, one_hop_only=True)
    assert view.members == (0, 1, 2)
    # star model only: edge (1,2) lands in the coupling, not the model
    l_model = -view.a_model[view.size :, : view.size] / GAINS.alpha
    assert l_model[view.member_index(1), view.member_index(2)] == 0.0
    assert np.count_nonzero(view.coupling_members) > 0


def test_pbh_observability_cases(rng):
    for _ in range(5):
        g = random_connected_graph(rng, int(rng.integers(4, 9)))
        owner = int(rng.integers(0, g.node_count))
        assert pbh_observability(two_hop_view(g, owner, GAINS))
    # isolated owner still observes its own position and velocity
    lonely = Graph(4, ((1, 2), (2, 3)))
    assert pbh_observability(two_hop_view(lonely, 0, GAINS))


def test_pbh_fails_with_ablated_measurements():
    # measuring only the owner's position cannot separate exchangeable
    # neighbors (any view with a symmetry fixing the owner)
    view = two_hop_view(complete_graph(4), 0, GAINS)
    crippled_c = np.zeros((1, 2 * view.size))
    crippled_c[0, 0] = 1.0  # owner position only
    from dataclasses import replace

    ablated = replace(view, c_meas=crippled_c)
    assert not pbh_observability(ablated)


def test_decay_envelope_scalar_and_symmetric():
    kappa, lam = decay_envelope(np.array([[-1.0]]))
    assert (kappa, lam) == (pytest.approx(1.0), pytest.approx(1.0))
    p = scipy.linalg.solve_continuous_lyapunov(np.array([[-1.0]]).T, -np.eye(1))
    assert p[0, 0] == pytest.approx(0.5)
    sym = np.diag([-0.5, -2.0, -3.0])
    kappa, lam = decay_envelope(sym)
    assert kappa == pytest.approx(1.0)
    assert lam == pytest.approx(0.5)
    with pytest.raises(Exception):
        decay_envelope(np.array([[1.0]]))


def test_design_gain_certifies_envelope(rng):
    g = random_connected_graph(rng, 6)
    view = two_hop_view(g, 0, GAINS)
    gain = design_gain(view, validate_grid=200)
    a_bar = view.a_model - gain.h_matrix @ view.c_meas
    assert gain.spectral_abscissa <= -0.1 + 1e-12
    ok, worst = validate_envelope(a_bar, gain, points=500)
    assert ok, f"envelope violated by {worst}"


def test_gain_matrix_structure():
    view = two_hop_view(complete_graph(4), 1, GAINS)
    h = gain_matrix(view, 0.5, 2.0)
    m = view.size
    assert np.count_nonzero(h[:m]) == 0
    block = h[m:, :m]
    assert np.allclose(block, block.T)
    assert np.all(np.linalg.eigvalsh(block) > 0)
    assert h[m, m] == pytest.approx(0.5)


def _make_observer(g, owner, w=10.0):
    view = two_hop_view(g, owner, GAINS)
    gain = design_gain(view)
    return ObserverState(view, gain, w, 0.0)


def test_observer_zero_residual_at_truth():
    # complete graph: no coupling, no attack; start at the true state
    g = complete_graph(4)
    net = static_network(g, 2.0)
    rng = np.random.default_rng(0)
    init = SystemState(rng.uniform(-1, 1, 4), rng.uniform(-1, 1, 4))
    trace = simulate(net, GAINS, init)
    obs = _make_observer(g, 0)
    obs.x_hat = obs.view.member_state(init.p_tilde, init.v)
    h = trace.step_h
    worst = 0.0
    for k in range(500):
        y0 = obs.view.measure(trace.p_tilde[k], trace.v[k])
        y1 = obs.view.measure(trace.p_tilde[k + 1], trace.v[k + 1])
        obs.step(y0, h, y1)
        worst = max(worst, np.abs(obs.residual(y1)).max())
    # midpoint measurements are interpolated, so tracking is exact only to
    # the interpolation order
    assert worst < 1e-6


def test_observer_reinit_masking():
    g = path_graph(5)
    obs = _make_observer(g, 0)
    y = np.array([1.0, 2.0, 3.0, 0.7])
    obs.reinit(y, 5.0)
    m = obs.view.size
    assert np.allclose(obs.x_hat[:m], [1.0, 2.0, 3.0])
    assert obs.x_hat[m] == pytest.approx(0.7)  # owner velocity copied
    assert np.allclose(obs.x_hat[m + 1 :], 0.0)  # others zeroed
    assert np.allclose(obs.residual(y)[: m], 0.0, atol=1e-12)
    assert obs.last_reinit == 5.0


def test_observer_remap_preserves_residual_signature():
    g = complete_graph(5)
    obs = _make_observer(g, 0)
    rng = np.random.default_rng(1)
    obs.x_hat = rng.uniform(-1, 1, 2 * obs.view.size)
    p = rng.uniform(-1, 1, 5)
    v = rng.uniform(-1, 1, 5)
    y_before = obs.view.measure(p, v)
    res_before = obs.residual(y_before)
    # drop node 4 from the graph: membership shrinks, estimates carry over
    g2 = complete_graph(5).drop_edges([(i, 4) for i in range(4)])
    view2 = two_hop_view(g2, 0, GAINS)
    gain2 = design_gain(view2)
    obs.t = 1.0
    obs.remap(view2, gain2, view2.measure(p, v), 1.0)
    res_after = obs.residual(view2.measure(p, v))
    kept = [j for j in view2.members]
    for node in kept:
        i_new = view2.members.index(node)
        i_old = (0, 1, 2, 3, 4).index(node)
        assert res_after[i_new] == pytest.approx(res_before[i_old])
    # re-entry within the grace period restores the cached position
    # estimate (the residual signature); the velocity estimate restarts
    cached_p = obs._departed[4][0]
    view3 = two_hop_view(complete_graph(5), 0, GAINS)
    obs.t = 1.4
    obs.remap(view3, design_gain(view3), view3.measure(p, v), 1.4)
    i4 = view3.members.index(4)
    assert obs.x_hat[i4] == pytest.approx(cached_p)
    assert obs.x_hat[view3.size + i4] == 0.0


def test_observer_step_detects_ramp():
    g = complete_graph(4)
    net = static_network(g, 8.0)
    rng = np.random.default_rng(2)
    init = SystemState(rng.uniform(-1, 1, 4), np.zeros(4))
    from resilnet.dynamics import AttackSignal, DeceptionAttack

    attacks = (DeceptionAttack(2, 0.0, AttackSignal("ramp", slope=0.5)),)
    trace = simulate(net, GAINS, init, attacks)
    obs = _make_observer(g, 0)
    h = trace.step_h
    y0 = obs.view.measure(trace.p_tilde[0], trace.v[0])
    residual = observer_step(obs, y0, True, h)
    crossed = None
    for k in range(1, len(trace.t) - 1):
        y_start = obs.view.measure(trace.p_tilde[k], trace.v[k])
        y_end = obs.view.measure(trace.p_tilde[k + 1], trace.v[k + 1])
        residual = observer_step(obs, y_start, False, h, y_end)
        if abs(residual[obs.view.member_index(2)]) > 0.95:
            crossed = trace.t[k + 1]
            break
    assert crossed is not None and crossed < 8.0


def test_residual_threshold_formula():
    eps0 = residual_threshold(2.0, 2.0, 0.0, kappa_e=2.0, lambda_e=1.0, kappa_r=3.0,
                              w_budget=0.5, x0_norm=4.0, lambda_x=0.1)
    assert eps0 == pytest.approx(2.0 * 0.5)  # t = t_k: only the restart term
    eps_inf = residual_threshold(60.0, 2.0, 0.0, kappa_e=2.0, lambda_e=1.0, kappa_r=3.0,
                                 w_budget=0.5, x0_norm=4.0, lambda_x=0.1)
    want = 3.0 / 1.0 * 4.0 * np.exp(-0.1 * 2.0)
    assert eps_inf == pytest.approx(want, rel=1e-6)
    with pytest.raises(ValueError):
        residual_threshold(1.0, 2.0, 0.0, 1, 1, 1, 1, 1, 1)


def test_threshold_rule_overrides():
    rule = ThresholdRule(kind="constant", value=0.95)
    assert rule.evaluate(3.0, obs=None) == 0.95
    exp_rule = ThresholdRule(kind="exponential", amplitude=10.0, rate=1.0, offset=0.95)
    assert exp_rule.evaluate(0.0, obs=None) == pytest.approx(10.95)
    assert exp_rule.evaluate(50.0, obs=None) == pytest.approx(0.95, abs=1e-6)
    with pytest.raises(ValueError):
        ThresholdRule(kind="quadratic")
    with pytest.raises(ConfigurationError):
        ThresholdRule(kind="analytic").evaluate(1.0, obs=None, consts=None)


def test_hypothesis_test_strict_and_sticky():
    record = make_record(
        t=1.0, owner=0, neighbors=(1, 2, 3),
        residuals=(0.0, 1.0, 0.95), thresholds=(0.95, 0.95, 0.95), flagged=(),
    )
    flagged = hypothesis_test(record)
    assert flagged == frozenset({2})  # boundary |r| = eps stays null
    again = make_record(
        t=2.0, owner=0, neighbors=(1, 2, 3),
        residuals=(0.0, 0.0, 0.0), thresholds=(0.95,) * 3, flagged=flagged,
    )
    assert hypothesis_test(again, flagged) == frozenset({2})
    assert again.verdicts == ("null", "attacked", "null")


@settings(max_examples=10)
@given(st.integers(0, 200))
def test_pbh_random_modes(seed):
    rng = np.random.default_rng(seed)
    g = random_connected_graph(rng, int(rng.integers(4, 8)))
    for owner in range(g.node_count):
        assert pbh_observability(two_hop_view(g, owner, GAINS))


def test_observer_dimension_mismatch():
    obs = _make_observer(complete_graph(4), 1)
    with pytest.raises(ConfigurationError):
        obs.residual(np.zeros(3))


def test_observer_error_envelope_under_bounded_attack():
    """With a bounded injection and certified decay constants, the sampled
    estimation error stays below the finite-gain envelope
    kappa_e |e0| e^{-lambda_e t} + ((1 + kappa_r)/lambda_e) sup|u| (1 - e^{-lambda_e t})
    (complete graph: the coupling term is structurally absent)."""
    from resilnet.dynamics import AttackSignal, DeceptionAttack, stability_constants

    g = complete_graph(4)
    net = static_network(g, 6.0)
    rng = np.random.default_rng(11)
    init = SystemState(rng.uniform(-2, 2, 4), np.zeros(4))
    u_const = 0.8
    attacks = (DeceptionAttack(2, 0.0, AttackSignal("constant", value=u_const)),)
    trace = simulate(net, GAINS, init, attacks)
    view = two_hop_view(g, 0, GAINS)
    gain = design_gain(view)
    consts = stability_constants(4.0, 1.0, GAINS, 4)
    kappa_r = GAINS.alpha * consts.kappa_x * gain.kappa_e
    obs = ObserverState(view, gain, w_budget=10.0, t0=0.0)
    obs.reinit(view.measure(init.p_tilde, init.v), 0.0)
    e0 = np.linalg.norm(view.member_state(init.p_tilde, init.v) - obs.x_hat)
    h = trace.step_h
    for k in range(len(trace.t) - 1):
        y0 = obs.view.measure(trace.p_tilde[k], trace.v[k])
        y1 = obs.view.measure(trace.p_tilde[k + 1], trace.v[k + 1])
        obs.step(y0, h, y1)
        t = trace.t[k + 1]
        err = np.linalg.norm(
            view.member_state(trace.p_tilde[k + 1], trace.v[k + 1]) - obs.x_hat
        )
        decay = np.exp(-gain.lambda_e * t)
        bound = gain.kappa_e * e0 * decay + (1 + kappa_r) / gain.lambda_e * u_const * (
            1 - decay
        )
        assert err <= bound * (1 + 1e-9)
