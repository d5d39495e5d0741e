import numpy as np
import pytest

import consensuskit as ck
from consensuskit.agents import (
    AUGMENTED_GENERAL, MimoAgentSlice, NormalFormAgent, augment, builtin,
    decoupling_input, eval_dynamics, linearizing_input,
)


def _xi_inverse(xi):
    # independent re-derivation of the inverse coordinate map for agent 3
    x2 = xi[0]
    x3 = xi[1] - x2 ** 2
    x1 = xi[2] - 3.0 * x2 * xi[1] + x2 ** 3
    return np.array([x1, x2, x3])


def test_builtin_internal_damping_parameters():
    # at xi1 = 0, eta = 2 the internal derivative is -a*2 - 2**p,
    # which separates all four damped agents
    expected = {"agent1": -34.0, "agent2": -10.0, "agent4": -16.0, "agent5": -36.0}
    for name, want in expected.items():
        ag = builtin(name)
        assert (ag.r, ag.n_eta) == (2, 1)
        dxi, deta, u = eval_dynamics(ag, np.array([0.0, 0.5]), np.array([2.0]), 0.0)
        assert deta[0] == pytest.approx(want, abs=1e-14)
        assert np.array_equal(dxi, [0.5, 0.0])
        assert u == 0.0


def test_builtin_chain_shift_and_input_slot():
    ag = builtin("agent2")
    dxi, deta, u = eval_dynamics(ag, np.array([2.0, -1.0]), np.array([1.0]), 7.0)
    assert np.array_equal(dxi, [-1.0, 7.0])
    # alpha = 0, beta = 1 for the damped builtins, so u == u_hat
    assert u == 7.0
    assert deta[0] == pytest.approx(-1.0 - 1.0 + 2.0)


def test_builtin_rejects_unknown_name():
    with pytest.raises(ck.UnknownAgentError):
        builtin("agent9")


def test_agent3_coordinate_map_round_trip():
    ag = builtin("agent3")
    assert ag.native is not None
    rng = ck.rng_for(301)
    for _ in range(50):
        x = rng.uniform(-2.0, 2.0, size=3)
        xi = ag.native.xi_of(x)
        assert np.allclose(_xi_inverse(xi), x, atol=1e-12)


def test_agent3_alpha_agrees_across_coordinates():
    ag = builtin("agent3")
    rng = ck.rng_for(302)
    for _ in range(50):
        x = rng.uniform(-1.5, 1.5, size=3)
        xi = ag.native.xi_of(x)
        assert ag.alpha(xi, np.empty(0)) == pytest.approx(
            ag.native.alpha_of(x), rel=1e-12, abs=1e-12)


def test_agent3_chain_property_numerically():
    # the time derivative of xi(x(t)) along the raw dynamics must equal
    # (xi2, xi3, alpha + u); checked by central differencing the map
    ag = builtin("agent3")
    native = ag.native
    rng = ck.rng_for(303)
    h = 1e-5
    for _ in range(20):
        x = rng.uniform(-1.0, 1.0, size=3)
        u = float(rng.uniform(-2.0, 2.0))
        f = native.deriv(x, u)
        dxi_num = (native.xi_of(x + h * f) - native.xi_of(x - h * f)) / (2.0 * h)
        xi = native.xi_of(x)
        dxi_expect = np.array([xi[1], xi[2], native.alpha_of(x) + u])
        assert np.allclose(dxi_num, dxi_expect, atol=1e-6)


def test_linearizing_input_beta_floor():
    ag = NormalFormAgent(
        agent_id=9, r=2, n_eta=0,
        alpha=lambda xi, eta: 0.0,
        beta=lambda xi, eta: xi[0],
        theta=lambda xi, eta: np.empty(0),
        xi0=np.zeros(2), eta0=np.empty(0))
    with pytest.raises(ck.BetaNearZero) as exc:
        linearizing_input(ag, np.array([0.0, 1.0]), np.empty(0), 1.0)
    assert exc.value.agent_id == 9
    assert np.array_equal(exc.value.state, [0.0, 1.0])
    # away from the floor the cancellation is exact
    u = linearizing_input(ag, np.array([2.0, 1.0]), np.empty(0), 3.0)
    assert u == pytest.approx(1.5)


def test_normal_form_validation():
    with pytest.raises(ck.InvalidDimensionError):
        NormalFormAgent(agent_id=1, r=0, n_eta=0,
                        alpha=lambda xi, eta: 0.0, beta=lambda xi, eta: 1.0,
                        theta=lambda xi, eta: np.empty(0),
                        xi0=np.empty(0), eta0=np.empty(0))
    with pytest.raises(ck.InvalidDimensionError):
        NormalFormAgent(agent_id=1, r=2, n_eta=0,
                        alpha=lambda xi, eta: 0.0, beta=lambda xi, eta: 1.0,
                        theta=lambda xi, eta: np.empty(0),
                        xi0=np.zeros(3), eta0=np.empty(0))


def test_eval_dynamics_checks_sizes():
    ag = builtin("agent1")
    with pytest.raises(ck.InvalidDimensionError):
        eval_dynamics(ag, np.zeros(3), np.zeros(1), 0.0)
    bad_theta = NormalFormAgent(
        agent_id=2, r=2, n_eta=1,
        alpha=lambda xi, eta: 0.0, beta=lambda xi, eta: 1.0,
        theta=lambda xi, eta: np.zeros(2),
        xi0=np.zeros(2), eta0=np.zeros(1))
    with pytest.raises(ck.InvalidDimensionError):
        eval_dynamics(bad_theta, np.zeros(2), np.zeros(1), 0.0)


def test_with_initial_rules():
    damped = builtin("agent1")
    moved = damped.with_initial(xi0=[1.0, 2.0], eta0=[3.0])
    assert np.array_equal(moved.xi0, [1.0, 2.0])
    assert np.array_equal(moved.eta0, [3.0])
    with pytest.raises(ck.InvalidDimensionError):
        damped.with_initial(x0=[1.0, 2.0, 3.0])

    native = builtin("agent3")
    x = np.array([0.5, -1.0, 2.0])
    placed = native.with_initial(x0=x)
    assert np.allclose(placed.xi0, native.native.xi_of(x))
    assert np.array_equal(placed.native.x0, x)
    with pytest.raises(ck.InvalidDimensionError):
        native.with_initial(xi0=[0.0, 0.0, 0.0])
    with pytest.raises(ck.InvalidDimensionError):
        native.with_initial(x0=[1.0, 2.0])


def test_augment_wraps_general_input():
    ag = augment(
        r=2,
        alpha_tilde=lambda xi, eta: 0.0,
        beta_tilde=lambda xi, eta: 1.0,
        theta_tilde=None,
        xi0=[1.0, 0.0, 0.5],
        u0=0.25,
        agent_id=7)
    assert ag.r == 3
    assert ag.kind == AUGMENTED_GENERAL
    assert ag.u0 == 0.25
    assert ag.agent_id == 7
    with pytest.raises(ck.InvalidDimensionError):
        augment(r=2, alpha_tilde=lambda xi, eta: 0.0,
                beta_tilde=lambda xi, eta: 1.0, theta_tilde=None,
                xi0=[1.0, 0.0])


def test_decoupling_input_oracle():
    mimo = MimoAgentSlice(
        p=1, m=2, rdeg=(2,),
        pi_fn=lambda state: np.array([[1.0, 1.0]]),
        alpha_check_fn=lambda state: np.array([3.0]))
    u = decoupling_input(mimo, np.zeros(3), np.array([5.0]))
    assert np.allclose(u, [1.0, 1.0], atol=1e-12)


def test_decoupling_input_rank_deficient():
    mimo = MimoAgentSlice(
        p=1, m=2, rdeg=(2,),
        pi_fn=lambda state: np.zeros((1, 2)),
        alpha_check_fn=lambda state: np.zeros(1))
    with pytest.raises(ck.RankDeficientError):
        decoupling_input(mimo, np.zeros(3), np.array([1.0]))


def test_decoupling_input_shape_checks():
    mimo = MimoAgentSlice(
        p=2, m=2, rdeg=(1, 1),
        pi_fn=lambda state: np.eye(2),
        alpha_check_fn=lambda state: np.zeros(2))
    with pytest.raises(ck.InvalidDimensionError):
        decoupling_input(mimo, np.zeros(2), np.array([1.0]))
    bad_pi = MimoAgentSlice(
        p=2, m=2, rdeg=(1, 1),
        pi_fn=lambda state: np.eye(3),
        alpha_check_fn=lambda state: np.zeros(2))
    with pytest.raises(ck.InvalidDimensionError):
        decoupling_input(bad_pi, np.zeros(2), np.array([1.0, 1.0]))


def test_mimo_slice_validation():
    with pytest.raises(ck.InvalidDimensionError):
        MimoAgentSlice(p=3, m=2, rdeg=(1, 1, 1),
                       pi_fn=lambda s: np.zeros((3, 2)),
                       alpha_check_fn=lambda s: np.zeros(3))
    with pytest.raises(ck.InvalidDimensionError):
        MimoAgentSlice(p=2, m=3, rdeg=(1,),
                       pi_fn=lambda s: np.zeros((2, 3)),
                       alpha_check_fn=lambda s: np.zeros(2))
