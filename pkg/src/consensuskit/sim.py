"""Closed-loop simulation.

Fixed-step classical fourth-order Runge-Kutta over the stacked multi-agent
state.  Per agent the flat state vector holds

* the plant block: [xi; eta] for normal-form agents, the raw x vector for
  agents carried in native coordinates, or [xi; eta; u] for input-augmented
  agents (u' = w is integrated alongside),
* the local controller block phi (empty for full-degree agents),
* optionally the observer block (the estimate of the stacked chain xihat).

The cooperative input v is recomputed inside every Runge-Kutta stage.
Under switching, the active graph is frozen over each step: a sampled jump
takes effect at the first step boundary at or after the jump time.

Two runtime guards: |beta| is checked against the configured floor at every
recorded state (BetaNearZero), and any state leaving the max-norm ball of
radius ``settings.finite_escape_norm`` aborts the run with FiniteEscape,
which carries the trajectory recorded up to the abort time.

Reproducibility: trajectories are a pure function of (scenario, seed, run
index).  Random initial conditions and switching paths are drawn from
separate keyed streams, so a one-mode switching run is bit-identical to the
corresponding fixed-topology run.
"""

import warnings
from dataclasses import dataclass, replace
from typing import List, Optional, Union

import numpy as np

from .agents import AUGMENTED_GENERAL, NormalFormAgent
from .errors import BetaNearZero, FiniteEscape, ValidationError
from .graph import DiGraph, laplacian
from .rng import STREAM_INIT, rng_for
from .settings import settings
from .switching import MarkovTopology, check_A4, sample_path
from .synthesis import (
    CompanionSystem,
    ConsensusGain,
    LocalController,
    ObserverGain,
    local_controller,
)

__all__ = [
    "SimScenario", "Trajectory", "MonteCarloResult", "build_scenario",
    "simulate_fixed", "simulate_switching", "simulate_with_observer",
    "monte_carlo_ms",
]


@dataclass
class SimScenario:
    agents: List[NormalFormAgent]
    cs: CompanionSystem
    gain: ConsensusGain
    controllers: List[LocalController]
    topology: Union[DiGraph, MarkovTopology]
    observer: Optional[ObserverGain] = None
    t_end: float = 10.0
    dt: float = 1e-3
    seed: int = 0
    init: str = "explicit"
    observer_init: str = "zero"
    output: Optional[dict] = None
    raw: Optional[dict] = None

    def validate(self):
        if not self.agents:
            raise ValidationError("scenario has no agents")
        if self.topology.n != len(self.agents):
            raise ValidationError(
                f"{len(self.agents)} agents on a {self.topology.n}-node topology")
        if len(self.controllers) != len(self.agents):
            raise ValidationError("one local controller per agent is required")
        for ag, ctl in zip(self.agents, self.controllers):
            if ag.r > self.cs.r:
                raise ValidationError(
                    f"agent {ag.agent_id} degree {ag.r} exceeds target {self.cs.r}")
            if ctl.r != self.cs.r or ctl.r_agent != ag.r:
                raise ValidationError(
                    f"controller for agent {ag.agent_id} does not match")
        if self.gain.K.shape != (self.cs.r,):
            raise ValidationError("gain dimension does not match the target")
        if self.observer is not None and self.observer.C.shape != (self.cs.r,):
            raise ValidationError("observer row dimension does not match")
        if not (self.dt > 0 and np.isfinite(self.dt)):
            raise ValidationError(f"dt must be positive, got {self.dt!r}")
        if not (self.t_end >= self.dt):
            raise ValidationError("t_end must be at least one step")
        if self.init not in ("explicit", "random"):
            raise ValidationError(f"unknown init mode {self.init!r}")
        if self.observer_init not in ("zero", "match"):
            raise ValidationError(f"unknown observer init {self.observer_init!r}")


def build_scenario(agents, cs, gain, topology, observer=None, **kwargs):
    """Convenience constructor that synthesizes the local controllers."""
    controllers = [local_controller(cs, ag) for ag in agents]
    scen = SimScenario(agents=list(agents), cs=cs, gain=gain,
                       controllers=controllers, topology=topology,
                       observer=observer, **kwargs)
    scen.validate()
    return scen


@dataclass
class Trajectory:
    times: np.ndarray                      # (n,)
    y: np.ndarray                          # (n, N) outputs
    xi_hat: np.ndarray                     # (n, N, r) stacked chain states
    eta: List[np.ndarray]                  # per agent (n, n_eta_i)
    u: np.ndarray                          # (n, N) physical inputs
    err: Optional[np.ndarray] = None       # (n, N, r) observer errors
    mode: Optional[np.ndarray] = None      # (n,) active mode index
    mode_path: Optional[list] = None       # (mode, t0, t1) intervals
    diverged: bool = False


@dataclass
class MonteCarloResult:
    times: np.ndarray
    mean_square: np.ndarray
    runs_used: int
    runs_diverged: int


class _AgentRuntime:
    """Precomputed per-agent bookkeeping for the integrator loop."""

    __slots__ = ("agent", "ctl", "r_i", "n_eta", "n_phi", "augmented",
                 "native", "sl_plant", "sl_ctrl", "sl_obs", "xi", "u_cmd")

    def __init__(self, agent, ctl):
        self.agent = agent
        self.ctl = ctl
        self.r_i = agent.r
        self.n_eta = agent.n_eta
        self.n_phi = ctl.n_phi
        self.augmented = agent.kind == AUGMENTED_GENERAL
        self.native = agent.native
        self.xi = None
        self.u_cmd = 0.0

    def plant_dim(self):
        if self.native is not None:
            return self.native.dim
        return self.r_i + self.n_eta + (1 if self.augmented else 0)


class _System:
    def __init__(self, scen, use_observer):
        self.scen = scen
        self.rts = []
        pos = 0
        for ag, ctl in zip(scen.agents, scen.controllers):
            rt = _AgentRuntime(ag, ctl)
            d = rt.plant_dim()
            rt.sl_plant = slice(pos, pos + d)
            pos += d
            rt.sl_ctrl = slice(pos, pos + rt.n_phi)
            pos += rt.n_phi
            if use_observer:
                rt.sl_obs = slice(pos, pos + scen.cs.r)
                pos += scen.cs.r
            else:
                rt.sl_obs = None
            self.rts.append(rt)
        self.dim = pos
        self.n_agents = len(self.rts)
        self.r = scen.cs.r
        self.K = scen.gain.K
        self.A = scen.cs.A
        self.B = scen.cs.B
        self.use_observer = use_observer
        if use_observer:
            self.C = scen.observer.C
            self.M = scen.observer.M
        self.xhat = np.zeros((self.n_agents, self.r))
        self.xchk = np.zeros((self.n_agents, self.r)) if use_observer else None

    def initial_state(self, run_index):
        scen = self.scen
        rng = (rng_for(scen.seed, run_index, STREAM_INIT)
               if scen.init == "random" else None)
        state = np.zeros(self.dim)
        for rt in self.rts:
            ag = rt.agent
            block = state[rt.sl_plant]
            if rt.native is not None:
                block[:] = (rng.uniform(-1.0, 1.0, rt.native.dim)
                            if rng is not None else rt.native.x0)
            else:
                if rng is not None:
                    block[:ag.r] = rng.uniform(-1.0, 1.0, ag.r)
                    if ag.n_eta:
                        block[ag.r:ag.r + ag.n_eta] = rng.uniform(-1.0, 1.0, ag.n_eta)
                else:
                    block[:ag.r] = ag.xi0
                    if ag.n_eta:
                        block[ag.r:ag.r + ag.n_eta] = ag.eta0
                if rt.augmented:
                    block[-1] = ag.u0
        if self.use_observer and scen.observer_init == "match":
            for rt in self.rts:
                obs = state[rt.sl_obs]
                ps = state[rt.sl_plant]
                if rt.native is not None:
                    obs[:rt.r_i] = rt.native.xi_of(ps)
                else:
                    obs[:rt.r_i] = ps[:rt.r_i]
                # controller states start at zero, so the tail is already zero
        return state

    def deriv(self, state, lap, out):
        """Stacked derivative; caches per-agent xi and commanded input."""
        rts = self.rts
        xhat = self.xhat
        for i, rt in enumerate(rts):
            ps = state[rt.sl_plant]
            if rt.native is not None:
                xi = rt.native.xi_of(ps)
            else:
                xi = ps[:rt.r_i]
            rt.xi = xi
            xhat[i, :rt.r_i] = xi
            if rt.n_phi:
                xhat[i, rt.r_i:] = state[rt.sl_ctrl]
        if self.use_observer:
            feedback = self.xchk
            for i, rt in enumerate(rts):
                feedback[i] = state[rt.sl_obs]
        else:
            feedback = xhat
        v_all = -(lap @ feedback) @ self.K
        for i, rt in enumerate(rts):
            v = v_all[i]
            if rt.n_phi:
                phi = state[rt.sl_ctrl]
                u_hat = phi[0]
                dphi = rt.ctl.D @ rt.xi + rt.ctl.E @ phi
                dphi[-1] += v
                out[rt.sl_ctrl] = dphi
            else:
                u_hat = float(rt.ctl.static_row @ xhat[i]) + v
                rt.u_cmd = u_hat
            ps = state[rt.sl_plant]
            if rt.native is not None:
                u = (u_hat - rt.native.alpha_of(ps)) / rt.native.beta_of(ps)
                out[rt.sl_plant] = rt.native.deriv(ps, u)
                rt.u_cmd = u
            else:
                dp = out[rt.sl_plant]
                r_i = rt.r_i
                dp[:r_i - 1] = ps[1:r_i]
                dp[r_i - 1] = u_hat
                if rt.n_eta:
                    eta = ps[r_i:r_i + rt.n_eta]
                    dp[r_i:r_i + rt.n_eta] = rt.agent.theta(rt.xi, eta)
                if rt.augmented:
                    eta = ps[r_i:r_i + rt.n_eta]
                    w = ((u_hat - rt.agent.alpha(rt.xi, eta))
                         / rt.agent.beta(rt.xi, eta))
                    dp[-1] = w
                    rt.u_cmd = w
            if self.use_observer:
                chk = state[rt.sl_obs]
                innov = float(self.C @ xhat[i]) - float(self.C @ chk)
                out[rt.sl_obs] = self.A @ chk + self.B * v + self.M * innov

class _Record:
    def __init__(self, sys, n_samples, with_mode):
        n_ag = sys.n_agents
        self.y = np.zeros((n_samples, n_ag))
        self.xi_hat = np.zeros((n_samples, n_ag, sys.r))
        self.eta = [np.zeros((n_samples, rt.n_eta)) for rt in sys.rts]
        self.u = np.zeros((n_samples, n_ag))
        self.err = (np.zeros((n_samples, n_ag, sys.r))
                    if sys.use_observer else None)
        self.mode = np.zeros(n_samples, dtype=int) if with_mode else None

    def to_trajectory(self, times, upto, mode_path, diverged):
        sl = slice(0, upto)
        return Trajectory(
            times=times[sl], y=self.y[sl], xi_hat=self.xi_hat[sl],
            eta=[e[sl] for e in self.eta], u=self.u[sl],
            err=self.err[sl] if self.err is not None else None,
            mode=self.mode[sl] if self.mode is not None else None,
            mode_path=mode_path, diverged=diverged)


def _integrate(scen, laps, mode_per_sample, mode_path, run_index,
               use_observer):
    sys = _System(scen, use_observer)
    n_steps = int(round(scen.t_end / scen.dt))
    if n_steps < 1:
        raise ValidationError("horizon shorter than one step")
    dt = scen.dt
    times = np.arange(n_steps + 1) * dt
    n_samples = n_steps + 1
    rec = _Record(sys, n_samples, mode_per_sample is not None)
    if mode_per_sample is not None:
        rec.mode[:] = mode_per_sample

    state = sys.initial_state(run_index)
    k1 = np.zeros(sys.dim)
    k2 = np.zeros(sys.dim)
    k3 = np.zeros(sys.dim)
    k4 = np.zeros(sys.dim)

    guard = settings.finite_escape_norm
    for k in range(n_samples):
        lap = laps[mode_per_sample[k]] if mode_per_sample is not None else laps
        sys.deriv(state, lap, k1)
        _record_row(sys, rec, k, state)
        if k == n_steps:
            break
        sys.deriv(state + (0.5 * dt) * k1, lap, k2)
        sys.deriv(state + (0.5 * dt) * k2, lap, k3)
        sys.deriv(state + dt * k3, lap, k4)
        state = state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        peak = float(np.abs(state).max())
        if not np.isfinite(peak) or peak > guard:
            traj = rec.to_trajectory(times, k + 1, mode_path, True)
            raise FiniteEscape(
                f"state norm {peak:.3e} left the guard ball at t = "
                f"{times[k + 1]:.6g}", trajectory=traj, t=float(times[k + 1]))
    return rec.to_trajectory(times, n_samples, mode_path, False)


def _record_row(sys, rec, k, state):
    """Record one sample; deriv() has just been evaluated at `state`."""
    for i, rt in enumerate(sys.rts):
        ps = state[rt.sl_plant]
        rec.y[k, i] = rt.xi[0]
        rec.xi_hat[k, i] = sys.xhat[i]
        if rt.n_eta:
            rec.eta[i][k] = ps[rt.r_i:rt.r_i + rt.n_eta]
        if rt.native is not None:
            beta = rt.native.beta_of(ps)
            _guard_beta(beta, rt, state)
            rec.u[k, i] = rt.u_cmd
        else:
            eta = ps[rt.r_i:rt.r_i + rt.n_eta]
            beta = rt.agent.beta(rt.xi, eta)
            _guard_beta(beta, rt, state)
            if rt.augmented:
                rec.u[k, i] = ps[-1]
            else:
                u_hat = state[rt.sl_ctrl][0] if rt.n_phi else rt.u_cmd
                rec.u[k, i] = (u_hat - rt.agent.alpha(rt.xi, eta)) / beta
        if sys.use_observer:
            rec.err[k, i] = sys.xhat[i] - state[rt.sl_obs]


def _guard_beta(beta, rt, state):
    if abs(beta) < settings.beta_floor:
        raise BetaNearZero(
            f"beta = {beta:.3e} below floor {settings.beta_floor:.1e} "
            f"for agent {rt.agent.agent_id}",
            agent_id=rt.agent.agent_id, state=state.copy())


def _require_fixed(scen):
    if not isinstance(scen.topology, DiGraph):
        raise ValidationError("scenario topology is not a fixed graph")


def simulate_fixed(scen):
    """Simulate on the fixed graph with full-information feedback."""
    scen.validate()
    _require_fixed(scen)
    lap = laplacian(scen.topology)
    return _integrate(scen, lap, None, None, 0, use_observer=False)


def simulate_with_observer(scen, observer_init=None):
    """Simulate on the fixed graph with observer-based feedback.

    The cooperative input of every agent is computed from its observer
    estimate; the measurement theta = C xihat is taken from the true state.
    ``observer_init`` overrides the scenario's choice ("zero" starts every
    estimate at the origin, "match" at the true initial state).
    """
    scen.validate()
    _require_fixed(scen)
    if scen.observer is None:
        raise ValidationError("scenario has no observer section")
    if observer_init is not None:
        if observer_init not in ("zero", "match"):
            raise ValidationError(f"unknown observer init {observer_init!r}")
        scen = _with_observer_init(scen, observer_init)
    lap = laplacian(scen.topology)
    return _integrate(scen, lap, None, None, 0, use_observer=True)


def _with_observer_init(scen, observer_init):
    return replace(scen, observer_init=observer_init)


def simulate_switching(scen, allow_a4_violation=False, run_index=0):
    """Simulate under the Markov-switching topology.

    The mode path is sampled first (stream separate from the initial
    conditions), then the trajectory is integrated with the graph frozen
    over each step.  With a single mode this is bit-identical to
    :func:`simulate_fixed` on that mode's graph.
    """
    scen.validate()
    if not isinstance(scen.topology, MarkovTopology):
        raise ValidationError("scenario topology is not a switching topology")
    if scen.observer is not None:
        raise ValidationError("observer feedback is only supported on fixed graphs")
    mt = scen.topology
    if not allow_a4_violation and not check_A4(mt).passes:
        raise ValidationError(
            "union graph fails the spanning-tree/balance assumption "
            "(pass allow_a4_violation=True to simulate anyway)")
    path = sample_path(mt, scen.t_end, scen.seed, run_index)
    laps = [laplacian(g) for g in mt.graphs]
    n_steps = int(round(scen.t_end / scen.dt))
    modes = np.zeros(n_steps + 1, dtype=int)
    idx = 0
    for k in range(n_steps + 1):
        t = k * scen.dt
        while idx < len(path) - 1 and t >= path[idx][2]:
            idx += 1
        modes[k] = path[idx][0]
    return _integrate(scen, laps, modes, path, run_index, use_observer=False)


def _max_pairwise_sq(xi_hat):
    n_ag = xi_hat.shape[1]
    best = np.zeros(xi_hat.shape[0])
    for i in range(n_ag):
        for j in range(i + 1, n_ag):
            d = xi_hat[:, i, :] - xi_hat[:, j, :]
            np.maximum(best, np.einsum("nk,nk->n", d, d), out=best)
    return best


def monte_carlo_ms(scen, runs):
    """Mean over runs of the worst squared pairwise chain disagreement.

    Run k draws its initial conditions and switching path from streams
    keyed by (seed, k), so the estimate is reproducible and independent of
    execution order.  Runs that hit the divergence guard are excluded and
    counted; a warning reports the exclusions.
    """
    if runs < 1:
        raise ValidationError("need at least one run")
    total = None
    times = None
    used = 0
    diverged = 0
    for k in range(runs):
        try:
            traj = simulate_switching(scen, run_index=k)
        except FiniteEscape:
            diverged += 1
            continue
        d = _max_pairwise_sq(traj.xi_hat)
        if total is None:
            total = d
            times = traj.times
        else:
            total += d
        used += 1
    if used == 0:
        raise FiniteEscape(f"all {runs} Monte Carlo runs diverged")
    if diverged:
        warnings.warn(f"{diverged} of {runs} Monte Carlo runs diverged "
                      "and were excluded")
    return MonteCarloResult(times=times, mean_square=total / used,
                            runs_used=used, runs_diverged=diverged)
