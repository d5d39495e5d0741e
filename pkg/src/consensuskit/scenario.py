"""Scenario documents: JSON schema, validation, and eager synthesis.

A scenario file describes a complete closed-loop experiment:

    {
      "agents": [{"builtin": "agent1"},
                 {"builtin": "agent3", "x0": [0.1, 0.0, -0.2]},
                 {"custom": {"r": 2, "n_eta": 1,
                             "alpha": [], "beta": [{"c": 1.0, "e": [0, 0, 0]}],
                             "theta": [[{"c": -1.0, "e": [0, 0, 1]},
                                        {"c": 1.0, "e": [1, 0, 0]}]],
                             "xi0": [0, 0], "eta0": [0]}}],
      "controller": {"poles": [-1, -2], "mu": 1.0, "q1": 1.0,
                     "r_hat": 1.0, "rank": "one"},
      "graph": {"n": 3, "edges": [[1, 2, 1.0], [2, 3, 1.0], [3, 1, 1.0]]},
      "sim": {"t_end": 30.0, "dt": 0.001, "seed": 42, "init": "random"}
    }

Exactly one of "graph" and "switching" must be present; "observer" and
"output" are optional.  Poles may be numbers or [re, im] pairs.  Custom
agent dynamics are polynomials given as term lists {"c": coefficient,
"e": exponents}, with one exponent per variable in the order
(xi_1..xi_r, eta_1..eta_k).  Graph nodes are 1-based in documents.

Loading validates the document (ValidationError carries a dotted field
path), then synthesizes the target system, gains, local controllers, and
observer eagerly so that design failures surface at load time as
SynthesisError with the original cause chained.
"""

import copy
import json

import numpy as np

from .agents import NormalFormAgent, builtin
from .errors import (
    ConsensusKitError,
    ScenarioParseError,
    SynthesisError,
    UnknownAgentError,
    ValidationError,
)
from .graph import graph_from_dict
from .sim import SimScenario
from .switching import MarkovTopology
from .synthesis import (
    design_companion,
    full_gain,
    local_controller,
    observer_gain,
    rank_one_gain,
)

__all__ = ["load_scenario", "parse_scenario", "scenario_to_dict"]


def _expect(obj, typ, where, what):
    if not isinstance(obj, typ) or isinstance(obj, bool):
        raise ValidationError(f"expected {what}", field=where)
    return obj


def _num(obj, where):
    if isinstance(obj, bool) or not isinstance(obj, (int, float)):
        raise ValidationError("expected a number", field=where)
    if not np.isfinite(obj):
        raise ValidationError("expected a finite number", field=where)
    return float(obj)


def _int(obj, where):
    if isinstance(obj, bool) or not isinstance(obj, int):
        raise ValidationError("expected an integer", field=where)
    return int(obj)


def _check_keys(doc, required, optional, where):
    _expect(doc, dict, where, "an object")
    for key in required:
        if key not in doc:
            raise ValidationError(f"missing required key {key!r}", field=where)
    allowed = set(required) | set(optional)
    for key in doc:
        if key not in allowed:
            raise ValidationError(f"unknown key {key!r}", field=where)


def _pole(entry, where):
    if isinstance(entry, (int, float)) and not isinstance(entry, bool):
        return complex(float(entry), 0.0)
    if (isinstance(entry, list) and len(entry) == 2
            and all(isinstance(v, (int, float)) and not isinstance(v, bool)
                    for v in entry)):
        return complex(float(entry[0]), float(entry[1]))
    raise ValidationError("pole must be a number or an [re, im] pair",
                          field=where)


def _vector(entry, length, where):
    _expect(entry, list, where, "a list of numbers")
    if len(entry) != length:
        raise ValidationError(f"expected {length} entries, got {len(entry)}",
                              field=where)
    return np.array([_num(v, f"{where}[{k}]") for k, v in enumerate(entry)])


def _terms(entry, nvars, where):
    """Validate a polynomial term list; returns (coeffs, exponents) or None."""
    _expect(entry, list, where, "a list of terms")
    if not entry:
        return None
    coeffs = np.zeros(len(entry))
    expos = np.zeros((len(entry), nvars), dtype=int)
    for k, term in enumerate(entry):
        tw = f"{where}[{k}]"
        _check_keys(term, ("c", "e"), (), tw)
        coeffs[k] = _num(term["c"], f"{tw}.c")
        e = _expect(term["e"], list, f"{tw}.e", "a list of exponents")
        if len(e) != nvars:
            raise ValidationError(
                f"expected {nvars} exponents (one per variable), got {len(e)}",
                field=f"{tw}.e")
        for j, ex in enumerate(e):
            ev = _int(ex, f"{tw}.e[{j}]")
            if ev < 0:
                raise ValidationError("exponents must be non-negative",
                                      field=f"{tw}.e[{j}]")
            expos[k, j] = ev
    return coeffs, expos


def _scalar_poly(parsed, default=0.0):
    if parsed is None:
        return lambda xi, eta: default
    coeffs, expos = parsed

    def fn(xi, eta):
        z = np.concatenate((np.asarray(xi, dtype=float),
                            np.asarray(eta, dtype=float)))
        return float(coeffs @ np.prod(z ** expos, axis=1))

    return fn


def _vector_poly(rows):
    def fn(xi, eta):
        z = np.concatenate((np.asarray(xi, dtype=float),
                            np.asarray(eta, dtype=float)))
        out = np.zeros(len(rows))
        for k, parsed in enumerate(rows):
            if parsed is not None:
                coeffs, expos = parsed
                out[k] = coeffs @ np.prod(z ** expos, axis=1)
        return out

    return fn


def _parse_agent(doc, index):
    where = f"agents[{index}]"
    _expect(doc, dict, where, "an object")
    if "builtin" in doc:
        _check_keys(doc, ("builtin",), ("x0", "xi0", "eta0"), where)
        name = _expect(doc["builtin"], str, f"{where}.builtin", "a string")
        try:
            agent = builtin(name)
        except UnknownAgentError as exc:
            raise ValidationError(str(exc), field=f"{where}.builtin") from exc
        kwargs = {}
        if "x0" in doc:
            if agent.native is None:
                raise ValidationError(
                    f"{name} is stated in (xi, eta) coordinates; give xi0/eta0",
                    field=f"{where}.x0")
            kwargs["x0"] = _vector(doc["x0"], agent.native.dim, f"{where}.x0")
        if "xi0" in doc:
            if agent.native is not None:
                raise ValidationError(
                    f"{name} is stated in native coordinates; give x0",
                    field=f"{where}.xi0")
            kwargs["xi0"] = _vector(doc["xi0"], agent.r, f"{where}.xi0")
        if "eta0" in doc:
            if agent.native is not None:
                raise ValidationError(
                    f"{name} has no internal state", field=f"{where}.eta0")
            kwargs["eta0"] = _vector(doc["eta0"], agent.n_eta, f"{where}.eta0")
        return agent.with_initial(**kwargs) if kwargs else agent
    if "custom" in doc:
        _check_keys(doc, ("custom",), (), where)
        cw = f"{where}.custom"
        cd = doc["custom"]
        _check_keys(cd, ("r", "n_eta", "alpha", "beta", "theta", "xi0", "eta0"),
                    (), cw)
        r = _int(cd["r"], f"{cw}.r")
        n_eta = _int(cd["n_eta"], f"{cw}.n_eta")
        if r < 1:
            raise ValidationError("r must be at least 1", field=f"{cw}.r")
        if n_eta < 0:
            raise ValidationError("n_eta must be non-negative",
                                  field=f"{cw}.n_eta")
        nvars = r + n_eta
        alpha = _scalar_poly(_terms(cd["alpha"], nvars, f"{cw}.alpha"))
        beta_terms = _terms(cd["beta"], nvars, f"{cw}.beta")
        if beta_terms is None:
            raise ValidationError("beta needs at least one term",
                                  field=f"{cw}.beta")
        beta = _scalar_poly(beta_terms)
        theta_doc = _expect(cd["theta"], list, f"{cw}.theta",
                            "a list of term lists")
        if len(theta_doc) != n_eta:
            raise ValidationError(
                f"theta needs one row per internal state ({n_eta}), "
                f"got {len(theta_doc)}", field=f"{cw}.theta")
        rows = [_terms(row, nvars, f"{cw}.theta[{k}]")
                for k, row in enumerate(theta_doc)]
        theta = _vector_poly(rows)
        xi0 = _vector(cd["xi0"], r, f"{cw}.xi0")
        eta0 = _vector(cd["eta0"], n_eta, f"{cw}.eta0")
        return NormalFormAgent(agent_id=index + 1, r=r, n_eta=n_eta,
                               alpha=alpha, beta=beta, theta=theta,
                               xi0=xi0, eta0=eta0)
    raise ValidationError("agent needs either 'builtin' or 'custom'",
                          field=where)


def _parse_controller(doc, where="controller"):
    _check_keys(doc, ("poles", "mu", "r_hat", "rank"), ("q1", "Q1"), where)
    poles_doc = _expect(doc["poles"], list, f"{where}.poles", "a list of poles")
    poles = [_pole(p, f"{where}.poles[{k}]") for k, p in enumerate(poles_doc)]
    mu = _num(doc["mu"], f"{where}.mu")
    r_hat = _num(doc["r_hat"], f"{where}.r_hat")
    rank = doc["rank"]
    if rank not in ("one", "full"):
        raise ValidationError("rank must be 'one' or 'full'",
                              field=f"{where}.rank")
    r = len(poles) + 1
    if rank == "one":
        if "q1" not in doc:
            raise ValidationError("rank-one synthesis needs q1",
                                  field=f"{where}.q1")
        if "Q1" in doc:
            raise ValidationError("Q1 applies to full-rank synthesis only",
                                  field=f"{where}.Q1")
        q1 = _num(doc["q1"], f"{where}.q1")
        return poles, mu, r_hat, rank, q1, None
    if "q1" in doc:
        raise ValidationError("q1 applies to rank-one synthesis only",
                              field=f"{where}.q1")
    if "Q1" in doc:
        q1m_doc = _expect(doc["Q1"], list, f"{where}.Q1", "a matrix")
        if len(q1m_doc) != r:
            raise ValidationError(f"Q1 must be {r} x {r}", field=f"{where}.Q1")
        q1m = np.vstack([_vector(row, r, f"{where}.Q1[{k}]")
                         for k, row in enumerate(q1m_doc)])
        if not np.array_equal(q1m, q1m.T):
            raise ValidationError("Q1 must be symmetric", field=f"{where}.Q1")
    else:
        q1m = np.eye(r)
    return poles, mu, r_hat, rank, None, q1m


def _parse_switching(doc, n_agents, where="switching"):
    _check_keys(doc, ("graphs", "generator"), (), where)
    graphs_doc = _expect(doc["graphs"], list, f"{where}.graphs",
                         "a list of graphs")
    if not graphs_doc:
        raise ValidationError("need at least one mode graph",
                              field=f"{where}.graphs")
    graphs = [graph_from_dict(g, where=f"{where}.graphs[{k}]")
              for k, g in enumerate(graphs_doc)]
    for k, g in enumerate(graphs):
        if g.n != n_agents:
            raise ValidationError(
                f"mode graph has {g.n} nodes but the scenario has "
                f"{n_agents} agents", field=f"{where}.graphs[{k}]")
    gen_doc = _expect(doc["generator"], list, f"{where}.generator", "a matrix")
    m = len(graphs)
    if len(gen_doc) != m:
        raise ValidationError(
            f"generator must be {m} x {m} (one row per mode)",
            field=f"{where}.generator")
    gen = np.vstack([_vector(row, m, f"{where}.generator[{k}]")
                     for k, row in enumerate(gen_doc)])
    try:
        return MarkovTopology(graphs, gen)
    except (ValueError, ConsensusKitError) as exc:
        raise ValidationError(f"invalid switching chain: {exc}",
                              field=f"{where}.generator") from exc


def parse_scenario(doc):
    """Build a validated, fully synthesized scenario from a parsed document."""
    _check_keys(doc, ("agents", "controller", "sim"),
                ("graph", "switching", "observer", "output"), "")
    if ("graph" in doc) == ("switching" in doc):
        raise ValidationError(
            "exactly one of 'graph' and 'switching' is required", field="")

    agents_doc = _expect(doc["agents"], list, "agents", "a list of agents")
    if not agents_doc:
        raise ValidationError("need at least one agent", field="agents")
    agents = [_parse_agent(a, k) for k, a in enumerate(agents_doc)]

    poles, mu, r_hat, rank, q1, q1m = _parse_controller(doc["controller"])

    sim_doc = doc["sim"]
    _check_keys(sim_doc, ("t_end", "dt"), ("seed", "init"), "sim")
    t_end = _num(sim_doc["t_end"], "sim.t_end")
    dt = _num(sim_doc["dt"], "sim.dt")
    if dt <= 0:
        raise ValidationError("dt must be positive", field="sim.dt")
    if t_end < dt:
        raise ValidationError("t_end must cover at least one step",
                              field="sim.t_end")
    seed = _int(sim_doc.get("seed", 0), "sim.seed")
    init = sim_doc.get("init", "explicit")
    if init not in ("explicit", "random"):
        raise ValidationError("init must be 'explicit' or 'random'",
                              field="sim.init")

    output = None
    if "output" in doc:
        out_doc = doc["output"]
        _check_keys(out_doc, (), ("csv", "svg", "full_state"), "output")
        output = {}
        if "csv" in out_doc:
            output["csv"] = _expect(out_doc["csv"], str, "output.csv",
                                    "a path string")
        if "svg" in out_doc:
            output["svg"] = _expect(out_doc["svg"], str, "output.svg",
                                    "a path string")
        fs = out_doc.get("full_state", False)
        if not isinstance(fs, bool):
            raise ValidationError("full_state must be a boolean",
                                  field="output.full_state")
        output["full_state"] = fs

    r = len(poles) + 1
    observer_doc = None
    if "observer" in doc:
        observer_doc = doc["observer"]
        _check_keys(observer_doc, ("C", "poles"), ("init",), "observer")
        obs_c = _vector(observer_doc["C"], r, "observer.C")
        obs_poles_doc = _expect(observer_doc["poles"], list, "observer.poles",
                                "a list of poles")
        if len(obs_poles_doc) != r:
            raise ValidationError(f"need exactly {r} observer poles",
                                  field="observer.poles")
        obs_poles = [_pole(p, f"observer.poles[{k}]")
                     for k, p in enumerate(obs_poles_doc)]
        observer_init = observer_doc.get("init", "zero")
        if observer_init not in ("zero", "match"):
            raise ValidationError("init must be 'zero' or 'match'",
                                  field="observer.init")
    else:
        observer_init = "zero"

    if "graph" in doc:
        topology = graph_from_dict(doc["graph"], where="graph")
        if topology.n != len(agents):
            raise ValidationError(
                f"graph has {topology.n} nodes but the scenario has "
                f"{len(agents)} agents", field="graph")
    else:
        topology = _parse_switching(doc["switching"], len(agents))

    # eager synthesis: any design failure surfaces now, with the cause chained
    try:
        cs = design_companion(poles)
        if rank == "one":
            gain = rank_one_gain(cs, mu, q1, r_hat)
        else:
            gain = full_gain(cs, mu, q1m, r_hat)
        controllers = [local_controller(cs, ag) for ag in agents]
        observer = (observer_gain(cs, obs_c, obs_poles)
                    if observer_doc is not None else None)
    except (ValidationError, ScenarioParseError):
        raise
    except ConsensusKitError as exc:
        raise SynthesisError(f"synthesis failed: {exc}") from exc

    scen = SimScenario(agents=agents, cs=cs, gain=gain,
                       controllers=controllers, topology=topology,
                       observer=observer, t_end=t_end, dt=dt, seed=seed,
                       init=init, observer_init=observer_init,
                       output=output, raw=_normalize(doc))
    scen.validate()
    return scen


def _normalize(doc):
    norm = copy.deepcopy(doc)
    ctl = norm["controller"]
    ctl["poles"] = [[_pole(p, "").real, _pole(p, "").imag]
                    for p in ctl["poles"]]
    sim_doc = norm["sim"]
    sim_doc.setdefault("seed", 0)
    sim_doc.setdefault("init", "explicit")
    if "observer" in norm:
        norm["observer"]["poles"] = [
            [_pole(p, "").real, _pole(p, "").imag]
            for p in norm["observer"]["poles"]]
        norm["observer"].setdefault("init", "zero")
    if "output" in norm:
        norm["output"].setdefault("full_state", False)
    return norm


def load_scenario(path):
    """Parse and synthesize a scenario from a JSON file."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(f"invalid JSON: {exc.msg}",
                                 line=exc.lineno, column=exc.colno) from exc
    if not isinstance(doc, dict):
        raise ScenarioParseError("top-level value must be an object")
    return parse_scenario(doc)


def scenario_to_dict(scen):
    """Normalized document for a scenario built from one (round-trips)."""
    if scen.raw is None:
        raise ValidationError("scenario was not built from a document")
    return copy.deepcopy(scen.raw)
