"""Executable channel definitions and closed-form noise predictions."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Hashable, List, Optional, Sequence, Tuple

import numpy as np

from . import gaussian, heisenberg
from .errors import InvalidParameter
from .heisenberg import INPUT, BasisLabel, LinearForm, QuadratureRegister
from .ops import P, X
from .protocols import MQ, PQ, ChannelOutput, Topology, validate_topology

Mode = Hashable

SENDER_REFERENCED = "sender-output-referenced"
INPUT_REFERENCED = "input-referenced"

SYMBOLIC_TOL = 1e-12
# input coefficients this small are rounding residue of exact cancellations
LEAK_TOL = 1e-9
BRIDGE_TOL = 1e-9
MEAN_TOL = 1e-9
N_SIGMA = 3.0


@dataclass(frozen=True)
class NoiseTerm:
    """``sum(c * output quadrature) - sum(d * input quadrature)``."""

    name: str
    outputs: Tuple[Tuple[Mode, str, float], ...]
    inputs: Tuple[Tuple[Mode, str, float], ...] = ()

    def form(self, register: QuadratureRegister) -> LinearForm:
        terms = [(c, register.quad(m, q)) for m, q, c in self.outputs]
        terms += [(-d, register.input_form(m, q)) for m, q, d in self.inputs]
        return heisenberg.combine(terms, tol=register.prune_tol)


def noise_terms(output: ChannelOutput, convention: str = SENDER_REFERENCED) -> List[NoiseTerm]:
    """Relative-noise terms for each non-sender receiver, then the collective term."""
    if convention not in (SENDER_REFERENCED, INPUT_REFERENCED):
        raise InvalidParameter(f"unknown convention {convention!r}")
    cq, sq = output.copy_quadrature, output.shared_quadrature
    terms = []
    for k, mode in enumerate(output.modes[1:], start=1):
        if convention == SENDER_REFERENCED:
            terms.append(NoiseTerm(f"eps{k}", ((mode, cq, 1.0), (output.sender_mode, cq, -1.0))))
        else:
            terms.append(NoiseTerm(f"eps{k}", ((mode, cq, 1.0),), ((output.input_mode, cq, 1.0),)))
    terms.append(NoiseTerm(
        f"eps{len(output.modes)}",
        tuple((m, sq, 1.0) for m in output.modes),
        ((output.input_mode, sq, 1.0),),
    ))
    return terms


def _input_means(register: QuadratureRegister, input_mean: Sequence[float]) -> Dict[BasisLabel, float]:
    x0, p0 = input_mean
    means = {}
    for lid in register.input_ids.values():
        means[BasisLabel(INPUT, lid, X)] = float(x0)
        means[BasisLabel(INPUT, lid, P)] = float(p0)
    return means


@dataclass
class EpsilonReport:
    kind: str
    convention: str
    epsilons: List[Optional[float]]
    epsilons_input_referenced: List[Optional[float]]
    means: Dict[str, float]
    commutators: Dict[str, float]
    commutators_ok: bool
    sender_deviation: Optional[float]
    leaks: List[str] = field(default_factory=list)
    predicted: Optional[List[float]] = None
    passed: Optional[bool] = None
    tolerance: float = SYMBOLIC_TOL

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _safe_variance(register, form) -> Optional[float]:
    residue = {k: c for k, c in form.items() if k.kind == INPUT}
    if any(abs(c) > LEAK_TOL for c in residue.values()):
        return None
    if residue:
        form = LinearForm({k: c for k, c in form.items() if k.kind != INPUT}, tol=0.0)
    return heisenberg.variance_of(register, form)


def _check(output: ChannelOutput, kind: str, predicted, input_mean, tol) -> EpsilonReport:
    if output.kind != kind:
        raise InvalidParameter(f"expected a {kind} channel, got {output.kind}")
    reg = output.register
    input_mean = output.metadata.get("input_mean", (0.0, 0.0)) if input_mean is None else input_mean
    in_means = _input_means(reg, input_mean)

    eps, eps_in, means, leaks = [], [], {}, []
    for sender_term, input_term in zip(noise_terms(output, SENDER_REFERENCED), noise_terms(output, INPUT_REFERENCED)):
        f = sender_term.form(reg)
        v = _safe_variance(reg, f)
        if v is None:
            leaks.append(sender_term.name)
        eps.append(v)
        eps_in.append(_safe_variance(reg, input_term.form(reg)))
        means[sender_term.name] = heisenberg.mean_of(f, in_means)
        if input_term.name != sender_term.name or input_term.outputs != sender_term.outputs:
            means[input_term.name + "_input"] = heisenberg.mean_of(input_term.form(reg), in_means)

    cq = output.copy_quadrature
    deviation = _safe_variance(reg, reg.quad(output.sender_mode, cq) - reg.input_form(output.input_mode, cq))

    sym = heisenberg.symplectic_check(reg, output.modes)
    commutators = {}
    for party, mode in zip(output.parties, output.modes):
        commutators[party] = heisenberg.symplectic_form(reg.x(mode), reg.p(mode))

    if predicted is None:
        try:
            predicted = predicted_from_metadata(output)
        except InvalidParameter:
            predicted = None
    passed = None
    if predicted is not None:
        predicted = [float(v) for v in predicted]
        passed = (
            not leaks
            and len(predicted) == len(eps)
            and all(abs(m - p) <= tol for m, p in zip(eps, predicted))
            and all(abs(v) <= MEAN_TOL for v in means.values())
            and sym.ok
        )
    return EpsilonReport(kind, SENDER_REFERENCED, eps, eps_in, means, commutators, sym.ok,
                         deviation, leaks, predicted, passed, tol)


def check_pq_definition(output: ChannelOutput, predicted=None, input_mean=None, tol: float = SYMBOLIC_TOL) -> EpsilonReport:
    """Evaluate the PQ channel constraints on ``output``.

    Relative position noise is reported against the sender's output mode
    (used for pass/fail) and against the input mode; the collective
    momentum noise is the same in both conventions.
    """
    return _check(output, PQ, predicted, input_mean, tol)


def check_mq_definition(output: ChannelOutput, predicted=None, input_mean=None, tol: float = SYMBOLIC_TOL) -> EpsilonReport:
    return _check(output, MQ, predicted, input_mean, tol)


def check_definition(output: ChannelOutput, **kw) -> EpsilonReport:
    return check_pq_definition(output, **kw) if output.kind == PQ else check_mq_definition(output, **kw)


def _path_edges(top: Topology) -> Dict[str, List[int]]:
    report = validate_topology(top)
    report.raise_for_errors()
    paths: Dict[str, List[int]] = {}
    for party in top.parties:
        edges, node = [], party
        while report.parents[node][0] is not None:
            parent, k = report.parents[node]
            edges.append(k)
            node = parent
        paths[party] = edges
    return paths


def predicted_epsilons(method: str, kind: str, n: Optional[int] = None, r: Optional[float] = None,
                       eta: float = 1.0, topology: Optional[Topology] = None,
                       vacuum_variance: float = 1.0) -> List[float]:
    """Closed-form epsilons in receiver order, collective term last."""
    kind = kind.upper()
    if kind not in (PQ, MQ):
        raise InvalidParameter(f"kind must be PQ or MQ, got {kind!r}")
    if method == "ccaecc":
        if n is None or r is None:
            raise InvalidParameter("ccaecc prediction needs n and r")
        if not 0.0 < eta <= 1.0:
            raise InvalidParameter(f"eta must lie in (0, 1], got {eta}")
        s = math.exp(-2 * r)
        eps = [2 * s] * (n - 1) + [(n + 1) * s + 2 * (1 - eta) / eta]
        return [vacuum_variance * e for e in eps]
    if method == "superdense":
        if topology is None:
            raise InvalidParameter("superdense prediction needs a topology")
        paths = _path_edges(topology)
        edge_noise = [2 * math.exp(-2 * topology.edge_squeezing(k, r)) for k in range(len(topology.edges))]
        others = [p for p in topology.parties if p != topology.sender]
        eps = [sum(edge_noise[k] for k in paths[p]) for p in others]
        eps.append(sum(edge_noise) if kind == PQ else 0.0)
        return [vacuum_variance * e for e in eps]
    raise InvalidParameter(f"unknown method {method!r}")


def predicted_from_metadata(output: ChannelOutput) -> List[float]:
    meta = output.metadata
    method = meta.get("method")
    top = Topology.from_dict(meta["topology"]) if "topology" in meta else None
    return predicted_epsilons(method, output.kind, meta.get("n"), meta.get("r"), meta.get("eta", 1.0),
                              top, meta.get("vacuum_variance", 1.0))


# ---------------------------------------------------------------- cross-validation

def coherent_inputs(output_or_program, input_mean=(0.0, 0.0), vacuum_variance: float = 1.0):
    program = getattr(output_or_program, "program", output_or_program)
    states = [gaussian.coherent(*input_mean, mode=m, vacuum_variance=vacuum_variance) for m in program.inputs]
    return gaussian.tensor(*states)


@dataclass
class MonteCarloEstimate:
    variance: float
    variance_se: float
    mean: float
    mean_se: float


def monte_carlo_terms(program, terms: Sequence[NoiseTerm], input_state, trials: int, seed: int,
                      vacuum_variance: float = 1.0) -> List[MonteCarloEstimate]:
    """Estimate every noise term from sampled trials of the covariance engine.

    The input operator cannot be sampled jointly with the outputs, so the
    input part of a term is handled through the known input moments: the
    estimate is ``Var(sum c y) - d^T V_in d``, which equals the true noise
    variance exactly when the outputs carry the input with unit weight.
    """
    rng = np.random.default_rng(seed)
    state, _ = gaussian.run(program, input_state, rng, trials=trials, vacuum_variance=vacuum_variance)
    y = gaussian.sample_quadratures(state, rng)
    in_index = {m: k for k, m in enumerate(program.inputs)}
    out = []
    for term in terms:
        vals = np.zeros(trials)
        for mode, q, c in term.outputs:
            vals += c * y[:, state.index(mode, q)]
        d = np.zeros(2 * len(program.inputs))
        for mode, q, coef in term.inputs:
            d[2 * in_index[mode] + (0 if q == X else 1)] += coef
        var = float(np.var(vals, ddof=1))
        est = var - float(d @ input_state.cov @ d) if term.inputs else var
        out.append(MonteCarloEstimate(
            variance=est,
            variance_se=var * math.sqrt(2.0 / (trials - 1)),
            mean=float(np.mean(vals) - d @ input_state.mean) if term.inputs else float(np.mean(vals)),
            mean_se=math.sqrt(var / trials),
        ))
    return out


@dataclass
class CrossValidationReport:
    rows: List[Dict[str, Any]]
    trials: int
    seed: int
    agree: bool

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def cross_validate(output: ChannelOutput, trials: int = 100_000, seed: int = 0,
                   input_mean=(0.0, 0.0), conventions=(SENDER_REFERENCED, INPUT_REFERENCED)) -> CrossValidationReport:
    """Compare symbolic, covariance-bridge and Monte-Carlo noise for every term."""
    if trials < 1000:
        raise InvalidParameter("cross-validation needs at least 1000 trials")
    reg = output.register
    sigma2 = reg.vacuum_variance
    input_state = coherent_inputs(output, input_mean, sigma2)
    terms: List[NoiseTerm] = []
    for conv in conventions:
        for t in noise_terms(output, conv):
            tag = "" if conv == SENDER_REFERENCED else "_input"
            if conv != SENDER_REFERENCED and t.name == f"eps{len(output.modes)}":
                continue
            terms.append(NoiseTerm(t.name + tag, t.outputs, t.inputs))
    mc = monte_carlo_terms(output.program, terms, input_state, trials, seed, sigma2)

    rows, agree = [], True
    for term, est in zip(terms, mc):
        form = term.form(reg)
        sym = _safe_variance(reg, form)
        b_mean, b_var = gaussian.bridge_moments(reg, form, input_state)
        ok_sym = sym is not None and abs(sym - b_var) <= BRIDGE_TOL
        ok_mc = abs(est.variance - b_var) <= N_SIGMA * est.variance_se
        ok_mean = abs(est.mean - b_mean) <= N_SIGMA * est.mean_se + MEAN_TOL
        row_ok = ok_sym and ok_mc and ok_mean
        agree &= row_ok
        rows.append({
            "name": term.name,
            "symbolic": sym,
            "bridge": b_var,
            "monte_carlo": est.variance,
            "monte_carlo_se": est.variance_se,
            "mean_bridge": b_mean,
            "mean_monte_carlo": est.mean,
            "mean_se": est.mean_se,
            "input_leak": sym is None,
            "agree": row_ok,
        })
    return CrossValidationReport(rows, trials, seed, agree)
