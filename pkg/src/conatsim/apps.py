"""Controlled teleportation and classical secret sharing over conat channels."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import gaussian, heisenberg
from .errors import InvalidParameter
from .ops import Homodyne, P, X
from .protocols import ChannelOutput


def coherent_fidelity(v_x: float, v_p: float, vacuum_variance: float = 1.0) -> float:
    """Overlap of a coherent state with a same-mean Gaussian carrying excess noise."""
    a, b = v_x / vacuum_variance, v_p / vacuum_variance
    return 2.0 / math.sqrt((2.0 + a) * (2.0 + b))


@dataclass
class TeleportReport:
    receiver: str
    controllers: List[str]
    withheld: List[str]
    v_x: float
    v_p: float
    fidelity: float
    v_x_mc: Optional[float] = None
    v_p_mc: Optional[float] = None
    v_x_se: Optional[float] = None
    v_p_se: Optional[float] = None
    fidelity_mc: Optional[float] = None
    trials: Optional[int] = None
    seed: Optional[int] = None

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _eta(channel: ChannelOutput, eta: Optional[float]) -> float:
    eta = channel.metadata.get("eta", 1.0) if eta is None else eta
    if not 0.0 < eta <= 1.0:
        raise InvalidParameter(f"eta must lie in (0, 1], got {eta}")
    return eta


def _reveal_ops(channel: ChannelOutput, receiver: str, revealers: Sequence[str], eta: float):
    """Each revealer measures the shared quadrature; the receiver adds the sum."""
    q = channel.shared_quadrature
    target = channel.mode_of(receiver)
    return [Homodyne(channel.mode_of(c), q, ((target, q, 1.0),), eta) for c in revealers]


def _resolve_receiver(channel: ChannelOutput, receiver: str) -> None:
    if receiver not in channel.parties:
        raise InvalidParameter(f"{receiver!r} is not a receiver of this channel")
    if receiver == channel.sender:
        raise InvalidParameter("the sender cannot be the receiver")


def _mc_variances(program, input_state, checks, trials, seed, sigma2):
    """Sample ``var(output quadrature) - input variance`` for each (mode, q, input index)."""
    rng = np.random.default_rng(seed)
    state, _ = gaussian.run(program, input_state, rng, trials=trials, vacuum_variance=sigma2)
    y = gaussian.sample_quadratures(state, rng)
    out = []
    for mode, q, k in checks:
        vals = y[:, state.index(mode, q)]
        var = float(np.var(vals, ddof=1))
        out.append((float(var - input_state.cov[k, k]), var * math.sqrt(2.0 / (trials - 1))))
    return out


def _inputs_for(channel: ChannelOutput, means) -> gaussian.GaussianState:
    sigma2 = channel.register.vacuum_variance
    states = [gaussian.coherent(*means.get(m, (0.0, 0.0)), mode=m, vacuum_variance=sigma2)
              for m in channel.program.inputs]
    return gaussian.tensor(*states)


def _deviation(register, mode, q, input_mode, input_state) -> float:
    form = register.quad(mode, q) - register.input_form(input_mode, q)
    return gaussian.bridge_moments(register, form, input_state)[1]


def controlled_teleport(channel: ChannelOutput, receiver: str, input_mean=(0.0, 0.0),
                        eta_controllers: Optional[float] = None, withhold: Sequence[str] = (),
                        trials: Optional[int] = None, seed: int = 0) -> TeleportReport:
    """Teleport the sender's coherent input to ``receiver`` under control of the others.

    Every other output party (the sender included) measures the channel's
    shared quadrature and sends the outcome; parties in ``withhold`` keep
    theirs. ``v_x`` and ``v_p`` are ``Var(out - in)`` per quadrature, exact
    from the linear forms; with ``trials`` a Monte-Carlo run reports the
    same quantities as ``Var(out) - Var(in)``.
    """
    _resolve_receiver(channel, receiver)
    for w in withhold:
        if w not in channel.parties or w == receiver:
            raise InvalidParameter(f"cannot withhold {w!r}")
    eta = _eta(channel, eta_controllers)
    controllers = [p for p in channel.parties if p != receiver and p not in withhold]
    program = channel.program.then(*_reveal_ops(channel, receiver, controllers, eta))
    sigma2 = channel.register.vacuum_variance
    register = heisenberg.run(program, vacuum_variance=sigma2, prune_tol=channel.register.prune_tol)
    input_state = _inputs_for(channel, {channel.input_mode: tuple(input_mean)})

    mode = channel.mode_of(receiver)
    v_x = _deviation(register, mode, X, channel.input_mode, input_state)
    v_p = _deviation(register, mode, P, channel.input_mode, input_state)
    report = TeleportReport(receiver, controllers, list(withhold), v_x, v_p,
                            coherent_fidelity(v_x, v_p, sigma2))
    if trials:
        k = 2 * channel.program.inputs.index(channel.input_mode)
        (mx, sx), (mp, sp) = _mc_variances(program, input_state, [(mode, X, k), (mode, P, k + 1)],
                                           trials, seed, sigma2)
        report.v_x_mc, report.v_p_mc, report.v_x_se, report.v_p_se = mx, mp, sx, sp
        report.fidelity_mc = coherent_fidelity(max(mx, 0.0), max(mp, 0.0), sigma2)
        report.trials, report.seed = trials, seed
    return report


def controlled_teleport_two_mode(pq: ChannelOutput, mq: ChannelOutput, receiver: str,
                                 input_mean=((0.0, 0.0), (0.0, 0.0)), eta: float = 1.0,
                                 trials: Optional[int] = None, seed: int = 0) -> Tuple[TeleportReport, TeleportReport]:
    """Two-mode controlled teleportation over the PQ/MQ pair of one superdense run.

    ``input_mean`` gives the means of the MQ payload then the PQ payload.
    Returns ``(pq_report, mq_report)``.
    """
    if pq.register is not mq.register or pq.kind == mq.kind or pq.program != mq.program:
        raise InvalidParameter("PQ and MQ channels must come from the same superdense run")
    if pq.kind != "PQ":
        raise InvalidParameter("first channel must be the PQ channel")
    _resolve_receiver(pq, receiver)
    _resolve_receiver(mq, receiver)
    if not 0.0 < eta <= 1.0:
        raise InvalidParameter(f"eta must lie in (0, 1], got {eta}")
    others = [p for p in pq.parties if p != receiver]
    ops = _reveal_ops(pq, receiver, others, eta) + _reveal_ops(mq, receiver, others, eta)
    program = pq.program.then(*ops)
    sigma2 = pq.register.vacuum_variance
    register = heisenberg.run(program, vacuum_variance=sigma2, prune_tol=pq.register.prune_tol)
    means = {mq.input_mode: tuple(input_mean[0]), pq.input_mode: tuple(input_mean[1])}
    input_state = _inputs_for(pq, means)

    reports = []
    for ch in (pq, mq):
        mode = ch.mode_of(receiver)
        v_x = _deviation(register, mode, X, ch.input_mode, input_state)
        v_p = _deviation(register, mode, P, ch.input_mode, input_state)
        rep = TeleportReport(receiver, others, [], v_x, v_p, coherent_fidelity(v_x, v_p, sigma2))
        if trials:
            k = 2 * program.inputs.index(ch.input_mode)
            (mx, sx), (mp, sp) = _mc_variances(program, input_state, [(mode, X, k), (mode, P, k + 1)],
                                               trials, seed, sigma2)
            rep.v_x_mc, rep.v_p_mc, rep.v_x_se, rep.v_p_se = mx, mp, sx, sp
            rep.fidelity_mc = coherent_fidelity(max(mx, 0.0), max(mp, 0.0), sigma2)
            rep.trials, rep.seed = trials, seed
        reports.append(rep)
    return reports[0], reports[1]


@dataclass
class QSSReport:
    reconstructor: str
    coalition: List[str]
    withheld: List[str]
    secret: Tuple[float, float]
    v_x: float
    v_p: float
    v_x_mc: float
    v_p_mc: float
    v_x_se: float
    v_p_se: float
    bias_x: float
    bias_p: float
    trials: int
    seed: int

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def qss_classical(channel: ChannelOutput, secret=(0.0, 0.0), coalition: Sequence[str] = (),
                  reconstructor: Optional[str] = None, trials: int = 100_000, seed: int = 0,
                  eta: Optional[float] = None) -> QSSReport:
    """Share a classical pair ``(x0, p0)`` encoded as the sender's coherent amplitude.

    Coalition members reveal their shared-quadrature outcomes to the
    reconstructor, who estimates each secret component from one homodyne
    reading of its own mode. Error variances are excess variances over the
    coherent state's own vacuum noise: exact from the linear forms and
    estimated from ``trials`` Monte-Carlo runs.
    """
    coalition = list(coalition)
    for c in coalition:
        if c not in channel.parties:
            raise InvalidParameter(f"coalition member {c!r} is not a receiver")
    if reconstructor is None:
        candidates = [p for p in channel.parties if p != channel.sender and p not in coalition]
        if not candidates:
            raise InvalidParameter("no party left to reconstruct the secret")
        reconstructor = candidates[0]
    if reconstructor in coalition:
        raise InvalidParameter("the reconstructor cannot be in the coalition")
    _resolve_receiver(channel, reconstructor)
    if trials < 2:
        raise InvalidParameter("need at least 2 trials")
    eta = _eta(channel, eta)

    program = channel.program.then(*_reveal_ops(channel, reconstructor, coalition, eta))
    sigma2 = channel.register.vacuum_variance
    register = heisenberg.run(program, vacuum_variance=sigma2, prune_tol=channel.register.prune_tol)
    input_state = _inputs_for(channel, {channel.input_mode: tuple(secret)})
    mode = channel.mode_of(reconstructor)

    exact = [gaussian.bridge_moments(register, register.quad(mode, q), input_state)[1] - sigma2 for q in (X, P)]

    rng = np.random.default_rng(seed)
    state, _ = gaussian.run(program, input_state, rng, trials=trials, vacuum_variance=sigma2)
    y = gaussian.sample_quadratures(state, rng)
    est = []
    for q, s in zip((X, P), secret):
        err = y[:, state.index(mode, q)] - s
        var = float(np.var(err, ddof=1))
        est.append((var - sigma2, var * math.sqrt(2.0 / (trials - 1)), float(np.mean(err))))

    withheld = [p for p in channel.parties if p != reconstructor and p not in coalition]
    return QSSReport(reconstructor, coalition, withheld, tuple(secret), exact[0], exact[1],
                     est[0][0], est[1][0], est[0][1], est[1][1], est[0][2], est[1][2], trials, seed)


def secrecy_gap(low: QSSReport, high: QSSReport, quadrature: str = P) -> Tuple[float, float]:
    """Difference ``high - low`` of Monte-Carlo error variance and its combined standard error."""
    if quadrature == X:
        return high.v_x_mc - low.v_x_mc, math.hypot(high.v_x_se, low.v_x_se)
    return high.v_p_mc - low.v_p_mc, math.hypot(high.v_p_se, low.v_p_se)


__all__ = [
    "TeleportReport", "QSSReport", "coherent_fidelity", "controlled_teleport",
    "controlled_teleport_two_mode", "qss_classical", "secrecy_gap",
]
