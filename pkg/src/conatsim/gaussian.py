"""Covariance-matrix engine with stochastic homodyne outcomes.

Quadratures are interleaved: ``(x1, p1, x2, p2, ..., xn, pn)``. The mean
may carry leading batch axes (one row per Monte-Carlo trial) while the
covariance is shared, because Gaussian conditioning makes the covariance
independent of the measurement record.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Hashable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import InvalidParameter
from .heisenberg import INPUT, BasisLabel, QuadratureRegister
from .ops import (
    P,
    X,
    BeamSplitter,
    Fourier,
    Homodyne,
    Operation,
    PassiveMix,
    PhasePi,
    Program,
    QND,
    QNDPhaseAdjust,
    check_quadrature,
)

Mode = Hashable
MATRIX_TOL = 1e-9


@dataclass(frozen=True)
class GaussianState:
    modes: Tuple[Mode, ...]
    mean: np.ndarray
    cov: np.ndarray
    vacuum_variance: float = 1.0

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    @property
    def batch_shape(self) -> Tuple[int, ...]:
        return self.mean.shape[:-1]

    def index(self, mode: Mode, q: str = X) -> int:
        try:
            k = self.modes.index(mode)
        except ValueError:
            raise InvalidParameter(f"unknown mode {mode!r}") from None
        return 2 * k + (0 if check_quadrature(q) == X else 1)

    def batched(self, trials: int) -> "GaussianState":
        mean = np.broadcast_to(self.mean, (trials, self.mean.shape[-1])).copy()
        return replace(self, mean=mean)

    def validate(self, tol: float = MATRIX_TOL) -> None:
        if np.max(np.abs(self.cov - self.cov.T), initial=0.0) > tol:
            raise InvalidParameter("covariance matrix is not symmetric")
        if np.linalg.eigvalsh(self.cov).min(initial=0.0) < -tol:
            raise InvalidParameter("covariance matrix is not positive semidefinite")


def omega(n: int) -> np.ndarray:
    return np.kron(np.eye(n), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def _names(n: int, modes: Optional[Sequence[Mode]]) -> Tuple[Mode, ...]:
    modes = tuple(range(1, n + 1)) if modes is None else tuple(modes)
    if len(modes) != n or len(set(modes)) != n:
        raise InvalidParameter("mode names must be unique and match n")
    return modes


def vacuum(n: int, modes: Optional[Sequence[Mode]] = None, vacuum_variance: float = 1.0) -> GaussianState:
    if n < 1:
        raise InvalidParameter("need at least one mode")
    return GaussianState(_names(n, modes), np.zeros(2 * n), vacuum_variance * np.eye(2 * n), vacuum_variance)


def squeezed_vacuum(r: float, squeezed_quadrature: str = X, mode: Mode = 1, vacuum_variance: float = 1.0) -> GaussianState:
    """Single-mode squeezed vacuum with variance ``exp(-2r)`` on the chosen quadrature."""
    q = check_quadrature(squeezed_quadrature)
    lo, hi = math.exp(-2 * r), math.exp(2 * r)
    diag = [lo, hi] if q == X else [hi, lo]
    return GaussianState((mode,), np.zeros(2), vacuum_variance * np.diag(diag), vacuum_variance)


def coherent(x0: float = 0.0, p0: float = 0.0, mode: Mode = 1, vacuum_variance: float = 1.0) -> GaussianState:
    return GaussianState((mode,), np.array([x0, p0], dtype=float), vacuum_variance * np.eye(2), vacuum_variance)


def tensor(*states: GaussianState) -> GaussianState:
    modes = sum((s.modes for s in states), ())
    if len(set(modes)) != len(modes):
        raise InvalidParameter("tensor product needs distinct mode names")
    batch = np.broadcast_shapes(*(s.batch_shape for s in states))
    mean = np.concatenate([np.broadcast_to(s.mean, batch + s.mean.shape[-1:]) for s in states], axis=-1)
    cov = np.zeros((2 * len(modes), 2 * len(modes)))
    k = 0
    for s in states:
        d = 2 * s.n_modes
        cov[k:k + d, k:k + d] = s.cov
        k += d
    return GaussianState(modes, mean, cov, states[0].vacuum_variance)


# Two-mode symplectic matrices in (x_i, p_i, x_j, p_j) order.

def beam_splitter_matrix(t: float = 0.5) -> np.ndarray:
    if not 0.0 <= t <= 1.0:
        raise InvalidParameter(f"transmissivity must lie in [0, 1], got {t}")
    a, b = math.sqrt(t), math.sqrt(1.0 - t)
    return np.kron(np.array([[a, -b], [b, a]]), np.eye(2))


def qnd_matrix() -> np.ndarray:
    return np.array([
        [1, 0, 0, 0],
        [0, 1, 0, -1],
        [1, 0, 1, 0],
        [0, 0, 0, 1],
    ], dtype=float)


def qnd_phase_adjust_matrix() -> np.ndarray:
    return np.array([
        [1, 0, -1, 0],
        [0, 1, 0, 0],
        [0, 0, 1, 0],
        [0, 1, 0, 1],
    ], dtype=float)


def phase_pi_matrix() -> np.ndarray:
    return -np.eye(2)


def fourier_matrix() -> np.ndarray:
    return np.array([[0.0, 1.0], [-1.0, 0.0]])


def passive_matrix(orthogonal) -> np.ndarray:
    return np.kron(np.asarray(orthogonal, dtype=float), np.eye(2))


def symplectic_defect(S: np.ndarray) -> float:
    n = S.shape[0] // 2
    W = omega(n)
    return float(np.max(np.abs(S @ W @ S.T - W)))


def apply_symplectic(state: GaussianState, S: np.ndarray, modes: Optional[Sequence[Mode]] = None) -> GaussianState:
    """``mean <- S mean``, ``cov <- S cov S^T`` on ``modes`` (all modes by default)."""
    S = np.asarray(S, dtype=float)
    modes = state.modes if modes is None else tuple(modes)
    if len(set(modes)) != len(modes):
        raise InvalidParameter("symplectic map needs distinct modes")
    if S.shape != (2 * len(modes), 2 * len(modes)):
        raise InvalidParameter(f"matrix shape {S.shape} does not match {len(modes)} modes")
    defect = symplectic_defect(S)
    if defect > MATRIX_TOL:
        raise InvalidParameter(f"matrix is not symplectic: max |S W S^T - W| = {defect:.3g}")
    idx = [state.index(m, q) for m in modes for q in (X, P)]
    full = np.eye(2 * state.n_modes)
    full[np.ix_(idx, idx)] = S
    cov = full @ state.cov @ full.T
    cov = 0.5 * (cov + cov.T)
    mean = state.mean @ full.T
    return replace(state, mean=mean, cov=cov)


def beam_splitter(state: GaussianState, i: Mode, j: Mode, t: float = 0.5) -> GaussianState:
    return apply_symplectic(state, beam_splitter_matrix(t), (i, j))


def qnd(state: GaussianState, i: Mode, j: Mode) -> GaussianState:
    return apply_symplectic(state, qnd_matrix(), (i, j))


def qnd_phase_adjust(state: GaussianState, i: Mode, j: Mode) -> GaussianState:
    return apply_symplectic(state, qnd_phase_adjust_matrix(), (i, j))


def phase_pi(state: GaussianState, mode: Mode) -> GaussianState:
    return apply_symplectic(state, phase_pi_matrix(), (mode,))


def fourier(state: GaussianState, mode: Mode) -> GaussianState:
    return apply_symplectic(state, fourier_matrix(), (mode,))


def displace(state: GaussianState, mode: Mode, quadrature: str, amount) -> GaussianState:
    k = state.index(mode, quadrature)
    mean = np.array(state.mean, dtype=float, copy=True)
    mean[..., k] = mean[..., k] + amount
    return replace(state, mean=mean)


def drop_mode(state: GaussianState, mode: Mode) -> GaussianState:
    k = state.index(mode, X)
    keep = [i for i in range(2 * state.n_modes) if i not in (k, k + 1)]
    modes = tuple(m for m in state.modes if m != mode)
    return replace(state, modes=modes, mean=state.mean[..., keep], cov=state.cov[np.ix_(keep, keep)])


def homodyne_measure(
    state: GaussianState,
    mode: Mode,
    quadrature: str,
    eta: float,
    rng: np.random.Generator,
) -> Tuple[np.ndarray, GaussianState]:
    """Sample a homodyne outcome and condition on it.

    The raw outcome has mean ``sqrt(eta) * <q>`` and variance
    ``eta * Var(q) + (1 - eta) * vacuum_variance``. With a batched mean one
    outcome is drawn per trial. Returns the outcome(s) and the conditioned
    state with the measured mode removed.
    """
    if not 0.0 < eta <= 1.0:
        raise InvalidParameter(f"eta must lie in (0, 1], got {eta}")
    k = state.index(mode, quadrature)
    V, mu = state.cov, state.mean
    Vc = math.sqrt(eta) * V[:, k]
    m = eta * V[k, k] + (1.0 - eta) * state.vacuum_variance
    pred = math.sqrt(eta) * mu[..., k]
    outcome = pred + math.sqrt(m) * rng.standard_normal(state.batch_shape)
    if m > 0:
        cov = V - np.outer(Vc, Vc) / m
        mean = mu + np.multiply.outer((outcome - pred) / m, Vc)
    else:
        cov, mean = V.copy(), mu.copy()
    cov = 0.5 * (cov + cov.T)
    conditioned = replace(state, mean=mean, cov=cov)
    return outcome, drop_mode(conditioned, mode)


def apply(state: GaussianState, op: Operation, rng: Optional[np.random.Generator] = None):
    """Apply one operation; returns ``(state, outcome or None)``."""
    if isinstance(op, BeamSplitter):
        return beam_splitter(state, op.i, op.j, op.t), None
    if isinstance(op, QND):
        return qnd(state, op.i, op.j), None
    if isinstance(op, QNDPhaseAdjust):
        return qnd_phase_adjust(state, op.i, op.j), None
    if isinstance(op, PhasePi):
        return phase_pi(state, op.mode), None
    if isinstance(op, Fourier):
        return fourier(state, op.mode), None
    if isinstance(op, PassiveMix):
        return apply_symplectic(state, passive_matrix(op.matrix), op.modes), None
    if isinstance(op, Homodyne):
        if rng is None:
            raise InvalidParameter("homodyne measurement needs a random generator")
        outcome, state = homodyne_measure(state, op.mode, op.quadrature, op.eta, rng)
        estimate = outcome / math.sqrt(op.eta)
        for target, q, gain in op.targets:
            state = displace(state, target, q, gain * estimate)
        return state, outcome
    raise InvalidParameter(f"unsupported operation {op!r}")


def initial_state(program: Program, input_state: Optional[GaussianState] = None, vacuum_variance: float = 1.0) -> GaussianState:
    """Inputs (from ``input_state``) followed by the program's squeezed vacua."""
    parts: List[GaussianState] = []
    if program.inputs:
        if input_state is None:
            raise InvalidParameter("program has input modes but no input state was given")
        if input_state.n_modes != len(program.inputs):
            raise InvalidParameter("input state mode count does not match the program")
        parts.append(replace(input_state, modes=tuple(program.inputs)))
    for mode, s in program.vacua:
        cov = vacuum_variance * np.diag([s * s, 1.0 / (s * s)])
        parts.append(GaussianState((mode,), np.zeros(2), cov, vacuum_variance))
    return tensor(*parts)


def run(
    program: Program,
    input_state: Optional[GaussianState] = None,
    rng: Optional[np.random.Generator] = None,
    trials: Optional[int] = None,
    vacuum_variance: float = 1.0,
) -> Tuple[GaussianState, List[np.ndarray]]:
    """Execute ``program`` numerically; ``trials`` batches the measurement record."""
    state = initial_state(program, input_state, vacuum_variance)
    if trials is not None:
        state = state.batched(trials)
    outcomes = []
    for op in program.ops:
        state, outcome = apply(state, op, rng)
        if outcome is not None:
            outcomes.append(outcome)
    return state, outcomes


def sample_quadratures(state: GaussianState, rng: np.random.Generator) -> np.ndarray:
    """Draw one phase-space point per trial from ``N(mean, cov)``."""
    w, U = np.linalg.eigh(state.cov)
    L = U * np.sqrt(np.clip(w, 0.0, None))
    z = rng.standard_normal(state.mean.shape)
    return state.mean + z @ L.T


def basis_moments(register: QuadratureRegister, input_state: Optional[GaussianState] = None):
    """Labels, mean vector and covariance of every basis operator of ``register``."""
    labels = sorted(_all_labels(register))
    index = {lab: i for i, lab in enumerate(labels)}
    mu = np.zeros(len(labels))
    sigma = np.zeros((len(labels), len(labels)))
    inputs = sorted(register.input_ids.items(), key=lambda kv: kv[1])
    if inputs:
        if input_state is None or input_state.n_modes != len(inputs):
            raise InvalidParameter("input state does not match the register's input modes")
        if input_state.batch_shape:
            raise InvalidParameter("bridge needs an unbatched input state")
        pos = []
        for _, lid in inputs:
            pos += [index.get(BasisLabel(INPUT, lid, X)), index.get(BasisLabel(INPUT, lid, P))]
        for a, ia in enumerate(pos):
            if ia is None:
                continue
            mu[ia] = input_state.mean[a]
            for b, ib in enumerate(pos):
                if ib is not None:
                    sigma[ia, ib] = input_state.cov[a, b]
    for lab, var in register.label_variance.items():
        if lab in index:
            sigma[index[lab], index[lab]] = var
    return labels, mu, sigma


def _all_labels(register: QuadratureRegister):
    labels = set(register.label_variance)
    for lid in register.input_ids.values():
        labels.add(BasisLabel(INPUT, lid, X))
        labels.add(BasisLabel(INPUT, lid, P))
    for x, p in register.modes.values():
        labels.update(x)
        labels.update(p)
    return labels


def form_vector(form, labels) -> np.ndarray:
    index = {lab: i for i, lab in enumerate(labels)}
    v = np.zeros(len(labels))
    for lab, c in form.items():
        v[index[lab]] = c
    return v


def from_heisenberg(register: QuadratureRegister, input_state: Optional[GaussianState] = None) -> GaussianState:
    """Assemble the output Gaussian state from the register's linear forms."""
    labels, mu, sigma = basis_moments(register, input_state)
    rows = []
    for x, p in register.modes.values():
        rows.append(form_vector(x, labels))
        rows.append(form_vector(p, labels))
    L = np.array(rows).reshape(-1, len(labels))
    cov = L @ sigma @ L.T
    return GaussianState(tuple(register.modes), L @ mu, 0.5 * (cov + cov.T), register.vacuum_variance)


def bridge_moments(register: QuadratureRegister, form, input_state: Optional[GaussianState] = None) -> Tuple[float, float]:
    """Mean and variance of ``form`` with inputs drawn from ``input_state``."""
    labels, mu, sigma = basis_moments(register, input_state)
    v = form_vector(form, labels)
    return float(v @ mu), float(v @ sigma @ v)


__all__ = [
    "GaussianState", "vacuum", "squeezed_vacuum", "coherent", "tensor", "omega",
    "beam_splitter_matrix", "qnd_matrix", "qnd_phase_adjust_matrix", "phase_pi_matrix",
    "fourier_matrix", "passive_matrix", "apply_symplectic", "beam_splitter", "qnd",
    "qnd_phase_adjust", "phase_pi", "fourier", "displace", "homodyne_measure", "run",
    "initial_state", "sample_quadratures", "from_heisenberg", "bridge_moments", "basis_moments",
]
