"""Exact Heisenberg-picture engine.

Every quadrature is tracked as a real linear combination of the initial
basis operators: symbolic input quadratures, vacuum quadratures of the
resource modes, and one vacuum per lossy detector. Gates, measurements and
feed-forward are all linear substitutions, so noise variances come out in
closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Dict, Hashable, Iterable, Iterator, List, Mapping, NamedTuple, Optional, Sequence, Tuple

from .errors import InvalidParameter, StaleModeError, SymbolicInputError
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

PRUNE_TOL = 1e-12

INPUT = "input"
VACUUM = "vacuum"
DETECTOR = "detector"

Mode = Hashable


class BasisLabel(NamedTuple):
    kind: str
    mode_id: int
    quadrature: str

    def conjugate(self) -> "BasisLabel":
        return self._replace(quadrature=P if self.quadrature == X else X)

    def __str__(self) -> str:
        tag = {INPUT: "in", VACUUM: "vac", DETECTOR: "det"}[self.kind]
        return f"{self.quadrature.lower()}_{tag}{self.mode_id}"


class LinearForm:
    """Sparse real combination of basis labels.

    Coefficients whose magnitude is at or below ``tol`` are dropped on
    construction; ``tol=0`` keeps everything except exact zeros.
    """

    __slots__ = ("_coeffs",)

    def __init__(self, coeffs: Optional[Mapping[BasisLabel, float]] = None, tol: float = PRUNE_TOL):
        items = coeffs.items() if coeffs else ()
        self._coeffs: Dict[BasisLabel, float] = {
            k: float(v) for k, v in items if abs(v) > tol
        }

    @classmethod
    def unit(cls, label: BasisLabel, scale: float = 1.0) -> "LinearForm":
        return cls({label: scale})

    @property
    def coeffs(self) -> Dict[BasisLabel, float]:
        return dict(self._coeffs)

    def __getitem__(self, label: BasisLabel) -> float:
        return self._coeffs.get(label, 0.0)

    def __iter__(self) -> Iterator[BasisLabel]:
        return iter(self._coeffs)

    def __len__(self) -> int:
        return len(self._coeffs)

    def items(self):
        return self._coeffs.items()

    def __add__(self, other: "LinearForm") -> "LinearForm":
        return combine([(1.0, self), (1.0, other)])

    def __sub__(self, other: "LinearForm") -> "LinearForm":
        return combine([(1.0, self), (-1.0, other)])

    def __neg__(self) -> "LinearForm":
        return combine([(-1.0, self)])

    def __mul__(self, scalar: float) -> "LinearForm":
        return combine([(float(scalar), self)])

    __rmul__ = __mul__

    def __truediv__(self, scalar: float) -> "LinearForm":
        return combine([(1.0 / scalar, self)])

    def has_input(self) -> bool:
        return any(label.kind == INPUT for label in self._coeffs)

    def isclose(self, other: "LinearForm", tol: float = 1e-12) -> bool:
        labels = set(self._coeffs) | set(other._coeffs)
        return all(abs(self[k] - other[k]) <= tol for k in labels)

    def __repr__(self) -> str:
        if not self._coeffs:
            return "LinearForm(0)"
        terms = " ".join(f"{v:+.6g}*{k}" for k, v in sorted(self._coeffs.items()))
        return f"LinearForm({terms})"


def combine(terms: Iterable[Tuple[float, LinearForm]], tol: float = PRUNE_TOL) -> LinearForm:
    acc: Dict[BasisLabel, float] = {}
    for scale, form in terms:
        for label, value in form.items():
            acc[label] = acc.get(label, 0.0) + scale * value
    return LinearForm(acc, tol=tol)


def symplectic_form(f: LinearForm, g: LinearForm) -> float:
    """Canonical antisymmetric form, ``Omega(x_k, p_k) = 1`` on every basis pair."""
    total = 0.0
    for label, a in f.items():
        b = g[label.conjugate()]
        if b:
            total += a * b if label.quadrature == X else -a * b
    return total


@dataclass(frozen=True)
class QuadratureRegister:
    """Ordered modes, each an ``(x, p)`` pair of linear forms.

    Registers are values: every operation returns a new register.
    """

    modes: Dict[Mode, Tuple[LinearForm, LinearForm]]
    label_variance: Dict[BasisLabel, float]
    input_ids: Dict[Mode, int]
    squeezing: Dict[int, float] = field(default_factory=dict)
    vacuum_variance: float = 1.0
    prune_tol: float = PRUNE_TOL
    measured: frozenset = frozenset()
    n_detectors: int = 0

    @property
    def names(self) -> List[Mode]:
        return list(self.modes)

    def _check(self, mode: Mode) -> None:
        if mode in self.measured:
            raise StaleModeError(f"mode {mode!r} was already measured")
        if mode not in self.modes:
            raise InvalidParameter(f"unknown mode {mode!r}")

    def x(self, mode: Mode) -> LinearForm:
        self._check(mode)
        return self.modes[mode][0]

    def p(self, mode: Mode) -> LinearForm:
        self._check(mode)
        return self.modes[mode][1]

    def quad(self, mode: Mode, q: str) -> LinearForm:
        return self.x(mode) if check_quadrature(q) == X else self.p(mode)

    def input_form(self, mode: Mode, q: str) -> LinearForm:
        """Identity form on the initial quadrature of an input mode."""
        if mode not in self.input_ids:
            raise InvalidParameter(f"{mode!r} is not an input mode")
        return LinearForm.unit(BasisLabel(INPUT, self.input_ids[mode], check_quadrature(q)))

    def _with(self, updates: Mapping[Mode, Tuple[LinearForm, LinearForm]], **kw) -> "QuadratureRegister":
        modes = dict(self.modes)
        modes.update(updates)
        return replace(self, modes=modes, **kw)

    def _lin(self, *terms: Tuple[float, LinearForm]) -> LinearForm:
        return combine(terms, tol=self.prune_tol)


def new_register(
    n_input_modes: int,
    vacuum_specs: Sequence[float] = (),
    names: Optional[Sequence[Mode]] = None,
    vacuum_variance: float = 1.0,
    prune_tol: float = PRUNE_TOL,
) -> QuadratureRegister:
    """Create a register of symbolic inputs followed by squeezed vacua.

    Each entry of ``vacuum_specs`` is a squeezing factor ``s``: that mode
    starts as ``x = s x0``, ``p = p0 / s`` with ``x0``, ``p0`` vacuum
    quadratures of variance ``vacuum_variance``.
    """
    if n_input_modes < 0:
        raise InvalidParameter("n_input_modes must be >= 0")
    if vacuum_variance <= 0:
        raise InvalidParameter("vacuum_variance must be positive")
    total = n_input_modes + len(vacuum_specs)
    if names is None:
        names = list(range(1, total + 1))
    names = list(names)
    if len(names) != total or len(set(names)) != total:
        raise InvalidParameter("names must be unique and match the mode count")

    modes: Dict[Mode, Tuple[LinearForm, LinearForm]] = {}
    input_ids: Dict[Mode, int] = {}
    variances: Dict[BasisLabel, float] = {}
    squeezing: Dict[int, float] = {}
    for k in range(n_input_modes):
        lid = k + 1
        input_ids[names[k]] = lid
        modes[names[k]] = (
            LinearForm.unit(BasisLabel(INPUT, lid, X)),
            LinearForm.unit(BasisLabel(INPUT, lid, P)),
        )
    for k, s in enumerate(vacuum_specs):
        if not s > 0:
            raise InvalidParameter(f"squeezing factor must be positive, got {s}")
        lid = k + 1
        lx, lp = BasisLabel(VACUUM, lid, X), BasisLabel(VACUUM, lid, P)
        variances[lx] = variances[lp] = vacuum_variance
        squeezing[lid] = float(s)
        modes[names[n_input_modes + k]] = (LinearForm.unit(lx, s), LinearForm.unit(lp, 1.0 / s))
    return QuadratureRegister(
        modes=modes,
        label_variance=variances,
        input_ids=input_ids,
        squeezing=squeezing,
        vacuum_variance=float(vacuum_variance),
        prune_tol=prune_tol,
    )


def _distinct(reg: QuadratureRegister, i: Mode, j: Mode) -> None:
    reg._check(i)
    reg._check(j)
    if i == j:
        raise InvalidParameter("two-mode gate needs distinct modes")


def apply_beam_splitter(reg: QuadratureRegister, i: Mode, j: Mode, t: float = 0.5) -> QuadratureRegister:
    _distinct(reg, i, j)
    if not 0.0 <= t <= 1.0:
        raise InvalidParameter(f"transmissivity must lie in [0, 1], got {t}")
    a, b = math.sqrt(t), math.sqrt(1.0 - t)
    (xi, pi_), (xj, pj) = reg.modes[i], reg.modes[j]
    return reg._with({
        i: (reg._lin((a, xi), (-b, xj)), reg._lin((a, pi_), (-b, pj))),
        j: (reg._lin((b, xi), (a, xj)), reg._lin((b, pi_), (a, pj))),
    })


def apply_qnd(reg: QuadratureRegister, i: Mode, j: Mode) -> QuadratureRegister:
    _distinct(reg, i, j)
    (xi, pi_), (xj, pj) = reg.modes[i], reg.modes[j]
    return reg._with({
        i: (xi, reg._lin((1.0, pi_), (-1.0, pj))),
        j: (reg._lin((1.0, xi), (1.0, xj)), pj),
    })


def apply_qnd_phase_adjust(reg: QuadratureRegister, i: Mode, j: Mode) -> QuadratureRegister:
    _distinct(reg, i, j)
    (xi, pi_), (xj, pj) = reg.modes[i], reg.modes[j]
    return reg._with({
        i: (reg._lin((1.0, xi), (-1.0, xj)), pi_),
        j: (xj, reg._lin((1.0, pi_), (1.0, pj))),
    })


def apply_phase_pi(reg: QuadratureRegister, mode: Mode) -> QuadratureRegister:
    reg._check(mode)
    x, p = reg.modes[mode]
    return reg._with({mode: (-x, -p)})


def apply_fourier(reg: QuadratureRegister, mode: Mode) -> QuadratureRegister:
    reg._check(mode)
    x, p = reg.modes[mode]
    return reg._with({mode: (p, -x)})


def apply_passive(reg: QuadratureRegister, modes: Sequence[Mode], matrix) -> QuadratureRegister:
    """Apply a real orthogonal matrix to the positions and momenta of ``modes``."""
    modes = list(modes)
    for m in modes:
        reg._check(m)
    if len(set(modes)) != len(modes):
        raise InvalidParameter("passive mix needs distinct modes")
    rows = [list(r) for r in matrix]
    n = len(modes)
    if len(rows) != n or any(len(r) != n for r in rows):
        raise InvalidParameter("matrix shape does not match mode count")
    for a in range(n):
        for b in range(n):
            dot = sum(rows[a][k] * rows[b][k] for k in range(n))
            if abs(dot - (a == b)) > 1e-9:
                raise InvalidParameter("passive mixing matrix must be orthogonal")
    old = [reg.modes[m] for m in modes]
    updates = {}
    for a, m in enumerate(modes):
        updates[m] = (
            reg._lin(*((rows[a][k], old[k][0]) for k in range(n))),
            reg._lin(*((rows[a][k], old[k][1]) for k in range(n))),
        )
    return reg._with(updates)


def homodyne_feedforward(
    reg: QuadratureRegister,
    measured_mode: Mode,
    quadrature: str,
    targets: Sequence[Tuple[Mode, str, float]] = (),
    eta: float = 1.0,
) -> QuadratureRegister:
    """Measure one quadrature, displace ``targets`` by ``gain * outcome``, drop the mode.

    The outcome estimator is ``q + sign * sqrt((1-eta)/eta) * v`` with ``v``
    a fresh detector vacuum shared by every target of this measurement.
    ``sign`` is -1 for position and +1 for momentum measurements; the vacuum
    is symmetric, so the choice only fixes how the noise term is written.
    """
    q = check_quadrature(quadrature)
    if not 0.0 < eta <= 1.0:
        raise InvalidParameter(f"eta must lie in (0, 1], got {eta}")
    reg._check(measured_mode)
    measured = reg.quad(measured_mode, q)

    det_id = reg.n_detectors + 1
    variances = reg.label_variance
    noise = None
    if eta < 1.0:
        label = BasisLabel(DETECTOR, det_id, q)
        sign = -1.0 if q == X else 1.0
        noise = LinearForm.unit(label, sign * math.sqrt((1.0 - eta) / eta))
        variances = dict(variances)
        variances[label] = reg.vacuum_variance

    modes = {m: xp for m, xp in reg.modes.items() if m != measured_mode}
    for mode, tq, gain in targets:
        if mode == measured_mode:
            raise InvalidParameter("feed-forward target must differ from the measured mode")
        reg._check(mode)
        tq = check_quadrature(tq)
        x, p = modes[mode]
        terms = [(1.0, x if tq == X else p), (gain, measured)]
        if noise is not None:
            terms.append((gain, noise))
        new = combine(terms, tol=reg.prune_tol)
        modes[mode] = (new, p) if tq == X else (x, new)

    return replace(
        reg,
        modes=modes,
        label_variance=variances,
        measured=reg.measured | {measured_mode},
        n_detectors=det_id,
    )


def apply(reg: QuadratureRegister, op: Operation) -> QuadratureRegister:
    if isinstance(op, BeamSplitter):
        return apply_beam_splitter(reg, op.i, op.j, op.t)
    if isinstance(op, QND):
        return apply_qnd(reg, op.i, op.j)
    if isinstance(op, QNDPhaseAdjust):
        return apply_qnd_phase_adjust(reg, op.i, op.j)
    if isinstance(op, PhasePi):
        return apply_phase_pi(reg, op.mode)
    if isinstance(op, Fourier):
        return apply_fourier(reg, op.mode)
    if isinstance(op, PassiveMix):
        return apply_passive(reg, op.modes, op.matrix)
    if isinstance(op, Homodyne):
        return homodyne_feedforward(reg, op.mode, op.quadrature, op.targets, op.eta)
    raise InvalidParameter(f"unsupported operation {op!r}")


def run(
    program: Program,
    vacuum_variance: float = 1.0,
    prune_tol: float = PRUNE_TOL,
    register: Optional[QuadratureRegister] = None,
) -> QuadratureRegister:
    """Execute ``program`` symbolically, building the initial register unless given."""
    if register is None:
        register = new_register(
            len(program.inputs),
            [s for _, s in program.vacua],
            names=program.modes,
            vacuum_variance=vacuum_variance,
            prune_tol=prune_tol,
        )
    for op in program.ops:
        register = apply(register, op)
    return register


def variance_of(reg: QuadratureRegister, form: LinearForm) -> float:
    """Exact variance of an input-free form."""
    total = 0.0
    for label, c in form.items():
        if label.kind == INPUT:
            raise SymbolicInputError(
                f"form depends on input quadrature {label}; subtract the reference first"
            )
        total += c * c * reg.label_variance[label]
    return total


def mean_of(form: LinearForm, input_means: Mapping[BasisLabel, float] = None) -> float:
    """Expectation value; only input labels may carry a nonzero mean."""
    input_means = input_means or {}
    return sum(c * input_means.get(label, 0.0) for label, c in form.items() if label.kind == INPUT)


@dataclass
class SymplecticReport:
    values: Dict[Tuple[str, str], float]
    violations: List[str]
    tol: float

    @property
    def ok(self) -> bool:
        return not self.violations


def symplectic_check(
    reg: QuadratureRegister, modes: Optional[Sequence[Mode]] = None, tol: float = 1e-9
) -> SymplecticReport:
    """Evaluate Omega on every pair of live quadratures."""
    modes = list(reg.modes) if modes is None else list(modes)
    quads = [(m, q, reg.quad(m, q)) for m in modes for q in (X, P)]
    values: Dict[Tuple[str, str], float] = {}
    violations: List[str] = []
    for a in range(len(quads)):
        for b in range(a + 1, len(quads)):
            ma, qa, fa = quads[a]
            mb, qb, fb = quads[b]
            expected = 1.0 if (ma == mb and qa == X and qb == P) else 0.0
            value = symplectic_form(fa, fb)
            key = (f"{qa.lower()}[{ma}]", f"{qb.lower()}[{mb}]")
            values[key] = value
            if abs(value - expected) > tol:
                violations.append(f"Omega{key} = {value:.3g}, expected {expected:g}")
    return SymplecticReport(values, violations, tol)
