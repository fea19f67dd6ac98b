"""Engine-neutral circuit description.

A :class:`Program` lists the initial modes (symbolic inputs and squeezed
vacua) followed by a sequence of operations. Both the Heisenberg engine
and the covariance engine execute the same program, which is what makes
their results comparable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Tuple

Mode = Hashable

X = "X"
P = "P"
QUADRATURES = (X, P)


def check_quadrature(q: str) -> str:
    from .errors import InvalidParameter

    q = str(q).upper()
    if q not in QUADRATURES:
        raise InvalidParameter(f"quadrature must be 'X' or 'P', got {q!r}")
    return q


@dataclass(frozen=True)
class BeamSplitter:
    """``x_i -> sqrt(t) x_i - sqrt(1-t) x_j``, ``x_j -> sqrt(1-t) x_i + sqrt(t) x_j``.

    At ``t = 1/2`` mode ``i`` carries the difference port and mode ``j`` the
    sum port. Momenta transform identically.
    """

    i: Mode
    j: Mode
    t: float = 0.5


@dataclass(frozen=True)
class QND:
    """``x_j += x_i``, ``p_i -= p_j``."""

    i: Mode
    j: Mode


@dataclass(frozen=True)
class QNDPhaseAdjust:
    """``x_i -= x_j``, ``p_j += p_i``."""

    i: Mode
    j: Mode


@dataclass(frozen=True)
class PhasePi:
    mode: Mode


@dataclass(frozen=True)
class Fourier:
    """``x -> p``, ``p -> -x``."""

    mode: Mode


@dataclass(frozen=True)
class PassiveMix:
    """Real orthogonal mixing applied identically to positions and momenta."""

    modes: Tuple[Mode, ...]
    matrix: Tuple[Tuple[float, ...], ...]


@dataclass(frozen=True)
class Homodyne:
    """Measure one quadrature and feed the rescaled outcome forward.

    ``targets`` holds ``(mode, quadrature, gain)`` triples. The outcome is
    divided by ``sqrt(eta)`` before the gain is applied, so a lossy detector
    shows up purely as added noise on the targets.
    """

    mode: Mode
    quadrature: str
    targets: Tuple[Tuple[Mode, str, float], ...] = ()
    eta: float = 1.0


Operation = BeamSplitter | QND | QNDPhaseAdjust | PhasePi | Fourier | PassiveMix | Homodyne


@dataclass(frozen=True)
class Program:
    """Initial modes plus operations.

    ``vacua`` holds ``(mode, s)`` pairs: the mode starts as a squeezed vacuum
    with ``x = s x0`` and ``p = p0 / s``.
    """

    inputs: Tuple[Mode, ...] = ()
    vacua: Tuple[Tuple[Mode, float], ...] = ()
    ops: Tuple[Operation, ...] = field(default_factory=tuple)

    @property
    def modes(self) -> Tuple[Mode, ...]:
        return tuple(self.inputs) + tuple(m for m, _ in self.vacua)

    def then(self, *ops: Operation) -> "Program":
        return Program(self.inputs, self.vacua, tuple(self.ops) + tuple(ops))
