"""Simulation of multiparty continuous-variable conat channels.

Two protocols are covered: GHZ-assisted channels with homodyne
feed-forward, and superdense channel pairs distributed over EPR trees.
Each runs on an exact Heisenberg-picture engine and on a Gaussian
covariance engine with Monte-Carlo sampling.
"""

from .errors import ConatError, InvalidParameter, StaleModeError, SymbolicInputError, TopologyError
from .heisenberg import BasisLabel, LinearForm, QuadratureRegister, new_register, symplectic_check
from .gaussian import GaussianState
from .ops import (
    P, QND, X, BeamSplitter, Fourier, Homodyne, PassiveMix, PhasePi, Program, QNDPhaseAdjust,
)
from .protocols import (
    ChannelOutput, Topology, ccaecc_mq, ccaecc_pq, prepare_epr, prepare_ghz, prepare_ghz_mq_variant,
    superdense_conat, validate_topology,
)
from .verify import EpsilonReport, check_definition, check_mq_definition, check_pq_definition, cross_validate
from .apps import controlled_teleport, controlled_teleport_two_mode, qss_classical

__version__ = "0.1.0"

__all__ = [
    "ConatError", "InvalidParameter", "StaleModeError", "SymbolicInputError", "TopologyError",
    "BasisLabel", "LinearForm", "QuadratureRegister", "new_register", "symplectic_check",
    "GaussianState", "X", "P", "BeamSplitter", "QND", "QNDPhaseAdjust", "PhasePi", "Fourier",
    "PassiveMix", "Homodyne", "Program", "ChannelOutput", "Topology", "prepare_ghz",
    "prepare_ghz_mq_variant", "prepare_epr", "ccaecc_pq", "ccaecc_mq", "superdense_conat",
    "validate_topology", "EpsilonReport", "check_definition", "check_pq_definition",
    "check_mq_definition", "cross_validate", "controlled_teleport", "controlled_teleport_two_mode",
    "qss_classical",
]
