"""Entanglement resources and the two multiparty conat-channel constructions.

The GHZ-assisted construction (CCAECC) teleports one quadrature of the
sender's input into a GHZ resource with a single beam splitter, two
homodyne detections and classical feed-forward. Coherent superdense
coding pushes two payload modes through a tree of EPR pairs with local QND couplings and
yields a PQ and an MQ channel at once.
"""

from __future__ import annotations

import json
import math
import string
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Hashable, List, Optional, Sequence, Tuple

import numpy as np

from . import gaussian, heisenberg
from .errors import InvalidParameter, TopologyError
from .heisenberg import QuadratureRegister
from .ops import (
    P,
    X,
    BeamSplitter,
    Fourier,
    Homodyne,
    PassiveMix,
    PhasePi,
    Program,
    QND,
    QNDPhaseAdjust,
)

Mode = Hashable
PQ = "PQ"
MQ = "MQ"
SQRT2 = math.sqrt(2.0)

TOPOLOGY_DIR = Path(__file__).parent / "topologies"


# ---------------------------------------------------------------- resources

def helmert_matrix(n: int) -> np.ndarray:
    """Orthogonal matrix whose first column is uniform and whose later columns
    are the standard contrasts; rows index output modes.
    """
    O = np.zeros((n, n))
    O[:, 0] = 1.0 / math.sqrt(n)
    for j in range(2, n + 1):
        O[j - 2, j - 1] = math.sqrt((n - j + 1) / (n - j + 2))
        O[j - 1:, j - 1] = -1.0 / math.sqrt((n - j + 1) * (n - j + 2))
    return O


def ghz_program(n: int, r: float, names: Optional[Sequence[Mode]] = None, momentum_variant: bool = False) -> Program:
    """One x-antisqueezed and ``n - 1`` x-squeezed vacua mixed by a Helmert network.

    The result has small total momentum and small relative positions; the
    momentum variant applies a Fourier transform to every output so the
    roles of the quadratures are exchanged.
    """
    if n < 2:
        raise InvalidParameter(f"GHZ state needs at least 2 modes, got {n}")
    if r < 0:
        raise InvalidParameter("squeezing r must be >= 0")
    names = tuple(range(1, n + 1)) if names is None else tuple(names)
    if len(names) != n:
        raise InvalidParameter("need one name per GHZ mode")
    vacua = ((names[0], math.exp(r)),) + tuple((m, math.exp(-r)) for m in names[1:])
    O = helmert_matrix(n)
    ops: List = [PassiveMix(names, tuple(map(tuple, O)))]
    if momentum_variant:
        ops += [Fourier(m) for m in names]
    return Program((), vacua, tuple(ops))


def _build(program: Program, engine: str, vacuum_variance: float):
    if engine == "symbolic":
        return heisenberg.run(program, vacuum_variance=vacuum_variance)
    if engine == "gaussian":
        state, _ = gaussian.run(program, vacuum_variance=vacuum_variance)
        return state
    raise InvalidParameter(f"engine must be 'symbolic' or 'gaussian', got {engine!r}")


def prepare_ghz(n: int, r: float, engine: str = "symbolic", names=None, vacuum_variance: float = 1.0):
    return _build(ghz_program(n, r, names), engine, vacuum_variance)


def prepare_ghz_mq_variant(n: int, r: float, engine: str = "symbolic", names=None, vacuum_variance: float = 1.0):
    return _build(ghz_program(n, r, names, momentum_variant=True), engine, vacuum_variance)


def prepare_epr(r: float, engine: str = "symbolic", names=(1, 2), vacuum_variance: float = 1.0):
    """Two-mode squeezed pair: ``x1 - x2`` and ``p1 + p2`` both squeezed."""
    return _build(ghz_program(2, r, names), engine, vacuum_variance)


# ---------------------------------------------------------------- channel outputs

@dataclass
class ChannelOutput:
    """One multiparty conat channel produced by a protocol run.

    ``parties[0]`` is the sender, which is also a receiver; ``modes`` holds
    the output mode of every party in the same order.
    """

    kind: str
    parties: Tuple[str, ...]
    modes: Tuple[Mode, ...]
    input_mode: Mode
    program: Program
    register: QuadratureRegister
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def sender(self) -> str:
        return self.parties[0]

    @property
    def sender_mode(self) -> Mode:
        return self.modes[0]

    def mode_of(self, party: str) -> Mode:
        try:
            return self.modes[self.parties.index(party)]
        except ValueError:
            raise InvalidParameter(f"{party!r} is not a receiver of this channel") from None

    @property
    def copy_quadrature(self) -> str:
        """Quadrature copied to every receiver (X for PQ, P for MQ)."""
        return X if self.kind == PQ else P

    @property
    def shared_quadrature(self) -> str:
        return P if self.kind == PQ else X


def _party_labels(n: int) -> List[str]:
    if n <= 26:
        return list(string.ascii_uppercase[:n])
    return ["A"] + [f"R{k}" for k in range(1, n)]


def _check_common(r: float, eta: float) -> None:
    if r < 0:
        raise InvalidParameter("squeezing r must be >= 0")
    if not 0.0 < eta <= 1.0:
        raise InvalidParameter(f"eta must lie in (0, 1], got {eta}")


def ccaecc_program(n: int, r: float, eta: float = 1.0, kind: str = PQ, gain: float = SQRT2):
    """Program, party labels and output modes for an ``n``-receiver CCAECC run.

    The sender's input mode is ``"A"``; the (n+1)-mode GHZ resource is held
    as ``A1``, ``A2`` by the sender and one mode per other receiver.
    """
    if n < 2:
        raise InvalidParameter(f"need at least 2 receivers, got {n}")
    _check_common(r, eta)
    kind = kind.upper()
    if kind not in (PQ, MQ):
        raise InvalidParameter(f"kind must be PQ or MQ, got {kind!r}")
    parties = _party_labels(n)
    ghz_modes = ("A1", "A2") + tuple(parties[1:])
    ghz = ghz_program(n + 1, r, ghz_modes, momentum_variant=(kind == MQ))
    # the copied quadrature is read on the difference port, its conjugate on the sum port
    copied, shared = (X, P) if kind == PQ else (P, X)
    receivers_out = ("A2",) + tuple(parties[1:])
    ops = ghz.ops + (
        BeamSplitter("A", "A1", 0.5),
        Homodyne("A", copied, tuple((m, copied, gain) for m in receivers_out), eta),
        Homodyne("A1", shared, (("A2", shared, gain),), eta),
    )
    program = Program(("A",), ghz.vacua, ops)
    return program, tuple(parties), receivers_out


def _ccaecc(n, r, eta, kind, gain, vacuum_variance, prune_tol) -> ChannelOutput:
    program, parties, modes = ccaecc_program(n, r, eta, kind, gain)
    register = heisenberg.run(program, vacuum_variance=vacuum_variance, prune_tol=prune_tol)
    meta = {"method": "ccaecc", "kind": kind, "n": n, "r": r, "eta": eta, "gain": gain,
            "vacuum_variance": vacuum_variance}
    return ChannelOutput(kind, parties, modes, "A", program, register, meta)


def ccaecc_pq(n: int, r: float, eta: float = 1.0, gain: float = SQRT2,
              vacuum_variance: float = 1.0, prune_tol: float = heisenberg.PRUNE_TOL) -> ChannelOutput:
    """Position-quadrature channel from GHZ entanglement and feed-forward.

    ``gain`` exists for negative controls; the faithful value is sqrt(2).
    """
    return _ccaecc(n, r, eta, PQ, gain, vacuum_variance, prune_tol)


def ccaecc_mq(n: int, r: float, eta: float = 1.0, gain: float = SQRT2,
              vacuum_variance: float = 1.0, prune_tol: float = heisenberg.PRUNE_TOL) -> ChannelOutput:
    return _ccaecc(n, r, eta, MQ, gain, vacuum_variance, prune_tol)


# ---------------------------------------------------------------- topologies

@dataclass(frozen=True)
class Topology:
    """Party graph whose edges are EPR pairs.

    ``edge_r`` optionally overrides the global squeezing per edge (``None``
    entries fall back to ``r``).
    """

    parties: Tuple[str, ...]
    sender: str
    edges: Tuple[Tuple[str, str], ...]
    r: float = 1.0
    edge_r: Tuple[Optional[float], ...] = ()

    def edge_squeezing(self, k: int, default: Optional[float] = None) -> float:
        if k < len(self.edge_r) and self.edge_r[k] is not None:
            return float(self.edge_r[k])
        return float(self.r if default is None else default)

    @classmethod
    def from_dict(cls, doc: Dict[str, Any]) -> "Topology":
        try:
            parties = tuple(str(p) for p in doc["parties"])
            sender = str(doc["sender"])
            raw_edges = doc["edges"]
        except (KeyError, TypeError) as exc:
            raise TopologyError(f"topology document is missing a field: {exc}") from None
        edges, edge_r = [], []
        for e in raw_edges:
            if not isinstance(e, (list, tuple)) or len(e) not in (2, 3):
                raise TopologyError(f"malformed edge {e!r}")
            edges.append((str(e[0]), str(e[1])))
            edge_r.append(float(e[2]) if len(e) == 3 else None)
        r = float(doc.get("r", 1.0))
        return cls(parties, sender, tuple(edges), r, tuple(edge_r) if any(v is not None for v in edge_r) else ())

    def to_dict(self) -> Dict[str, Any]:
        edges = []
        for k, (u, v) in enumerate(self.edges):
            if k < len(self.edge_r) and self.edge_r[k] is not None:
                edges.append([u, v, self.edge_r[k]])
            else:
                edges.append([u, v])
        return {"parties": list(self.parties), "sender": self.sender, "edges": edges, "r": self.r}

    @classmethod
    def load(cls, path) -> "Topology":
        """Read a topology JSON file; bare names fall back to the bundled examples."""
        p = Path(path)
        if not p.exists() and (TOPOLOGY_DIR / p.name).exists():
            p = TOPOLOGY_DIR / p.name
        try:
            doc = json.loads(p.read_text())
        except FileNotFoundError:
            raise TopologyError(f"topology file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise TopologyError(f"topology file {path} is not valid JSON: {exc}") from None
        return cls.from_dict(doc)

    @classmethod
    def chain(cls, parties: Sequence[str], r: float = 1.0) -> "Topology":
        parties = tuple(parties)
        return cls(parties, parties[0], tuple(zip(parties, parties[1:])), r)

    @classmethod
    def star(cls, parties: Sequence[str], r: float = 1.0) -> "Topology":
        parties = tuple(parties)
        return cls(parties, parties[0], tuple((parties[0], p) for p in parties[1:]), r)


@dataclass
class TopologyReport:
    valid: bool
    connected: bool
    is_tree: bool
    path_lengths: Dict[str, Optional[int]]
    parents: Dict[str, Tuple[Optional[str], Optional[int]]]
    errors: List[str]

    def raise_for_errors(self) -> None:
        if not self.valid:
            raise TopologyError("; ".join(self.errors))


def validate_topology(top: Topology) -> TopologyReport:
    """Check that the EPR graph is a tree spanning every party.

    ``parents`` maps each reachable party to ``(parent, edge index)`` in a
    breadth-first traversal from the sender.
    """
    errors: List[str] = []
    parties = list(top.parties)
    if len(set(parties)) != len(parties):
        errors.append("duplicate party labels")
    known = set(parties)
    adj: Dict[str, List[Tuple[str, int]]] = {p: [] for p in parties}
    seen_pairs = set()
    for k, (u, v) in enumerate(top.edges):
        if u not in known or v not in known:
            errors.append(f"edge {u}-{v} names an unknown party")
            continue
        if u == v:
            errors.append(f"self-loop at {u}")
            continue
        key = frozenset((u, v))
        if key in seen_pairs:
            errors.append(f"duplicate edge {u}-{v}")
            continue
        seen_pairs.add(key)
        adj[u].append((v, k))
        adj[v].append((u, k))

    dist: Dict[str, Optional[int]] = {p: None for p in parties}
    parents: Dict[str, Tuple[Optional[str], Optional[int]]] = {}
    cycle_edges = []
    if top.sender in known:
        dist[top.sender] = 0
        parents[top.sender] = (None, None)
        queue = deque([top.sender])
        used = set()
        while queue:
            u = queue.popleft()
            for v, k in sorted(adj[u], key=lambda t: t[1]):
                if k in used:
                    continue
                used.add(k)
                if dist[v] is None:
                    dist[v] = dist[u] + 1
                    parents[v] = (u, k)
                    queue.append(v)
                else:
                    cycle_edges.append(top.edges[k])
    else:
        errors.append(f"sender {top.sender!r} is not a party")

    unreachable = [p for p in parties if dist[p] is None]
    connected = top.sender in known and not unreachable
    if top.sender in known and unreachable:
        errors.append(f"disconnected: parties {unreachable} are not connected to sender {top.sender!r}")
    for u, v in cycle_edges:
        errors.append(f"edge {u}-{v} closes a cycle")
    is_tree = connected and len(seen_pairs) == len(parties) - 1 and not cycle_edges
    if connected and len(top.edges) != len(parties) - 1 and not cycle_edges:
        errors.append(f"need exactly {len(parties) - 1} EPR pairs, got {len(top.edges)}")
    valid = is_tree and not errors
    return TopologyReport(valid, connected, is_tree, dist, parents, errors)


# ---------------------------------------------------------------- superdense coding

def _bfs_order(report: TopologyReport) -> List[str]:
    return sorted(report.parents, key=lambda p: report.path_lengths[p])


def superdense_program(top: Topology, r: Optional[float] = None):
    """QND program pushing payload modes 1 (MQ) and 2 (PQ) down the EPR tree.

    Edge ``k`` contributes EPR halves ``2k+3`` (parent side) and ``2k+4``
    (child side). Every node forwards with QND(pq, half) then
    QND-phase-adjust(mq, half) per child; a child flips its own half by pi
    and couples it by QND to the arriving half, which then becomes its MQ
    mode while its own half becomes its PQ mode.

    Returns ``(program, parties, pq_modes, mq_modes)``.
    """
    if top.sender not in top.parties:
        raise InvalidParameter(f"sender {top.sender!r} is not in the topology")
    report = validate_topology(top)
    report.raise_for_errors()

    halves: Dict[int, Tuple[int, int]] = {}
    vacua = []
    prep = []
    for k, (u, v) in enumerate(top.edges):
        rk = top.edge_squeezing(k, r)
        if rk < 0:
            raise InvalidParameter("squeezing r must be >= 0")
        near, far = 2 * k + 3, 2 * k + 4
        halves[k] = (near, far)
        vacua += [(near, math.exp(rk)), (far, math.exp(-rk))]
        prep.append(PassiveMix((near, far), tuple(map(tuple, helmert_matrix(2)))))

    roles: Dict[str, Tuple[Mode, Mode]] = {top.sender: (1, 2)}
    children: Dict[str, List[Tuple[str, int]]] = {p: [] for p in top.parties}
    for child, (parent, k) in report.parents.items():
        if parent is not None:
            children[parent].append((child, k))

    gates = []
    for node in _bfs_order(report):
        parent, k = report.parents[node]
        if parent is not None:
            h, own = halves[k]
            gates += [PhasePi(own), QND(h, own)]
            roles[node] = (h, own)
        mq_mode, pq_mode = roles[node]
        for _, kc in sorted(children[node], key=lambda t: t[1]):
            h = halves[kc][0]
            gates += [QND(pq_mode, h), QNDPhaseAdjust(mq_mode, h)]

    order = [top.sender] + [p for p in top.parties if p != top.sender]
    program = Program((1, 2), tuple(vacua), tuple(prep) + tuple(gates))
    pq_modes = tuple(roles[p][1] for p in order)
    mq_modes = tuple(roles[p][0] for p in order)
    return program, tuple(order), pq_modes, mq_modes


def superdense_conat(top: Topology, r: Optional[float] = None, vacuum_variance: float = 1.0,
                     prune_tol: float = heisenberg.PRUNE_TOL) -> Tuple[ChannelOutput, ChannelOutput]:
    """Run coherent superdense coding over ``top``; returns ``(pq, mq)``.

    ``r`` overrides the topology's global squeezing (per-edge values still win).
    """
    program, parties, pq_modes, mq_modes = superdense_program(top, r)
    register = heisenberg.run(program, vacuum_variance=vacuum_variance, prune_tol=prune_tol)
    meta = {"method": "superdense", "n": len(parties), "r": top.r if r is None else r, "eta": 1.0,
            "topology": top.to_dict(), "vacuum_variance": vacuum_variance}
    pq = ChannelOutput(PQ, parties, pq_modes, 2, program, register, dict(meta, kind=PQ))
    mq = ChannelOutput(MQ, parties, mq_modes, 1, program, register, dict(meta, kind=MQ))
    return pq, mq


def superdense_circuit_forms(top: Topology) -> QuadratureRegister:
    """The QND network alone, applied to symbolic modes ``1 .. 2 + 2 * edges``.

    Output forms are integer combinations of the pre-circuit quadratures.
    """
    program, *_ = superdense_program(top)
    gates = tuple(op for op in program.ops if not isinstance(op, PassiveMix))
    modes = program.modes
    register = heisenberg.new_register(len(modes), names=sorted(modes))
    return heisenberg.run(Program(tuple(sorted(modes)), (), gates), register=register)
