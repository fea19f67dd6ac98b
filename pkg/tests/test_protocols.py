import itertools
import json
import math

import networkx as nx
import numpy as np
import pytest

from conatsim import heisenberg, protocols
from conatsim.errors import InvalidParameter, TopologyError
from conatsim.heisenberg import VACUUM, BasisLabel
from conatsim.ops import P, X
from conatsim.protocols import Topology, validate_topology
from conatsim.verify import check_definition

from conftest import e2, input_combo


def _ghz_expected(n, r):
    """Helmert-pattern coefficients written out from their closed form."""
    O = np.zeros((n, n))
    O[:, 0] = 1 / math.sqrt(n)
    for j in range(2, n + 1):
        O[j - 2, j - 1] = math.sqrt((n - j + 1) / (n - j + 2))
        for i in range(j, n + 1):
            O[i - 1, j - 1] = -1 / math.sqrt((n - j + 1) * (n - j + 2))
    sx = np.array([math.exp(r)] + [math.exp(-r)] * (n - 1))
    return O * sx, O / sx


def test_helmert_matrix_is_orthogonal():
    for n in range(2, 9):
        H = protocols.helmert_matrix(n)
        np.testing.assert_allclose(H @ H.T, np.eye(n), atol=1e-14)


@pytest.mark.parametrize("r", [0.0, 0.5, 1.3])
def test_ghz_four_mode_coefficients(r):
    reg = protocols.prepare_ghz(4, r)
    cx, cp = _ghz_expected(4, r)
    for i, m in enumerate(reg.names):
        for j in range(4):
            assert reg.x(m)[BasisLabel(VACUUM, j + 1, X)] == pytest.approx(cx[i, j], abs=1e-12)
            assert reg.p(m)[BasisLabel(VACUUM, j + 1, P)] == pytest.approx(cp[i, j], abs=1e-12)


def test_ghz_spot_entries():
    r = 0.8
    reg = protocols.prepare_ghz(4, r)
    a1, a2, b, c = reg.names
    lab = lambda k, q: BasisLabel(VACUUM, k, q)
    assert reg.x(b)[lab(2, X)] == pytest.approx(-math.exp(-r) / math.sqrt(12), abs=1e-15)
    assert reg.x(a1)[lab(2, X)] == pytest.approx(math.sqrt(3 / 4) * math.exp(-r), abs=1e-15)
    assert reg.p(a2)[lab(3, P)] == pytest.approx(math.sqrt(2 / 3) * math.exp(r), abs=1e-15)
    assert reg.p(c)[lab(4, P)] == pytest.approx(-math.exp(r) / math.sqrt(2), abs=1e-15)


@pytest.mark.parametrize("n", range(2, 9))
def test_ghz_variances_brute_force(n):
    r = 0.9
    reg = protocols.prepare_ghz(n, r)
    total = heisenberg.combine([(1, reg.p(m)) for m in reg.names])
    assert heisenberg.variance_of(reg, total) == pytest.approx(n * e2(r), abs=1e-12)
    for a, b in itertools.combinations(reg.names, 2):
        assert heisenberg.variance_of(reg, reg.x(a) - reg.x(b)) == pytest.approx(2 * e2(r), abs=1e-12)
    assert heisenberg.symplectic_check(reg).ok


@pytest.mark.parametrize("r", [0.0, 1.0])
def test_ghz_mq_variant(r):
    reg = protocols.prepare_ghz_mq_variant(4, r)
    total = heisenberg.combine([(1, reg.x(m)) for m in reg.names])
    assert heisenberg.variance_of(reg, total) == pytest.approx(4 * e2(r), abs=1e-12)
    for a, b in itertools.combinations(reg.names, 2):
        assert heisenberg.variance_of(reg, reg.p(a) - reg.p(b)) == pytest.approx(2 * e2(r), abs=1e-12)
    assert heisenberg.symplectic_check(reg).ok


def test_ghz_rejects_small_n():
    with pytest.raises(InvalidParameter):
        protocols.prepare_ghz(1, 1.0)


@pytest.mark.parametrize("r", [0.0, 1.0, 2.5])
def test_epr_variances(r):
    reg = protocols.prepare_epr(r)
    assert heisenberg.variance_of(reg, reg.x(1) - reg.x(2)) == pytest.approx(2 * e2(r), abs=1e-12)
    assert heisenberg.variance_of(reg, reg.p(1) + reg.p(2)) == pytest.approx(2 * e2(r), abs=1e-12)
    assert heisenberg.variance_of(reg, reg.x(1) + reg.x(2)) == pytest.approx(2 * math.exp(2 * r), rel=1e-12)


def test_epr_engines_agree():
    reg = protocols.prepare_epr(0.6)
    state = protocols.prepare_epr(0.6, engine="gaussian")
    from conatsim.gaussian import from_heisenberg
    np.testing.assert_allclose(from_heisenberg(reg).cov, state.cov, atol=1e-12)


def test_ccaecc_outputs_at_perfect_detection():
    r = 0.7
    ch = protocols.ccaecc_pq(3, r, 1.0)
    reg = ch.register
    ghz = protocols.prepare_ghz(4, r, names=["A1", "A2", "B", "C"])
    # x_{A'} = x_A - (x_{A1} - x_{A2}) with GHZ forms substituted
    expect = reg.input_form("A", X) - (ghz.x("A1") - ghz.x("A2"))
    assert reg.x("A2").isclose(expect)
    expect = reg.input_form("A", X) - (ghz.x("A1") - ghz.x("B"))
    assert reg.x("B").isclose(expect)
    p_sum = heisenberg.combine([(1, ghz.p(m)) for m in ("A1", "A2", "B", "C")])
    expect = reg.input_form("A", P) + p_sum - ghz.p("B") - ghz.p("C")
    assert reg.p("A2").isclose(expect)
    assert reg.p("B").isclose(ghz.p("B")) and reg.p("C").isclose(ghz.p("C"))


def test_ccaecc_detector_noise_coefficient():
    eta = 0.6
    ch = protocols.ccaecc_pq(3, 1.0, eta)
    coeff = ch.register.x("B")[BasisLabel(heisenberg.DETECTOR, 1, X)]
    assert coeff == pytest.approx(-math.sqrt(2 * (1 - eta) / eta), abs=1e-15)


@pytest.mark.parametrize("n", [2, 3, 5])
@pytest.mark.parametrize("r, eta", [(0.0, 1.0), (1.0, 0.9), (2.0, 0.5)])
def test_ccaecc_mq_mirrors_pq(n, r, eta):
    pq = check_definition(protocols.ccaecc_pq(n, r, eta))
    mq = check_definition(protocols.ccaecc_mq(n, r, eta))
    np.testing.assert_allclose(pq.epsilons, mq.epsilons, atol=1e-12)
    assert mq.passed and all(abs(v) < 1e-12 for v in mq.means.values())


@pytest.mark.parametrize("kw", [dict(n=1, r=1.0), dict(n=3, r=-0.1), dict(n=3, r=1.0, eta=0.0),
                                dict(n=3, r=1.0, eta=1.5)])
def test_ccaecc_rejects_bad_parameters(kw):
    with pytest.raises(InvalidParameter):
        protocols.ccaecc_pq(**kw)


def _expected_forms(reg, table):
    """``table`` maps mode -> (x terms, p terms) with terms as ``(coeff, mode)``."""
    out = {}
    for m, (xs, ps) in table.items():
        out[m] = (input_combo(reg, [(c, k, X) for c, k in xs]), input_combo(reg, [(c, k, P) for c, k in ps]))
    return out


CHAIN_FORMS = {
    1: ([(1, 1), (-1, 2), (-1, 3)], [(1, 1)]),
    2: ([(1, 2)], [(1, 2), (-1, 3)]),
    # x2 + x3 - (x2 + x3 - x4 + x5) simplified
    3: ([(1, 4), (-1, 5)], [(1, 1), (1, 3), (1, 4)]),
    4: ([(1, 2), (1, 3), (-1, 4)], [(-1, 4), (-1, 5)]),
    5: ([(1, 2), (1, 3), (-1, 4), (1, 5)], [(1, 1), (1, 3), (1, 4), (1, 5), (1, 6)]),
    6: ([(1, 2), (1, 3), (-1, 4), (1, 5), (-1, 6)], [(-1, 6)]),
}

STAR_FORMS = {
    1: ([(1, 1), (-2, 2), (-1, 3), (-1, 5)], [(1, 1)]),
    2: ([(1, 2)], [(1, 2), (-1, 3), (-1, 5)]),
    3: ([(1, 2), (1, 3)], [(1, 1), (1, 3), (1, 4)]),
    4: ([(1, 2), (1, 3), (-1, 4)], [(-1, 4)]),
    5: ([(1, 2), (1, 5)], [(1, 1), (1, 5), (1, 6)]),
    6: ([(1, 2), (1, 5), (-1, 6)], [(-1, 6)]),
}


@pytest.mark.parametrize("name, forms", [("chain3.json", CHAIN_FORMS), ("star3.json", STAR_FORMS)])
def test_superdense_forms_exact(name, forms):
    reg = protocols.superdense_circuit_forms(Topology.load(name))
    expected = _expected_forms(reg, forms)
    for m, (x, p) in expected.items():
        assert reg.x(m).isclose(x, tol=0.0), (m, reg.x(m))
        assert reg.p(m).isclose(p, tol=0.0), (m, reg.p(m))
        assert all(float(c).is_integer() for _, c in reg.x(m).items())


def test_superdense_channel_modes():
    pq, mq = protocols.superdense_conat(Topology.load("chain3.json"))
    assert pq.modes == (2, 4, 6) and mq.modes == (1, 3, 5)
    assert pq.parties == ("A", "B", "C")


@pytest.mark.parametrize("name, pq_eps, mq_eps", [
    ("chain3.json", [2, 4, 4], [2, 4, 0]),
    ("star3.json", [2, 2, 4], [2, 2, 0]),
])
@pytest.mark.parametrize("r", [0.0, 0.5, 1.0])
def test_superdense_epsilons(name, pq_eps, mq_eps, r):
    pq, mq = protocols.superdense_conat(Topology.load(name), r)
    np.testing.assert_allclose(check_definition(pq).epsilons, np.array(pq_eps) * e2(r), atol=1e-12)
    got = check_definition(mq).epsilons
    np.testing.assert_allclose(got, np.array(mq_eps) * e2(r), atol=1e-12)
    assert got[-1] == 0.0


def test_per_edge_squeezing():
    top = Topology.from_dict({"parties": ["A", "B", "C"], "sender": "A",
                              "edges": [["A", "B", 0.5], ["B", "C", 1.5]]})
    pq, _ = protocols.superdense_conat(top)
    eps = check_definition(pq).epsilons
    assert eps[1] == pytest.approx(2 * e2(0.5) + 2 * e2(1.5), abs=1e-12)


def test_topology_roundtrip(tmp_path):
    top = Topology.star(["A", "B", "C", "D"], r=0.3)
    path = tmp_path / "t.json"
    path.write_text(json.dumps(top.to_dict()))
    assert Topology.load(path) == top


@pytest.mark.parametrize("top, lengths", [
    (Topology.chain(["A", "B", "C"]), [0, 1, 2]),
    (Topology.star(["A", "B", "C"]), [0, 1, 1]),
])
def test_validate_topology_path_lengths(top, lengths):
    rep = validate_topology(top)
    assert rep.valid and rep.is_tree
    assert [rep.path_lengths[p] for p in top.parties] == lengths


@pytest.mark.parametrize("edges, needle", [
    ([["A", "B"]], "disconnected"),
    ([["A", "B"], ["B", "C"], ["C", "A"]], "cycle"),
    ([["A", "B"], ["A", "B"]], "duplicate"),
    ([["A", "A"], ["A", "B"]], "self-loop"),
    ([["A", "Z"], ["A", "B"]], "unknown"),
])
def test_validate_topology_failures(edges, needle):
    top = Topology.from_dict({"parties": ["A", "B", "C"], "sender": "A", "edges": edges})
    rep = validate_topology(top)
    assert not rep.valid
    assert any(needle in e for e in rep.errors)
    with pytest.raises(TopologyError):
        protocols.superdense_conat(top)


def test_disconnected_report_names_component():
    top = Topology.from_dict({"parties": ["A", "B", "C", "D"], "sender": "A",
                              "edges": [["A", "B"], ["C", "D"]]})
    rep = validate_topology(top)
    assert not rep.connected
    assert any("C" in e and "D" in e for e in rep.errors)


def test_sender_outside_topology_is_invalid_parameter():
    top = Topology(("A", "B"), "Q", (("A", "B"),))
    with pytest.raises(InvalidParameter):
        protocols.superdense_conat(top)
    assert not isinstance(InvalidParameter("x"), TopologyError)


@pytest.mark.parametrize("doc", ["{", '{"parties": ["A"]}', '{"parties": ["A","B"], "sender": "A", "edges": [["A"]]}'])
def test_malformed_topology_file(tmp_path, doc):
    path = tmp_path / "bad.json"
    path.write_text(doc)
    with pytest.raises(TopologyError):
        Topology.load(path)


def _labeled_trees(n):
    """Every labeled tree on ``n`` nodes via Pruefer sequences."""
    if n == 2:
        yield [(0, 1)]
        return
    for seq in itertools.product(range(n), repeat=n - 2):
        yield list(nx.from_prufer_sequence(list(seq)).edges())


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_path_noise_law_small(n):
    r = 0.4
    parties = [chr(ord("A") + k) for k in range(n)]
    for edges in _labeled_trees(n):
        top = Topology(tuple(parties), "A", tuple((parties[u], parties[v]) for u, v in edges), r)
        pq, mq = protocols.superdense_conat(top)
        dist = nx.single_source_shortest_path_length(nx.Graph(edges), 0)
        eps = check_definition(pq).epsilons
        for k, p in enumerate(pq.parties[1:]):
            assert eps[k] == pytest.approx(2 * dist[parties.index(p)] * e2(r), abs=1e-12)
        assert check_definition(mq).epsilons[-1] == 0.0
