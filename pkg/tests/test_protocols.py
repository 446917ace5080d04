import math

import numpy as np
import pytest

from rqclab.circuits import Architecture, Circuit, brickwork, lightcone, sample_circuit
from rqclab.errors import CalibrationError, DepthGuardError, InvalidArgument
from rqclab.linalg import haar_unitary
from rqclab.metrics import build_eps_net, d_otimes, diamond_distance_unitary
from rqclab.protocols import (DepthTestParams, GateLearnParams, candidate_norms, circuit_distance, depth_test,
                              learn_circuit, learn_first_gate, lemma_checks, partial_trace_norms,
                              probe_layout, purity_experiment)
from rqclab.rng import RngStream
from rqclab.simulator import Oracle, OracleConfig

C2 = 1.2  # representative calibrated exponent for brickwork
NOISY = OracleConfig(injected_error=1.0)  # perturb every estimate by the full tomography eps
SWAP = np.eye(4)[[0, 2, 1, 3]].astype(complex)


def test_depth_zero_returns_zero():
    c = sample_circuit(brickwork(8, 0), "haar", 0)
    trace = []
    assert depth_test(Oracle(c, config=NOISY), DepthTestParams(0.1, C2), RngStream(1), trace) == 0
    assert len(trace) == 1


def test_depth_two_mostly_exact():
    params = DepthTestParams(0.1, C2)
    hits = 0
    for r in range(50):
        s = RngStream(2, (r,))
        c = sample_circuit(brickwork(16, 2), "haar", s.child(0))
        d = depth_test(Oracle(c, config=NOISY), params, s.child(1))
        assert d <= 2
        hits += d == 2
    assert hits >= 45


def test_depth_one_first_iteration_sees_signal():
    c = sample_circuit(brickwork(16, 1), "haar", 3)
    trace = []
    assert depth_test(Oracle(c, config=NOISY), DepthTestParams(0.1, C2), RngStream(3), trace) == 1
    assert trace[0]["norm"] > 2 * trace[0]["eps"]


def test_depth_guard():
    c = sample_circuit(brickwork(4, 4), "haar", 4)
    with pytest.raises(DepthGuardError):
        depth_test(Oracle(c), DepthTestParams(0.1, C2), RngStream(4))
    with pytest.raises(InvalidArgument):
        depth_test(Oracle(c), DepthTestParams(0.1, C2), 4)


def test_probe_layout_outputs():
    arch = brickwork(8, 2)
    outs = [probe_layout(arch, 0, j).out for j in range(4)]
    assert outs == [2, 4, 6, 7]
    for j in range(4):
        lay = probe_layout(arch, 0, j)
        rest = arch.truncated(1)
        assert lay.out in lightcone(rest, lay.partner) and lay.out not in lightcone(rest, lay.free)
    last = probe_layout(arch, 1, 0)
    assert last.out == last.partner and last.depth == 1


@pytest.fixture(scope="module")
def small_net():
    return build_eps_net(1.0, RngStream(5), max_candidates=150, validation_samples=0)


def _params(net, depth, **kw):
    return GateLearnParams(gamma=0.1, c2=C2, depth=depth, net=net, **kw)


def test_discrete_learns_planted_gate(small_net):
    arch = brickwork(8, 2)
    for r in range(3):
        s = RngStream(6, (r,))
        c = sample_circuit(arch, small_net, s.child(0))
        o = Oracle(c, config=NOISY)
        p = _params(small_net, 2)
        g = learn_first_gate(o, 0, p, s.child(1))
        assert d_otimes(g, c.gates[0][0]).value <= 1e-5
        lay = probe_layout(arch, 0, 0)
        eps = p.eps(lay.depth)
        assert max(candidate_norms(o, c.gates[0][0], lay, eps, s.child(2))) < 5 * eps


def test_depth_zero_accepts_product_equivalent(small_net):
    arch = Architecture(4, (((0, 1), (2, 3)),))
    g = np.random.default_rng(7)
    true = small_net.support[3]
    k = np.kron(haar_unitary(2, g), haar_unitary(2, g))
    c = Circuit(arch, ((k @ true, small_net.support[0]),))
    got = learn_first_gate(Oracle(c), 0, _params(small_net, 1), RngStream(7))
    assert d_otimes(got, k @ true).value <= 1e-5


def test_all_rejected_raises(small_net):
    arch = brickwork(8, 2)
    c = sample_circuit(arch, "haar", 8)
    tiny = type(small_net)(small_net.eps, small_net.support[:2])
    with pytest.raises(CalibrationError):
        learn_first_gate(Oracle(c), 0, _params(tiny, 2), RngStream(8))


def test_continuum_mode():
    arch = brickwork(8, 2)
    s = RngStream(31, (0,))
    c = sample_circuit(arch, "haar", s.child(0))
    p = GateLearnParams(gamma=0.1, c2=C2, depth=2, delta=0.25)
    g = learn_first_gate(Oracle(c, config=NOISY), 0, p, s.child(1))
    assert d_otimes(g, c.gates[0][0]).value <= 0.25


def test_learn_circuit_small(small_net):
    arch = brickwork(6, 2)
    s = RngStream(9)
    c = sample_circuit(arch, small_net, s.child(0))
    p = _params(small_net, 2, delta=0.3)
    learned = learn_circuit(Oracle(c, config=NOISY), arch, p, s.child(1), final_metric="frobenius")
    assert learned.circuit.architecture == arch
    frob, dia = circuit_distance(c.unitary(), learned.unitary())
    assert frob <= 0.3 and dia <= frob + 1e-9
    absorbed = learned.absorbed()
    assert absorbed.architecture == arch
    assert diamond_distance_unitary(absorbed.unitary(), learned.unitary()) <= 1e-9


def test_learn_circuit_depth_zero(small_net):
    arch = brickwork(4, 0)
    c = Circuit(arch, ())  # only the final single-qubit stage runs
    p = _params(small_net, 0, delta=0.2)
    learned = learn_circuit(Oracle(c, config=NOISY), arch, p, RngStream(10))
    assert diamond_distance_unitary(learned.unitary(), np.eye(16)) <= 0.2


def test_learn_circuit_arch_mismatch(small_net):
    c = sample_circuit(brickwork(6, 2), "haar", 0)
    with pytest.raises(InvalidArgument):
        learn_circuit(Oracle(c), brickwork(6, 1), _params(small_net, 1), RngStream(0))


def test_purity_examples():
    rows = purity_experiment(6, [0, 1, 2], 40, RngStream(11))
    assert rows[0]["mean"] == pytest.approx(1, abs=1e-12)
    assert all(r["mean"] > 0.5 for r in rows)
    mixed = purity_experiment(6, [0, 2], 10, RngStream(11), all_mixed=True)
    assert all(abs(r["mean"] - 0.5) <= 1e-12 for r in mixed)


def test_partial_trace_norm_examples():
    g = np.random.default_rng(12)
    k = np.kron(haar_unitary(2, g), haar_unitary(2, g))
    assert partial_trace_norms(k).max() <= 1e-9
    assert d_otimes(k, np.eye(4)).value <= 1e-5
    assert partial_trace_norms(SWAP).max() >= 1


def test_lemma_checks_small():
    rows = lemma_checks([0.01], 10, RngStream(13), starts=4)
    r = rows[0]
    assert r["signal_violations"] == 0 and r["dotimes_violations"] == 0
    assert r["dotimes_max"] <= 20 * math.sqrt(0.01)
