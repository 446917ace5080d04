import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rqclab.circuits import (Architecture, SpacetimeCoord, brickwork, circuit_from_json, circuit_to_json,
                             depth_between, lightcone, reverse_lightcone, sample_circuit, shortest_path)
from rqclab.errors import CircuitFormatError, InvalidArgument
from rqclab.rng import RngStream


def test_brickwork_small():
    assert brickwork(4, 2).layers == (((0, 1), (2, 3)), ((1, 2),))
    assert brickwork(2, 3).layers == (((0, 1),), (), ((0, 1),))
    assert brickwork(6, 0).layers == ()
    with pytest.raises(InvalidArgument):
        brickwork(5, 1)


def test_gate_counts():
    assert [len(l) for l in brickwork(8, 3).layers] == [4, 3, 4]
    assert brickwork(8, 3).num_gates == 11


def test_architecture_validation():
    with pytest.raises(InvalidArgument):
        Architecture(3, (((0, 1), (1, 2)),))
    with pytest.raises(InvalidArgument):
        Architecture(3, (((0, 3),),))


def test_depth_between():
    arch = brickwork(16, 4)
    assert depth_between(arch, 0, 6) is None  # outside the forward cone of input 0
    assert depth_between(brickwork(4, 0), 2, 2) == 0
    # an interior wire is touched by every layer
    assert depth_between(arch, 3, 3) == 4
    # the edge qubit idles every second layer
    assert depth_between(arch, 0, 0) == 2
    assert depth_between(arch, 0, 4) == 4


@given(st.integers(1, 6).map(lambda k: 2 * k), st.integers(0, 6), st.data())
@settings(max_examples=40, deadline=None)
def test_shortest_path_consistent(n, depth, data):
    arch = brickwork(n, depth)
    a = data.draw(st.integers(0, n - 1))
    b = data.draw(st.integers(0, n - 1))
    d = depth_between(arch, a, b)
    path = shortest_path(arch, a, b)
    assert (d is None) == (path is None) == (b not in lightcone(arch, a))
    if path is not None:
        assert len(path) - 1 == d
        assert path[0] == SpacetimeCoord(0, a) and path[-1].qubit == b
    assert (a in reverse_lightcone(arch, b)) == (b in lightcone(arch, a))


def test_lightcone_examples():
    assert lightcone(brickwork(16, 2), 0) == {0, 1, 2}
    assert lightcone(brickwork(8, 0), 5) == {5}
    with pytest.raises(InvalidArgument):
        lightcone(brickwork(4, 1), 4)


def test_sampling_deterministic():
    arch = brickwork(8, 3)
    a = sample_circuit(arch, "haar", RngStream(5, (1,)))
    b = sample_circuit(arch, "haar", RngStream(5, (1,)))
    assert a.digest() == b.digest()
    assert a.digest() != sample_circuit(arch, "haar", RngStream(6, (1,))).digest()
    with pytest.raises(InvalidArgument):
        sample_circuit(arch, "gaussian", 0)


def test_dense_unitary_is_unitary():
    c = sample_circuit(brickwork(4, 3), "haar", 0)
    u = c.unitary()
    assert np.allclose(u.conj().T @ u, np.eye(16))


def test_json_round_trip():
    c = sample_circuit(brickwork(6, 3), "haar", 3)
    text = circuit_to_json(c)
    back = circuit_from_json(text)
    assert circuit_to_json(back) == text
    assert back.architecture == c.architecture


def test_json_errors():
    with pytest.raises(CircuitFormatError):
        circuit_from_json('{"n": 2}')
    doc = json.loads(circuit_to_json(sample_circuit(brickwork(4, 1), "haar", 1)))
    doc["layers"][0][1]["unitary"] = doc["layers"][0][1]["unitary"][:2]
    with pytest.raises(CircuitFormatError) as err:
        circuit_from_json(json.dumps(doc))
    assert "$.layers[0][1]" in err.value.location
    with pytest.raises(CircuitFormatError):
        circuit_from_json("{not json")
