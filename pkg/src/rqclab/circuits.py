"""Layered circuit architectures, lightcones, concrete circuits and their JSON form.

Qubits are 0-indexed in code and 1-indexed in JSON.
"""
import hashlib
import json
from dataclasses import dataclass
from functools import reduce

import numpy as np

from .errors import CircuitFormatError, InvalidArgument
from .linalg import check_unitary, haar_unitary, matrix_from_pairs, matrix_to_pairs
from .rng import as_generator


@dataclass(frozen=True)
class SpacetimeCoord:
    time: int  # 0 = input, len(layers) = output
    qubit: int


@dataclass(frozen=True)
class Architecture:
    num_qubits: int
    layers: tuple

    def __post_init__(self):
        layers = tuple(tuple(tuple(int(q) for q in g) for g in layer) for layer in self.layers)
        object.__setattr__(self, "layers", layers)
        if self.num_qubits < 1:
            raise InvalidArgument("need at least one qubit")
        for t, layer in enumerate(layers):
            seen = set()
            for g in layer:
                if not g or len(set(g)) != len(g):
                    raise InvalidArgument(f"layer {t}: bad gate tuple {g}")
                if any(q < 0 or q >= self.num_qubits for q in g):
                    raise InvalidArgument(f"layer {t}: qubit index out of range in {g}")
                if seen & set(g):
                    raise InvalidArgument(f"layer {t}: gates overlap")
                seen |= set(g)

    @property
    def depth(self):
        return len(self.layers)

    @property
    def num_gates(self):
        return sum(len(layer) for layer in self.layers)

    def truncated(self, start, stop=None):
        """Architecture made of layers[start:stop]."""
        return Architecture(self.num_qubits, self.layers[start:stop])

    def without_gate(self, layer, index):
        layers = list(self.layers)
        layers[layer] = tuple(g for i, g in enumerate(layers[layer]) if i != index)
        return Architecture(self.num_qubits, tuple(layers))

    def _check(self, q):
        if not 0 <= q < self.num_qubits:
            raise InvalidArgument(f"qubit {q} out of range for {self.num_qubits} qubits")


def brickwork(n, depth):
    """Layer j (1-indexed) holds gate (i, i+1) when i and j have the same parity (1-indexed i)."""
    if n < 2 or n % 2:
        raise InvalidArgument("brickwork needs an even number of qubits >= 2")
    if depth < 0:
        raise InvalidArgument("depth must be non-negative")
    layers = []
    for j in range(1, depth + 1):
        start = 0 if j % 2 else 1
        layers.append(tuple((i, i + 1) for i in range(start, n - 1, 2)))
    return Architecture(n, tuple(layers))


def depth_between(arch, input_qubit, output_qubit):
    """Fewest gates on a path from an input wire to an output wire, or None if disconnected.

    Wires are nodes and gates are edges, so an idle qubit carries its
    distance forward for free.
    """
    arch._check(input_qubit)
    arch._check(output_qubit)
    dist = np.full(arch.num_qubits, np.inf)
    dist[input_qubit] = 0
    for layer in arch.layers:
        new = dist.copy()
        for g in layer:
            m = min(dist[q] for q in g) + 1
            for q in g:
                new[q] = m
        dist = new
    d = dist[output_qubit]
    return None if np.isinf(d) else int(d)


def shortest_path(arch, input_qubit, output_qubit):
    """A shortest wire path as SpacetimeCoords; entry i > 0 is (layer of gate i, its output qubit)."""
    arch._check(input_qubit)
    arch._check(output_qubit)
    n = arch.num_qubits
    dist = np.full(n, np.inf)
    dist[input_qubit] = 0
    # back[t][q] = (prev_time, prev_qubit) for the wire that ends at qubit q after layer t
    since = {q: 0 for q in range(n)}
    back = {}
    for t, layer in enumerate(arch.layers, start=1):
        new = dist.copy()
        new_since = dict(since)
        for g in layer:
            src = min(g, key=lambda q: dist[q])
            for q in g:
                new[q] = dist[src] + 1
                new_since[q] = t
                back[(t, q)] = (since[src], src)
        dist, since = new, new_since
    if np.isinf(dist[output_qubit]):
        return None
    path = [SpacetimeCoord(since[output_qubit], output_qubit)]
    while path[-1].time > 0:
        pt, pq = back[(path[-1].time, path[-1].qubit)]
        path.append(SpacetimeCoord(pt, pq))
    return path[::-1]


def lightcone(arch, input_qubit):
    arch._check(input_qubit)
    cone = {input_qubit}
    for layer in arch.layers:
        for g in layer:
            if cone & set(g):
                cone |= set(g)
    return frozenset(cone)


def reverse_lightcone(arch, output_qubit):
    arch._check(output_qubit)
    cone = {output_qubit}
    for layer in reversed(arch.layers):
        for g in layer:
            if cone & set(g):
                cone |= set(g)
    return frozenset(cone)


@dataclass(frozen=True, eq=False)
class Circuit:
    architecture: Architecture
    gates: tuple

    def __post_init__(self):
        arch = self.architecture
        gates = tuple(tuple(np.asarray(u, dtype=complex) for u in layer) for layer in self.gates)
        if len(gates) != arch.depth:
            raise InvalidArgument("gate layers do not match architecture depth")
        for t, (layer, us) in enumerate(zip(arch.layers, gates)):
            if len(layer) != len(us):
                raise InvalidArgument(f"layer {t}: {len(us)} gates for {len(layer)} tuples")
            for g, u in zip(layer, us):
                if u.shape != (2 ** len(g),) * 2:
                    raise InvalidArgument(f"layer {t}: gate on {g} has shape {u.shape}")
        object.__setattr__(self, "gates", gates)

    @property
    def num_qubits(self):
        return self.architecture.num_qubits

    def placed_layers(self):
        """Layers as lists of (qubits, unitary)."""
        return [list(zip(q, u)) for q, u in zip(self.architecture.layers, self.gates)]

    def unitary(self):
        """Dense 2^n x 2^n unitary; only sensible for small n."""
        n = self.num_qubits
        total = np.eye(2 ** n, dtype=complex)
        for layer in self.placed_layers():
            total = embed_layer(layer, n) @ total
        return total

    def digest(self):
        return hashlib.sha256(circuit_to_json(self).encode()).hexdigest()


def embed_gate(qubits, u, n):
    """Full-space matrix of ``u`` acting on ``qubits`` (in tuple order)."""
    k = len(qubits)
    rest = [q for q in range(n) if q not in qubits]
    full = np.kron(u, np.eye(2 ** (n - k)))
    # axes currently ordered (qubits..., rest...); permute to 0..n-1
    order = list(qubits) + rest
    perm = np.argsort(order)
    t = full.reshape((2,) * (2 * n))
    t = t.transpose(list(perm) + [n + p for p in perm])
    return t.reshape(2 ** n, 2 ** n)


def embed_layer(layer, n):
    mats = [embed_gate(q, u, n) for q, u in layer]
    return reduce(np.matmul, mats, np.eye(2 ** n, dtype=complex))


def sample_circuit(arch, gate_source="haar", rng=None):
    """Independent gates for every tuple of ``arch``.

    ``gate_source`` is ``"haar"`` or an EpsNet (gates drawn from its rounded
    Haar distribution).
    """
    g = as_generator(rng)
    if isinstance(gate_source, str):
        if gate_source != "haar":
            raise InvalidArgument(f"unknown gate source {gate_source!r}")
        draw = lambda k: haar_unitary(2 ** k, g)
    elif hasattr(gate_source, "sample"):
        def draw(k):
            if k != 2:
                raise InvalidArgument("nets only supply two-qubit gates")
            return gate_source.sample(g)
    else:
        raise InvalidArgument("gate_source must be 'haar' or a net")
    gates = tuple(tuple(draw(len(q)) for q in layer) for layer in arch.layers)
    return Circuit(arch, gates)


def circuit_to_json(circuit):
    doc = {"n": circuit.num_qubits, "layers": [
        [{"qubits": [q + 1 for q in qs], "unitary": matrix_to_pairs(u)} for qs, u in layer]
        for layer in circuit.placed_layers()]}
    return json.dumps(doc)


def circuit_from_json(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise CircuitFormatError(f"invalid JSON: {e.msg}", f"line {e.lineno} column {e.colno}") from e
    if not isinstance(doc, dict):
        raise CircuitFormatError("top level must be an object", "$")
    for key in ("n", "layers"):
        if key not in doc:
            raise CircuitFormatError(f"missing key {key!r}", "$")
    n = doc["n"]
    if not isinstance(n, int) or n < 1:
        raise CircuitFormatError("'n' must be a positive integer", "$.n")
    layers, gates = [], []
    for t, layer in enumerate(doc["layers"]):
        qs, us = [], []
        for i, g in enumerate(layer):
            loc = f"$.layers[{t}][{i}]"
            if not isinstance(g, dict) or "qubits" not in g or "unitary" not in g:
                raise CircuitFormatError("gate needs 'qubits' and 'unitary'", loc)
            q = tuple(int(x) - 1 for x in g["qubits"])
            try:
                u = matrix_from_pairs(g["unitary"])
            except (InvalidArgument, ValueError, TypeError) as e:
                raise CircuitFormatError(f"bad unitary: {e}", loc + ".unitary") from e
            if u.shape != (2 ** len(q),) * 2:
                raise CircuitFormatError(
                    f"unitary shape {u.shape} does not match {len(q)} qubits", loc + ".unitary")
            try:
                check_unitary(u, tol=1e-8)
            except InvalidArgument as e:
                raise CircuitFormatError(str(e), loc + ".unitary") from e
            qs.append(q)
            us.append(u)
        layers.append(tuple(qs))
        gates.append(tuple(us))
    try:
        arch = Architecture(n, tuple(layers))
    except InvalidArgument as e:
        raise CircuitFormatError(str(e), "$.layers") from e
    return Circuit(arch, tuple(gates))
