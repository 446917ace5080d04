"""Anti-concentration of polynomials in Haar-random unitary entries.

Polynomials are expression trees over variables z_v and their conjugates;
for a matrix U the variable index of entry (i, j) is ``i * dim + j``.
"""
import csv
import io
import math
from dataclasses import dataclass
from itertools import permutations

import numpy as np
from scipy.stats import linregress

from .errors import DegenerateInputError, FitImpossibleError, InvalidArgument
from .linalg import PAULIS, haar_states, haar_unitaries
from .metrics import wilson_interval
from .rng import as_generator

SUITE_VERSION = "1"


class SemiPolynomial:
    num_vars = 0
    degree = 0

    def evaluate_batch(self, z):
        """Values at the rows of ``z`` (shape (B, num_vars))."""
        raise NotImplementedError

    def conj(self):
        raise NotImplementedError

    def evaluate(self, u):
        z = np.asarray(u, dtype=complex).reshape(1, -1)
        if z.shape[1] != self.num_vars:
            raise InvalidArgument(f"expected {self.num_vars} variables, got {z.shape[1]}")
        return complex(self.evaluate_batch(z)[0])

    def evaluate_unitaries(self, us):
        us = np.asarray(us, dtype=complex)
        z = us.reshape(us.shape[0], -1)
        if z.shape[1] != self.num_vars:
            raise InvalidArgument(f"expected {self.num_vars} variables, got {z.shape[1]}")
        return self.evaluate_batch(z)

    def _coerce(self, other):
        if isinstance(other, SemiPolynomial):
            if other.num_vars != self.num_vars:
                raise InvalidArgument("variable counts differ")
            return other
        return constant(other, self.num_vars)

    def __add__(self, other):
        return Sum((self, self._coerce(other)), (1.0, 1.0))

    __radd__ = __add__

    def __sub__(self, other):
        return Sum((self, self._coerce(other)), (1.0, -1.0))

    def __rsub__(self, other):
        return Sum((self._coerce(other), self), (1.0, -1.0))

    def __mul__(self, other):
        if isinstance(other, SemiPolynomial):
            return Product((self, self._coerce(other)))
        return Sum((self,), (complex(other),))

    __rmul__ = __mul__

    def __neg__(self):
        return Sum((self,), (-1.0,))


class Monomials(SemiPolynomial):
    """Explicit sum of c * prod_v z_v^a_v conj(z_v)^b_v."""

    def __init__(self, coeffs, zpow, cpow, num_vars):
        self.coeffs = np.asarray(coeffs, dtype=complex).reshape(-1)
        self.zpow = np.asarray(zpow, dtype=np.int64).reshape(len(self.coeffs), num_vars)
        self.cpow = np.asarray(cpow, dtype=np.int64).reshape(len(self.coeffs), num_vars)
        self.num_vars = int(num_vars)
        if not np.all(np.isfinite(self.coeffs)):
            raise InvalidArgument("coefficients must be finite")
        if (self.zpow < 0).any() or (self.cpow < 0).any():
            raise InvalidArgument("exponents must be non-negative")
        tot = self.zpow.sum(1) + self.cpow.sum(1)
        self.degree = int(tot.max()) if len(tot) else 0

    def evaluate_batch(self, z):
        zc = np.conj(z)
        out = np.zeros(z.shape[0], dtype=complex)
        for c, a, b in zip(self.coeffs, self.zpow, self.cpow):
            term = np.full(z.shape[0], c, dtype=complex)
            for v in np.nonzero(a)[0]:
                term *= z[:, v] ** a[v]
            for v in np.nonzero(b)[0]:
                term *= zc[:, v] ** b[v]
            out += term
        return out

    def conj(self):
        return Monomials(np.conj(self.coeffs), self.cpow, self.zpow, self.num_vars)


class Sum(SemiPolynomial):
    def __init__(self, parts, weights):
        self.parts = tuple(parts)
        self.weights = tuple(complex(w) for w in weights)
        self.num_vars = self.parts[0].num_vars
        self.degree = max(p.degree for p in self.parts)

    def evaluate_batch(self, z):
        return sum(w * p.evaluate_batch(z) for w, p in zip(self.weights, self.parts))

    def conj(self):
        return Sum([p.conj() for p in self.parts], [np.conj(w) for w in self.weights])


class Product(SemiPolynomial):
    def __init__(self, factors):
        self.factors = tuple(factors)
        self.num_vars = self.factors[0].num_vars
        self.degree = sum(f.degree for f in self.factors)

    def evaluate_batch(self, z):
        out = np.ones(z.shape[0], dtype=complex)
        for f in self.factors:
            out = out * f.evaluate_batch(z)
        return out

    def conj(self):
        return Product([f.conj() for f in self.factors])


class Det(SemiPolynomial):
    """Determinant of a square matrix of polynomial entries (Leibniz expansion)."""

    def __init__(self, entries):
        self.entries = [list(row) for row in entries]
        m = len(self.entries)
        self.num_vars = self.entries[0][0].num_vars
        self.degree = m * max(e.degree for row in self.entries for e in row)

    def evaluate_batch(self, z):
        m = len(self.entries)
        vals = np.empty((z.shape[0], m, m), dtype=complex)
        for i, row in enumerate(self.entries):
            for j, e in enumerate(row):
                vals[:, i, j] = e.evaluate_batch(z)
        out = np.zeros(z.shape[0], dtype=complex)
        for perm in permutations(range(m)):
            sign = _perm_sign(perm)
            term = np.ones(z.shape[0], dtype=complex)
            for i, j in enumerate(perm):
                term *= vals[:, i, j]
            out += sign * term
        return out

    def conj(self):
        return Det([[e.conj() for e in row] for row in self.entries])


def _perm_sign(perm):
    sign, seen = 1, list(perm)
    for i in range(len(seen)):
        while seen[i] != i:
            j = seen[i]
            seen[i], seen[j] = seen[j], seen[i]
            sign = -sign
    return sign


def constant(c, num_vars):
    return Monomials([c], np.zeros((1, num_vars)), np.zeros((1, num_vars)), num_vars)


def variable(index, num_vars, conjugate=False):
    if not 0 <= index < num_vars:
        raise InvalidArgument("variable index out of range")
    a = np.zeros((1, num_vars), dtype=np.int64)
    a[0, index] = 1
    zero = np.zeros_like(a)
    return Monomials([1.0], zero, a, num_vars) if conjugate else Monomials([1.0], a, zero, num_vars)


def entry(i, j, dim, conjugate=False):
    if not (0 <= i < dim and 0 <= j < dim):
        raise InvalidArgument("matrix entry out of range")
    return variable(i * dim + j, dim * dim, conjugate)


def trace_poly(dim):
    return Sum([entry(i, i, dim) for i in range(dim)], [1.0] * dim)


def minor2_poly(dim):
    return entry(0, 0, dim) * entry(1, 1, dim) - entry(0, 1, dim) * entry(1, 0, dim)


def transfer_entry_poly(xi, sigma, out_position):
    """Tr[(I_A kron sigma / sqrt 2) G xi G^dag] as a degree-2 polynomial in the entries of G."""
    obs = np.kron(np.eye(2), sigma) if out_position == 1 else np.kron(sigma, np.eye(2))
    coeffs, zp, cp = [], [], []
    for a in range(4):
        for b in range(4):
            for c in range(4):
                for d in range(4):
                    w = obs[d, a] * xi[b, c] / math.sqrt(2)
                    if abs(w) < 1e-15:
                        continue
                    za = np.zeros(16, dtype=np.int64)
                    ca = np.zeros(16, dtype=np.int64)
                    za[a * 4 + b] += 1
                    ca[d * 4 + c] += 1
                    coeffs.append(w)
                    zp.append(za)
                    cp.append(ca)
    return Monomials(coeffs, zp, cp, 16)


def det_transfer_poly(basis, out_position=1):
    """det of the 3x3 transfer matrix as a degree-6 polynomial in the entries of a 4x4 gate."""
    sig = (PAULIS["X"], PAULIS["Y"], PAULIS["Z"])
    rows = [[transfer_entry_poly(basis[l], s, out_position) for l in range(3)] for s in sig]
    return Det(rows)


@dataclass(frozen=True)
class SuiteEntry:
    name: str
    poly: SemiPolynomial
    dim: int

    @property
    def degree(self):
        return self.poly.degree


def registered_suite():
    """Fixed test polynomials (versioned by SUITE_VERSION)."""
    from .mixing import fixed_subspace
    return {
        "z11": SuiteEntry("z11", entry(0, 0, 4), 4),
        "trace": SuiteEntry("trace", trace_poly(4), 4),
        "minor2": SuiteEntry("minor2", minor2_poly(4), 4),
        "detM": SuiteEntry("detM", det_transfer_poly(fixed_subspace(2).basis, 1), 4),
    }


# -- tails ------------------------------------------------------------------------

@dataclass
class EmpiricalTail:
    eps_grid: np.ndarray
    counts: np.ndarray
    trials: int
    mean: float

    @property
    def p_hat(self):
        return self.counts / self.trials

    def intervals(self, confidence=0.95):
        return np.array([wilson_interval(k, self.trials, confidence) for k in self.counts])

    def rows(self):
        iv = self.intervals()
        return [{"eps": float(e), "p_hat": float(p), "wilson_lo": float(lo), "wilson_hi": float(hi),
                 "trials": int(self.trials)}
                for e, p, (lo, hi) in zip(self.eps_grid, self.p_hat, iv)]

    def to_csv(self):
        buf = io.StringIO()
        w = csv.DictWriter(buf, ["eps", "p_hat", "wilson_lo", "wilson_hi", "trials"], lineterminator="\n")
        w.writeheader()
        w.writerows(self.rows())
        return buf.getvalue()

    def is_monotone(self):
        """Estimates nondecreasing in eps, up to overlap of the Wilson intervals."""
        order = np.argsort(self.eps_grid)
        iv = self.intervals()[order]
        p = self.p_hat[order]
        return all(p[i + 1] >= p[i] or iv[i + 1, 1] >= iv[i, 0] for i in range(len(p) - 1))


def default_eps_grid():
    return 10.0 ** -np.arange(1, 4.01, 0.5)


def _abs2_in_chunks(poly, dim, count, g, chunk):
    out = np.empty(count)
    for s in range(0, count, chunk):
        m = min(chunk, count - s)
        out[s:s + m] = np.abs(poly.evaluate_unitaries(haar_unitaries(dim, m, g))) ** 2
    return out


def estimate_tail(poly, dim, eps_grid, trials, rng, mean_trials=None, chunk=50000):
    """Pr[|F|^2 <= eps E|F|^2] over Haar U, with E|F|^2 taken from an independent batch."""
    if trials < 1000:
        raise InvalidArgument("trials must be at least 1000")
    if poly.num_vars != dim * dim:
        raise InvalidArgument("polynomial does not take dim x dim entries")
    g = as_generator(rng)
    mean = float(_abs2_in_chunks(poly, dim, mean_trials or trials, g, chunk).mean())
    if not mean > 1e-24:
        raise DegenerateInputError("E|F|^2 vanishes; F is zero on the unitary group")
    vals = _abs2_in_chunks(poly, dim, trials, g, chunk)
    eps_grid = np.asarray(eps_grid, dtype=float)
    counts = np.array([(vals <= e * mean).sum() for e in eps_grid])
    return EmpiricalTail(eps_grid, counts, int(trials), mean)


@dataclass
class TailFit:
    C_hat: float
    C_prime_hat: float
    r2: float
    predicted_C: float
    n_points: int

    @property
    def meets_prediction(self):
        return self.C_hat >= self.predicted_C

    def as_dict(self):
        return {"C_hat": self.C_hat, "C_prime_hat": self.C_prime_hat, "r2": self.r2,
                "predicted_C": self.predicted_C, "n_points": self.n_points,
                "meets_prediction": self.meets_prediction}


def fit_tail(tail, n, d):
    """Least squares of log p against log eps over grid points with nonzero estimates."""
    p = tail.p_hat
    ok = p > 0
    if ok.sum() < 3:
        raise FitImpossibleError(
            f"only {int(ok.sum())} nonzero points; tail is below {3 / tail.trials:.2g} there")
    fit = linregress(np.log(tail.eps_grid[ok]), np.log(p[ok]))
    return TailFit(float(fit.slope), float(math.exp(fit.intercept)), float(fit.rvalue ** 2),
                   1.0 / (4 * n * n * d), int(ok.sum()))


@dataclass
class BoundCheck:
    bound: np.ndarray
    half_width: np.ndarray
    passed: np.ndarray

    @property
    def all_passed(self):
        return bool(np.all(self.passed))


def _check_nonnegative(vals):
    scale = np.maximum(1.0, np.abs(vals))
    if np.any(np.abs(vals.imag) > 1e-9 * scale) or np.any(vals.real < -1e-9 * scale):
        raise InvalidArgument("polynomial is not non-negative real on its domain")
    return vals.real


def _tail_against(values_mean, values, eps_grid, bound):
    eps_grid = np.asarray(eps_grid, dtype=float)
    counts = np.array([(values <= e * values_mean).sum() for e in eps_grid])
    tail = EmpiricalTail(eps_grid, counts, len(values), values_mean)
    iv = tail.intervals()
    half = (iv[:, 1] - iv[:, 0]) / 2
    b = bound(eps_grid)
    return tail, BoundCheck(b, half, tail.p_hat <= b + 3 * half)


def unit_circle_tail(poly, d, eps_grid, trials, rng):
    """Tail of a non-negative single-variable polynomial at a uniform point of the unit circle."""
    if poly.num_vars != 1:
        raise InvalidArgument("need a single-variable polynomial")
    g = as_generator(rng)
    draw = lambda m: np.exp(1j * g.uniform(0, 2 * np.pi, m))[:, None]
    mean = _check_nonnegative(poly.evaluate_batch(draw(trials))).mean()
    vals = _check_nonnegative(poly.evaluate_batch(draw(trials)))
    return _tail_against(mean, vals, eps_grid, lambda e: (8 * d / np.pi + 1) * e ** (1 / (2 * d)))


def first_coordinate_tail(poly, n, d, eps_grid, trials, rng):
    """Tail of a non-negative polynomial in the first coordinate of a Haar unit vector in C^n."""
    if poly.num_vars != 1:
        raise InvalidArgument("need a single-variable polynomial")
    g = as_generator(rng)
    draw = lambda m: haar_states(n, m, g)[:, :1]
    mean = _check_nonnegative(poly.evaluate_batch(draw(trials))).mean()
    vals = _check_nonnegative(poly.evaluate_batch(draw(trials)))
    return _tail_against(mean, vals, eps_grid, lambda e: 4 * d * (n + 1) * e ** (1 / (4 * d)))


def random_nonnegative_poly(d, rng):
    """Random degree-d single-variable polynomial that is >= 0 on the closed unit disk.

    |p(z)|^2 (deg p = d // 2, roots on the unit circle half the time) plus
    a * (1 + Re(e^{i phi} z^d)).
    """
    g = as_generator(rng)
    m = d // 2
    if m and g.random() < 0.5:
        coeffs = np.poly(np.exp(1j * g.uniform(0, 2 * np.pi, m)))[::-1]
    else:
        coeffs = g.standard_normal(m + 1) + 1j * g.standard_normal(m + 1)
    terms = {}
    for j, a in enumerate(coeffs):
        for k, b in enumerate(coeffs):
            terms[(j, k)] = terms.get((j, k), 0) + a * np.conj(b)
    alpha = g.exponential()
    phase = np.exp(1j * g.uniform(0, 2 * np.pi))
    terms[(0, 0)] = terms.get((0, 0), 0) + alpha
    terms[(d, 0)] = terms.get((d, 0), 0) + alpha * phase / 2
    terms[(0, d)] = terms.get((0, d), 0) + alpha * np.conj(phase) / 2
    keys = list(terms)
    return Monomials([terms[k] for k in keys], [[k[0]] for k in keys], [[k[1]] for k in keys], 1)
