"""Distances between two-qubit unitary channels, local-product quotients and epsilon-nets."""
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import binomtest

from . import kernels
from .errors import InvalidArgument, ResourceLimitError
from .linalg import check_unitary, haar_unitaries, haar_unitary, matrix_from_pairs, matrix_to_pairs
from .rng import as_generator
from .tolerances import NET_TOL, OPT_TOL


def _arc_to_diamond(w):
    return 2.0 if w >= np.pi else 2.0 * math.sin(w / 2)


def diamond_distance_unitary(u, v):
    """Diamond distance between the channels X -> uXu^dag and X -> vXv^dag.

    If the eigenphases of u^dag v fit in an arc of width w < pi the value is
    2 sin(w/2); otherwise the hull of the eigenvalues holds 0 and it is 2.
    """
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    if u.shape != v.shape or u.ndim != 2:
        raise InvalidArgument("dimension mismatch")
    return _arc_to_diamond(kernels.arc_width(np.ascontiguousarray(u.conj().T @ v)))


def realign(v):
    """Realignment R[2a+c, 2b+d] = V[2a+b, 2c+d]; V is a product iff R has rank one."""
    v = np.asarray(v)
    return v.reshape(v.shape[:-2] + (2, 2, 2, 2)).swapaxes(-3, -2).reshape(v.shape[:-2] + (4, 4))


def product_distance_lower_bound(v):
    """Cheap lower bound on min over products K of d_diamond(K, v), vectorised over leading axes.

    Any eigenvalue-hull distance ``nu`` satisfies |Tr(K^dag v)| <= 4 nu, and
    |Tr(K^dag v)| is at most twice the top singular value of the realigned v.
    """
    s = np.linalg.svd(realign(v), compute_uv=False)[..., 0]
    nu = np.clip(s / 2, 0, 1)
    return 2 * np.sqrt(1 - nu ** 2)


@dataclass
class DistanceResult:
    value: float
    certificate: tuple = None  # (u1, u2)
    converged: bool = False


def _frobenius_residual(v, u1, u2):
    tr = abs(np.trace(np.kron(u1, u2).conj().T @ v))
    return 2 * math.sqrt(max(8 - 2 * tr, 0.0))


def closest_product_unitary(v, starts=8, rng=0, iters=200):
    """(u1, u2, residual) with u1 kron u2 locally closest to v up to phase.

    Alternating polar updates from the realignment seed plus ``starts - 1``
    random restarts; residual = 2 min_phi ||v - e^{i phi} u1 kron u2||_F.
    """
    v = check_unitary(v)
    if v.shape != (4, 4):
        raise InvalidArgument("closest_product_unitary needs a 4x4 unitary")
    g = as_generator(rng)
    best = None
    for s in range(max(starts, 1)):
        if s == 0:
            u1, u2 = kernels.closest_product(v, iters)
        else:
            u1, u2 = kernels.polish_product(v, haar_unitary(2, g), haar_unitary(2, g), iters)
        res = _frobenius_residual(v, u1, u2)
        if best is None or res < best[2]:
            best = (u1, u2, res)
    return best


def d_otimes(g1, g2, starts=16, rng=0, maxiter=4000):
    """min over single-qubit u1, u2 of d_diamond(g1, (u1 kron u2) g2), by multi-start Nelder-Mead.

    The returned value is an upper bound on the true minimum (it is attained
    by the certificate).
    """
    g1 = check_unitary(g1)
    g2 = check_unitary(g2)
    if g1.shape != (4, 4) or g2.shape != (4, 4):
        raise InvalidArgument("d_otimes needs 4x4 unitaries")
    u = np.ascontiguousarray(g1 @ g2.conj().T)
    return _refine(u, starts, as_generator(rng), maxiter)


def _refine(u, starts, g, maxiter=4000):
    u1, u2 = kernels.closest_product(u, 200)
    k0 = np.kron(u1, u2)
    best_f, best_x, conv = kernels.arc_width(np.ascontiguousarray(k0.conj().T @ u)), np.zeros(6), True
    if best_f > 1e-12:
        for s in range(starts):
            x0 = np.zeros(6) if s == 0 else g.normal(size=6) * (0.3 if s < 4 else 1.5)
            x, f, c = kernels.minimize_arc(x0, k0, u, 0.2, maxiter, 1e-13, 1e-10)
            x, f, c = kernels.minimize_arc(x, k0, u, 0.01, maxiter, 1e-15, 1e-12)
            if f < best_f:
                best_f, best_x, conv = f, x, c
            if best_f <= 1e-12:
                break
    k = k0 @ kernels.kron2(kernels.su2(*best_x[:3]), kernels.su2(*best_x[3:]))
    # split k back into factors
    a, b = kernels.closest_product(np.ascontiguousarray(k), 50)
    return DistanceResult(_arc_to_diamond(best_f), (a, b), bool(conv))


def _seed_distance(u):
    return _arc_to_diamond(kernels.product_arc(np.ascontiguousarray(u), 200))


class EpsNet:
    """Finite support of two-qubit unitaries, pairwise at least ``eps`` apart under d_otimes.

    ``round`` maps a unitary to its nearest support element (lowest index on
    ties); ``sample`` rounds a fresh Haar draw.
    """

    def __init__(self, eps, support, seed=None, validation=None):
        self.eps = float(eps)
        self.support = np.asarray(support, dtype=complex).reshape(-1, 4, 4)
        self.seed = seed
        self.validation = dict(validation or {})

    def __len__(self):
        return self.support.shape[0]

    def lower_bounds(self, x):
        """Cheap lower bounds on d_otimes(x, s) for every support element s."""
        x = np.asarray(x, dtype=complex)
        return product_distance_lower_bound(x[None] @ self.support.conj().transpose(0, 2, 1))

    def round(self, x, with_distance=False):
        """Index of the support element nearest to ``x`` under d_otimes."""
        x = check_unitary(x)
        lb = self.lower_bounds(x)
        order = np.argsort(lb, kind="stable")
        best, best_i = np.inf, -1
        for i in order:
            if lb[i] > best + 1e-12:
                break
            d = _seed_distance(x @ self.support[i].conj().T)
            if d < best - 1e-12 or (abs(d - best) <= 1e-12 and i < best_i):
                best, best_i = d, int(i)
        return (best_i, best) if with_distance else best_i

    def sample(self, rng):
        return self.support[self.round(haar_unitary(4, rng))].copy()

    def to_json(self):
        return json.dumps({"eps": self.eps, "seed": self.seed, "validation": self.validation,
                           "support": [matrix_to_pairs(u) for u in self.support]})

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        support = np.array([matrix_from_pairs(u) for u in doc["support"]])
        return cls(doc["eps"], support, doc.get("seed"), doc.get("validation"))

    def save(self, path):
        with open(path, "w") as f:
            f.write(self.to_json())

    @classmethod
    def load(cls, path):
        with open(path) as f:
            return cls.from_json(f.read())


def _too_close(c, support, eps, g, refine_starts):
    """True if candidate ``c`` lies within eps of some support element."""
    if support.shape[0] == 0:
        return False
    lb = product_distance_lower_bound(c[None] @ support.conj().transpose(0, 2, 1))
    for j in np.argsort(lb):
        if lb[j] >= eps:
            return False
        u = np.ascontiguousarray(c @ support[j].conj().T)
        d = _seed_distance(u)
        if d < eps:
            return True
        if d < eps + 0.01 and _refine(u, refine_starts, g).value < eps:
            return True
    return False


def build_eps_net(eps, rng, coverage_trials=1000, max_support=5000, max_candidates=None,
                  validation_samples=1000, refine_starts=4, progress=None):
    """Greedy net: admit Haar candidates that are at least ``eps`` from every element so far.

    Stops after ``coverage_trials`` consecutive rejections (or ``max_candidates``
    draws). Raises ResourceLimitError when the support would exceed
    ``max_support``. The result carries a validation report of both net
    properties on fresh samples.
    """
    if not 0 < eps < 2:
        raise InvalidArgument("eps must lie in (0, 2)")
    g = as_generator(rng)
    seed = rng.seed if hasattr(rng, "seed") else None
    support = np.empty((0, 4, 4), dtype=complex)
    run = drawn = 0
    while run < coverage_trials and (max_candidates is None or drawn < max_candidates):
        c = haar_unitary(4, g)
        drawn += 1
        if _too_close(c, support, eps, g, refine_starts):
            run += 1
            continue
        if support.shape[0] >= max_support:
            raise ResourceLimitError(f"eps={eps} needs more than {max_support} net elements")
        support = np.concatenate([support, c[None]])
        run = 0
        if progress is not None:
            progress(drawn, support.shape[0])
    net = EpsNet(eps, support, seed, {"candidates": drawn, "final_rejection_run": run})
    if validation_samples:
        net.validation.update(validate_net(net, validation_samples, g))
    return net


def validate_net(net, samples, rng, starts=8):
    """Empirical check of covering (fresh Haar draws) and separation (close pairs re-optimised)."""
    g = as_generator(rng)
    xs = haar_unitaries(4, samples, g)
    dists = np.array([net.round(x, with_distance=True)[1] for x in xs])
    covered = dists <= net.eps + NET_TOL
    lo = binomtest(int(covered.sum()), samples).proportion_ci(method="wilson")
    s = net.support
    min_sep, checked, refined = np.inf, 0, 0
    for i in range(len(net)):
        lb = product_distance_lower_bound(s[i][None] @ s[i + 1:].conj().transpose(0, 2, 1))
        for j in np.nonzero(lb < net.eps)[0]:
            checked += 1
            u = np.ascontiguousarray(s[i] @ s[i + 1 + j].conj().T)
            d = _seed_distance(u)
            if d < net.eps + 0.02:
                refined += 1
                d = min(d, _refine(u, starts, g).value)
            min_sep = min(min_sep, d)
    return {
        "coverage_samples": int(samples),
        "covered_fraction": float(covered.mean()),
        "covered_wilson_lo": float(lo.low),
        "max_rounding_distance": float(dists.max()),
        "separation_pairs_checked": int(checked),
        "separation_pairs_refined": int(refined),
        "min_separation": None if np.isinf(min_sep) else float(min_sep),
        "separated": bool(np.isinf(min_sep) or min_sep >= net.eps - NET_TOL),
    }


def wilson_interval(successes, trials, confidence=0.95):
    ci = binomtest(int(successes), int(trials)).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


def lipschitz_transfer_check(func, lipschitz, net, delta_grid, trials, rng):
    """Compare Pr_net[F <= delta] with Pr_haar[F <= delta + eps L] by Monte Carlo.

    The two sides use independent batches; a grid point passes when the net
    side exceeds the Haar side by at most three combined interval widths.
    """
    g = as_generator(rng)
    f_support = np.array([func(u) for u in net.support])
    idx = np.array([net.round(x) for x in haar_unitaries(4, trials, g)])
    f_net = f_support[idx]
    f_haar = np.array([func(u) for u in haar_unitaries(4, trials, g)])
    rows = []
    for delta in delta_grid:
        k_net = int((f_net <= delta).sum())
        k_haar = int((f_haar <= delta + net.eps * lipschitz).sum())
        ln, hn = wilson_interval(k_net, trials)
        lh, hh = wilson_interval(k_haar, trials)
        slack = 3 * ((hn - ln) + (hh - lh))
        p_net, p_haar = k_net / trials, k_haar / trials
        rows.append({"delta": float(delta), "p_net": p_net, "p_haar": p_haar,
                     "slack": slack, "passed": bool(p_net <= p_haar + slack)})
    return {"lipschitz": float(lipschitz), "eps": net.eps, "trials": int(trials), "rows": rows,
            "passed": all(r["passed"] for r in rows)}
