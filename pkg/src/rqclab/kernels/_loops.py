"""Scalar-loop kernels.

Written in the numba-compatible subset of Python so the same source runs
compiled (numba backend) or interpreted (numpy backend, slow but exact).
"""
import numpy as np

from ._jit import jit


@jit
def apply_unitary_loop(state, gate, targets, nqubits):
    # in place; qubit 0 is the most significant bit
    k = targets.shape[0]
    dk = 1 << k
    pos = np.empty(k, np.int64)
    for j in range(k):
        pos[j] = nqubits - 1 - targets[j]
    offs = np.zeros(dk, np.int64)
    for m in range(dk):
        o = 0
        for j in range(k):
            if (m >> (k - 1 - j)) & 1:
                o |= 1 << pos[j]
        offs[m] = o
    sp = np.sort(pos)
    buf = np.empty(dk, np.complex128)
    for i in range(1 << (nqubits - k)):
        base = i
        for j in range(k):
            p = sp[j]
            low = base & ((1 << p) - 1)
            base = ((base >> p) << (p + 1)) | low
        for m in range(dk):
            buf[m] = state[base + offs[m]]
        for r in range(dk):
            acc = 0j
            for c in range(dk):
                acc += gate[r, c] * buf[c]
            state[base + offs[r]] = acc
    return state


@jit
def su2(a0, a1, a2):
    """exp(i (a0 X + a1 Y + a2 Z))."""
    t = np.sqrt(a0 * a0 + a1 * a1 + a2 * a2)
    out = np.empty((2, 2), np.complex128)
    if t < 1e-300:
        out[0, 0] = 1.0
        out[0, 1] = 0.0
        out[1, 0] = 0.0
        out[1, 1] = 1.0
        return out
    c = np.cos(t)
    s = np.sin(t) / t
    out[0, 0] = c + 1j * s * a2
    out[1, 1] = c - 1j * s * a2
    out[0, 1] = 1j * s * (a0 - 1j * a1)
    out[1, 0] = 1j * s * (a0 + 1j * a1)
    return out


@jit
def kron2(a, b):
    out = np.empty((4, 4), np.complex128)
    for i in range(2):
        for j in range(2):
            for k in range(2):
                for l in range(2):
                    out[2 * i + k, 2 * j + l] = a[i, j] * b[k, l]
    return out


@jit
def arc_width(w):
    """Length of the shortest arc of the unit circle holding all eigenphases of ``w``."""
    ev = np.linalg.eigvals(w)
    th = np.sort(np.angle(ev))
    n = th.shape[0]
    gap = th[0] + 2 * np.pi - th[n - 1]
    for i in range(n - 1):
        d = th[i + 1] - th[i]
        if d > gap:
            gap = d
    return 2 * np.pi - gap


@jit
def _product_objective(x, k0, u):
    k = k0 @ kron2(su2(x[0], x[1], x[2]), su2(x[3], x[4], x[5]))
    return arc_width(k.conj().T @ u)


@jit
def minimize_arc(x0, k0, u, step, maxiter, ftol, xtol):
    """Nelder-Mead over K = k0 (su2(x[:3]) kron su2(x[3:])) minimising arc_width(K^dag u).

    Returns (x, fbest, converged).
    """
    n = 6
    sim = np.empty((n + 1, n))
    f = np.empty(n + 1)
    for i in range(n + 1):
        sim[i] = x0
        if i > 0:
            sim[i, i - 1] += step
        f[i] = _product_objective(sim[i], k0, u)
    converged = False
    for _ in range(maxiter):
        order = np.argsort(f)
        sim = sim[order]
        f = f[order]
        if f[n] - f[0] <= ftol:
            dx = 0.0
            for i in range(1, n + 1):
                for j in range(n):
                    d = abs(sim[i, j] - sim[0, j])
                    if d > dx:
                        dx = d
            if dx < xtol:
                converged = True
                break
        c = np.zeros(n)
        for i in range(n):
            c += sim[i]
        c /= n
        xr = c + (c - sim[n])
        fr = _product_objective(xr, k0, u)
        if fr < f[0]:
            xe = c + 2.0 * (c - sim[n])
            fe = _product_objective(xe, k0, u)
            if fe < fr:
                sim[n] = xe
                f[n] = fe
            else:
                sim[n] = xr
                f[n] = fr
        elif fr < f[n - 1]:
            sim[n] = xr
            f[n] = fr
        else:
            if fr < f[n]:
                xc = c + 0.5 * (xr - c)
                fc = _product_objective(xc, k0, u)
                if fc <= fr:
                    sim[n] = xc
                    f[n] = fc
                    continue
            else:
                xc = c + 0.5 * (sim[n] - c)
                fc = _product_objective(xc, k0, u)
                if fc < f[n]:
                    sim[n] = xc
                    f[n] = fc
                    continue
            for i in range(1, n + 1):
                sim[i] = sim[0] + 0.5 * (sim[i] - sim[0])
                f[i] = _product_objective(sim[i], k0, u)
    i = np.argmin(f)
    return sim[i].copy(), f[i], converged


@jit
def polar2(a):
    u, s, vh = np.linalg.svd(a)
    return u @ vh


@jit
def closest_product(v, iters):
    """Local maximiser of |Tr((u1 kron u2)^dag v)| seeded from the realignment SVD."""
    r = np.empty((4, 4), np.complex128)
    for a in range(2):
        for b in range(2):
            for c in range(2):
                for d in range(2):
                    r[2 * a + c, 2 * b + d] = v[2 * a + b, 2 * c + d]
    u, s, vh = np.linalg.svd(r)
    ma = np.empty((2, 2), np.complex128)
    mb = np.empty((2, 2), np.complex128)
    for i in range(2):
        for j in range(2):
            ma[i, j] = u[2 * i + j, 0]
            mb[i, j] = vh[0, 2 * i + j]
    return polish_product(v, polar2(ma), polar2(mb), iters)


@jit
def polish_product(v, u1, u2, iters):
    ma = np.empty((2, 2), np.complex128)
    mb = np.empty((2, 2), np.complex128)
    prev = -1.0
    for _ in range(iters):
        for a in range(2):
            for c in range(2):
                acc = 0j
                for b in range(2):
                    for d in range(2):
                        acc += np.conj(u2[b, d]) * v[2 * a + b, 2 * c + d]
                ma[a, c] = acc
        u1 = polar2(ma)
        for b in range(2):
            for d in range(2):
                acc = 0j
                for a in range(2):
                    for c in range(2):
                        acc += np.conj(u1[a, c]) * v[2 * a + b, 2 * c + d]
                mb[b, d] = acc
        u2 = polar2(mb)
        tr = 0j
        for b in range(2):
            for d in range(2):
                tr += np.conj(u2[b, d]) * mb[b, d]
        t = abs(tr)
        if t - prev < 1e-14:
            break
        prev = t
    return u1, u2


@jit
def product_arc(v, iters):
    """Arc width of (u1 kron u2)^dag v at the polished Frobenius-closest product."""
    u1, u2 = closest_product(v, iters)
    return arc_width(kron2(u1, u2).conj().T @ v)


@jit
def det_transfer_loop(gates, basis, out_position):
    """|det| of the 3 x r transfer matrix for each 4x4 gate in ``gates``."""
    nb = gates.shape[0]
    r = basis.shape[0]
    out = np.empty(nb)
    paulis = np.zeros((3, 2, 2), np.complex128)
    paulis[0, 0, 1] = 1.0
    paulis[0, 1, 0] = 1.0
    paulis[1, 0, 1] = -1j
    paulis[1, 1, 0] = 1j
    paulis[2, 0, 0] = 1.0
    paulis[2, 1, 1] = -1.0
    inv = 1.0 / np.sqrt(2.0)
    m = np.zeros((3, 3))
    for b in range(nb):
        g = gates[b]
        gd = g.conj().T
        for l in range(r):
            img = g @ basis[l] @ gd
            red = np.zeros((2, 2), np.complex128)
            for x in range(2):
                for y in range(2):
                    for e in range(2):
                        if out_position == 0:
                            red[x, y] += img[2 * x + e, 2 * y + e]
                        else:
                            red[x, y] += img[2 * e + x, 2 * e + y]
            for s in range(3):
                acc = 0j
                for x in range(2):
                    for y in range(2):
                        acc += paulis[s, y, x] * red[x, y]
                m[s, l] = acc.real * inv
        for l in range(r, 3):
            for s in range(3):
                m[s, l] = 0.0
        out[b] = abs(np.linalg.det(m))
    return out
