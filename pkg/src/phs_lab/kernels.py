"""Hot loops: fixed-step RK4 driver, built-in model kernels, ledger scans.

Every function here is written in the numba-compatible subset and is
compiled with ``njit`` unless ``PHS_LAB_DISABLE_NUMBA`` is set, in which case
the identical code runs as plain Python.

Model kernels share the signatures

    rhs(x, u, p) -> xdot
    output(x, p) -> y
    energy(x, p) -> float
    dissipation(x, p) -> float        # e^T R(x, e)

and input-law kernels ``law(t, x, p) -> u``.  ``p`` is a flat float64
parameter vector.
"""

import math

import numpy as np

from ._accel import njit

STATUS_OK = 0
STATUS_BLOWUP = 1
STATUS_BAD_INPUT = 2


@njit
def _all_finite(v):
    for i in range(v.shape[0]):
        if not math.isfinite(v[i]):
            return False
    return True


@njit
def _max_abs(v):
    out = 0.0
    for i in range(v.shape[0]):
        a = abs(v[i])
        if a > out:
            out = a
    return out


@njit(cache=False)  # function-typed arguments defeat the on-disk cache
def rk4_drive(rhs, output, energy, dissipation, law, sys_p, law_p, x0, t0, h, nsteps, blowup):
    """Classical RK4 on a uniform grid with the law sampled at stage points.

    Returns ``(states, inputs, outputs, energies, dissipation, status, index)``;
    on failure ``status`` is nonzero and ``index`` is the offending grid point
    (arrays are filled up to, not including, that point).
    """
    n = x0.shape[0]
    u0 = law(t0, x0, law_p)
    m = u0.shape[0]
    y0 = output(x0, sys_p)
    states = np.zeros((nsteps + 1, n))
    inputs = np.zeros((nsteps + 1, m))
    outputs = np.zeros((nsteps + 1, y0.shape[0]))
    energies = np.zeros(nsteps + 1)
    diss = np.zeros(nsteps + 1)
    x = x0.copy()
    half = 0.5 * h
    for i in range(nsteps + 1):
        t = t0 + i * h
        u = law(t, x, law_p)
        if not _all_finite(u):
            return states, inputs, outputs, energies, diss, STATUS_BAD_INPUT, i
        states[i] = x
        inputs[i] = u
        outputs[i] = output(x, sys_p)
        energies[i] = energy(x, sys_p)
        diss[i] = dissipation(x, sys_p)
        if i == nsteps:
            break
        k1 = rhs(x, u, sys_p)
        xs = x + half * k1
        us = law(t + half, xs, law_p)
        k2 = rhs(xs, us, sys_p)
        xs = x + half * k2
        us = law(t + half, xs, law_p)
        k3 = rhs(xs, us, sys_p)
        xs = x + h * k3
        us = law(t + h, xs, law_p)
        k4 = rhs(xs, us, sys_p)
        if not (_all_finite(us)):
            return states, inputs, outputs, energies, diss, STATUS_BAD_INPUT, i + 1
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not _all_finite(x) or _max_abs(x) > blowup:
            return states, inputs, outputs, energies, diss, STATUS_BLOWUP, i + 1
    return states, inputs, outputs, energies, diss, STATUS_OK, nsteps + 1


@njit
def trapezoid_cumulative(p_left, p_right, h):
    """Cumulative trapezoid with one-sided end values per step.

    Step ``i`` integrates ``0.5*h*(p_left[i] + p_right[i+1])``; the two arrays
    differ only where the input law switches on a grid point.
    """
    n = p_left.shape[0]
    out = np.zeros(n)
    acc = 0.0
    for i in range(n - 1):
        acc += 0.5 * h * (p_left[i] + p_right[i + 1])
        out[i + 1] = acc
    return out


@njit
def max_pair_increase(d):
    """``max_{i<j} d[j] - d[i]`` in one pass; -inf for fewer than two samples."""
    best = -np.inf
    if d.shape[0] < 2:
        return best
    lo = d[0]
    for j in range(1, d.shape[0]):
        diff = d[j] - lo
        if diff > best:
            best = diff
        if d[j] < lo:
            lo = d[j]
    return best


# ---------------------------------------------------------------- input laws


@njit
def zero_law(t, x, p):
    return np.zeros(int(p[0]))


@njit
def constant_law(t, x, p):
    return p.copy()


@njit
def sinusoid_law(t, x, p):
    # p = [m, terms, amp (terms*m), freq (terms*m), phase (terms*m)], row-major
    m = int(p[0])
    terms = int(p[1])
    k = terms * m
    out = np.zeros(m)
    for i in range(terms):
        for j in range(m):
            idx = i * m + j
            out[j] += p[2 + idx] * math.sin(p[2 + k + idx] * t + p[2 + 2 * k + idx])
    return out


# ---------------------------------------------------------------- linear PHS
# p = [n, m, Q (n*n), J (n*n), R (n*n), G (n*m)], H = 0.5 x^T Q x


@njit
def _linear_unpack(p):
    n = int(p[0])
    m = int(p[1])
    o = 2
    Q = p[o:o + n * n].reshape((n, n))
    o += n * n
    J = p[o:o + n * n].reshape((n, n))
    o += n * n
    R = p[o:o + n * n].reshape((n, n))
    o += n * n
    G = p[o:o + n * m].reshape((n, m))
    return Q, J, R, G


@njit
def _matvec(A, v):
    # explicit loop: BLAS dispatch dominates for the tiny matrices used here
    rows, cols = A.shape
    out = np.zeros(rows)
    for i in range(rows):
        acc = 0.0
        for j in range(cols):
            acc += A[i, j] * v[j]
        out[i] = acc
    return out


@njit
def _rmatvec(A, v):
    rows, cols = A.shape
    out = np.zeros(cols)
    for j in range(cols):
        acc = 0.0
        for i in range(rows):
            acc += A[i, j] * v[i]
        out[j] = acc
    return out


@njit
def _dot(a, b):
    acc = 0.0
    for i in range(a.shape[0]):
        acc += a[i] * b[i]
    return acc


@njit
def linear_rhs(x, u, p):
    Q, J, R, G = _linear_unpack(p)
    e = _matvec(Q, x)
    return _matvec(J, e) - _matvec(R, e) + _matvec(G, u)


@njit
def linear_output(x, p):
    Q, J, R, G = _linear_unpack(p)
    return _rmatvec(G, _matvec(Q, x))


@njit
def linear_energy(x, p):
    Q, J, R, G = _linear_unpack(p)
    return 0.5 * _dot(x, _matvec(Q, x))


@njit
def linear_dissipation(x, p):
    Q, J, R, G = _linear_unpack(p)
    e = _matvec(Q, x)
    return _dot(e, _matvec(R, e))


def pack_linear(Q, J, R, G):
    Q, J, R, G = (np.asarray(a, dtype=float) for a in (Q, J, R, G))
    n, m = G.shape
    return np.concatenate([[n, m], Q.ravel(), J.ravel(), R.ravel(), G.ravel()])


# ------------------------------------------------ router of two linear systems
# p = [len(p1), p1..., p2...]; closed loop with u_i from the router and new
# inputs v = (v1, v2) stacked.


@njit
def _router_split(p):
    k = int(p[0])
    return p[1:1 + k], p[1 + k:]


@njit
def router_linear_rhs(x, v, p):
    p1, p2 = _router_split(p)
    n1 = int(p1[0])
    m1 = int(p1[1])
    x1 = x[:n1]
    x2 = x[n1:]
    y1 = linear_output(x1, p1)
    y2 = linear_output(x2, p2)
    s1 = _dot(y1, y1)
    s2 = _dot(y2, y2)
    u1 = -y1 * s2 + v[:m1]
    u2 = y2 * s1 + v[m1:]
    out = np.empty(x.shape[0])
    out[:n1] = linear_rhs(x1, u1, p1)
    out[n1:] = linear_rhs(x2, u2, p2)
    return out


@njit
def router_linear_output(x, p):
    p1, p2 = _router_split(p)
    n1 = int(p1[0])
    y1 = linear_output(x[:n1], p1)
    y2 = linear_output(x[n1:], p2)
    out = np.empty(y1.shape[0] + y2.shape[0])
    out[:y1.shape[0]] = y1
    out[y1.shape[0]:] = y2
    return out


@njit
def router_linear_energy(x, p):
    p1, p2 = _router_split(p)
    n1 = int(p1[0])
    return linear_energy(x[:n1], p1) + linear_energy(x[n1:], p2)


@njit
def router_linear_dissipation(x, p):
    return 0.0


def pack_router(p1, p2):
    return np.concatenate([[len(p1)], p1, p2])


# ------------------------------------------------------------- scalar e^x model


@njit
def scalar_exp_rhs(x, u, p):
    return u.copy()


@njit
def scalar_exp_output(x, p):
    return np.exp(x)


@njit
def scalar_exp_energy(x, p):
    return math.exp(x[0])


@njit
def zero_dissipation(x, p):
    return 0.0


# -------------------------------------------------------------- heat exchanger
# p = [lambda, C1, C2, T_ref]


@njit
def heat_exchanger_rhs(x, u, p):
    lam = p[0]
    t1 = p[3] * math.exp(x[0] / p[1])
    t2 = p[3] * math.exp(x[1] / p[2])
    out = np.empty(2)
    out[0] = lam * (t2 - t1) / (t1 * t2) * t2 + u[0]
    out[1] = lam * (t1 - t2) / (t1 * t2) * t1 + u[1]
    return out


@njit
def heat_exchanger_output(x, p):
    out = np.empty(2)
    out[0] = p[3] * math.exp(x[0] / p[1])
    out[1] = p[3] * math.exp(x[1] / p[2])
    return out


@njit
def heat_exchanger_energy(x, p):
    return p[1] * p[3] * math.exp(x[0] / p[1]) + p[2] * p[3] * math.exp(x[1] / p[2])

