"""Partial Legendre transform of a two-port Hamiltonian in x1.

    H1*(e1, x2) = H(x1, x2) - e1^T x1,   with x1 solving e1 = dH/dx1(x1, x2)

Only the locally unique branch near the supplied guess is computed; a
different guess may land on a different branch for non-convex H.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import TwoPortPhs, checked_inverse, fd_step
from .errors import ConvergenceError

MAX_ITER = 50
MAX_HALVINGS = 30


@dataclass(frozen=True)
class LegendrePoint:
    e1: np.ndarray
    x2: np.ndarray
    x1_solved: np.ndarray
    h_star: float
    iterations: int = 0
    residual: float = 0.0


def _newton(F, jac, x0, tol):
    """Damped Newton: halve the step while the residual norm grows."""
    x = np.array(x0, dtype=float)
    r = F(x)
    rn = float(np.max(np.abs(r)))
    best = (rn, x.copy())
    for it in range(MAX_ITER + 1):
        if rn < tol:
            return x, it, rn
        if it == MAX_ITER:
            break
        inv, _ = checked_inverse(jac(x), "d2H/dx1^2")
        dx = -inv @ r
        lam = 1.0
        for _ in range(MAX_HALVINGS + 1):
            xn = x + lam * dx
            try:
                rn_new = F(xn)
                nn = float(np.max(np.abs(rn_new)))
            except (ValueError, ArithmeticError):
                nn = np.inf
            if np.isfinite(nn) and nn <= rn:
                break
            lam *= 0.5
        else:
            # no decrease found; take the smallest step anyway if it is finite
            if not np.isfinite(nn):
                break
        x, r, rn = xn, rn_new, nn
        if rn < best[0]:
            best = (rn, x.copy())
    raise ConvergenceError(f"Newton did not converge (residual {best[0]:.3g})", best=best[1], residual=best[0])


def partial_legendre(sys2p: TwoPortPhs, e1, x2, x1_guess) -> LegendrePoint:
    """Solve ``dH/dx1(x1, x2) = e1`` for x1 by Newton and evaluate H1*."""
    e1 = np.atleast_1d(np.asarray(e1, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    tol = 1e-10 * (1.0 + float(np.max(np.abs(e1))))
    x1, it, res = _newton(
        lambda z: sys2p.e1(z, x2) - e1,
        lambda z: sys2p.hess11(z, x2),
        np.atleast_1d(np.asarray(x1_guess, dtype=float)),
        tol,
    )
    h_star = sys2p.h(x1, x2) - float(e1 @ x1)
    return LegendrePoint(e1, x2, x1, h_star, it, res)


def h_star(sys2p: TwoPortPhs, e1, x2, x1_guess) -> float:
    return partial_legendre(sys2p, e1, x2, x1_guess).h_star


def verify_legendre_identities(sys2p: TwoPortPhs, pt: LegendrePoint):
    """Finite-difference residuals of ``dH1*/de1 = -x1`` and ``dH1*/dx2 = dH/dx2``.

    Returns ``(r_e1, r_x2)`` as max-norm residuals, each scaled by
    ``max(1, |reference|)``.
    """
    guess = pt.x1_solved
    f = lambda e1, x2: h_star(sys2p, e1, x2, guess)

    he = fd_step(pt.e1)
    d_e1 = np.empty_like(pt.e1)
    for i in range(pt.e1.size):
        ep, em = pt.e1.copy(), pt.e1.copy()
        ep[i] += he[i]
        em[i] -= he[i]
        d_e1[i] = (f(ep, pt.x2) - f(em, pt.x2)) / (2 * he[i])

    hx = fd_step(pt.x2)
    d_x2 = np.empty_like(pt.x2)
    for j in range(pt.x2.size):
        xp, xm = pt.x2.copy(), pt.x2.copy()
        xp[j] += hx[j]
        xm[j] -= hx[j]
        d_x2[j] = (f(pt.e1, xp) - f(pt.e1, xm)) / (2 * hx[j])

    _, e2 = sys2p.grads(pt.x1_solved, pt.x2)
    r1 = np.max(np.abs(d_e1 + pt.x1_solved) / np.maximum(1.0, np.abs(pt.x1_solved)))
    r2 = np.max(np.abs(d_x2 - e2) / np.maximum(1.0, np.abs(e2)))
    return float(r1), float(r2)


@dataclass(frozen=True)
class InvolutionResult:
    x1: np.ndarray
    x1_recovered: np.ndarray
    energy: float
    energy_recovered: float
    e1_recovered: np.ndarray

    @property
    def error(self):
        dx = float(np.max(np.abs(self.x1_recovered - self.x1)))
        dh = abs(self.energy_recovered - self.energy)
        return max(dx / max(1.0, float(np.max(np.abs(self.x1)))), dh / max(1.0, abs(self.energy)))


def legendre_involution(sys2p: TwoPortPhs, x1, x2, e1_guess=None) -> InvolutionResult:
    """Transform twice in x1 and compare with the starting point.

    The second transform treats ``F(e1) = H1*(e1, x2)`` as a function of e1
    alone: it solves ``-dF/de1 = x1`` for e1 by Newton (derivatives of F by
    finite differences, every F evaluation being itself a Newton solve) and
    returns ``F(e1) + e1^T x1``, which should equal ``H(x1, x2)``.
    """
    x1 = np.atleast_1d(np.asarray(x1, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    if e1_guess is None:
        e1_guess = sys2p.e1(x1, x2) * 1.05 + 1e-3
    e = np.atleast_1d(np.asarray(e1_guess, dtype=float))
    guess = x1.copy()

    def F(ev):
        nonlocal guess
        pt = partial_legendre(sys2p, ev, x2, guess)
        guess = pt.x1_solved
        return pt.h_star

    def dF(ev):
        h = 1e-4 * np.maximum(1.0, np.abs(ev))
        g = np.empty_like(ev)
        for i in range(ev.size):
            ep, em = ev.copy(), ev.copy()
            ep[i] += h[i]
            em[i] -= h[i]
            g[i] = (F(ep) - F(em)) / (2 * h[i])
        return g

    def d2F(ev):
        h = 1e-4 * np.maximum(1.0, np.abs(ev))
        cols = []
        for i in range(ev.size):
            ep, em = ev.copy(), ev.copy()
            ep[i] += h[i]
            em[i] -= h[i]
            cols.append((dF(ep) - dF(em)) / (2 * h[i]))
        return np.column_stack(cols)

    tol = 1e-9 * (1.0 + float(np.max(np.abs(x1))))
    e, _, _ = _newton(lambda ev: dF(ev) + x1, d2F, e, tol)
    x1_rec = -dF(e)
    energy_rec = F(e) + float(e @ x1_rec)
    return InvolutionResult(x1, x1_rec, sys2p.h(x1, x2), energy_rec, e)
