"""Port-Hamiltonian system data model and pointwise evaluation.

A general system is

    xdot = J(x) e - R(x, e) + G(x) u,    e = dH/dx(x),    y = G(x)^T e

with ``J`` skew-symmetric and ``e^T R(x, e) >= 0``.  ``TwoPortPhs`` is the
block-diagonal subclass with a constant, invertible port-1 input matrix;
``embed_two_port`` turns it into a general ``PhsSystem``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DimensionError, NonFiniteError, SingularMatrixError

#: Singularity threshold for condition-number estimates of small Hessians.
COND_LIMIT = 1e12


def fd_step(x):
    return 1e-6 * np.maximum(1.0, np.abs(x))


def fd_gradient(f, x):
    """Central finite-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    h = fd_step(x)
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h[i]
        xm[i] -= h[i]
        g[i] = (f(xp) - f(xm)) / (2.0 * h[i])
    return g


def fd_jacobian(f, x):
    """Central finite-difference Jacobian of a vector function, shape (len(f), len(x))."""
    x = np.asarray(x, dtype=float)
    h = fd_step(x)
    cols = []
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h[i]
        xm[i] -= h[i]
        cols.append((np.asarray(f(xp), dtype=float) - np.asarray(f(xm), dtype=float)) / (2.0 * h[i]))
    return np.column_stack(cols) if cols else np.zeros((0, 0))


def checked_inverse(M, what="matrix"):
    """Explicit inverse with an infinity-norm condition estimate.

    Raises ``SingularMatrixError`` when the matrix is singular or its
    condition number exceeds ``COND_LIMIT``.  Returns ``(inverse, cond)``.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    try:
        inv = np.linalg.inv(M)
    except np.linalg.LinAlgError:
        raise SingularMatrixError(f"{what} is singular", condition=np.inf) from None
    cond = np.linalg.norm(M, np.inf) * np.linalg.norm(inv, np.inf)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularMatrixError(f"{what} is numerically singular (cond={cond:.3g})", condition=cond)
    return inv, cond


@dataclass(frozen=True)
class SystemKernel:
    """Compiled counterparts of a system's evaluators (see ``kernels``)."""

    rhs: Callable
    output: Callable
    energy: Callable
    dissipation: Callable
    params: np.ndarray


@dataclass(frozen=True, eq=False)
class PhsSystem:
    """General input-state-output port-Hamiltonian system.

    ``dissipation`` maps ``(x, e)`` to an n-vector; ``None`` means R = 0.
    ``gradient`` is optional and falls back to central finite differences.
    ``port_partition`` lists the size of each physical port so that
    per-port energy ledgers can be formed.
    """

    n: int
    m: int
    hamiltonian: Callable[[np.ndarray], float]
    structure: Callable[[np.ndarray], np.ndarray]
    input_map: Callable[[np.ndarray], np.ndarray]
    dissipation: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None
    state_labels: tuple = ()
    input_labels: tuple = ()
    output_labels: tuple = ()
    units: dict = field(default_factory=dict)
    port_partition: tuple = ()
    name: str = "phs"
    kernel: Optional[SystemKernel] = None
    linear: Optional[tuple] = None
    two_port: Optional["TwoPortPhs"] = None

    def __post_init__(self):
        if not self.state_labels:
            object.__setattr__(self, "state_labels", tuple(f"x{i + 1}" for i in range(self.n)))
        if not self.input_labels:
            object.__setattr__(self, "input_labels", tuple(f"u{i + 1}" for i in range(self.m)))
        if not self.output_labels:
            object.__setattr__(self, "output_labels", tuple(f"y{i + 1}" for i in range(self.m)))
        if not self.port_partition:
            object.__setattr__(self, "port_partition", (self.m,))
        if sum(self.port_partition) != self.m:
            raise DimensionError(f"port partition {self.port_partition} does not sum to m={self.m}")
        if len(self.state_labels) != self.n:
            raise DimensionError("state_labels must have n entries")

    @property
    def lossless(self):
        return self.dissipation is None

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        if self.gradient is not None:
            return np.asarray(self.gradient(x), dtype=float)
        return fd_gradient(self.hamiltonian, x)

    def port_slices(self):
        out, start = [], 0
        for size in self.port_partition:
            out.append(slice(start, start + size))
            start += size
        return out

    def dissipation_vector(self, x, e):
        if self.dissipation is None:
            return np.zeros(self.n)
        return np.asarray(self.dissipation(x, e), dtype=float)

    def rhs(self, x, u):
        """Unchecked right-hand side, used inside integration loops."""
        e = self.grad(x)
        return self.structure(x) @ e - self.dissipation_vector(x, e) + self.input_map(x) @ u


def _as_vector(v, size, what):
    v = np.asarray(v, dtype=float)
    if v.ndim == 0 and size == 1:
        v = v.reshape(1)
    if v.shape != (size,):
        raise DimensionError(f"{what} has shape {v.shape}, expected ({size},)")
    return v


def _finite_gradient(sys, x):
    e = sys.grad(x)
    if not np.all(np.isfinite(e)):
        raise NonFiniteError(f"non-finite Hamiltonian gradient at x={x}")
    return e


def eval_dynamics(sys: PhsSystem, x, u) -> np.ndarray:
    """Return ``J(x) e - R(x, e) + G(x) u`` with ``e = dH/dx(x)``."""
    x = _as_vector(x, sys.n, "state")
    u = _as_vector(u, sys.m, "input")
    e = _finite_gradient(sys, x)
    return sys.structure(x) @ e - sys.dissipation_vector(x, e) + sys.input_map(x) @ u


def outputs(sys: PhsSystem, x) -> np.ndarray:
    """Return the power-conjugate outputs ``y = G(x)^T dH/dx(x)``."""
    x = _as_vector(x, sys.n, "state")
    e = _finite_gradient(sys, x)
    return sys.input_map(x).T @ e


@dataclass
class StructureReport:
    skew_defect: float
    skew_defect_relative: float
    min_dissipation_power: float
    n_samples: int
    g1_det: Optional[float] = None

    def ok(self, rel_tol=1e-12, power_tol=1e-12):
        if self.skew_defect_relative > rel_tol or self.min_dissipation_power < -power_tol:
            return False
        return self.g1_det is None or self.g1_det != 0.0


def check_structure(sys, samples: Sequence) -> StructureReport:
    """Audit skew-symmetry of J and ``e^T R(x, e) >= 0`` on sample states.

    Accepts a ``PhsSystem`` or a ``TwoPortPhs``; for two-port systems the
    determinant of G1 is reported as well.
    """
    if isinstance(sys, TwoPortPhs):
        sys = embed_two_port(sys)
    samples = [np.asarray(s, dtype=float) for s in samples]
    if not samples:
        raise DimensionError("check_structure needs at least one sample")
    defect = 0.0
    rel = 0.0
    min_power = np.inf
    for x in samples:
        J = np.asarray(sys.structure(x), dtype=float)
        d = float(np.max(np.abs(J + J.T))) if J.size else 0.0
        scale = float(np.max(np.abs(J))) if J.size else 0.0
        defect = max(defect, d)
        if d > 0.0:
            rel = max(rel, d / scale)
        e = sys.grad(x)
        min_power = min(min_power, float(e @ sys.dissipation_vector(x, e)))
    g1_det = None
    if sys.two_port is not None:
        g1_det = float(np.linalg.det(sys.two_port.G1))
    return StructureReport(defect, rel, min_power, len(samples), g1_det)


@dataclass(frozen=True, eq=False)
class TwoPortPhs:
    """Two-port system with block-diagonal structure.

        x1dot = J1 e1 - R1 e1 + G1 u1
        x2dot = J2 e2 - R2 e2 + G2(x) u2

    Block callables take ``(x1, x2)``.  ``R1``/``R2`` may be ``None`` (zero).
    ``gradient`` returns ``(e1, e2)``; ``hessian11`` and ``hessian12`` return
    the partial Hessians d2H/dx1^2 (n1 x n1) and d2H/dx1dx2 (n1 x n2).
    Missing derivatives are synthesized by finite differences.
    """

    n1: int
    n2: int
    m2: int
    hamiltonian: Callable
    J1: Callable
    J2: Callable
    G1: np.ndarray
    G2: Callable
    R1: Optional[Callable] = None
    R2: Optional[Callable] = None
    gradient: Optional[Callable] = None
    hessian11: Optional[Callable] = None
    hessian12: Optional[Callable] = None
    state_labels: tuple = ()
    input_labels: tuple = ()
    output_labels: tuple = ()
    units: dict = field(default_factory=dict)
    name: str = "two_port"
    params: object = None

    def __post_init__(self):
        G1 = np.atleast_2d(np.asarray(self.G1, dtype=float))
        object.__setattr__(self, "G1", G1)
        if G1.shape[0] != self.n1 or G1.shape[0] != G1.shape[1]:
            raise DimensionError(f"G1 must be square {self.n1}x{self.n1}, got {G1.shape}")
        det = np.linalg.det(G1)
        if det == 0.0 or not np.isfinite(det):
            raise SingularMatrixError("G1 must be invertible", condition=np.inf)
        object.__setattr__(self, "_G1_inv", np.linalg.inv(G1))

    @property
    def m1(self):
        return self.n1

    @property
    def n(self):
        return self.n1 + self.n2

    @property
    def m(self):
        return self.m1 + self.m2

    @property
    def G1_inv(self):
        return self._G1_inv

    def split(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise DimensionError(f"state has shape {x.shape}, expected ({self.n},)")
        return x[:self.n1], x[self.n1:]

    def h(self, x1, x2):
        return float(self.hamiltonian(x1, x2))

    def grads(self, x1, x2):
        if self.gradient is not None:
            e1, e2 = self.gradient(x1, x2)
            return np.asarray(e1, dtype=float), np.asarray(e2, dtype=float)
        x = np.concatenate([x1, x2])
        g = fd_gradient(lambda z: self.hamiltonian(z[:self.n1], z[self.n1:]), x)
        return g[:self.n1], g[self.n1:]

    def e1(self, x1, x2):
        return self.grads(x1, x2)[0]

    def hess11(self, x1, x2):
        if self.hessian11 is not None:
            return np.atleast_2d(np.asarray(self.hessian11(x1, x2), dtype=float))
        return fd_jacobian(lambda z: self.e1(z, x2), x1)

    def hess12(self, x1, x2):
        if self.hessian12 is not None:
            return np.atleast_2d(np.asarray(self.hessian12(x1, x2), dtype=float))
        return fd_jacobian(lambda z: self.e1(x1, z), x2)

    def hess11_inverse(self, x1, x2):
        """Inverse of d2H/dx1^2 with the condition-number guard."""
        return checked_inverse(self.hess11(x1, x2), "d2H/dx1^2")

    def r1(self, x1, x2):
        if self.R1 is None:
            return np.zeros((self.n1, self.n1))
        return np.atleast_2d(np.asarray(self.R1(x1, x2), dtype=float))

    def r2(self, x1, x2):
        if self.R2 is None:
            return np.zeros((self.n2, self.n2))
        return np.atleast_2d(np.asarray(self.R2(x1, x2), dtype=float))

    def x2_rate(self, x1, x2, u2):
        """x2dot = J2 e2 - R2 e2 + G2 u2 (independent of u1)."""
        _, e2 = self.grads(x1, x2)
        return (np.asarray(self.J2(x1, x2)) - self.r2(x1, x2)) @ e2 + np.asarray(self.G2(x1, x2)) @ u2

    @property
    def lossless(self):
        return self.R1 is None and self.R2 is None


def embed_two_port(sys2p: TwoPortPhs) -> PhsSystem:
    """Assemble the block-diagonal ``PhsSystem`` equivalent of a two-port system."""
    n1, n2, m1, m2 = sys2p.n1, sys2p.n2, sys2p.m1, sys2p.m2
    n, m = n1 + n2, m1 + m2

    def H(x):
        return sys2p.h(x[:n1], x[n1:])

    def grad(x):
        e1, e2 = sys2p.grads(x[:n1], x[n1:])
        return np.concatenate([e1, e2])

    def J(x):
        out = np.zeros((n, n))
        out[:n1, :n1] = sys2p.J1(x[:n1], x[n1:])
        out[n1:, n1:] = sys2p.J2(x[:n1], x[n1:])
        return out

    def R(x, e):
        x1, x2 = x[:n1], x[n1:]
        return np.concatenate([sys2p.r1(x1, x2) @ e[:n1], sys2p.r2(x1, x2) @ e[n1:]])

    def G(x):
        out = np.zeros((n, m))
        out[:n1, :m1] = sys2p.G1
        out[n1:, m1:] = sys2p.G2(x[:n1], x[n1:])
        return out

    return PhsSystem(
        n=n,
        m=m,
        hamiltonian=H,
        structure=J,
        input_map=G,
        dissipation=None if sys2p.lossless else R,
        gradient=grad,
        state_labels=sys2p.state_labels or tuple(f"x{i + 1}" for i in range(n)),
        input_labels=sys2p.input_labels,
        output_labels=sys2p.output_labels,
        units=dict(sys2p.units),
        port_partition=(m1, m2),
        name=sys2p.name,
        two_port=sys2p,
    )
