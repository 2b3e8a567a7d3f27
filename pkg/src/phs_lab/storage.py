"""Storage functions and cyclo-passivity audits.

Covers trajectory audits of the dissipation inequality, the closed-form
quadratic certificate for planar linear systems (mass-spring-damper), the
closed-form storages of the scalar ``xdot = u, y = exp(x)`` model and
sampled brackets on the extractable / required energies.  General
sup/inf computations over all inputs are not attempted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import kernels
from .core import PhsSystem
from .integrator import InputLaw, Trajectory, simulate, supplied_energy, supplied_energy_cumulative
from .models import MsdParams


def dissipation_audit(traj: Trajectory, storage: Callable) -> float:
    """Worst violation of ``S(x(t2)) <= S(x(t1)) + int_{t1}^{t2} y^T u dt``.

    Returns ``max_{t1 < t2} [S(x(t2)) - S(x(t1)) - W(t1, t2)]`` over grid
    points, computed in one pass.  A storage certificate passes when the
    value is below the quadrature tolerance.
    """
    s = np.array([float(storage(x)) for x in traj.states])
    supplied = supplied_energy_cumulative(traj)
    worst = float(kernels.max_pair_increase(s - supplied))
    return 0.0 if worst == -np.inf else worst


# ----------------------------------------------------------- quadratic certificate


def is_nsd_2x2(M, tol=0.0) -> bool:
    """Negative semidefiniteness of a symmetric 2x2 matrix from its trace and determinant."""
    M = np.asarray(M, dtype=float)
    scale = max(1.0, float(np.max(np.abs(M))))
    det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
    return bool(
        M[0, 0] <= tol * scale
        and M[1, 1] <= tol * scale
        and M[0, 0] + M[1, 1] <= tol * scale
        and det >= -tol * scale * scale
    )


@dataclass
class StorageCertificate:
    kind: str
    value_fn: Callable
    Q: Optional[np.ndarray] = None
    audit: Optional[float] = None
    ground_state: Optional[np.ndarray] = None
    unique: Optional[bool] = None
    lmi_matrix: Optional[np.ndarray] = None
    feasible_interval: Optional[tuple] = None

    def __call__(self, x):
        return self.value_fn(x)

    def passes(self, tol):
        return self.audit is not None and self.audit <= tol

    def to_dict(self):
        out = {"kind": self.kind}
        if self.Q is not None:
            out["Q"] = self.Q.tolist()
        if self.lmi_matrix is not None:
            out["lmi_matrix"] = self.lmi_matrix.tolist()
        if self.unique is not None:
            out["unique"] = bool(self.unique)
        if self.audit is not None:
            out["audit"] = float(self.audit)
        if self.ground_state is not None:
            out["ground_state"] = np.asarray(self.ground_state).tolist()
        return dict(sorted(out.items()))


def _interval_from_quadratic(a, b, c, rtol=1e-10):
    """Solution set of ``a t^2 + b t + c >= 0`` as a list of closed intervals."""
    scale = max(abs(a), abs(b), abs(c), 1e-300)
    a, b, c = a / scale, b / scale, c / scale
    if abs(a) < 1e-14:
        if abs(b) < 1e-14:
            return [(-math.inf, math.inf)] if c >= -rtol else []
        root = -c / b
        return [(root, math.inf)] if b > 0 else [(-math.inf, root)]
    disc = b * b - 4 * a * c
    if abs(disc) <= rtol * (b * b + abs(4 * a * c)):
        disc = 0.0
    if a < 0:
        if disc < 0:
            return []
        r = math.sqrt(disc)
        lo, hi = sorted(((-b - r) / (2 * a), (-b + r) / (2 * a)))
        return [(lo, hi)]
    if disc <= 0:
        return [(-math.inf, math.inf)]
    r = math.sqrt(disc)
    lo, hi = sorted(((-b - r) / (2 * a), (-b + r) / (2 * a)))
    return [(-math.inf, lo), (hi, math.inf)]


def _halfline(a0, a1):
    """Set of t with ``a0 + a1 t <= 0``."""
    if a1 == 0:
        return (-math.inf, math.inf) if a0 <= 0 else None
    root = -a0 / a1
    return (-math.inf, root) if a1 > 0 else (root, math.inf)


def quadratic_storage_2x2(A, B, C) -> StorageCertificate:
    """Quadratic storage ``S = x^T Q x / 2`` for a planar linear system.

    Imposes ``B^T Q = C`` (so that y = B^T dS/dx) and ``A^T Q + Q A <= 0``.
    The equality leaves a one-parameter affine family ``Q(t)``; the 2x2
    semidefiniteness condition is then a quadratic inequality in t plus two
    linear ones, solved exactly.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float).reshape(2, -1)
    C = np.asarray(C, dtype=float).reshape(-1, 2)
    # unknowns (q11, q12, q22); B^T Q = C row by row
    rows, rhs = [], []
    for j in range(B.shape[1]):
        b1, b2 = B[:, j]
        rows += [[b1, b2, 0.0], [0.0, b1, b2]]
        rhs += [C[j, 0], C[j, 1]]
    E = np.array(rows)
    f = np.array(rhs)
    part = np.linalg.lstsq(E, f, rcond=None)[0]
    if np.max(np.abs(E @ part - f)) > 1e-12 * max(1.0, np.max(np.abs(f))):
        raise ValueError("output equality constraint B^T Q = C is infeasible")
    _, sv, vt = np.linalg.svd(E)
    rank = int(np.sum(sv > 1e-12 * sv[0]))
    if rank != 2:
        raise ValueError("expected a one-parameter family of candidate Q")
    null = vt[2]
    null = null / null[np.argmax(np.abs(null))]
    part = part - part @ null / (null @ null) * null
    part[np.abs(part) < 1e-15 * max(1.0, np.max(np.abs(part)))] = 0.0

    def Q_of(t):
        q = part + t * null
        return np.array([[q[0], q[1]], [q[1], q[2]]])

    def M_of(t):
        Q = Q_of(t)
        return A.T @ Q + Q @ A

    M0 = M_of(0.0)
    M1 = M_of(1.0) - M0
    # det(M0 + t M1) = qa t^2 + qb t + qc
    qa = M1[0, 0] * M1[1, 1] - M1[0, 1] ** 2
    qb = M0[0, 0] * M1[1, 1] + M1[0, 0] * M0[1, 1] - 2 * M0[0, 1] * M1[0, 1]
    qc = M0[0, 0] * M0[1, 1] - M0[0, 1] ** 2
    feasible = _interval_from_quadratic(qa, qb, qc)
    for i in (0, 1):
        half = _halfline(M0[i, i], M1[i, i])
        if half is None:
            feasible = []
            break
        feasible = [(max(lo, half[0]), min(hi, half[1])) for lo, hi in feasible]
        feasible = [(lo, hi) for lo, hi in feasible if lo <= hi + 1e-12 * max(1.0, abs(lo), abs(hi))]
    if not feasible:
        raise ValueError("no quadratic storage function exists for this system")
    lo, hi = feasible[0]
    unique = len(feasible) == 1 and math.isfinite(lo) and abs(hi - lo) <= 1e-9 * max(1.0, abs(lo))
    if unique:
        t = 0.5 * (lo + hi)
    elif math.isfinite(lo) and math.isfinite(hi):
        t = 0.5 * (lo + hi)
    else:
        t = lo if math.isfinite(lo) else hi if math.isfinite(hi) else 0.0
    Q = Q_of(t)
    M = A.T @ Q + Q @ A
    if not is_nsd_2x2(M, tol=1e-12):
        raise ValueError("selected Q violates the matrix inequality")
    return StorageCertificate(
        kind="quadratic",
        value_fn=lambda x, Q=Q: 0.5 * float(np.asarray(x) @ Q @ np.asarray(x)),
        Q=Q,
        ground_state=np.zeros(2),
        unique=unique,
        lmi_matrix=M,
        feasible_interval=(lo, hi),
    )


def msd_lmi_storage(m: float, k: float, d: float) -> StorageCertificate:
    """Unique quadratic storage of the mass-spring-damper, ``Q = diag(k, 1/m)``."""
    if not (m > 0 and k > 0 and d > 0):
        raise ValueError("mass, stiffness and damping must be positive")
    A = np.array([[0.0, 1.0 / m], [-k, -d / m]])
    B = np.array([[0.0], [1.0]])
    C = np.array([[0.0, 1.0 / m]])
    return quadratic_storage_2x2(A, B, C)


# ------------------------------------------------------------ scalar exp model


def scalar_available_storage(x: float) -> float:
    """Available storage ``exp(x)`` of ``xdot = u, y = exp(x)``."""
    return math.exp(x)


def scalar_cyclic_storage(x: float, x_star: float = 0.0) -> float:
    """``S_ac(x) = S_rc(x) = exp(x) - exp(x_star)`` (lossless, unique storage)."""
    return math.exp(x) - math.exp(x_star)


# -------------------------------------------------------------- sampled bounds


@dataclass
class Trial:
    name: str
    law: InputLaw
    duration: float
    step: float


@dataclass
class StorageEstimate:
    s_ac_lower: float
    s_rc_upper: float
    s_a_closed: Optional[float] = None
    ac_trial: Optional[str] = None
    rc_trial: Optional[str] = None
    valid: bool = True
    reason: str = ""
    ac_values: dict = field(default_factory=dict)
    rc_values: dict = field(default_factory=dict)

    def to_dict(self):
        out = {
            "s_ac_lower": self.s_ac_lower,
            "s_rc_upper": self.s_rc_upper,
            "valid": self.valid,
            "ac_trial": self.ac_trial,
            "rc_trial": self.rc_trial,
        }
        if self.s_a_closed is not None:
            out["s_a_closed"] = self.s_a_closed
        return dict(sorted(out.items()))


SLOWNESS = (1, 2, 4, 8, 16)


@dataclass(frozen=True)
class ScalarRampTrials:
    """Straight-line paths for the scalar model: constant ``u = (b - a)/T``."""

    slowness: tuple = SLOWNESS
    base_duration: float = 1.0
    step: float = 1e-3

    available_storage = staticmethod(lambda x: scalar_available_storage(float(x[0])))

    def trials(self, x_from, x_to):
        delta = float(x_to[0] - x_from[0])
        for s in self.slowness:
            T = self.base_duration * s
            yield Trial(f"ramp_x{s}", InputLaw.constant([delta / T]), T, self.step)


@dataclass(frozen=True)
class MsdTrials:
    """Cubic Hermite paths in q realized by feedback linearization.

    ``u = k q + d p/m + m (qddot_ref - kp e - kd edot)`` with the endpoint
    velocities matched to ``p/m`` at both ends.
    """

    params: MsdParams = MsdParams()
    slowness: tuple = SLOWNESS
    base_duration: float = 2.0
    step: float = 1e-3
    omega: float = 10.0

    available_storage = None

    def trials(self, x_from, x_to):
        m, k, d = self.params.m, self.params.k, self.params.d
        kp, kd = self.omega**2, 2 * self.omega
        qa, va = float(x_from[0]), float(x_from[1]) / m
        qb, vb = float(x_to[0]), float(x_to[1]) / m
        for s in self.slowness:
            T = self.base_duration * s

            def ref(t, T=T):
                z = min(max(t / T, 0.0), 1.0)
                h00, h10 = 2 * z**3 - 3 * z**2 + 1, z**3 - 2 * z**2 + z
                h01, h11 = -2 * z**3 + 3 * z**2, z**3 - z**2
                d00, d10 = (6 * z**2 - 6 * z) / T, 3 * z**2 - 4 * z + 1
                d01, d11 = (-6 * z**2 + 6 * z) / T, 3 * z**2 - 2 * z
                a00, a10 = (12 * z - 6) / T**2, (6 * z - 4) / T
                a01, a11 = (-12 * z + 6) / T**2, (6 * z - 2) / T
                pos = h00 * qa + h10 * T * va + h01 * qb + h11 * T * vb
                vel = d00 * qa + d10 * va + d01 * qb + d11 * vb
                acc = a00 * qa + a10 * va + a01 * qb + a11 * vb
                return pos, vel, acc

            def law(t, x, ref=ref):
                r, rd, rdd = ref(t)
                v = x[1] / m
                return np.array([k * x[0] + d * v + m * (rdd - kp * (x[0] - r) - kd * (v - rd))])

            yield Trial(f"hermite_x{s}", InputLaw.from_feedback(law), T, self.step)


def sampled_storage_bounds(sys: PhsSystem, x, x_star, trial_inputs, closure_eps=None) -> StorageEstimate:
    """Bracket the extractable and required energies with trial motions.

    ``s_ac_lower`` is the largest energy recovered on trials steering x to
    x*, ``s_rc_upper`` the smallest energy spent on trials steering x* to x.
    Trials that miss their endpoint by more than ``closure_eps`` (default
    ``1e-6 (1 + |target|)``) are discarded.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    x_star = np.atleast_1d(np.asarray(x_star, dtype=float))
    avail = getattr(trial_inputs, "available_storage", None)
    s_a = float(avail(x)) if avail is not None else None
    if np.array_equal(x, x_star):
        return StorageEstimate(0.0, 0.0, s_a, "empty", "empty")

    def run(x_from, x_to):
        eps = closure_eps if closure_eps is not None else 1e-6 * (1.0 + float(np.max(np.abs(x_to))))
        values = {}
        for trial in trial_inputs.trials(x_from, x_to):
            traj = simulate(sys, x_from, trial.law, trial.duration, trial.step)
            if float(np.max(np.abs(traj.states[-1] - x_to))) < eps:
                values[trial.name] = supplied_energy(traj)
        return values

    ac = {name: -w for name, w in run(x, x_star).items()}
    rc = run(x_star, x)
    if not ac or not rc:
        missing = "x -> x*" if not ac else "x* -> x"
        return StorageEstimate(math.nan, math.nan, s_a, valid=False, reason=f"no trial reached the endpoint ({missing})")
    ac_name = max(ac, key=ac.get)
    rc_name = min(rc, key=rc.get)
    return StorageEstimate(ac[ac_name], rc[rc_name], s_a, ac_name, rc_name, True, "", ac, rc)


def random_sinusoid_law(rng: np.random.Generator, m: int, terms: int = 3, amplitude: float = 2.0) -> InputLaw:
    """Open-loop input made of a few random sinusoids per channel."""
    amp = rng.uniform(-amplitude, amplitude, size=(terms, m))
    freq = rng.uniform(0.2, 3.0, size=(terms, m))
    phase = rng.uniform(0.0, 2 * math.pi, size=(terms, m))
    packed = np.concatenate([[m, terms], amp.ravel(), freq.ravel(), phase.ravel()])
    return InputLaw(
        open_loop=lambda t: np.sum(amp * np.sin(freq * t + phase), axis=0),
        kernel=(kernels.sinusoid_law, packed),
    )


def audit_certificate(cert: StorageCertificate, sys: PhsSystem, rng: np.random.Generator, count: int = 100,
                      t_end: float = 5.0, step: float = 1e-3, state_scale: float = 2.0) -> float:
    """Worst relative dissipation-inequality violation over random runs.

    Each run starts at a random state and is driven by random sinusoids.
    The violation of every run is divided by ``1 + max S`` along it.  The
    result is stored in ``cert.audit`` and returned.
    """
    worst = -math.inf
    for _ in range(count):
        x0 = rng.uniform(-state_scale, state_scale, size=sys.n)
        traj = simulate(sys, x0, random_sinusoid_law(rng, sys.m), t_end, step)
        scale = 1.0 + max(float(cert(x)) for x in traj.states[:: max(1, len(traj) // 50)])
        worst = max(worst, dissipation_audit(traj, cert) / scale)
    cert.audit = worst
    return worst
