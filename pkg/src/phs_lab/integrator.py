"""Fixed-step RK4 simulation and per-port energy ledgers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import kernels
from .core import PhsSystem
from .errors import BlowUpError, DimensionError, NonFiniteError

BLOWUP_LIMIT = 1e12


@dataclass(frozen=True)
class InputLaw:
    """Input law, either open loop ``u(t)`` or feedback ``u(t, x)``.

    ``kernel`` is an optional ``(law_kernel, params)`` pair with a compiled
    equivalent; it enables the fast simulation path when the system also
    carries a kernel.
    """

    open_loop: Optional[Callable[[float], np.ndarray]] = None
    feedback: Optional[Callable[[float, np.ndarray], np.ndarray]] = None
    kernel: Optional[tuple] = None
    partition: tuple = ()

    def __post_init__(self):
        if (self.open_loop is None) == (self.feedback is None):
            raise ValueError("InputLaw needs exactly one of open_loop or feedback")

    def __call__(self, t, x):
        if self.feedback is not None:
            u = self.feedback(t, x)
        else:
            u = self.open_loop(t)
        return np.atleast_1d(np.asarray(u, dtype=float))

    @classmethod
    def zero(cls, m):
        return cls(open_loop=lambda t: np.zeros(m), kernel=(kernels.zero_law, np.array([float(m)])))

    @classmethod
    def constant(cls, u):
        u = np.atleast_1d(np.asarray(u, dtype=float)).copy()
        return cls(open_loop=lambda t: u, kernel=(kernels.constant_law, u))

    @classmethod
    def from_feedback(cls, fn, partition=()):
        return cls(feedback=fn, partition=tuple(partition))

    @classmethod
    def from_open_loop(cls, fn, partition=()):
        return cls(open_loop=fn, partition=tuple(partition))


@dataclass
class Trajectory:
    """Sampled solution on a uniform grid.

    ``inputs[i]`` is the law evaluated at grid point ``i``.  Where the law
    switches at a grid point (phase boundaries) ``boundary_inputs[i]`` holds
    the value of the law that was active on the preceding step, so the
    ledger quadrature uses one-sided values on each step.
    """

    times: np.ndarray
    states: np.ndarray
    inputs: np.ndarray
    outputs: np.ndarray
    energies: np.ndarray
    step: float
    port_partition: tuple
    dissipation_power: Optional[np.ndarray] = None
    phases: Optional[np.ndarray] = None
    marks: dict = field(default_factory=dict)
    boundary_inputs: dict = field(default_factory=dict)
    state_labels: tuple = ()
    input_labels: tuple = ()
    output_labels: tuple = ()

    def __len__(self):
        return len(self.times)

    @property
    def closure_error(self):
        return float(np.max(np.abs(self.states[-1] - self.states[0])))

    def is_cyclic(self, eps=None):
        if eps is None:
            eps = 1e-6 * (1.0 + float(np.max(np.abs(self.states[0]))))
        return self.closure_error < eps

    def port_slice(self, port):
        """Input coordinates of a 1-based port number."""
        if not 1 <= port <= len(self.port_partition):
            raise DimensionError(f"port {port} not in 1..{len(self.port_partition)}")
        start = sum(self.port_partition[:port - 1])
        return slice(start, start + self.port_partition[port - 1])

    def inputs_right(self):
        """Input values seen from the left end of each step (one-sided at switches)."""
        if not self.boundary_inputs:
            return self.inputs
        out = self.inputs.copy()
        for i, u in self.boundary_inputs.items():
            out[i] = u
        return out


def _check_grid(t_end, step):
    if not step > 0:
        raise ValueError("step must be positive")
    if not t_end >= step * (1.0 - 1e-12):
        raise ValueError("t_end must be at least one step")
    return max(1, int(math.ceil(t_end / step - 1e-9)))


def _can_use_kernel(sys, law):
    return sys.kernel is not None and law.kernel is not None


def simulate(
    sys: PhsSystem,
    x0,
    law: InputLaw,
    t_end: float,
    step: float,
    t0: float = 0.0,
    backend: str = "auto",
    phase: Optional[str] = None,
) -> Trajectory:
    """Integrate with classical RK4 on the grid ``t0 + i*step``.

    The grid has ``ceil(t_end/step)`` steps.  The law is evaluated at every
    RK stage point.  ``backend`` is ``"auto"`` (compiled kernels when both
    system and law provide them), ``"kernel"`` or ``"python"``.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.shape != (sys.n,):
        raise DimensionError(f"x0 has shape {x0.shape}, expected ({sys.n},)")
    if not np.all(np.isfinite(x0)):
        raise NonFiniteError("x0 is not finite")
    nsteps = _check_grid(t_end, step)
    use_kernel = backend == "kernel" or (backend == "auto" and _can_use_kernel(sys, law))
    if use_kernel and not _can_use_kernel(sys, law):
        raise ValueError("kernel backend requested but system or law has no kernel")
    if use_kernel:
        k = sys.kernel
        law_fn, law_p = law.kernel
        states, inputs, outs, energies, diss, status, index = kernels.rk4_drive(
            k.rhs, k.output, k.energy, k.dissipation, law_fn, k.params, law_p,
            x0, float(t0), float(step), nsteps, BLOWUP_LIMIT,
        )
        _raise_status(status, index, t0, step)
    else:
        states, inputs, outs, energies, diss = _drive_python(sys, law, x0, float(t0), float(step), nsteps)
    times = t0 + step * np.arange(nsteps + 1)
    phases = None if phase is None else np.full(nsteps + 1, phase, dtype=object)
    return Trajectory(
        times=times,
        states=states,
        inputs=inputs,
        outputs=outs,
        energies=energies,
        step=float(step),
        port_partition=tuple(sys.port_partition),
        dissipation_power=diss,
        phases=phases,
        state_labels=sys.state_labels,
        input_labels=sys.input_labels,
        output_labels=sys.output_labels,
    )


def _raise_status(status, index, t0, step):
    if status == kernels.STATUS_BLOWUP:
        t = t0 + index * step
        raise BlowUpError(f"state blew up at t={t:.6g}", time=t)
    if status == kernels.STATUS_BAD_INPUT:
        t = t0 + index * step
        raise NonFiniteError(f"input law returned a non-finite value near t={t:.6g}")


def _drive_python(sys, law, x0, t0, h, nsteps):
    n, m = sys.n, sys.m
    states = np.zeros((nsteps + 1, n))
    inputs = np.zeros((nsteps + 1, m))
    outs = np.zeros((nsteps + 1, m))
    energies = np.zeros(nsteps + 1)
    diss = np.zeros(nsteps + 1)
    half = 0.5 * h

    def u_at(t, x):
        u = law(t, x)
        if u.shape != (m,):
            raise DimensionError(f"law returned shape {u.shape}, expected ({m},)")
        if not np.all(np.isfinite(u)):
            raise NonFiniteError(f"input law returned a non-finite value at t={t:.6g}")
        return u

    x = x0.copy()
    for i in range(nsteps + 1):
        t = t0 + i * h
        u = u_at(t, x)
        e = sys.grad(x)
        if not np.all(np.isfinite(e)):
            raise BlowUpError(f"non-finite gradient at t={t:.6g}", time=t)
        Gx = sys.input_map(x)
        rvec = sys.dissipation_vector(x, e)
        states[i] = x
        inputs[i] = u
        outs[i] = Gx.T @ e
        energies[i] = sys.hamiltonian(x)
        diss[i] = e @ rvec
        if i == nsteps:
            break
        k1 = sys.structure(x) @ e - rvec + Gx @ u
        xs = x + half * k1
        k2 = sys.rhs(xs, u_at(t + half, xs))
        xs = x + half * k2
        k3 = sys.rhs(xs, u_at(t + half, xs))
        xs = x + h * k3
        k4 = sys.rhs(xs, u_at(t + h, xs))
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > BLOWUP_LIMIT:
            raise BlowUpError(f"state blew up at t={t + h:.6g}", time=t + h)
    return states, inputs, outs, energies, diss


def concatenate(segments: Sequence[Trajectory]) -> Trajectory:
    """Join consecutive runs that share boundary states into one trajectory.

    The duplicated first sample of each later segment is dropped.  At the
    junction ``inputs`` holds the new law's value and the earlier segment's
    final input is kept in ``boundary_inputs``; the
    segment start time is recorded in ``marks`` under its phase name.
    """
    if not segments:
        raise ValueError("nothing to concatenate")
    first = segments[0]
    parts = {k: [getattr(first, k)] for k in ("times", "states", "inputs", "outputs", "energies")}
    diss = [first.dissipation_power]
    phases = [first.phases if first.phases is not None else np.full(len(first), None, dtype=object)]
    boundary = dict(first.boundary_inputs)
    marks = dict(first.marks)
    if first.phases is not None:
        marks.setdefault(str(first.phases[0]), float(first.times[0]))
    offset = len(first)
    prev = first
    for seg in segments[1:]:
        if abs(seg.step - first.step) > 1e-15 * first.step:
            raise ValueError("segments must share the step size")
        if not np.allclose(seg.states[0], prev.states[-1], rtol=0, atol=0):
            raise ValueError("segments are not contiguous")
        for k in parts:
            parts[k].append(getattr(seg, k)[1:])
        # the junction sample starts the new law; the old one becomes one-sided
        parts["inputs"][-2] = parts["inputs"][-2].copy()
        parts["inputs"][-2][-1] = seg.inputs[0]
        diss.append(seg.dissipation_power[1:])
        ph = seg.phases if seg.phases is not None else np.full(len(seg), None, dtype=object)
        # the switch sample starts the new phase
        phases[-1] = phases[-1].copy()
        phases[-1][-1] = ph[0]
        phases.append(ph[1:])
        boundary[offset - 1] = prev.inputs[-1].copy()
        for i, u in seg.boundary_inputs.items():
            boundary[offset - 1 + i] = u
        if seg.phases is not None:
            marks[str(seg.phases[0])] = float(seg.times[0])
        offset += len(seg) - 1
        prev = seg
    return Trajectory(
        times=np.concatenate(parts["times"]),
        states=np.concatenate(parts["states"]),
        inputs=np.concatenate(parts["inputs"]),
        outputs=np.concatenate(parts["outputs"]),
        energies=np.concatenate(parts["energies"]),
        step=first.step,
        port_partition=first.port_partition,
        dissipation_power=np.concatenate(diss),
        phases=np.concatenate(phases),
        marks=marks,
        boundary_inputs=boundary,
        state_labels=first.state_labels,
        input_labels=first.input_labels,
        output_labels=first.output_labels,
    )


def _coords(traj, port, coords):
    if port is not None and coords is not None:
        raise ValueError("give either port or coords, not both")
    if coords is not None:
        idx = np.atleast_1d(np.asarray(coords, dtype=int))
        m = traj.inputs.shape[1]
        if idx.size == 0 or np.any(idx < 0) or np.any(idx >= m):
            raise DimensionError(f"input coordinates {coords} out of range for m={m}")
        return idx
    if port is None:
        return slice(None)
    return traj.port_slice(port)


def supplied_power(traj: Trajectory, port=None, coords=None):
    """Left and right one-sided power samples ``y^T u`` for the selection."""
    sel = _coords(traj, port, coords)
    y = traj.outputs[:, sel]
    left = np.sum(y * traj.inputs[:, sel], axis=1)
    right = np.sum(y * traj.inputs_right()[:, sel], axis=1)
    return left, right


def supplied_energy_cumulative(traj: Trajectory, port=None, coords=None) -> np.ndarray:
    left, right = supplied_power(traj, port, coords)
    return kernels.trapezoid_cumulative(left, right, traj.step)


def supplied_energy(traj: Trajectory, port=None, coords=None) -> float:
    """Trapezoidal integral of ``y^T u`` over the trajectory.

    ``port`` is a 1-based port number, ``coords`` a list of input
    coordinates; with neither, all ports are summed.
    """
    return float(supplied_energy_cumulative(traj, port, coords)[-1])


@dataclass
class EnergyLedger:
    times: np.ndarray
    port_supplied: list
    dissipated: np.ndarray
    energy_start: float
    energy_end: float
    balance_residual: float

    @property
    def port_totals(self):
        return [float(c[-1]) for c in self.port_supplied]

    @property
    def total_supplied(self):
        return float(sum(self.port_totals))


def energy_balance(traj: Trajectory, sys: PhsSystem) -> EnergyLedger:
    """Per-port supplied energy, cumulative dissipation and balance residual.

    ``residual = H(end) - H(start) - sum(supplied) + dissipated``.  The
    quadrature is trapezoidal, whose leading h^2 error term only involves the
    power derivatives at the two ends; when those vanish (runs starting and
    ending at rest) the residual decays at the fourth order of RK4.
    """
    ports = [supplied_energy_cumulative(traj, port=k + 1) for k in range(len(traj.port_partition))]
    power = traj.dissipation_power
    if power is None:
        power = np.array([float(e @ sys.dissipation_vector(x, e)) for x, e in ((x, sys.grad(x)) for x in traj.states)])
    dissipated = kernels.trapezoid_cumulative(power, power, traj.step)
    h0, h1 = float(traj.energies[0]), float(traj.energies[-1])
    residual = h1 - h0 - sum(float(c[-1]) for c in ports) + float(dissipated[-1])
    return EnergyLedger(traj.times, ports, dissipated, h0, h1, residual)
