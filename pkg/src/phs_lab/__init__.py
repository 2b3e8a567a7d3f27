"""Port-Hamiltonian systems toolkit: thermodynamic cycles, storage functions
and off-diagonal interconnection by feedback.

The core types are :class:`PhsSystem` (general form) and :class:`TwoPortPhs`
(block-diagonal two-port form); :func:`simulate` integrates either with a
fixed-step RK4 and :func:`energy_balance` audits the result.
"""

from ._accel import backend_name
from .carnot import CarnotSchedule, CycleReport, actuator_schedule, gas_piston_schedule, run_cycle
from .constraints import adiabatic_input, constrained_law, isothermal_input, constant_effort_audit
from .core import PhsSystem, TwoPortPhs, check_structure, embed_two_port, eval_dynamics, outputs
from .coupling import (
    IdaPbcDesign,
    RouterCoupling,
    compose_router,
    ida_pbc_actuator,
    matching_residual,
    router_feedback,
)
from .errors import (
    AuditFailure,
    BlowUpError,
    ConfigError,
    ConvergenceError,
    DimensionError,
    DomainError,
    NumericalError,
    PhsError,
    ScheduleError,
    SingularMatrixError,
)
from .integrator import EnergyLedger, InputLaw, Trajectory, energy_balance, simulate, supplied_energy
from .legendre import LegendrePoint, legendre_involution, partial_legendre, verify_legendre_identities
from .models import (
    ActuatorParams,
    GasPistonParams,
    HeatExchangerParams,
    MsdParams,
    make_actuator,
    make_gas_piston,
    make_heat_exchanger,
    make_msd,
    make_scalar_exp,
)
from .storage import (
    StorageCertificate,
    StorageEstimate,
    dissipation_audit,
    msd_lmi_storage,
    sampled_storage_bounds,
)

__version__ = "0.1.0"
