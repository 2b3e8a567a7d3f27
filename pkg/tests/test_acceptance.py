"""Acceptance gate: one test and one PASS/FAIL line per criterion."""

import math
import time
from importlib import resources

import numpy as np

from phs_lab import scenarios
from phs_lab.config import Scenario
from phs_lab.legendre import legendre_involution
from phs_lab.models import R_GAS, ActuatorParams, GasPistonParams, MsdParams, make_msd
from phs_lab.storage import audit_certificate, msd_lmi_storage

from test_legendre import quadratic

CONFIGS = resources.files("phs_lab") / "configs"


def load(name):
    return Scenario.read(str(CONFIGS / name))


def rel(a, b):
    return abs(a - b) / abs(b)


_GAS = {}


def gas_cycle():
    if not _GAS:
        start = time.perf_counter()
        report, _ = scenarios.run_carnot(load("gas_piston_carnot.cfg"))
        _GAS["report"], _GAS["runtime"] = report, time.perf_counter() - start
    return _GAS["report"], _GAS["runtime"]


def test_ac1_gas_piston_carnot_efficiency(ac_line):
    rep, runtime = gas_cycle()
    p = GasPistonParams(c_v=12.471)
    heat_oracle = p.n_mol * R_GAS * 400.0 * math.log(2.0)  # isothermal doubling at 400 K
    ok = (
        rel(rep["heat_hot"], 2305.15) <= 5e-3
        and rel(rep["heat_hot"], heat_oracle) <= 5e-3
        and rel(rep["work_out"], 576.29) <= 1e-2
        and abs(rep["efficiency_measured"] - 0.25) <= 0.01
        and runtime < 10.0
    )
    assert ac_line(
        "AC-1", ok,
        f"heat_hot={rep['heat_hot']:.4f} J (oracle {heat_oracle:.4f}), work_out={rep['work_out']:.4f} J, "
        f"efficiency={rep['efficiency_measured']:.10f}, runtime={runtime:.2f} s",
    )


def test_ac2_stirling_identity(ac_line):
    rep, _ = gas_cycle()
    residual = abs(rep["work_out"] - (rep["heat_hot"] + rep["heat_cold"]))
    ok = residual < 1e-3 * rep["heat_hot"]
    assert ac_line("AC-2", ok, f"|W - (Q_h + Q_c)| = {residual:.3e} (limit {1e-3 * rep['heat_hot']:.3e})")


def test_ac3_actuator_efficiency(ac_line):
    sc = load("actuator_carnot.cfg")
    rep, _ = scenarios.run_carnot(sc)
    p = ActuatorParams(sc.float("model", "L0"), sc.float("model", "a"), sc.float("model", "m"))
    I_a, I_b = sc.float("cycle", "I_a"), sc.float("cycle", "I_b")
    L = p.inductance
    phi_a = L(sc.float("cycle", "q_start")) * I_a
    phi_b = L(sc.float("cycle", "q_hot_end")) * I_a
    e_a = I_a * (phi_b - phi_a)
    err_heat = rel(rep["heat_hot"], e_a)
    err_source = rel(rep["source_energy_hot"], e_a)
    ok = abs(rep["efficiency_measured"] - (1 - I_b / I_a)) <= 0.02 and err_heat < 1e-6 and err_source < 1e-6
    assert ac_line(
        "AC-3", ok,
        f"efficiency={rep['efficiency_measured']:.10f}, E_a={e_a:.10f}, "
        f"rel err heat_hot {err_heat:.2e}, source energy {err_source:.2e}",
    )


def test_ac4_lmi_certificate(rng, ac_line):
    worst_q = 0.0
    for m, k, d in ((1.0, 2.0, 1.0), (2.0, 3.0, 1.0), (0.5, 10.0, 0.2)):
        cert = msd_lmi_storage(m, k, d)
        worst_q = max(worst_q, float(np.max(np.abs(cert.Q - np.diag([k, 1.0 / m])))))
    m, k, d = 1.0, 2.0, 1.0
    cert = msd_lmi_storage(m, k, d)
    audit = audit_certificate(cert, make_msd(MsdParams(m, k, d)), rng, count=100)
    ok = worst_q <= 1e-12 and cert.unique and audit <= scenarios.AUDIT_TOL
    assert ac_line("AC-4", ok, f"max |Q - diag(k, 1/m)| = {worst_q:.1e}, worst violation on 100 runs = {audit:.2e}")


def test_ac5_constant_effort_cycles(rng, ac_line):
    results = [scenarios.audit_constant_effort(model, 20, rng) for model in ("gas_piston", "actuator")]
    deficit = max(max(r["worst_port1_deficit_relative"], r["worst_port2_deficit_relative"]) for r in results)
    port1 = max(r["worst_port1_magnitude_relative"] for r in results)
    ok = all(r["passed"] for r in results) and deficit <= 1e-6 and port1 <= 1e-6
    assert ac_line(
        "AC-5", ok,
        f"40 cycles: worst deficit {deficit:.2e}, worst |port-1 integral| {port1:.2e} (relative to exchanged energy)",
    )


def test_ac6_path_independence(rng, ac_line):
    r = scenarios.audit_path_independence(100, rng)
    ok = r["worst_cycle_integral_relative"] < 1e-8 and r["bounds_error_ac"] < 1e-6 and r["bounds_error_rc"] < 1e-6
    assert ac_line(
        "AC-6", ok,
        f"worst cycle integral {r['worst_cycle_integral_relative']:.2e}, bound errors "
        f"{r['bounds_error_ac']:.2e} / {r['bounds_error_rc']:.2e}",
    )


def test_ac7_legendre_identities(rng, ac_line):
    gas = scenarios.audit_legendre("gas_piston", 100, rng)
    act = scenarios.audit_legendre("actuator", 100, rng)
    quad = quadratic(2.0, 0.7, 1.5)
    inv_q = max(legendre_involution(quad, [x1], [x2]).error for x1, x2 in rng.uniform(-2, 2, size=(10, 2)))
    residual = max(gas["identity_residual_e1"], gas["identity_residual_x2"],
                   act["identity_residual_e1"], act["identity_residual_x2"])
    inv = max(inv_q, act["involution_error"])
    ok = residual < 1e-5 and inv < 1e-8
    assert ac_line("AC-7", ok, f"worst identity residual {residual:.2e}, worst involution error {inv:.2e}")


def test_ac8_router(ac_line):
    sc = load("router.cfg")
    r, _ = scenarios.run_router(sc)
    horizon = sc.float("router", "t_end")
    ok = (
        r["steps"] >= 100_000
        and r["energy_drift_relative"] < 1e-8
        and r["min_h2_rate"] >= -1e-12
        and r["h2_gain_fraction_max"] >= 0.5
        and 0 <= r["time_to_half_transfer"] <= horizon
    )
    assert ac_line(
        "AC-8", ok,
        f"{r['steps']} steps: drift {r['energy_drift_relative']:.2e}, min dH2/dt {r['min_h2_rate']:.2e}, "
        f"H2 gain {r['h2_gain_fraction_max']:.3f} of H1(0), half reached at t={r['time_to_half_transfer']:.2f} s "
        f"(horizon {horizon:g} s)",
    )


def test_ac9_ida_pbc_matching(ac_line):
    r, _ = scenarios.run_ida_pbc(samples=1000)
    ok = r["matching_residual"] < 1e-9 and r["magnetic_doubling_error"] == 0.0
    assert ac_line(
        "AC-9", ok,
        f"matching residual {r['matching_residual']:.2e} on 1000 states, doubling error {r['magnetic_doubling_error']:g}",
    )


def test_ac10_heat_exchanger(ac_line):
    r = scenarios.audit_heat_exchanger()
    ok = (
        r["energy_drift_relative"] < 1e-9
        and r["min_entropy_increment"] >= 0.0
        and r["rate_error_s1"] < 1e-10
        and r["rate_error_s2"] < 1e-10
    )
    assert ac_line(
        "AC-10", ok,
        f"energy drift {r['energy_drift_relative']:.2e}, min entropy increment {r['min_entropy_increment']:.2e}, "
        f"rate errors {r['rate_error_s1']:.1e} / {r['rate_error_s2']:.1e}",
    )


def test_ac11_integrator_order(ac_line):
    r = scenarios.audit_order()
    ratios = [r[k] for k in sorted(r) if k.startswith("ratio_")]
    ok = all(12.8 <= x <= 19.2 for x in ratios)
    assert ac_line("AC-11", ok, "residual ratios on step halving: " + ", ".join(f"{x:.2f}" for x in ratios))
