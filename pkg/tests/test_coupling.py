import dataclasses

import numpy as np
import pytest

from phs_lab.core import check_structure, embed_two_port
from phs_lab.coupling import (
    RouterCoupling,
    compose_router,
    direct_feedback_law,
    direct_feedback_system,
    ida_pbc_actuator,
    ida_pbc_closed_loop,
    jd_matrix,
    kick_start,
    matching_residual,
    router_feedback,
    router_power_split,
)
from phs_lab.errors import DimensionError
from phs_lab.integrator import InputLaw, energy_balance, simulate
from phs_lab.models import ActuatorParams, Inductance, MsdParams, make_actuator, make_msd


def lossless(k):
    return make_msd(MsdParams(1.0, k, 0.0))


def test_router_feedback_examples():
    u1, u2 = router_feedback([1.0], [2.0], [0.0], [0.0])
    assert u1.tolist() == [-4.0] and u2.tolist() == [2.0]
    u1, u2 = router_feedback([1.0, 0.0], [0.0, 3.0], [0.0, 0.0], [0.0, 0.0])
    assert u1.tolist() == [-9.0, 0.0] and u2.tolist() == [0.0, 3.0]
    u1, u2 = router_feedback([0.0], [5.0], [0.0], [0.0])
    assert u1.tolist() == [0.0] and u2.tolist() == [0.0]
    with pytest.raises(DimensionError):
        router_feedback([1.0], [1.0], [0.0, 0.0], [0.0])


def test_router_rejects_lossy_components():
    with pytest.raises(ValueError, match="not lossless"):
        compose_router(RouterCoupling(make_msd(), lossless(1.0)))


def test_composed_router_structure(rng):
    c = RouterCoupling(lossless(1.0), lossless(4.0))
    sys = compose_router(c)
    assert sys.port_partition == (1, 1)
    assert sys.state_labels == ("a.q", "a.p", "b.q", "b.p")
    pts = rng.normal(size=(20, 4))
    assert check_structure(sys, pts).ok()
    x = pts[0]
    J = sys.structure(x)
    np.testing.assert_allclose(J, -J.T, atol=1e-15)
    da, db = router_power_split(c, x)
    assert da == pytest.approx(-db)
    assert db >= 0


def test_router_transfers_energy_one_way():
    c = RouterCoupling(lossless(1.0), lossless(4.0))
    sys = compose_router(c)
    x0 = kick_start(sys, [1.0, 0.0, 0.0, 0.0], [1e-3])
    assert x0.tolist() == [1.0, 0.0, 0.0, 1e-3]
    traj = simulate(sys, x0, InputLaw.zero(2), 40.0, 1e-3)
    h2 = np.array([c.sys_b.hamiltonian(x[2:]) for x in traj.states])
    assert np.all(np.diff(h2) >= -1e-12)
    assert h2[-1] > 0.5 * 0.5  # more than half of H1(0) = 0.5
    drift = np.max(np.abs(traj.energies - traj.energies[0])) / traj.energies[0]
    assert drift < 1e-8


def test_router_dead_state_without_kick():
    sys = compose_router(RouterCoupling(lossless(1.0), lossless(4.0)))
    traj = simulate(sys, [1.0, 0.0, 0.0, 0.0], InputLaw.zero(2), 5.0, 1e-2)
    assert np.all(traj.states[:, 2:] == 0.0)


def test_ida_pbc_reference_values():
    design = ida_pbc_actuator(Inductance(1.0, 1.0), 1.0)
    # L(0) = 1, L'(0) = -1: alpha = -phi/4
    assert design.alpha(2.0, 0.0) == -0.5
    assert design.beta(2.0, 0.0, 3.0) == -1.5
    x = np.array([2.0, 0.0, 3.0])
    assert design.h_d(x) == 4.0 + 4.5
    assert design.h_d_magnetic(2.0, 0.0) == 2.0 * design.h_a(2.0, 0.0)
    np.testing.assert_array_equal(design.j_d(x), jd_matrix(-0.5))


def test_ida_pbc_matching(rng):
    design = ida_pbc_actuator(Inductance(1.0, 0.05), 0.1)
    samples = np.column_stack([rng.uniform(-2, 2, 200), rng.uniform(0, 5, 200), rng.uniform(-3, 3, 200)])
    assert matching_residual(design, samples) < 1e-9
    slice_ = samples.copy()
    slice_[:, 0] = 0.0
    assert matching_residual(design, slice_) == 0.0

    def wrong_alpha(phi, q):
        return 1.1 * design.alpha(phi, q)

    perturbed = dataclasses.replace(design, alpha=wrong_alpha, beta=lambda phi, q, p: wrong_alpha(phi, q) * p / 0.1)
    assert matching_residual(perturbed, samples) > 1e-3


def test_ida_pbc_closed_loop_is_lossless():
    design = ida_pbc_actuator(Inductance(1.0, 0.05), 0.1)
    sys = ida_pbc_closed_loop(design)
    x0 = np.array([0.2, 1.0, 0.0])
    traj = simulate(sys, x0, InputLaw.zero(2), 0.5, 2e-4)
    assert abs(energy_balance(traj, sys).balance_residual) < 1e-8 * design.h_d(x0)


def test_direct_feedback_matches_jd_with_original_energy(rng):
    plant = make_actuator(ActuatorParams())
    emb = embed_two_port(plant)
    alpha = 0.7
    law = direct_feedback_law(alpha)
    closed = direct_feedback_system(plant, alpha)
    for _ in range(20):
        x = np.array([rng.uniform(-1, 1), rng.uniform(0.01, 1), rng.uniform(-1, 1)])
        v = rng.normal(size=2)
        y = emb.input_map(x).T @ emb.grad(x)
        u = law(x, y, v)
        lhs = emb.structure(x) @ emb.grad(x) + emb.input_map(x) @ u
        rhs = closed.structure(x) @ closed.grad(x) + closed.input_map(x) @ v
        np.testing.assert_allclose(lhs, rhs, atol=1e-13)


def test_direct_feedback_and_ida_pbc_agree_only_at_zero_flux():
    from phs_lab.scenarios import run_ida_pbc

    report, _ = run_ida_pbc(samples=50, seed=1)
    assert report["direct_vs_ida_gap_zero_flux"] == 0.0
    assert report["direct_vs_ida_gap"] > 1e-3
    assert report["passed"]
