import math

import numpy as np
import pytest

from phs_lab.integrator import InputLaw, simulate
from phs_lab.models import MsdParams, make_msd, make_scalar_exp
from phs_lab.storage import (
    MsdTrials,
    ScalarRampTrials,
    StorageCertificate,
    audit_certificate,
    dissipation_audit,
    is_nsd_2x2,
    msd_lmi_storage,
    quadratic_storage_2x2,
    sampled_storage_bounds,
    scalar_cyclic_storage,
)


def test_msd_certificate_is_diag_k_inverse_m():
    cert = msd_lmi_storage(2.0, 3.0, 1.0)
    np.testing.assert_array_equal(cert.Q, np.diag([3.0, 0.5]))
    assert cert.unique
    assert is_nsd_2x2(cert.lmi_matrix)
    assert cert(np.array([1.0, 2.0])) == pytest.approx(0.5 * (3.0 + 0.5 * 4.0))
    with pytest.raises(ValueError):
        msd_lmi_storage(1.0, 1.0, 0.0)


def test_lossless_oscillator_has_a_family_of_storages():
    # A = [[0, 1], [-1, 0]], y = x2: B^T Q = C pins the second row only
    cert = quadratic_storage_2x2([[0.0, 1.0], [-1.0, 0.0]], [[0.0], [1.0]], [[0.0, 1.0]])
    assert cert.Q is not None
    assert is_nsd_2x2(cert.lmi_matrix, tol=1e-12)


@pytest.mark.parametrize(
    "M, expected",
    [
        ([[-1.0, 0.0], [0.0, -2.0]], True),
        ([[0.0, 0.0], [0.0, 0.0]], True),
        ([[-1.0, 2.0], [2.0, -1.0]], False),
        ([[1.0, 0.0], [0.0, -1.0]], False),
        ([[-1.0, 1.0], [1.0, -1.0]], True),
    ],
)
def test_is_nsd_2x2(M, expected):
    assert is_nsd_2x2(M) is expected
    assert bool(np.all(np.linalg.eigvalsh(np.array(M)) <= 1e-15)) is expected


def test_certificate_audit_separates_good_and_bad(rng):
    sys = make_msd(MsdParams(2.0, 3.0, 1.0))
    good = msd_lmi_storage(2.0, 3.0, 1.0)
    assert audit_certificate(good, sys, rng, count=10) < 1e-8
    assert good.passes(1e-8)
    Q = np.diag([3.0, 1.0])
    bad = StorageCertificate("quadratic", lambda x: 0.5 * float(x @ Q @ x), Q=Q)
    assert audit_certificate(bad, sys, rng, count=10) > 1e-3
    assert not bad.passes(1e-8)


def test_dissipation_audit_on_free_decay():
    sys = make_msd()
    traj = simulate(sys, [1.0, 0.0], InputLaw.zero(1), 5.0, 1e-2)
    # H is a storage; -H is not
    assert dissipation_audit(traj, sys.hamiltonian) <= 1e-12
    assert dissipation_audit(traj, lambda x: -sys.hamiltonian(x)) > 0.1


def test_scalar_bounds_bracket_exp_minus_one():
    est = sampled_storage_bounds(make_scalar_exp(), [1.0], [0.0], ScalarRampTrials())
    assert est.valid
    target = scalar_cyclic_storage(1.0)
    assert target == pytest.approx(math.e - 1)
    assert est.s_ac_lower == pytest.approx(target, abs=1e-6)
    assert est.s_rc_upper == pytest.approx(target, abs=1e-6)
    assert est.s_a_closed == pytest.approx(math.e)
    empty = sampled_storage_bounds(make_scalar_exp(), [0.0], [0.0], ScalarRampTrials())
    assert empty.s_ac_lower == 0.0 and empty.s_rc_upper == 0.0


def test_msd_bounds_bracket_quadratic_storage():
    p = MsdParams(1.0, 2.0, 1.0)
    x = np.array([1.0, 0.0])
    est = sampled_storage_bounds(make_msd(p), x, [0.0, 0.0], MsdTrials(p, slowness=(1, 4)))
    assert est.valid
    storage = msd_lmi_storage(p.m, p.k, p.d)(x)
    assert est.s_ac_lower <= storage + 1e-9
    assert est.s_rc_upper >= storage - 1e-9
    assert est.s_ac_lower > 0.5 * storage


def test_unreachable_endpoint_marks_estimate_invalid():
    est = sampled_storage_bounds(make_scalar_exp(), [1.0], [0.0], ScalarRampTrials(slowness=(1,)), closure_eps=0.0)
    assert not est.valid and "no trial" in est.reason
    assert math.isnan(est.s_ac_lower)
