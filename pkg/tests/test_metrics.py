import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from czsim.metrics import (
    GateMetricsError,
    VirtualZAngles,
    average_gate_fidelity,
    conditional_phase,
    cz_target,
    default_simplex,
    fit_virtual_z,
    nelder_mead_minimize,
    project_computational,
    subspace_trace_loss,
    wrap_angle,
)


def test_cz_target_canonical():
    u = cz_target(VirtualZAngles(0.0, 0.0))
    assert np.allclose(u, np.diag([1, 1, 1, -1]))
    u = cz_target(VirtualZAngles(0.1, -0.2))
    assert np.allclose(np.abs(np.diag(u)), 1.0)
    assert np.angle(u[3, 3]) == pytest.approx(wrap_angle(0.2 - np.pi))


@given(theta=st.floats(-50.0, 50.0))
@settings(max_examples=50, deadline=None)
def test_wrap_angle_range_and_identity(theta):
    w = wrap_angle(theta)
    assert -np.pi < w <= np.pi
    assert np.exp(1j * w) == pytest.approx(np.exp(1j * theta), abs=1e-9)


def test_wrap_angle_branch_edge():
    assert wrap_angle(np.pi) == pytest.approx(np.pi)
    assert wrap_angle(-np.pi) == pytest.approx(np.pi)


def test_average_gate_fidelity_exact_and_orthogonal():
    target = cz_target(VirtualZAngles(0.0, 0.0))
    assert average_gate_fidelity(target, target) == pytest.approx(1.0)
    # A uniformly depolarized map m = 0 gives the floor 1/(d+1) ... here
    # the formula gives trace terms only, so m = 0 -> 0.
    assert average_gate_fidelity(np.zeros((4, 4)), target) == pytest.approx(0.0)


def test_fidelity_invariant_under_global_phase():
    rng = np.random.default_rng(3)
    target = cz_target(VirtualZAngles(0.3, -0.1))
    m = target + 0.01 * (rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))
    f1 = average_gate_fidelity(m, target)
    f2 = average_gate_fidelity(np.exp(1j * 0.7) * m, target)
    assert f1 == pytest.approx(f2, abs=1e-12)


def test_subspace_trace_loss():
    assert subspace_trace_loss(np.eye(4)) == pytest.approx(0.0)
    assert subspace_trace_loss(np.sqrt(0.5) * np.eye(4)) == pytest.approx(0.5)


def test_nelder_mead_quadratic():
    point, value, converged = nelder_mead_minimize(
        lambda x: (x[0] - 1.0) ** 2 + 2.0 * (x[1] + 0.5) ** 2,
        default_simplex([0.0, 0.0]),
    )
    assert converged
    assert point[0] == pytest.approx(1.0, abs=1e-4)
    assert point[1] == pytest.approx(-0.5, abs=1e-4)
    assert value < 1e-8


def test_nelder_mead_rosenbrock():
    def rosen(x):
        return (1 - x[0]) ** 2 + 100.0 * (x[1] - x[0] ** 2) ** 2

    point, value, _ = nelder_mead_minimize(rosen, default_simplex([-1.2, 1.0]),
                                           diameter_tol=1e-12, value_tol=1e-14)
    assert np.allclose(point, [1.0, 1.0], atol=1e-4)


def test_nelder_mead_bad_simplex():
    with pytest.raises(ValueError):
        nelder_mead_minimize(lambda x: x[0] ** 2, [np.zeros(2), np.ones(2)])
    with pytest.raises(ValueError):
        nelder_mead_minimize(lambda x: np.inf, default_simplex([0.0]))


@given(
    dp=st.floats(-3.0, 3.0),
    dm=st.floats(-3.0, 3.0),
)
@settings(max_examples=20, deadline=None)
def test_fit_virtual_z_recovers_exact_member(dp, dm):
    m = cz_target(VirtualZAngles(dp, dm))
    angles, fidelity = fit_virtual_z(m)
    assert fidelity == pytest.approx(1.0, abs=1e-9)
    # (dp, dm) and (dp + pi, dm + pi) parameterize the same target.
    err_p = wrap_angle(angles.delta_plus - dp)
    err_m = wrap_angle(angles.delta_minus - dm)
    same = abs(err_p) < 1e-4 and abs(err_m) < 1e-4
    shifted = (abs(wrap_angle(err_p - np.pi)) < 1e-4
               and abs(wrap_angle(err_m - np.pi)) < 1e-4)
    assert same or shifted


def test_conditional_phase_of_target_family():
    for dp, dm in [(0.0, 0.0), (1.2, -0.4), (-2.0, 0.9)]:
        m = cz_target(VirtualZAngles(dp, dm))
        # The single-qubit phases cancel in the phase combination.
        assert conditional_phase(m) == pytest.approx(np.pi, abs=1e-12)


def test_conditional_phase_rejects_non_diagonal():
    m = np.zeros((4, 4))
    m[0, 1] = m[1, 0] = m[2, 3] = m[3, 2] = 1.0
    with pytest.raises(GateMetricsError):
        conditional_phase(m)


def test_projection_requires_labels(terms, basis):
    # project_computational needs all four computational dressed labels.
    from czsim.propagator import PropagationResult

    result = PropagationResult(propagator=np.eye(terms.dimension), basis=basis,
                               unitarity_defect=0.0, terms=terms)
    m = project_computational(result)
    assert m.shape == (4, 4)
    assert np.allclose(m, np.eye(4), atol=1e-12)


def test_gate_report_on_calibrated_gate(calibrated_gate):
    _, _, report = calibrated_gate
    assert report.fidelity > 0.9999
    assert report.leakage_from_11 < 1e-4
    assert abs(abs(np.degrees(report.conditional_phase)) - 180.0) < 0.1
    d = report.to_dict()
    assert set(d) >= {"fidelity", "leakage_from_11", "conditional_phase_deg",
                      "fitted_angles_rad", "projected_map_real"}
    # JSON round trip is loadable
    import json

    assert json.loads(report.to_json())["fidelity"] == pytest.approx(report.fidelity)
