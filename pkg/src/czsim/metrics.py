"""Gate metrics: computational-subspace projection, virtual-Z fitting,
fidelity, leakage and conditional phase.

The CZ target family carries two free single-qubit phase angles,

    diag(1, e^{i(D+ + D-)}, e^{i(D+ - D-)}, e^{i(2 D+ - pi)}),

which cost nothing in hardware (virtual Z), so the reported fidelity is
maximized over them with a Nelder-Mead simplex.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .propagator import PropagationResult

COMPUTATIONAL_LABELS = ((0, 0, 0), (0, 0, 1), (1, 0, 0), (1, 0, 1))


class GateMetricsError(ValueError):
    pass


def wrap_angle(theta):
    """Wrap to (-pi, pi]."""
    w = np.mod(np.asarray(theta) + np.pi, 2.0 * np.pi) - np.pi
    w = np.where(w == -np.pi, np.pi, w)
    return float(w) if w.ndim == 0 else w


@dataclass(frozen=True)
class VirtualZAngles:
    delta_plus: float
    delta_minus: float

    def __post_init__(self):
        object.__setattr__(self, "delta_plus", wrap_angle(self.delta_plus))
        object.__setattr__(self, "delta_minus", wrap_angle(self.delta_minus))


@dataclass(frozen=True)
class GateReport:
    """Everything measured about one projected two-qubit gate."""

    projected_map: np.ndarray
    fitted_angles: VirtualZAngles
    fidelity: float
    leakage_from_11: float
    conditional_phase: float
    subspace_trace_loss: float

    def to_dict(self) -> dict:
        return {
            "projected_map_real": np.real(self.projected_map).tolist(),
            "projected_map_imag": np.imag(self.projected_map).tolist(),
            "fitted_angles_rad": {
                "delta_plus": self.fitted_angles.delta_plus,
                "delta_minus": self.fitted_angles.delta_minus,
            },
            "fitted_angles_deg": {
                "delta_plus": np.degrees(self.fitted_angles.delta_plus),
                "delta_minus": np.degrees(self.fitted_angles.delta_minus),
            },
            "fidelity": self.fidelity,
            "leakage_from_11": self.leakage_from_11,
            "conditional_phase_rad": self.conditional_phase,
            "conditional_phase_deg": np.degrees(self.conditional_phase),
            "subspace_trace_loss": self.subspace_trace_loss,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def cz_target(angles: VirtualZAngles) -> np.ndarray:
    """CZ unitary with free single-qubit Z angles, ordering |00>,|01>,|10>,|11>."""
    dp, dm = angles.delta_plus, angles.delta_minus
    return np.diag(
        [1.0, np.exp(1j * (dp + dm)), np.exp(1j * (dp - dm)), np.exp(1j * (2.0 * dp - np.pi))]
    )


def project_computational(result: PropagationResult) -> np.ndarray:
    """Dressed computational block of U: M[i,j] = <dressed_i| U |dressed_j>.

    Rows/columns ordered |000>, |001>, |100>, |101> (coupler in its ground
    state throughout).
    """
    basis = result.basis
    for label in COMPUTATIONAL_LABELS:
        if label not in basis.labels:
            raise GateMetricsError(f"missing dressed label {label}")
    v = np.column_stack([basis.vector(label) for label in COMPUTATIONAL_LABELS])
    return v.conj().T @ result.propagator @ v


def average_gate_fidelity(m: np.ndarray, target: np.ndarray) -> float:
    """Average gate fidelity of a (possibly leaky) 4x4 map against a unitary target."""
    m = np.asarray(m)
    return float(
        (np.real(np.trace(m.conj().T @ m)) + np.abs(np.trace(target.conj().T @ m)) ** 2) / 20.0
    )


def subspace_trace_loss(m: np.ndarray) -> float:
    return float(1.0 - np.real(np.trace(np.asarray(m).conj().T @ m)) / 4.0)


def nelder_mead_minimize(objective, initial_simplex, diameter_tol=1e-10,
                         value_tol=1e-12, max_iterations=None):
    """Nelder-Mead simplex minimization.

    Standard coefficients: reflection 1, expansion 2, contraction 0.5,
    shrink 0.5.  Terminates when the simplex diameter < diameter_tol, the
    value spread < value_tol, or after 500*dim iterations (returning the
    best point with converged=False).

    Returns (point, value, converged).
    """
    simplex = [np.asarray(p, dtype=float).copy() for p in initial_simplex]
    dim = len(simplex[0])
    if len(simplex) != dim + 1:
        raise ValueError("initial simplex needs dim+1 points")
    values = [float(objective(p)) for p in simplex]
    if not all(np.isfinite(values)):
        raise ValueError("objective not finite on the initial simplex")
    if max_iterations is None:
        max_iterations = 500 * dim

    converged = False
    for _ in range(max_iterations):
        order = np.argsort(values)
        simplex = [simplex[i] for i in order]
        values = [values[i] for i in order]

        diameter = max(np.linalg.norm(p - simplex[0]) for p in simplex[1:])
        if diameter < diameter_tol or values[-1] - values[0] < value_tol:
            converged = True
            break

        centroid = np.mean(simplex[:-1], axis=0)
        reflected = centroid + (centroid - simplex[-1])
        f_r = float(objective(reflected))
        if f_r < values[0]:
            expanded = centroid + 2.0 * (centroid - simplex[-1])
            f_e = float(objective(expanded))
            if f_e < f_r:
                simplex[-1], values[-1] = expanded, f_e
            else:
                simplex[-1], values[-1] = reflected, f_r
        elif f_r < values[-2]:
            simplex[-1], values[-1] = reflected, f_r
        else:
            if f_r < values[-1]:
                contracted = centroid + 0.5 * (reflected - centroid)
                f_c = float(objective(contracted))
            else:
                contracted = centroid + 0.5 * (simplex[-1] - centroid)
                f_c = float(objective(contracted))
            if f_c < min(f_r, values[-1]):
                simplex[-1], values[-1] = contracted, f_c
            else:
                best = simplex[0]
                for i in range(1, dim + 1):
                    simplex[i] = best + 0.5 * (simplex[i] - best)
                    values[i] = float(objective(simplex[i]))

    i_best = int(np.argmin(values))
    return simplex[i_best], values[i_best], converged


def default_simplex(x0, scale=0.25):
    x0 = np.asarray(x0, dtype=float)
    simplex = [x0]
    for i in range(len(x0)):
        p = x0.copy()
        p[i] += scale
        simplex.append(p)
    return simplex


def fit_virtual_z(m: np.ndarray) -> tuple[VirtualZAngles, float]:
    """Virtual-Z angles maximizing the fidelity of M against the CZ family.

    Nelder-Mead from the best of the analytic phase guesses and their +-pi
    shifts, which avoids the branch trap of simplex descent on phases.
    """
    m = np.asarray(m)
    guess_plus = 0.5 * (np.angle(m[1, 1]) + np.angle(m[2, 2]))
    guess_minus = 0.5 * (np.angle(m[1, 1]) - np.angle(m[2, 2]))

    def objective(x):
        return 1.0 - average_gate_fidelity(m, cz_target(VirtualZAngles(x[0], x[1])))

    starts = [np.array([guess_plus + dp_shift, guess_minus + dm_shift])
              for dp_shift in (0.0, np.pi) for dm_shift in (0.0, np.pi)]
    x0 = min(starts, key=objective)
    point, value, _ = nelder_mead_minimize(objective, default_simplex(x0))
    return VirtualZAngles(point[0], point[1]), 1.0 - value


def leakage_from_11(result: PropagationResult) -> tuple[float, dict]:
    """Leakage of dressed |101> out of the computational subspace.

    Returns (total, per_level) with per_level the populations of the
    dressed |2, i, 0> states, i in {0, 1, 2}.
    """
    basis = result.basis
    final = result.propagator @ basis.vector((1, 0, 1))
    total = 1.0
    for label in COMPUTATIONAL_LABELS:
        total -= float(np.abs(basis.vector(label).conj() @ final) ** 2)
    total = max(total, 0.0)
    per_level = {}
    for i in range(3):
        label = (2, i, 0)
        if label in basis.labels:
            per_level[label] = float(np.abs(basis.vector(label).conj() @ final) ** 2)
    return total, per_level


def conditional_phase(m: np.ndarray) -> float:
    """phi = arg M00 - arg M01 - arg M10 + arg M11, wrapped to (-pi, pi].

    Requires the gate to be roughly diagonal (|M_ii| > 0.1).
    """
    m = np.asarray(m)
    diag = np.abs(np.diag(m))
    if np.any(diag <= 0.1):
        raise GateMetricsError(f"gate is not phase-like: |diag| = {diag}")
    phi = np.angle(m[0, 0]) - np.angle(m[1, 1]) - np.angle(m[2, 2]) + np.angle(m[3, 3])
    return wrap_angle(phi)


def gate_report(result: PropagationResult) -> GateReport:
    """Project, fit virtual-Z phases, and collect all gate metrics."""
    m = project_computational(result)
    angles, fidelity = fit_virtual_z(m)
    leakage, _ = leakage_from_11(result)
    return GateReport(
        projected_map=m,
        fitted_angles=angles,
        fidelity=fidelity,
        leakage_from_11=leakage,
        conditional_phase=conditional_phase(m),
        subspace_trace_loss=subspace_trace_loss(m),
    )
