"""Control-line distortion model and predistortion by exact deconvolution.

The line is modeled by its step response

    s(t) = gain * (1 + sum_k a_k exp(-t / tau_k)),

discretized by exact pole mapping (z_k = exp(-dt / tau_k)), which is exact
for piecewise-constant inputs.  Predistortion inverts the resulting
recursive filter sample by sample, so the round trip is exact to round-off.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .pulses import SampledWaveform


class DistortionError(ValueError):
    pass


@dataclass(frozen=True)
class DistortionModel:
    """Sum-of-exponentials settling model: (amplitude, time constant ns) pairs."""

    settling_terms: tuple[tuple[float, float], ...] = ()
    gain: float = 1.0

    def __post_init__(self):
        for a, tau in self.settling_terms:
            if tau <= 0:
                raise DistortionError(f"settling time constant {tau} must be positive")
        if abs(self.instantaneous_gain) < 1e-12 or self.gain == 0:
            raise DistortionError("model is not invertible: 1 + sum(a_k) is zero")

    @property
    def instantaneous_gain(self) -> float:
        return 1.0 + sum(a for a, _ in self.settling_terms)

    def is_identity(self) -> bool:
        return not self.settling_terms and self.gain == 1.0


def _filter_coefficients(model: DistortionModel, dt: float):
    amps = np.array([a for a, _ in model.settling_terms])
    poles = np.array([np.exp(-dt / tau) for _, tau in model.settling_terms])
    return amps, poles


def apply_distortion(model: DistortionModel, waveform: SampledWaveform) -> SampledWaveform:
    """Distort a waveform as the control line would.

    y[n] = gain * (x[n] + sum_k a_k v_k[n]) with
    v_k[n] = z_k v_k[n-1] + (x[n] - x[n-1]), the exact response to the
    zero-order-hold input (x[-1] = 0, line initially settled).
    """
    if model.is_identity():
        return waveform
    x = waveform.samples
    amps, poles = _filter_coefficients(model, waveform.dt)
    v = np.zeros(len(amps))
    y = np.empty_like(x)
    prev = 0.0
    for n, xn in enumerate(x):
        v = poles * v + (xn - prev)
        y[n] = model.gain * (xn + amps @ v)
        prev = xn
    return SampledWaveform(dt=waveform.dt, samples=y, parameterization=waveform.parameterization)


def predistort(model: DistortionModel, ideal: SampledWaveform) -> SampledWaveform:
    """Waveform x such that apply_distortion(model, x) reproduces `ideal`.

    Exact recursive inversion of the discretized filter; each step solves
    y[n] = gain * ((1 + sum a_k) x[n] + history) for x[n].
    """
    if model.is_identity():
        return ideal
    y = ideal.samples
    amps, poles = _filter_coefficients(model, ideal.dt)
    lead = model.instantaneous_gain
    v = np.zeros(len(amps))
    x = np.empty_like(y)
    prev = 0.0
    for n, yn in enumerate(y):
        history = amps @ (poles * v) - amps.sum() * prev
        xn = (yn / model.gain - history) / lead
        v = poles * v + (xn - prev)
        x[n] = xn
        prev = xn
    return SampledWaveform(dt=ideal.dt, samples=x, parameterization=ideal.parameterization)
