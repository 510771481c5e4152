"""Laplace-mechanism noise generation and the net PV reference.

The privacy budget epsilon and the query sensitivity fix the Laplace scale
lambda = sensitivity / epsilon. A noise trace is one independent zero-mean
Laplace(lambda) draw per time step; subtracting it from the PV trace yields
the reference the load fleet must follow.

Sampling uses the inverse-CDF transform driven by numpy's PCG64 generator so
regeneration under a fixed seed is bit-for-bit reproducible.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from dpdispatch.traces import Trace

# Tolerance absorbing float round-off in the e^epsilon ratio comparison.
_RATIO_SLACK = 1e-12


@dataclass(frozen=True)
class DPParams:
    """Privacy budget, sensitivity, and the RNG seed that fixes the noise."""

    epsilon: float
    sensitivity: float = 1.0
    delta: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise ValueError("epsilon must be positive and finite")
        if not (self.sensitivity > 0 and math.isfinite(self.sensitivity)):
            raise ValueError("sensitivity must be positive and finite")
        if not (0.0 <= self.delta < 1.0):
            raise ValueError("delta must lie in [0, 1)")
        if not (0 <= int(self.seed) < 2**64):
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def scale(self) -> float:
        return laplace_scale(self)

    @property
    def delta_is_slack(self) -> bool:
        """Laplace gives (epsilon, 0)-DP, so any delta > 0 is pure slack."""
        return self.delta > 0.0


@dataclass(frozen=True)
class NoiseTrace:
    """Per-step privacy noise in kW; regeneration under one seed is exact."""

    values: tuple[float, ...]
    step_seconds: int = 600

    def __post_init__(self):
        if len(self.values) == 0:
            raise ValueError("noise trace must be non-empty")
        if self.step_seconds <= 0:
            raise ValueError("step_seconds must be positive")
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    def __len__(self) -> int:
        return len(self.values)


def laplace_scale(params: DPParams) -> float:
    """Noise scale lambda = sensitivity / epsilon."""
    return params.sensitivity / params.epsilon


def laplace_pdf(x: float, scale: float) -> float:
    """Density (1 / 2*scale) * exp(-|x| / scale) of the zero-mean Laplace."""
    if not (scale > 0):
        raise ValueError("scale must be positive")
    return math.exp(-abs(x) / scale) / (2.0 * scale)


def _inverse_cdf(p, scale):
    # x = -scale * sgn(p - 1/2) * ln(1 - 2|p - 1/2|); log1p keeps precision
    # near the median. p = 0 exactly would hit ln(0); PCG64's random() never
    # returns 1.0 and we guard the 0 endpoint below.
    q = np.asarray(p, dtype=np.float64) - 0.5
    inner = np.maximum(1.0 - 2.0 * np.abs(q), np.finfo(np.float64).tiny)
    return -scale * np.sign(q) * np.log(inner)


def sample_laplace(scale: float, rng: np.random.Generator) -> float:
    """One zero-mean Laplace(scale) draw via the inverse-CDF transform."""
    if not (scale > 0):
        raise ValueError("scale must be positive")
    return float(_inverse_cdf(rng.random(), scale))


def generate_noise_trace(params: DPParams, length: int, step_seconds: int = 600) -> NoiseTrace:
    """i.i.d. Laplace(sensitivity/epsilon) draws, one per step, from params.seed."""
    if length < 1:
        raise ValueError("length must be at least 1")
    rng = np.random.Generator(np.random.PCG64(params.seed))
    values = _inverse_cdf(rng.random(length), laplace_scale(params))
    return NoiseTrace(values=tuple(values.tolist()), step_seconds=step_seconds)


def compute_net_pv(pv: Trace, noise: NoiseTrace) -> Trace:
    """Net reference: PV minus noise, elementwise. No clamping here;
    the dispatcher clamps to the fleet envelope and reports what it cut."""
    if len(pv) != len(noise):
        raise ValueError(f"length mismatch: pv has {len(pv)} steps, noise has {len(noise)}")
    if pv.step_seconds != noise.step_seconds:
        raise ValueError("step size mismatch between PV and noise traces")
    net = tuple(p - n for p, n in zip(pv.values, noise.values))
    return Trace(values=net, unit="kW", step_seconds=pv.step_seconds, start_label=pv.start_label)


def density_ratio_bound_check(params: DPParams, x: float, shift: float) -> bool:
    """True iff pdf(x) / pdf(x - shift) <= e^epsilon at scale sensitivity/epsilon.

    shift is the query perturbation from changing one dataset element, so it
    must not exceed the sensitivity.
    """
    if abs(shift) > params.sensitivity:
        raise ValueError("|shift| exceeds sensitivity (not a neighboring dataset)")
    scale = laplace_scale(params)
    # log of the pdf ratio; compared in log domain to dodge overflow
    log_ratio = (abs(x - shift) - abs(x)) / scale
    return log_ratio <= params.epsilon + _RATIO_SLACK


def mechanism_expected_squared_error(params: DPParams, m: int) -> float:
    """Total expected squared error 2 m sensitivity^2 / epsilon^2 over m queries."""
    if m < 1:
        raise ValueError("m must be at least 1")
    # via the scale: 2 m (sensitivity/epsilon)^2 rounds exactly where the
    # epsilon^2 form loses an ulp (e.g. epsilon = 0.1)
    return 2.0 * m * laplace_scale(params) ** 2


def save_noise_trace(noise: NoiseTrace, path: str | Path) -> None:
    """CSV export with header `step,noise_kw`, repr-precision values."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "noise_kw"])
        for i, v in enumerate(noise.values):
            writer.writerow([i, repr(v)])
