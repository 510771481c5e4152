"""First-order building thermal dynamics and exact zero-order-hold discretization.

One scalar state per building: the indoor temperature. The continuous model is

    dq/dt = a*q + b*u + g_temp*T_out + g_solar*Q_solar

with u the binary HVAC mode (1 = ON). Cooling equipment has b < 0. All rate
coefficients are per hour; discretization takes a step in seconds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

SECONDS_PER_HOUR = 3600.0


@dataclass(frozen=True)
class ContinuousThermalModel:
    a: float  # 1/h, must be < 0 for a stable zone
    b: float  # degC/h per unit ON; < 0 for cooling
    g_temp: float  # 1/h, gain on outdoor temperature
    g_solar: float  # degC/h per kW/m2
    p_rate: float  # kW electric draw while ON

    def __post_init__(self):
        if self.a > 0:
            raise ValueError("a must not be positive (open-loop decay toward ambient)")
        if self.p_rate <= 0:
            raise ValueError("p_rate must be positive")


@dataclass(frozen=True)
class DiscreteThermalModel:
    a_d: float
    b_d: float
    g_d_temp: float
    g_d_solar: float
    dt_seconds: int = 600
    p_rate: float = 5.0

    def __post_init__(self):
        if self.dt_seconds <= 0:
            raise ValueError("dt_seconds must be positive")
        if self.p_rate <= 0:
            raise ValueError("p_rate must be positive")


@dataclass(frozen=True)
class BuildingState:
    temp: float  # degC
    mode: int = 0  # 0 = OFF, 1 = ON

    def __post_init__(self):
        if self.mode not in (0, 1):
            raise ValueError("mode must be 0 or 1")


@dataclass(frozen=True)
class DisturbanceTrace:
    """Outdoor temperature (degC) and solar irradiance (kW/m2) per step."""

    t_out: tuple[float, ...]
    q_solar: tuple[float, ...]
    step_seconds: int = 600

    def __post_init__(self):
        if len(self.t_out) != len(self.q_solar):
            raise ValueError("t_out and q_solar must have equal length")
        if self.step_seconds <= 0:
            raise ValueError("step_seconds must be positive")
        object.__setattr__(self, "t_out", tuple(float(v) for v in self.t_out))
        object.__setattr__(self, "q_solar", tuple(float(v) for v in self.q_solar))

    def __len__(self) -> int:
        return len(self.t_out)


def discretize(model: ContinuousThermalModel, dt_seconds: int = 600) -> DiscreteThermalModel:
    """Exact zero-order-hold discretization of the scalar system.

    a_d = exp(a*dt); each input gain c becomes (a_d - 1)/a * c. The a = 0
    limit (gain * dt) is handled for completeness even though the model type
    requires a < 0.
    """
    if dt_seconds <= 0:
        raise ValueError("dt_seconds must be positive")
    dt_h = dt_seconds / SECONDS_PER_HOUR
    if model.a == 0.0:
        a_d, factor = 1.0, dt_h
    else:
        a_d = math.exp(model.a * dt_h)
        factor = (a_d - 1.0) / model.a
    return DiscreteThermalModel(
        a_d=a_d,
        b_d=factor * model.b,
        g_d_temp=factor * model.g_temp,
        g_d_solar=factor * model.g_solar,
        dt_seconds=dt_seconds,
        p_rate=model.p_rate,
    )


def predict_temp(
    model: DiscreteThermalModel, temp: float, u: int, t_out: float, q_solar: float
) -> float:
    """Next indoor temperature under one discrete step."""
    return model.a_d * temp + model.b_d * u + model.g_d_temp * t_out + model.g_d_solar * q_solar


def step(
    model: DiscreteThermalModel,
    state: BuildingState,
    u: int,
    v: tuple[float, float],
) -> BuildingState:
    """Advance one building one step: x' = a_d x + b_d u + G_d v; mode' = u."""
    if u not in (0, 1):
        raise ValueError("u must be binary")
    t_out, q_solar = v
    return BuildingState(temp=predict_temp(model, state.temp, u, t_out, q_solar), mode=u)


def steady_state_temp(model: DiscreteThermalModel, u: int, v: tuple[float, float]) -> float:
    """Fixed point of step under constant input and disturbance."""
    if abs(model.a_d) >= 1.0:
        raise ValueError("no stable fixed point: |a_d| >= 1")
    t_out, q_solar = v
    drive = model.b_d * u + model.g_d_temp * t_out + model.g_d_solar * q_solar
    return drive / (1.0 - model.a_d)


def simulate_ensemble(
    models: Sequence[DiscreteThermalModel],
    states: Sequence[BuildingState],
    schedule: np.ndarray,
    disturbances: DisturbanceTrace,
) -> tuple[np.ndarray, np.ndarray]:
    """Run every building through a full on/off schedule.

    schedule is an (n_buildings, n_steps) binary matrix. Returns the
    (n_buildings, n_steps) matrix of post-step temperatures and the per-step
    aggregate electric draw sum_j u_j(k) * p_rate_j.
    """
    schedule = np.asarray(schedule)
    n_b, n_k = schedule.shape
    if len(models) != n_b or len(states) != n_b:
        raise ValueError("models/states count does not match schedule rows")
    if len(disturbances) < n_k:
        raise ValueError("disturbance trace shorter than schedule")
    if not np.isin(schedule, (0, 1)).all():
        raise ValueError("schedule entries must be binary")

    a_d = np.array([m.a_d for m in models])
    b_d = np.array([m.b_d for m in models])
    g_t = np.array([m.g_d_temp for m in models])
    g_s = np.array([m.g_d_solar for m in models])
    p_rate = np.array([m.p_rate for m in models])

    temps = np.empty((n_b, n_k))
    x = np.array([s.temp for s in states], dtype=float)
    for k in range(n_k):
        u = schedule[:, k].astype(float)
        x = a_d * x + b_d * u + g_t * disturbances.t_out[k] + g_s * disturbances.q_solar[k]
        temps[:, k] = x
    aggregate_kw = p_rate @ schedule.astype(float)
    return temps, aggregate_kw
