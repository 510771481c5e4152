"""Scenario assembly: configuration parsing, synthetic traces, building fleet.

Real station PV/weather data is not bundled; synthetic generators are the
default and CSV ingestion the override, so results are labeled synthetic.
Configuration is a YAML file with nested sections (dp, mpc, buildings,
traces); every value has a default so the toolkit runs with no file at all.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from dpdispatch.dispatch import MPCConfig
from dpdispatch.privacy import DPParams
from dpdispatch.thermal import (
    BuildingState,
    ContinuousThermalModel,
    DiscreteThermalModel,
    DisturbanceTrace,
    discretize,
)
from dpdispatch.traces import Trace, load_trace

SECONDS_PER_DAY = 86400


class ConfigError(ValueError):
    """Bad or inconsistent scenario configuration."""


@dataclass(frozen=True)
class BuildingParams:
    a: float = -0.5  # 1/h
    b: float = -6.0  # degC/h while cooling
    g_temp: float = 0.5  # 1/h; equals -a so the OFF fixed point is T_out
    g_solar: float = 0.2  # degC/h per kW/m2
    p_rate: float = 5.0  # kW
    jitter: float = 0.0  # relative spread applied per building when > 0


@dataclass(frozen=True)
class TraceSources:
    pv_csv: str | None = None
    weather_csv: str | None = None
    days: int = 3
    step_seconds: int = 600
    pv_peak_kw: float = 250.0
    cloud_intensity: float = 0.3
    weather_mean_c: float = 30.0
    weather_swing_c: float = 5.0


@dataclass(frozen=True)
class ScenarioConfig:
    n_buildings: int = 100
    seed: int = 20260826
    dp: DPParams = field(default_factory=lambda: DPParams(epsilon=0.1, sensitivity=1.0, seed=0))
    mpc: MPCConfig = field(default_factory=MPCConfig)
    buildings: BuildingParams = field(default_factory=BuildingParams)
    traces: TraceSources = field(default_factory=TraceSources)

    def __post_init__(self):
        if self.n_buildings < 1:
            raise ConfigError("n_buildings must be at least 1")

    @property
    def horizon_steps(self) -> int:
        return self.traces.days * SECONDS_PER_DAY // self.traces.step_seconds


def _sub_seed(master: int, stream: int) -> int:
    """Stable per-purpose child seed from the master seed."""
    ss = np.random.SeedSequence(entropy=master, spawn_key=(stream,))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


# child-stream indices off the master seed
_STREAM_NOISE = 0
_STREAM_PV = 1
_STREAM_WEATHER = 2
_STREAM_INIT = 3
_STREAM_JITTER = 4


def load_config(path: str | Path | None = None, overrides: dict[str, Any] | None = None) -> ScenarioConfig:
    """Build a ScenarioConfig from a YAML file plus flat overrides.

    Recognized override keys: seed, epsilon, solver-agnostic mpc horizon
    (horizon_np), n_buildings. Overrides beat file values; file values beat
    defaults.
    """
    raw: dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        loaded = yaml.safe_load(path.read_text())
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        raw = loaded
    overrides = overrides or {}

    def section(name: str) -> dict:
        sec = raw.get(name, {})
        if not isinstance(sec, dict):
            raise ConfigError(f"config section {name!r} must be a mapping")
        return dict(sec)

    try:
        top_seed = int(overrides.get("seed", raw.get("seed", ScenarioConfig.seed)))
        dp_kwargs = section("dp")
        if "epsilon" in overrides:
            dp_kwargs["epsilon"] = overrides["epsilon"]
        dp_kwargs.setdefault("epsilon", 0.1)
        dp_kwargs.setdefault("sensitivity", 1.0)
        dp_kwargs.setdefault("seed", _sub_seed(top_seed, _STREAM_NOISE))
        mpc_kwargs = section("mpc")
        if "horizon" in overrides:
            mpc_kwargs["horizon_np"] = overrides["horizon"]
        cfg = ScenarioConfig(
            n_buildings=int(overrides.get("n_buildings", raw.get("n_buildings", 100))),
            seed=top_seed,
            dp=DPParams(**dp_kwargs),
            mpc=MPCConfig(**mpc_kwargs),
            buildings=BuildingParams(**section("buildings")),
            traces=TraceSources(**section("traces")),
        )
    except TypeError as exc:
        raise ConfigError(f"bad configuration field: {exc}") from None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def config_as_dict(cfg: ScenarioConfig) -> dict:
    """Fully resolved configuration, suitable for the run manifest."""
    return {
        "n_buildings": cfg.n_buildings,
        "seed": cfg.seed,
        "dp": {
            "epsilon": cfg.dp.epsilon,
            "sensitivity": cfg.dp.sensitivity,
            "delta": cfg.dp.delta,
            "seed": cfg.dp.seed,
        },
        "mpc": {
            "horizon_np": cfg.mpc.horizon_np,
            "weight_q": cfg.mpc.weight_q,
            "weight_r": cfg.mpc.weight_r,
            "setpoint_xr": cfg.mpc.setpoint_xr,
            "comfort_min": cfg.mpc.comfort_min,
            "comfort_max": cfg.mpc.comfort_max,
        },
        "buildings": vars(cfg.buildings).copy(),
        "traces": vars(cfg.traces).copy(),
    }


def synth_pv(
    days: int,
    step_seconds: int,
    peak_kw: float,
    cloud_intensity: float,
    seed: int,
) -> Trace:
    """Clear-sky half-sine daytime PV with a seeded multiplicative cloud dip.

    Daylight spans 06:00-18:00; nighttime output is exactly zero. The cloud
    process is a smoothed uniform sequence scaled by cloud_intensity so the
    multiplier stays in [1 - cloud_intensity, 1] (and hence in [0, 1]).
    """
    if days < 1:
        raise ValueError("days must be at least 1")
    n = days * SECONDS_PER_DAY // step_seconds
    hours = (np.arange(n) * step_seconds / 3600.0) % 24.0
    daylight = (hours >= 6.0) & (hours <= 18.0)
    clear = np.where(daylight, np.sin(np.pi * (hours - 6.0) / 12.0), 0.0)
    clear = np.clip(clear, 0.0, None) * peak_kw

    rng = np.random.Generator(np.random.PCG64(seed))
    raw = rng.random(n)
    # short moving average keeps cloud cover from flickering step to step
    kernel = np.ones(5) / 5.0
    smooth = np.convolve(raw, kernel, mode="same")
    factor = 1.0 - cloud_intensity * np.clip(smooth, 0.0, 1.0)
    return Trace(values=tuple((clear * factor).tolist()), unit="kW", step_seconds=step_seconds)


def synth_weather(
    days: int,
    step_seconds: int,
    mean_c: float,
    swing_c: float,
    seed: int,
) -> Trace:
    """Sinusoidal diurnal outdoor temperature, hottest mid-afternoon.

    A small seeded perturbation (2% of the swing) roughens the profile;
    swing_c = 0 therefore yields a perfectly constant trace.
    """
    if days < 1:
        raise ValueError("days must be at least 1")
    n = days * SECONDS_PER_DAY // step_seconds
    hours = np.arange(n) * step_seconds / 3600.0
    base = mean_c + swing_c * np.sin(2.0 * np.pi * (hours - 9.0) / 24.0)
    rng = np.random.Generator(np.random.PCG64(seed))
    perturb = 0.02 * swing_c * rng.standard_normal(n)
    return Trace(values=tuple((base + perturb).tolist()), unit="degC", step_seconds=step_seconds)


def _solar_from_pv(pv: Trace, peak_kw: float) -> tuple[float, ...]:
    """Irradiance proxy in kW/m2: PV output normalized to a 1 kW/m2 peak."""
    if peak_kw <= 0:
        return tuple(0.0 for _ in pv.values)
    return tuple(v / peak_kw for v in pv.values)


def build_simulation(
    config: ScenarioConfig,
) -> tuple[list[DiscreteThermalModel], list[BuildingState], DisturbanceTrace, Trace]:
    """Materialize the fleet, initial states, disturbances, and the PV trace."""
    tr = config.traces
    if tr.pv_csv is not None:
        pv = load_trace(tr.pv_csv, "kW", tr.step_seconds)
    else:
        pv = synth_pv(
            tr.days, tr.step_seconds, tr.pv_peak_kw, tr.cloud_intensity,
            _sub_seed(config.seed, _STREAM_PV),
        )
    if tr.weather_csv is not None:
        t_out = load_trace(tr.weather_csv, "degC", tr.step_seconds, value_column="t_out_c")
        q_solar_vals = _load_q_solar(tr.weather_csv, tr.step_seconds)
    else:
        t_out = synth_weather(
            tr.days, tr.step_seconds, tr.weather_mean_c, tr.weather_swing_c,
            _sub_seed(config.seed, _STREAM_WEATHER),
        )
        q_solar_vals = _solar_from_pv(pv, tr.pv_peak_kw)
    if len(t_out) != len(pv):
        raise ConfigError(
            f"trace length mismatch: PV has {len(pv)} steps, weather has {len(t_out)}"
        )
    disturbances = DisturbanceTrace(
        t_out=t_out.values, q_solar=q_solar_vals, step_seconds=tr.step_seconds
    )

    bp = config.buildings
    jitter_rng = np.random.Generator(np.random.PCG64(_sub_seed(config.seed, _STREAM_JITTER)))
    models: list[DiscreteThermalModel] = []
    for _ in range(config.n_buildings):
        scale = 1.0 + bp.jitter * (2.0 * jitter_rng.random() - 1.0) if bp.jitter > 0 else 1.0
        cont = ContinuousThermalModel(
            a=bp.a * scale,
            b=bp.b * scale,
            g_temp=bp.g_temp * scale,
            g_solar=bp.g_solar * scale,
            p_rate=bp.p_rate,
        )
        models.append(discretize(cont, tr.step_seconds))

    init_rng = np.random.Generator(np.random.PCG64(_sub_seed(config.seed, _STREAM_INIT)))
    lo, hi = config.mpc.comfort_min, config.mpc.comfort_max
    init_states = [
        BuildingState(temp=lo + (hi - lo) * init_rng.random(), mode=0)
        for _ in range(config.n_buildings)
    ]
    return models, init_states, disturbances, pv


def _load_q_solar(path: str | Path, step_seconds: int) -> tuple[float, ...]:
    """Pull the q_solar_kw_m2 column from a disturbance CSV."""
    trace = load_trace(path, "kW/m2", step_seconds, value_column="q_solar_kw_m2")
    return trace.values
