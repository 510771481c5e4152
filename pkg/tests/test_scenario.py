import numpy as np
import pytest

from dpdispatch.scenario import (
    BuildingParams,
    ConfigError,
    ScenarioConfig,
    build_simulation,
    config_as_dict,
    load_config,
    synth_pv,
    synth_weather,
)
from dpdispatch.traces import Trace, TraceError, load_trace, save_trace


class TestLoadTrace:
    def _write(self, tmp_path, rows, header="step,pv_kw"):
        path = tmp_path / "trace.csv"
        path.write_text(header + "\n" + "\n".join(rows) + "\n")
        return path

    def test_well_formed(self, tmp_path):
        path = self._write(tmp_path, [f"{i},{i * 0.5}" for i in range(432)])
        trace = load_trace(path, "kW", 600)
        assert len(trace) == 432
        assert trace.values[2] == 1.0

    def test_nan_names_row(self, tmp_path):
        rows = [f"{i},1.0" for i in range(16)] + ["16,nan"] + ["17,1.0"]
        path = self._write(tmp_path, rows)
        with pytest.raises(TraceError, match="row 17"):
            load_trace(path, "kW", 600)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(TraceError):
            load_trace(path, "kW", 600)

    def test_gap_detected(self, tmp_path):
        path = self._write(tmp_path, ["0,1.0", "2,1.0"])
        with pytest.raises(TraceError, match="gap"):
            load_trace(path, "kW", 600)

    def test_missing_file(self, tmp_path):
        with pytest.raises(TraceError, match="not found"):
            load_trace(tmp_path / "nope.csv", "kW", 600)

    def test_round_trip(self, tmp_path):
        trace = Trace(values=(0.1, 1.0 / 3.0, -2.718281828459045), unit="kW", step_seconds=600)
        path = tmp_path / "rt.csv"
        save_trace(trace, path, "pv_kw")
        back = load_trace(path, "kW", 600)
        assert back.values == trace.values


class TestSynthPv:
    def test_clear_sky_zero_at_night(self):
        trace = synth_pv(days=1, step_seconds=600, peak_kw=100.0, cloud_intensity=0.0, seed=1)
        values = np.asarray(trace.values)
        hours = np.arange(len(values)) * 600 / 3600.0
        night = (hours < 6.0) | (hours > 18.0)
        assert (values[night] == 0.0).all()
        # pure half-sine during the day
        day = ~night
        expected = 100.0 * np.sin(np.pi * (hours[day] - 6.0) / 12.0)
        assert values[day] == pytest.approx(expected)

    def test_zero_peak_all_zero(self):
        trace = synth_pv(days=2, step_seconds=600, peak_kw=0.0, cloud_intensity=0.5, seed=1)
        assert all(v == 0.0 for v in trace.values)

    def test_three_days_432_steps(self):
        trace = synth_pv(days=3, step_seconds=600, peak_kw=250.0, cloud_intensity=0.3, seed=1)
        assert len(trace) == 432

    def test_deterministic(self):
        a = synth_pv(3, 600, 250.0, 0.3, seed=9)
        b = synth_pv(3, 600, 250.0, 0.3, seed=9)
        assert a.values == b.values

    def test_cloud_factor_stays_in_unit_interval(self):
        cloudy = synth_pv(3, 600, 250.0, 1.0, seed=4)
        clear = synth_pv(3, 600, 250.0, 0.0, seed=4)
        for c, k in zip(cloudy.values, clear.values):
            assert 0.0 <= c <= k + 1e-12


class TestSynthWeather:
    def test_zero_swing_constant(self):
        trace = synth_weather(days=1, step_seconds=600, mean_c=28.0, swing_c=0.0, seed=3)
        assert all(v == 28.0 for v in trace.values)

    def test_three_days_432_steps(self):
        assert len(synth_weather(3, 600, 30.0, 5.0, seed=3)) == 432

    def test_deterministic(self):
        a = synth_weather(3, 600, 30.0, 5.0, seed=8)
        b = synth_weather(3, 600, 30.0, 5.0, seed=8)
        assert a.values == b.values


class TestConfig:
    def test_defaults(self):
        cfg = load_config(None)
        assert cfg.n_buildings == 100
        assert cfg.horizon_steps == 432
        assert cfg.dp.epsilon == 0.1
        assert cfg.mpc.comfort_min == 22.5

    def test_yaml_sections(self, tmp_path):
        path = tmp_path / "cfg.yaml"
        path.write_text(
            "n_buildings: 10\nseed: 5\ndp:\n  epsilon: 0.5\nmpc:\n  horizon_np: 3\n"
        )
        cfg = load_config(path)
        assert cfg.n_buildings == 10
        assert cfg.dp.epsilon == 0.5
        assert cfg.mpc.horizon_np == 3

    def test_overrides_beat_file(self, tmp_path):
        path = tmp_path / "cfg.yaml"
        path.write_text("seed: 5\ndp:\n  epsilon: 0.5\n")
        cfg = load_config(path, {"epsilon": 1.0, "seed": 77})
        assert cfg.dp.epsilon == 1.0
        assert cfg.seed == 77

    def test_unknown_field_rejected(self, tmp_path):
        path = tmp_path / "cfg.yaml"
        path.write_text("dp:\n  budget: 0.5\n")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "nope.yaml")

    def test_config_dict_is_complete(self):
        d = config_as_dict(load_config(None))
        assert d["dp"]["epsilon"] == 0.1
        assert d["mpc"]["horizon_np"] == 6
        assert d["traces"]["days"] == 3


class TestBuildSimulation:
    def test_fleet_size(self):
        cfg = ScenarioConfig(n_buildings=100)
        models, states, dist, pv = build_simulation(cfg)
        assert len(models) == 100
        assert len(states) == 100
        assert len(dist) == len(pv) == 432

    def test_identical_fleet_without_jitter(self):
        models, _, _, _ = build_simulation(ScenarioConfig(n_buildings=5))
        assert all(m == models[0] for m in models)

    def test_jitter_varies_fleet(self):
        cfg = ScenarioConfig(n_buildings=5, buildings=BuildingParams(jitter=0.1))
        models, _, _, _ = build_simulation(cfg)
        assert len({m.a_d for m in models}) > 1

    def test_init_temps_inside_band(self):
        _, states, _, _ = build_simulation(ScenarioConfig(n_buildings=50))
        for s in states:
            assert 22.5 <= s.temp <= 23.5

    def test_seed_determinism(self):
        a = build_simulation(ScenarioConfig(n_buildings=4, seed=13))
        b = build_simulation(ScenarioConfig(n_buildings=4, seed=13))
        assert [s.temp for s in a[1]] == [s.temp for s in b[1]]
        assert a[3].values == b[3].values
        assert a[2].t_out == b[2].t_out

    def test_csv_override(self, tmp_path):
        pv_path = tmp_path / "pv.csv"
        pv_path.write_text("step,pv_kw\n" + "".join(f"{i},{10.0}\n" for i in range(432)))
        cfg = ScenarioConfig(
            n_buildings=2,
            traces=ScenarioConfig().traces.__class__(pv_csv=str(pv_path)),
        )
        _, _, _, pv = build_simulation(cfg)
        assert all(v == 10.0 for v in pv.values)
