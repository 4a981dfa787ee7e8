from pathlib import Path

import numpy as np
import pytest
import yaml

from ser_dsp import experiments as ex
from ser_dsp.experiments import (
    PRESETS,
    BifurcationSpec,
    CalibrationSpec,
    ConfigError,
    ExperimentSpec,
    default_clip_db,
    dump_config,
    load_config,
    run_experiment,
    spec_from_dict,
    spec_to_dict,
    worker_count,
)

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

SMALL = dict(symbol_count=4096, span=64, rolloff=0.05)


def small(**kw):
    return ExperimentSpec(**{**SMALL, **kw})


class TestSpec:
    def test_defaults(self):
        s = ExperimentSpec()
        assert s.symbol_count == 2**15 and s.sps == 2 and s.format == "QAM64"

    @pytest.mark.parametrize(
        "field,value",
        [
            ("format", "QAM8"),
            ("symbol_count", 100),
            ("sps", 1),
            ("rolloff", 2.0),
            ("bwr", 3.0),
            ("method", ("FOO",)),
            ("n_iter", 0),
            ("mu", -1.0),
            ("clip_db", "high"),
            ("sweep_variable", "span"),
            ("grid", ()),
            ("seeds", (-1,)),
            ("length_km", -5.0),
        ],
    )
    def test_error_names_field(self, field, value):
        with pytest.raises(ConfigError, match=f"^{field}:"):
            ExperimentSpec(**{field: value})

    def test_bad_grid_value(self):
        with pytest.raises(ConfigError, match="^grid:"):
            ExperimentSpec(sweep_variable="bwr", grid=(1.0, 5.0))

    def test_presets_valid(self):
        for name, spec in PRESETS.items():
            assert spec.name == name
            assert spec_from_dict(spec_to_dict(spec)) == spec


class TestDefaultClip:
    def test_cic(self):
        assert default_clip_db("CIC", 8, None) == pytest.approx(7.0)
        assert default_clip_db("CIC", 8, 2.0) == pytest.approx(7.0)
        assert default_clip_db("CIC", 8, 1.2) == pytest.approx(6.0)
        assert default_clip_db("CIC", 8, 1.0) == pytest.approx(6.0)

    def test_gd(self):
        assert default_clip_db("GD", 8) == 12.0

    def test_others(self):
        assert default_clip_db("DFR", 8) is None and default_clip_db("RAW", 8) is None


class TestConfigFiles:
    @pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.yaml")), ids=lambda p: p.name)
    def test_shipped_configs_load(self, path):
        spec = load_config(path)
        assert spec.name

    def test_kinds(self):
        assert isinstance(spec_from_dict({"kind": "calibration"}), CalibrationSpec)
        assert isinstance(spec_from_dict({"kind": "bifurcation"}), BifurcationSpec)
        with pytest.raises(ConfigError, match="^kind:"):
            spec_from_dict({"kind": "nope"})

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="^colour: unknown key"):
            spec_from_dict({"colour": "red"})

    def test_scalars_become_tuples(self):
        s = spec_from_dict({"method": "CIC", "grid": 8, "seeds": 3})
        assert s.method == ("CIC",) and s.grid == (8,) and s.seeds == (3,)

    def test_null_strings(self):
        assert spec_from_dict({"osnr_db": "none", "bwr": "null"}).osnr_db is None

    def test_integer_coercion(self):
        assert spec_from_dict({"symbol_count": 4096.0}).symbol_count == 4096
        with pytest.raises(ConfigError, match="^symbol_count:"):
            spec_from_dict({"symbol_count": 4096.5})

    def test_bad_yaml(self, tmp_path):
        p = tmp_path / "x.yaml"
        p.write_text("a: [1,\n")
        with pytest.raises(ConfigError):
            load_config(p)

    def test_top_level_mapping(self):
        with pytest.raises(ConfigError):
            spec_from_dict([1, 2])

    @pytest.mark.parametrize("spec", [small(method=("DFR", "GD"), grid=(6.0, 8.0)), CalibrationSpec(),
                                      BifurcationSpec(coords="delta", x_min=-1.0)])
    def test_echo_round_trip(self, tmp_path, spec):
        dump_config(spec, tmp_path / "e.yaml")
        assert load_config(tmp_path / "e.yaml") == spec
        assert yaml.safe_load(open(tmp_path / "e.yaml"))["kind"] in ("sweep", "calibration", "bifurcation")

    def test_calibration_validation(self):
        with pytest.raises(ConfigError, match="^taps:"):
            CalibrationSpec(taps=32)
        with pytest.raises(ConfigError, match="^inversion:"):
            CalibrationSpec(inversion="X")

    def test_bifurcation_validation(self):
        with pytest.raises(ConfigError, match="^x_min:"):
            BifurcationSpec(x_min=-1.0)
        with pytest.raises(ConfigError, match="^n_iter:"):
            BifurcationSpec(n_iter=10)


class TestWorkers:
    def test_env_cap(self, monkeypatch):
        monkeypatch.setenv("SER_DSP_THREADS", "3")
        assert worker_count(10) == 3 and worker_count(2) == 2

    def test_env_invalid(self, monkeypatch):
        monkeypatch.setenv("SER_DSP_THREADS", "zero")
        with pytest.raises(ConfigError, match="SER_DSP_THREADS"):
            worker_count(4)
        monkeypatch.setenv("SER_DSP_THREADS", "0")
        with pytest.raises(ConfigError):
            worker_count(4)


class TestRun:
    def test_rows_and_order(self, monkeypatch):
        monkeypatch.setenv("SER_DSP_THREADS", "1")
        spec = small(method=("DFR", "RAW"), grid=(10.0, 6.0), seeds=(2, 1))
        rows = run_experiment(spec)
        keys = [(r.coords["grid_index"], r.coords["seed"], r.method) for r in rows]
        assert keys == [
            (0, 2, "DFR"), (0, 2, "RAW"), (0, 1, "DFR"), (0, 1, "RAW"),
            (1, 2, "DFR"), (1, 2, "RAW"), (1, 1, "DFR"), (1, 1, "RAW"),
        ]
        assert all(r.lospr_db == r.coords["sweep_value"] for r in rows)

    def test_byte_identical(self, tmp_path, monkeypatch):
        spec = small(method=("DFR", "CIC", "GD"), n_iter=3, grid=(7.0, 9.0), seeds=(1, 2))
        monkeypatch.setenv("SER_DSP_THREADS", "1")
        run_experiment(spec, tmp_path / "a.csv")
        run_experiment(spec, tmp_path / "b.csv")
        monkeypatch.setenv("SER_DSP_THREADS", "2")
        run_experiment(spec, tmp_path / "c.csv")
        a = (tmp_path / "a.csv").read_bytes()
        assert a == (tmp_path / "b.csv").read_bytes() == (tmp_path / "c.csv").read_bytes()

    def test_sweep_coordinates(self, monkeypatch):
        monkeypatch.setenv("SER_DSP_THREADS", "1")
        rows = run_experiment(small(method=("CIC", "GD"), sweep_variable="n_iter", grid=(2,), gd_iter=5))
        cic, gd = rows
        assert cic.coords["n_iter"] == 2 and gd.coords["n_iter"] == 5
        assert cic.coords["clip_db"] == pytest.approx(7.0) and gd.coords["clip_db"] == 12.0
        assert gd.coords["mu"] == 0.05 and cic.coords["mu"] is None

    def test_enum_methods(self, monkeypatch):
        from ser_dsp.reconstruct import Method

        monkeypatch.setenv("SER_DSP_THREADS", "1")
        rows = run_experiment(small(method=(Method.CIC,), n_iter=2))
        assert rows[0].method == "CIC" and rows[0].coords["clip_db"] == pytest.approx(7.0)

    def test_format_sweep(self, monkeypatch):
        monkeypatch.setenv("SER_DSP_THREADS", "1")
        rows = run_experiment(small(method=("RAW",), sweep_variable="format", grid=("QAM4", "QAM16")))
        assert [r.coords["format"] for r in rows] == ["QAM4", "QAM16"]

    def test_dfr_snr_rises_with_lospr(self, monkeypatch):
        monkeypatch.setenv("SER_DSP_THREADS", "1")
        spec = PRESETS["fig6c"]
        snr = [r.effective_snr_db for r in run_experiment(spec)]
        assert np.all(np.diff(snr) > 0)

    def test_seed_spread(self, monkeypatch):
        monkeypatch.setenv("SER_DSP_THREADS", "1")
        spec = ExperimentSpec(method=("DFR", "RAW"), lospr_db=8.0, seeds=tuple(range(1, 9)))
        rows = run_experiment(spec)
        for m in ("DFR", "RAW"):
            v = np.array([r.effective_snr_db for r in rows if r.method == m])
            assert v.std(ddof=1) / np.sqrt(len(v)) < 0.3


class TestBifurcationRun:
    def test_headers(self):
        rows, header = ex.run_bifurcation(BifurcationSpec(x_min=0.5, x_max=0.5, n_points=1, samples=5))
        assert header == ("b", "terminal_value", "multiplicity") and len(rows) == 1
        _, header = ex.run_bifurcation(BifurcationSpec(coords="delta", x_min=0, x_max=0, n_points=1,
                                                        samples=5, n_iter=100))
        assert header[0] == "s"
