import numpy as np
import pytest

from romfcc import monitor as MO
from romfcc import study as ST
from romfcc.errors import ValidationError


class TestConfig:
    def test_defaults_are_desk_scale(self):
        cfg = ST.StudyConfig()
        assert (cfg.runs, cfg.n_train, cfg.n_tune, cfg.n_phase2) == (10, 500, 1000, 1000)
        assert cfg.alpha == 0.05

    def test_paper_scale_constants(self):
        assert ST.PAPER_SCALE == {
            "runs": 50,
            "n_train": 1000,
            "n_tune": 3000,
            "n_phase2": 4000,
        }

    def test_rejects_unknown_method(self):
        with pytest.raises(ValidationError):
            ST.StudyConfig(methods=("RoMFCC", "Nope"))

    def test_rejects_unknown_preset(self):
        with pytest.raises(ValidationError):
            ST.StudyConfig(presets=("S7-OutE-C1",))

    def test_rejects_unknown_keys(self):
        with pytest.raises(ValidationError):
            ST.StudyConfig.from_dict({"runs": 2, "bogus": 1})

    def test_from_dict_coerces_sequences(self):
        cfg = ST.StudyConfig.from_dict(
            {"runs": 1, "methods": ["MFCC"], "presets": ["S0"], "severities": [0, 4]}
        )
        assert cfg.methods == ("MFCC",)
        assert cfg.severities == (0, 4)


class TestFarTdr:
    def test_all_false(self):
        assert ST.far_tdr([False, False], is_oc=False) == 0.0

    def test_all_true(self):
        assert ST.far_tdr([True, True], is_oc=True) == 1.0

    def test_half(self):
        assert ST.far_tdr([True, False, True, False], is_oc=True) == 0.5

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            ST.far_tdr([], is_oc=False)


@pytest.fixture(scope="module")
def tiny_result():
    config = ST.StudyConfig(
        runs=2,
        n_train=80,
        n_tune=100,
        n_phase2=60,
        methods=("MFCC",),
        presets=("S0",),
        oc_types=("OCE",),
        severities=(0, 4),
        base_seed=5,
    )
    return ST.run_study(config)


class TestRunStudy:
    def test_record_grid_complete(self, tiny_result):
        frame = tiny_result.to_frame()
        assert len(frame) == 1 * 1 * 1 * 2 * 2  # methods*presets*oc*sl*runs
        assert set(frame.kind) == {"FAR", "TDR"}
        assert frame.rate.between(0, 1).all()
        assert not tiny_result.errors

    def test_strong_signal_detected_even_at_tiny_scale(self, tiny_result):
        tdr = tiny_result.rate("MFCC", "S0", "OCE", 4)
        far = tiny_result.rate("MFCC", "S0", "OCE", 0)
        assert tdr > far
        assert tdr > 0.9

    def test_deterministic_rerun(self, tiny_result):
        config = tiny_result.config
        again = ST.run_study(config)
        assert again.records == tiny_result.records

    def test_aggregate_shape(self, tiny_result):
        agg = tiny_result.aggregate()
        assert set(agg.columns) >= {"method", "preset", "oc", "sl", "mean_rate", "stderr"}
        assert len(agg) == 2  # (sl=0, sl=4)
        assert (agg["runs"] == 2).all()

    def test_methods_share_generated_data(self, monkeypatch):
        # both methods must be fitted on identical training draws
        seen = []
        original = MO.fit_phase1

        def spy(train, tune, config):
            seen.append((config.flavor, train.values.copy()))
            return original(train, tune, config)

        monkeypatch.setattr(ST._monitor, "fit_phase1", spy)
        config = ST.StudyConfig(
            runs=1,
            n_train=60,
            n_tune=80,
            n_phase2=30,
            methods=("RoMFCC", "MFCC"),
            presets=("S0",),
            oc_types=("OCE",),
            severities=(0,),
            base_seed=9,
            m_imputations=1,
        )
        ST.run_study(config)
        assert len(seen) == 2
        assert seen[0][0] != seen[1][0]
        np.testing.assert_array_equal(seen[0][1], seen[1][1])

    def test_fit_failures_recorded_not_fatal(self, monkeypatch):
        original = MO.fit_phase1

        def boom(train, tune, config):
            if config.flavor == "classical":
                raise RuntimeError("synthetic failure")
            return original(train, tune, config)

        monkeypatch.setattr(ST._monitor, "fit_phase1", boom)
        config = ST.StudyConfig(
            runs=1,
            n_train=60,
            n_tune=80,
            n_phase2=30,
            methods=("RoMFCC", "MFCC"),
            presets=("S0",),
            oc_types=("OCE",),
            severities=(0,),
            base_seed=11,
            m_imputations=1,
        )
        result = ST.run_study(config)
        assert len(result.errors) == 1
        assert result.errors[0]["method"] == "MFCC"
        frame = result.to_frame()
        assert set(frame.method) == {"RoMFCC"}


class TestEmitPlotData:
    def test_files_and_layout(self, tiny_result, tmp_path):
        written = ST.emit_plot_data(tiny_result, tmp_path)
        csvs = [w for w in written if w.endswith(".csv")]
        assert len(csvs) == 1  # one preset x one oc type
        lines = (tmp_path / "S0_OCE.csv").read_text().splitlines()
        assert lines[0] == "method,SL,mean_rate,stderr"
        assert len(lines) == 1 + 1 * 2  # methods x severities
        assert (tmp_path / "manifest.json").exists()

    def test_reemission_byte_identical(self, tiny_result, tmp_path):
        ST.emit_plot_data(tiny_result, tmp_path / "a")
        ST.emit_plot_data(tiny_result, tmp_path / "b")
        for name in ("S0_OCE.csv",):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_manifest_carries_config(self, tiny_result, tmp_path):
        import json

        ST.emit_plot_data(tiny_result, tmp_path)
        doc = json.loads((tmp_path / "manifest.json").read_text())
        assert doc["config"]["runs"] == 2
        assert doc["config"]["presets"] == ["S0"]
        assert "seed_derivation" in doc
