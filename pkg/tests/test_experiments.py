"""Experiment runner tests.

The determinism contract is exercised for real: the same configuration is run
serially and with a process pool, and the CSV artifacts must match byte for
byte. Analysis helpers (transition interpolation, through-origin speed fit,
quadratic loss fit) are unit-tested on synthetic data with known answers.
"""

import dataclasses
import json

import numpy as np
import pytest

import magnon_transport as mt
from magnon_transport import svg
from magnon_transport.experiments import (
    ENSEMBLE_HEADER,
    FIDELITY_HEADER,
    FIELD_HEADER,
    HEATMAP_HEADER,
    SPEED_HEADER,
    SUMMARY_HEADER,
    SWEEP_HEADER,
    TRANSITION_HEADER,
    _record_times,
    config_to_dict,
    write_csv,
)


def _tiny_config(**overrides) -> mt.RunConfig:
    base = mt.RunConfig(
        chain=mt.ChainSpec(61),
        trap=mt.TrapConfig(0.5, 14.0, 30.0),
        protocol=mt.ProtocolSettings(name="sta", t_f=60.0),
        plan=mt.PlanSettings(dt=0.05, record_stride=200),
        sweep=mt.SweepSettings(tf_grid=(20.0, 30.0, 40.0), d_grid=(20.0, 30.0), refine=2),
        disorder=mt.DisorderSettings(amplitudes=(0.0, 0.05), realizations=5, master_seed=42),
        emit_svg=False,
    )
    return dataclasses.replace(base, **overrides)


class TestConfigRoundTrip:
    def test_default_round_trips_bit_exactly(self):
        text = mt.dump_config(mt.RunConfig())
        again = mt.dump_config(mt.parse_config(json.loads(text)))
        assert text == again

    def test_modified_round_trips(self):
        config = _tiny_config(
            trap=mt.TrapConfig(0.5, 14.0, 30.0, omega_f=0.25, truncation_radius=7.0)
        )
        text = mt.dump_config(config)
        assert mt.dump_config(mt.parse_config(json.loads(text))) == text

    def test_save_and_load(self, tmp_path):
        config = _tiny_config()
        path = tmp_path / "run.json"
        mt.save_config(config, path)
        assert mt.load_config(path) == config

    def test_empty_document_gives_defaults(self):
        assert mt.parse_config({}) == mt.RunConfig()

    def test_dict_reflects_fields(self):
        doc = config_to_dict(_tiny_config())
        assert doc["chain"]["n_sites"] == 61
        assert doc["protocol"]["t_f"] == 60.0
        assert doc["disorder"]["master_seed"] == 42


class TestConfigRejection:
    def test_unknown_root_key(self):
        with pytest.raises(mt.ConfigError, match="omega"):
            mt.parse_config({"omega": 0.5})

    def test_unknown_nested_key(self):
        with pytest.raises(mt.ConfigError, match="couplng"):
            mt.parse_config({"chain": {"couplng": 1.0}})

    def test_wrong_section_shape(self):
        with pytest.raises(mt.ConfigError, match="object"):
            mt.parse_config({"chain": [1, 2]})

    def test_bad_value_type(self):
        with pytest.raises(mt.ConfigError):
            mt.parse_config({"chain": {"n_sites": "many"}})

    def test_bad_grid_type(self):
        with pytest.raises(mt.ConfigError, match="array"):
            mt.parse_config({"sweep": {"tf_grid": 100.0}})

    def test_unsorted_grid(self):
        with pytest.raises(mt.ConfigError):
            mt.parse_config({"sweep": {"tf_grid": [100.0, 50.0]}})

    def test_bad_output_dir(self):
        with pytest.raises(mt.ConfigError, match="output_dir"):
            mt.parse_config({"output_dir": 7})

    def test_bad_svg_flag(self):
        with pytest.raises(mt.ConfigError, match="emit_svg"):
            mt.parse_config({"emit_svg": "yes"})

    def test_not_an_object(self):
        with pytest.raises(mt.ConfigError):
            mt.parse_config([1, 2, 3])

    def test_missing_file(self, tmp_path):
        with pytest.raises(mt.ConfigError, match="cannot read"):
            mt.load_config(tmp_path / "absent.json")

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(mt.ConfigError, match="valid JSON"):
            mt.load_config(path)

    def test_settings_validation(self):
        with pytest.raises(ValueError):
            mt.ProtocolSettings(name="bang")
        with pytest.raises(ValueError):
            mt.PlanSettings(dt=0.0)
        with pytest.raises(ValueError):
            mt.SweepSettings(tf_grid=())
        with pytest.raises(ValueError):
            mt.DisorderSettings(amplitudes=(0.1, 0.05))
        with pytest.raises(ValueError):
            mt.DisorderSettings(realizations=0)


class TestAnalysisHelpers:
    def test_transition_interpolates_crossing(self):
        t_star, reason = mt.transition_time([10.0, 20.0, 30.0], [0.1, 0.4, 0.8])
        assert reason is None
        assert t_star == pytest.approx(22.5)

    def test_transition_uses_first_crossing(self):
        t_star, _ = mt.transition_time(
            [10.0, 20.0, 30.0, 40.0], [0.0, 0.5, 0.2, 0.9]
        )
        assert t_star == pytest.approx(20.0)

    def test_transition_already_above(self):
        t_star, reason = mt.transition_time([10.0, 20.0], [0.6, 0.9])
        assert t_star is None
        assert "already above" in reason

    def test_transition_never_crosses(self):
        t_star, reason = mt.transition_time([10.0, 20.0], [0.1, 0.3])
        assert t_star is None
        assert "no 0.5 crossing" in reason

    def test_transition_input_validation(self):
        with pytest.raises(ValueError):
            mt.transition_time([10.0], [0.1])
        with pytest.raises(ValueError):
            mt.transition_time([10.0, 20.0], [0.1])

    def test_speed_fit_recovers_exact_slope(self):
        d = np.array([10.0, 20.0, 40.0, 80.0])
        assert mt.fit_speed_limit(d, d / 0.95) == pytest.approx(0.95, rel=1e-12)

    def test_speed_fit_validation(self):
        with pytest.raises(ValueError):
            mt.fit_speed_limit([], [])
        with pytest.raises(ValueError):
            mt.fit_speed_limit([1.0], [0.0])

    def test_quadratic_fit_exact(self):
        amps = [0.05, 0.1, 0.2]
        fs = [1.0 - 2.0 * a**2 for a in amps]
        c, r2 = mt.quadratic_loss_fit(amps, fs)
        assert c == pytest.approx(2.0, rel=1e-12)
        assert r2 == pytest.approx(1.0, abs=1e-12)

    def test_quadratic_fit_with_deviation(self):
        amps = [0.05, 0.1, 0.2]
        fs = [1.0 - 2.0 * a**2 for a in amps]
        fs[1] -= 0.01
        c, r2 = mt.quadratic_loss_fit(amps, fs)
        assert r2 < 1.0

    def test_quadratic_fit_needs_two_points(self):
        with pytest.raises(ValueError):
            mt.quadratic_loss_fit([0.1], [0.99])

    def test_record_times_mirror_evolve(self, small_chain, small_trap):
        psi0 = mt.gaussian_packet(14.0, small_trap, small_chain)
        protocol = mt.sta_polynomial(small_trap, 1.0)
        plan = mt.PropagationPlan(1.0, step=0.02, record_stride=7)
        records = mt.evolve(psi0, small_chain, small_trap, protocol, plan)
        assert _record_times(1.0, 0.02, 7) == [t for t, _ in records]
        assert _record_times(0.0, 0.02, 7) == [0.0]


class TestCsvWriting:
    def test_floats_round_trip(self, tmp_path):
        path = tmp_path / "x.csv"
        value = 0.1 + 0.2  # classic shortest-repr witness
        write_csv(path, ["a", "b"], [(value, 3)])
        text = path.read_text(encoding="utf-8")
        assert text == "a,b\n0.30000000000000004,3\n"
        assert float(text.splitlines()[1].split(",")[0]) == value

    def test_numpy_scalars_formatted_like_python(self, tmp_path):
        path = tmp_path / "y.csv"
        write_csv(path, ["a", "b"], [(np.float64(0.5), np.int64(7))])
        assert path.read_text(encoding="utf-8") == "a,b\n0.5,7\n"


class TestRunEvolution:
    @staticmethod
    @pytest.fixture(scope="class")
    def result(tmp_path_factory):
        out = tmp_path_factory.mktemp("evolve")
        config = _tiny_config(emit_svg=True)
        summary = mt.run_evolution(config, out, workers=1)
        return config, out, summary

    def test_outputs_exist_with_exact_headers(self, result):
        _, out, _ = result
        heat = (out / "heatmap.csv").read_text(encoding="utf-8").splitlines()
        fid = (out / "fidelity.csv").read_text(encoding="utf-8").splitlines()
        assert heat[0] == ",".join(HEATMAP_HEADER)
        assert fid[0] == ",".join(FIDELITY_HEADER)
        assert (out / "heatmap.svg").exists()
        assert (out / "metadata.json").exists()

    def test_heatmap_covers_grid(self, result):
        config, out, _ = result
        rows = (out / "heatmap.csv").read_text(encoding="utf-8").splitlines()[1:]
        times = _record_times(60.0, 0.05, 200)
        assert len(rows) == len(times) * config.chain.n_sites
        first = rows[0].split(",")
        assert first[0] == "0.0" and first[1] == "1" and first[2] == "0.0"

    def test_final_fidelity_consistent(self, result):
        _, out, summary = result
        fid_rows = (out / "fidelity.csv").read_text(encoding="utf-8").splitlines()[1:]
        # full-precision serialization: parsed values equal the originals
        last = float(fid_rows[-1].split(",")[1])
        assert summary["final_fidelity"] == last
        meta = json.loads((out / "metadata.json").read_text(encoding="utf-8"))
        assert meta["final_fidelity"] == last
        assert meta["command"] == "evolve"
        assert "created_at" in meta and "wall_time_s" in meta
        assert 0.9 < last <= 1.0

    def test_rerun_is_byte_identical(self, result, tmp_path):
        config, out, _ = result
        again = tmp_path / "again"
        mt.run_evolution(config, again, workers=1)
        for name in ("heatmap.csv", "fidelity.csv", "heatmap.svg"):
            assert (again / name).read_bytes() == (out / name).read_bytes()

    def test_svg_has_documented_shape(self, result):
        _, out, _ = result
        text = (out / "heatmap.svg").read_text(encoding="utf-8")
        assert text.startswith("<svg")
        assert "polyline" in text  # trap boundary overlay
        assert "#2ca02c" in text


class TestRunSweep:
    def test_serial_and_parallel_agree_byte_for_byte(self, tmp_path):
        config = _tiny_config()
        serial = tmp_path / "serial"
        parallel = tmp_path / "parallel"
        mt.run_tf_sweep(config, serial, workers=1)
        mt.run_tf_sweep(config, parallel, workers=3)
        assert (serial / "sweep.csv").read_bytes() == (parallel / "sweep.csv").read_bytes()

    def test_rows_sorted_and_complete(self, tmp_path):
        config = _tiny_config()
        out = tmp_path / "sweep"
        result = mt.run_tf_sweep(config, out, workers=1)
        rows = result["rows"]
        assert len(rows) == 2 * len(config.sweep.tf_grid)
        keys = [(r[0], r[1], r[2], r[3]) for r in rows]
        assert keys == sorted(keys)
        lines = (out / "sweep.csv").read_text(encoding="utf-8").splitlines()
        assert lines[0] == ",".join(SWEEP_HEADER)
        assert {r[0] for r in rows} == {"linear", "sta"}


class TestRunMap:
    @staticmethod
    @pytest.fixture(scope="class")
    def result(tmp_path_factory):
        out = tmp_path_factory.mktemp("map")
        config = _tiny_config(
            sweep=mt.SweepSettings(
                tf_grid=(10.0, 25.0), d_grid=(20.0, 30.0), refine=2
            )
        )
        summary = mt.run_dt_map(config, out, workers=1)
        return config, out, summary

    def test_speed_extraction_and_exclusions(self, result):
        _, out, summary = result
        # d = 20 crosses 0.5 inside the grid; d = 30 cannot (t* ~ d at
        # v_b ~ 1) and must be excluded with the documented reason
        assert 0.5 in summary["v_b"]
        assert summary["v_b"][0.5] > 0.0
        excluded = summary["excluded"]["0.5"]
        assert excluded[0][0] == 30.0
        assert "no 0.5 crossing" in excluded[0][1]

    def test_refinement_rows_merged(self, result):
        config, out, _ = result
        lines = (out / "map.csv").read_text(encoding="utf-8").splitlines()
        assert lines[0] == ",".join(SWEEP_HEADER)
        # coarse grid contributes 2 x 2 rows; refinement adds 2 inner points
        # for the one bracketed crossing
        assert len(lines) - 1 == 4 + config.sweep.refine
        tfs_d20 = [float(l.split(",")[2]) for l in lines[1:] if l.split(",")[3] == "20.0"]
        assert tfs_d20 == sorted(tfs_d20)
        assert len(tfs_d20) == 2 + config.sweep.refine

    def test_transition_and_speed_files(self, result):
        _, out, summary = result
        tr = (out / "transitions.csv").read_text(encoding="utf-8").splitlines()
        sp = (out / "speed_limit.csv").read_text(encoding="utf-8").splitlines()
        assert tr[0] == ",".join(TRANSITION_HEADER)
        assert sp[0] == ",".join(SPEED_HEADER)
        assert len(tr) == 2  # header + the single resolved distance
        t_star = float(tr[1].split(",")[2])
        assert 10.0 < t_star < 25.0
        fields = sp[1].split(",")
        assert float(fields[1]) == pytest.approx(summary["v_b"][0.5])
        assert float(fields[2]) == 2.0
        assert float(fields[3]) == 6.0

    def test_metadata_records_exclusions(self, result):
        _, out, _ = result
        meta = json.loads((out / "metadata.json").read_text(encoding="utf-8"))
        assert meta["command"] == "map-dt"
        assert meta["excluded_distances"]["0.5"][0][0] == 30.0
        assert meta["v_group"] == 2.0
        assert meta["v_lieb_robinson"] == 6.0

    def test_serial_and_parallel_agree(self, tmp_path):
        config = _tiny_config(
            sweep=mt.SweepSettings(tf_grid=(10.0, 25.0), d_grid=(20.0,), refine=1)
        )
        serial = tmp_path / "s"
        parallel = tmp_path / "p"
        mt.run_dt_map(config, serial, workers=1)
        mt.run_dt_map(config, parallel, workers=3)
        for name in ("map.csv", "transitions.csv", "speed_limit.csv"):
            assert (serial / name).read_bytes() == (parallel / name).read_bytes()


class TestRunDisorder:
    @staticmethod
    @pytest.fixture(scope="class")
    def result(tmp_path_factory):
        out = tmp_path_factory.mktemp("disorder")
        # 70 realizations split into two fixed chunks, exercising the merge
        config = _tiny_config(
            disorder=mt.DisorderSettings(
                amplitudes=(0.0, 0.05), realizations=70, master_seed=42
            )
        )
        summary = mt.run_disorder_ensemble(config, out, workers=1)
        return config, out, summary

    def test_zero_amplitude_runs_once(self, result):
        _, out, summary = result
        mean, std, count = summary["summary"][0.0]
        assert count == 1
        assert std == 0.0
        assert mean > 0.99

    def test_rows_and_headers(self, result):
        config, out, _ = result
        lines = (out / "ensemble.csv").read_text(encoding="utf-8").splitlines()
        assert lines[0] == ",".join(ENSEMBLE_HEADER)
        assert len(lines) - 1 == 1 + 70
        summary_lines = (out / "summary.csv").read_text(encoding="utf-8").splitlines()
        assert summary_lines[0] == ",".join(SUMMARY_HEADER)
        assert len(summary_lines) - 1 == 2

    def test_seed_column_matches_contract(self, result):
        _, out, _ = result
        lines = (out / "ensemble.csv").read_text(encoding="utf-8").splitlines()[1:]
        for line in (lines[1], lines[-1]):
            delta, realization, seed, _ = line.split(",")
            expected = mt.disorder_stream_seed(
                mt.DisorderSpec(float(delta), 42, int(realization))
            )
            assert int(seed) == expected

    def test_summary_recomputes_from_rows(self, result):
        _, out, _ = result
        rows = [
            line.split(",")
            for line in (out / "ensemble.csv").read_text(encoding="utf-8").splitlines()[1:]
        ]
        fs = np.array([float(r[3]) for r in rows if float(r[0]) == 0.05])
        summary_line = (out / "summary.csv").read_text(encoding="utf-8").splitlines()[2]
        _, mean_s, std_s, count_s = summary_line.split(",")
        assert float(mean_s) == pytest.approx(float(fs.mean()), abs=1e-12)
        assert float(std_s) == pytest.approx(float(fs.std(ddof=1)), abs=1e-12)
        assert int(count_s) == fs.size

    def test_parallel_merge_is_byte_identical(self, result, tmp_path):
        config, out, _ = result
        parallel = tmp_path / "p"
        mt.run_disorder_ensemble(config, parallel, workers=3)
        for name in ("ensemble.csv", "summary.csv"):
            assert (parallel / name).read_bytes() == (out / name).read_bytes()

    def test_hopping_only_changes_results(self, result, tmp_path):
        config, out, _ = result
        other = tmp_path / "h"
        hop_config = _tiny_config(
            disorder=mt.DisorderSettings(
                amplitudes=(0.05,), realizations=3, master_seed=42, hopping_only=True
            )
        )
        mt.run_disorder_ensemble(hop_config, other, workers=1)
        full_lines = (out / "ensemble.csv").read_text(encoding="utf-8").splitlines()
        hop_lines = (other / "ensemble.csv").read_text(encoding="utf-8").splitlines()
        # same realization indices and seeds, different fidelities
        full_first = full_lines[2].split(",")
        hop_first = hop_lines[1].split(",")
        assert full_first[1] == hop_first[1]
        assert full_first[2] == hop_first[2]
        assert full_first[3] != hop_first[3]

    def test_quadratic_fit_reported_with_enough_amplitudes(self, tmp_path):
        config = _tiny_config(
            protocol=mt.ProtocolSettings(name="sta", t_f=60.0),
            disorder=mt.DisorderSettings(
                amplitudes=(0.0, 0.05, 0.1), realizations=4, master_seed=7
            ),
        )
        out = tmp_path / "fit"
        summary = mt.run_disorder_ensemble(config, out, workers=1)
        assert "quadratic_coefficient" in summary["fit"]
        assert "r_squared" in summary["fit"]
        meta = json.loads((out / "metadata.json").read_text(encoding="utf-8"))
        assert meta["quadratic_coefficient"] == summary["fit"]["quadratic_coefficient"]


class TestRunFieldDump:
    def test_samples_match_field_profile(self, tmp_path):
        config = _tiny_config()
        out = tmp_path / "field"
        mt.run_field_dump(config, out, workers=1)
        lines = (out / "field.csv").read_text(encoding="utf-8").splitlines()
        assert lines[0] == ",".join(FIELD_HEADER)
        times = _record_times(60.0, 0.05, 200)
        n = config.chain.n_sites
        assert len(lines) - 1 == len(times) * n
        protocol = mt.sta_polynomial(config.trap, 60.0)
        expected = mt.field_profile(times[1], protocol, config.trap, config.chain)
        row = lines[1 + n + 10].split(",")  # second time block, site 11
        assert float(row[0]) == pytest.approx(times[1])
        assert int(row[1]) == 11
        assert float(row[3]) == expected[10]  # full-precision round trip


class TestSvg:
    def test_color_scale_endpoints(self):
        assert svg.color_of(-1.0) == "#2166ac"
        assert svg.color_of(0.0) == "#ffffff"
        assert svg.color_of(1.0) == "#b2182b"
        assert svg.color_of(-2.0) == svg.color_of(-1.0)
        assert svg.color_of(2.0) == svg.color_of(1.0)

    def test_render_minimal_heatmap(self, tmp_path):
        path = tmp_path / "mini.svg"
        times = np.array([0.0, 1.0, 2.0])
        positions = np.array([0.0, 1.0, 2.0, 3.0])
        values = np.linspace(-1.0, 1.0, 12).reshape(3, 4)
        svg.render_heatmap(
            path, times, positions, values,
            boundary_center=np.array([0.5, 1.5, 2.5]), boundary_radius=1.0,
        )
        text = path.read_text(encoding="utf-8")
        assert text.startswith("<svg")
        assert text.count("<polyline") == 2

    def test_shape_validation(self, tmp_path):
        with pytest.raises(ValueError):
            svg.render_heatmap(
                tmp_path / "bad.svg",
                np.array([0.0, 1.0]),
                np.array([0.0, 1.0]),
                np.zeros((3, 2)),
            )
