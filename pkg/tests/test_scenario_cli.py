"""Scenario schema, presets, trace format, and the command-line surface."""

import json

import numpy as np
import pytest

from apbsim.cli import main
from apbsim.scenario_io import (
    ScenarioError,
    list_presets,
    load_params,
    load_scenario,
    parse_scenario,
    serialize_scenario,
    trace_lines,
    write_trace_csv,
    TRACE_COLUMNS,
)
from apbsim.sim import run


MINIMAL = {
    "initial": {"gap_m": 10.0, "rear": {"v": 20.0}, "front": {"v": 20.0}},
}


def doc(**overrides):
    d = json.loads(json.dumps(MINIMAL))
    d.update(overrides)
    return d


class TestScenarioSchema:
    def test_minimal_document_gets_defaults(self):
        sc = parse_scenario(doc())
        assert sc.dt == 0.01
        assert sc.horizon == 10.0
        assert sc.params.a_max_brake == 8.0
        assert sc.sensor.miss_rate == 0.0

    def test_unknown_top_level_key(self):
        with pytest.raises(ScenarioError, match="unknown key"):
            parse_scenario(doc(frnt_script=[]))

    def test_unknown_nested_key_has_field_path(self):
        with pytest.raises(ScenarioError, match="params"):
            parse_scenario(doc(params={"a_max_brake": 8.0, "amax": 1.0}))

    def test_missing_initial(self):
        with pytest.raises(ScenarioError, match="initial"):
            parse_scenario({})

    def test_bad_driver_type(self):
        with pytest.raises(ScenarioError, match="driver.type"):
            parse_scenario(doc(driver={"type": "race_car"}))

    def test_bad_number(self):
        with pytest.raises(ScenarioError, match="sim.dt"):
            parse_scenario(doc(sim={"dt": "fast"}))

    def test_invalid_params_reported_with_field(self):
        with pytest.raises(ScenarioError, match="params"):
            parse_scenario(doc(params={"j_max": -1.0}))

    def test_script_exceeding_ceiling_rejected(self):
        with pytest.raises(ScenarioError, match="accel"):
            parse_scenario(doc(front_script=[{"t": 0.0, "accel": -20.0}]))

    def test_adversarial_spec(self):
        sc = parse_scenario(doc(front_script={"adversarial": {"seed": 3}}))
        assert sc.adversarial is not None and sc.adversarial.compliant

    def test_round_trip_identity(self):
        document = doc(
            params={"rho": 0.2, "a_max_brake": 9.0, "latency": 0.05},
            front_script=[{"t": 0.0, "accel": -3.0}, {"t": 2.0, "accel": 1.0}],
            driver={"type": "distracted", "reaction_delay": 2.0, "comfort_decel": 2.5},
            controller={"type": "apb"},
            p_fail=0.02,
            sensor={"ghost_rate": 0.01, "ghost_gap": 9.0},
            sim={"dt": 0.02, "horizon": 7.0, "seed": 11},
            population={"v_rear": [5.0, 10.0], "gap_safe_plus": [0.0, 4.0],
                        "brake_t": [1.0, 2.0]},
        )
        sc = parse_scenario(document)
        assert parse_scenario(serialize_scenario(sc)) == sc

    def test_presets_parse_and_round_trip(self):
        assert set(list_presets()) >= {"defaults", "paper_sec2_ttc",
                                       "worst_case_front", "tailgater_population"}
        for name in ("paper_sec2_ttc", "worst_case_front", "tailgater_population"):
            sc = load_scenario(name)
            assert parse_scenario(serialize_scenario(sc)) == sc

    def test_params_file(self):
        p, latency = load_params("defaults")
        assert p.a_max_brake == 8.0 and latency == 0.0

    def test_missing_file_message(self):
        with pytest.raises(ScenarioError, match="no such"):
            load_scenario("nonexistent_preset")

    def test_rear_outbraking_front_warns(self, tmp_path):
        odd = tmp_path / "params.json"
        odd.write_text('{"a_min_brake": 9.0, "a_max_brake": 8.0}')
        with pytest.warns(UserWarning, match="harder than the front"):
            load_params(odd)


class TestTraceFormat:
    def test_header_and_columns(self, tmp_path):
        tr = run(load_scenario("worst_case_front"))
        path = tmp_path / "trace.csv"
        write_trace_csv(tr, path)
        lines = path.read_text().splitlines()
        header = [ln for ln in lines if ln.startswith("#")]
        assert header[0] == "# apbsim trace v1"
        assert any("scenario_hash" in ln for ln in header)
        body = [ln for ln in lines if not ln.startswith("#")]
        assert body[0] == ",".join(TRACE_COLUMNS)
        n_header = sum(1 for ln in lines if ln.startswith("#"))
        data = np.genfromtxt(path, delimiter=",", names=True, skip_header=n_header)
        assert data.shape[0] == tr.n_steps
        assert data["t"][1] - data["t"][0] == pytest.approx(0.01)

    def test_byte_identical_reruns(self, tmp_path):
        sc = load_scenario("paper_sec2_ttc")
        a = "\n".join(trace_lines(run(sc)))
        b = "\n".join(trace_lines(run(sc)))
        assert a == b


class TestCli:
    def test_safe_distance_point(self, capsys):
        rc = main(["safe-distance", "--v-rear", "10", "--v-front", "9.99"])
        assert rc == 0
        out = capsys.readouterr().out
        assert "15.5958" in out

    def test_safe_distance_grid_monotone(self, capsys):
        rc = main(["safe-distance", "--grid", "v_rear=0:40:5", "--v-front", "10",
                   "--format", "csv"])
        assert rc == 0
        rows = capsys.readouterr().out.strip().splitlines()
        assert len(rows) == 10  # header + 9 grid points
        vals = [float(r.split(",")[-1]) for r in rows[1:]]
        assert vals == sorted(vals)

    def test_safe_distance_classic_column(self, capsys):
        rc = main(["safe-distance", "--v-rear", "20", "--v-front", "20", "--classic",
                   "--format", "csv"])
        assert rc == 0
        out = capsys.readouterr().out
        assert "d_safe_classic" in out

    def test_invalid_params_file_exits_2(self, tmp_path, capsys):
        bad = tmp_path / "params.json"
        bad.write_text('{"j_max": -2.0}')
        rc = main(["safe-distance", "--params", str(bad), "--v-rear", "1"])
        assert rc == 2
        assert "error:" in capsys.readouterr().err

    def test_env_var_param_file(self, tmp_path, capsys, monkeypatch):
        custom = tmp_path / "params.json"
        custom.write_text('{"a_min_brake": 2.0}')
        monkeypatch.setenv("APBSIM_PARAMS", str(custom))
        rc = main(["safe-distance", "--v-rear", "20", "--v-front", "20",
                   "--format", "csv"])
        assert rc == 0
        out = capsys.readouterr().out
        # weaker committed braking -> larger safe distance than the default 44.33
        assert float(out.strip().splitlines()[-1].split(",")[-1]) > 60.0

    def test_simulate_collision_exit_code(self, tmp_path, capsys):
        out = tmp_path / "tr.csv"
        rc = main(["simulate", "--scenario", "paper_sec2_ttc", "--out", str(out)])
        assert rc == 3
        assert out.exists()

    def test_simulate_clean_exit_code(self, capsys):
        rc = main(["simulate", "--scenario", "worst_case_front"])
        assert rc == 0

    def test_simulate_bad_scenario_exit_2(self, tmp_path, capsys):
        bad = tmp_path / "sc.json"
        bad.write_text('{"initial": {"gap_m": 5.0}}')
        rc = main(["simulate", "--scenario", str(bad)])
        assert rc == 2
        err = capsys.readouterr().err
        assert err.startswith("error:") and "initial" in err

    def test_verify_small_pass(self, capsys):
        rc = main(["verify", "--n", "5", "--seed", "3"])
        assert rc == 0
        out = capsys.readouterr().out
        assert "PASS" in out and "collisions: 0" in out

    def test_verify_rejects_bad_n(self, capsys):
        rc = main(["verify", "--n", "0"])
        assert rc == 2

    def test_verify_failure_exit_code_and_counterexample(self, tmp_path, capsys,
                                                         monkeypatch):
        # force a failing report to exercise the exit-4 path
        import apbsim.cli as cli
        from apbsim.scenario_io import load_scenario
        from apbsim.sim import VerificationReport, run

        trace = run(load_scenario("paper_sec2_ttc"))
        fake = VerificationReport(
            n=5, n_collisions=1, collision_indices=np.array([2]),
            min_gaps=np.array([1.0, 2.0, -0.4, 3.0, 0.5]),
            min_gap_overall=-0.4, passed=False, counterexample=trace,
        )
        monkeypatch.setattr(cli, "verify_no_collision",
                            lambda *a, **kw: fake)
        out_path = tmp_path / "counter.csv"
        rc = main(["verify", "--n", "5", "--counterexample-out", str(out_path)])
        assert rc == 4
        assert out_path.exists()
        assert "FAIL" in capsys.readouterr().out

    def test_sweep_report(self, tmp_path, capsys):
        report = tmp_path / "report.json"
        rc = main(["sweep", "--scenario", "tailgater_population", "--n", "30",
                   "--seed", "2", "--p-fail", "0.01", "--out", str(report)])
        assert rc == 0
        data = json.loads(report.read_text())
        assert set(data) == {"none", "apb"}
        assert data["none"]["n_collisions"] > 0
        assert data["apb"]["elimination_rate"] is not None

    def test_compare_alias(self, capsys):
        rc = main(["compare", "--scenario", "tailgater_population", "--n", "5",
                   "--seed", "2"])
        assert rc == 0
        assert "elimination_rate" in capsys.readouterr().out
