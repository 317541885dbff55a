import csv
import io
import json

import pytest
from typer.testing import CliRunner

from dally.cli.main import app
from dally.config.schema import RunConfig
from dally.report.writers import build_report, config_hash, read_report, to_csv, to_json

runner = CliRunner()


def invoke(*args):
    return runner.invoke(app, list(args))


def rows_of(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_version():
    result = invoke("version")
    assert result.exit_code == 0
    assert "dally" in result.stdout


def test_table1_default_grid(tmp_path):
    out = tmp_path / "t1.csv"
    result = invoke("table1", "--out", str(out))
    assert result.exit_code == 0
    text = out.read_text(encoding="utf-8")
    assert text.startswith("P_bits,Q,A,W,E\n")
    assert text.endswith("\n")
    rows = rows_of(text)
    assert len(rows) == 36
    last = rows[-1]
    assert (last["P_bits"], last["Q"]) == ("4096", "256")
    assert float(last["E"]) > 0.98
    assert last["E"] == "0.980321"


def test_table1_single_station_is_unit_efficiency():
    result = invoke("table1", "--Q", "1")
    assert result.exit_code == 0
    rows = rows_of(result.stdout)
    assert len(rows) == 4
    assert {r["E"] for r in rows} == {"1"}


def test_table1_is_byte_identical_across_runs(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert invoke("table1", "--format", "json", "--out", str(a)).exit_code == 0
    assert invoke("table1", "--format", "json", "--out", str(b)).exit_code == 0
    assert a.read_bytes() == b.read_bytes()


def test_table1_rejects_bad_params():
    result = invoke("table1", "--P", "0")
    assert result.exit_code == 2
    result = invoke("table1", "--q-step", "sideways")
    assert result.exit_code == 2


def test_unknown_flag_is_a_usage_error():
    result = invoke("table1", "--bogus")
    assert result.exit_code == 2


def test_table2_columns():
    result = invoke("table2", "--P", "4096", "--Q", "1", "--Q", "256")
    assert result.exit_code == 0
    rows = rows_of(result.stdout)
    assert [r["Q"] for r in rows] == ["1", "256"]
    for r in rows:
        assert float(r["E_B_worst"]) < float(r["E_B"]) < float(r["E"])


def test_compare_orders_regimes(tmp_path):
    for loss in ("0", "0.05"):
        out = tmp_path / f"cmp{loss}.json"
        result = invoke("compare", "--loss", loss, "--n", "100", "--format", "json", "--out", str(out))
        assert result.exit_code == 0
        doc = json.loads(out.read_text(encoding="utf-8"))
        assert doc["header"]["command"] == "compare"
        assert doc["header"]["rng"] == "numpy.random.PCG64"
        rows = doc["rows"]
        assert [r["regime"] for r in rows] == ["Forward1976", "EftpBilateral", "OaeBilateral"]
        e, e_eftp, e_oae = (r["value"] for r in rows)
        assert e_oae > e_eftp
        assert e_eftp < e
        assert doc["columns"][-3:] == ["collision", "end_dally", "physics"]
        forward, eftp, oae = rows
        assert forward["collision"] == "failure (abort and retry)"
        assert forward["end_dally"] == "invisible overhead"
        assert forward["physics"].startswith("FITO")
        for row in (eftp, oae):
            assert row["collision"] == "feedback (bilateral observation)"
            assert row["end_dally"] == "integral to transaction cost"
            assert row["physics"].startswith("time-symmetric")


def test_compare_json_round_trips_through_render(tmp_path):
    out = tmp_path / "cmp.json"
    assert invoke("compare", "--n", "20", "--format", "json", "--out", str(out)).exit_code == 0
    csv_out = tmp_path / "cmp.csv"
    assert invoke("compare", "--n", "20", "--out", str(csv_out)).exit_code == 0
    result = invoke("render", str(out), "--format", "csv")
    assert result.exit_code == 0
    assert result.stdout == csv_out.read_text(encoding="utf-8")
    assert invoke("render", str(out)).exit_code == 0


def test_sim_csmacd_default_report(tmp_path):
    out = tmp_path / "c.json"
    result = invoke("sim-csmacd", "--n", "20000", "--out", str(out))
    assert result.exit_code == 0
    doc = json.loads(out.read_text(encoding="utf-8"))
    (row,) = doc["rows"]
    assert row["stations_Q"] == 256
    assert abs(row["empirical_E"] - 0.980) < 0.005


def test_sim_csmacd_sweep():
    result = invoke("sim-csmacd", "--P", "48", "--P", "512", "--Q", "1", "--Q", "4", "--n", "2000", "--format", "csv")
    assert result.exit_code == 0
    rows = rows_of(result.stdout)
    assert [(r["packet_P"], r["stations_Q"]) for r in rows] == [("48", "1"), ("48", "4"), ("512", "1"), ("512", "4")]


def test_sim_eftp_trace_goes_to_stderr(tmp_path):
    out = tmp_path / "e.json"
    result = invoke("sim-eftp", "--n", "3", "--trace", "--out", str(out))
    assert result.exit_code == 0
    assert "time_us,actor,event,seq,phase_before,phase_after" in result.output
    assert "# transfer 0 Committed" in result.output
    doc = json.loads(out.read_text(encoding="utf-8"))
    (row,) = doc["rows"]
    assert row["n_committed"] == 3
    assert doc["details"]["oracle"]["committed"] == 1.0


def test_sim_eftp_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    args = ["sim-eftp", "--n", "50", "--loss", "0.05", "--seed", "7"]
    assert invoke(*args, "--out", str(a)).exit_code == 0
    assert invoke(*args, "--out", str(b)).exit_code == 0
    assert a.read_bytes() == b.read_bytes()


def test_sim_oae_report(tmp_path):
    out = tmp_path / "o.csv"
    result = invoke("sim-oae", "--n", "100", "--format", "csv", "--out", str(out))
    assert result.exit_code == 0
    (row,) = rows_of(out.read_text(encoding="utf-8"))
    assert row["frames_committed"] == "100"
    assert row["sack_11"] == "100"


def test_sim_oae_rejects_bad_processing_list():
    result = invoke("sim-oae", "--n", "10", "--processing", "0.0")
    assert result.exit_code == 2


def test_validate_params_warns_on_causal_closure():
    result = invoke("validate-params", "--T", "16e-6", "--tau", "9e-6")
    assert result.exit_code == 0
    assert "WARN" in result.stdout
    ok = invoke("validate-params", "--tau", "8e-6")
    assert "WARN" not in ok.stdout


def test_claims_command_with_failing_fixture(tmp_path):
    fixture = tmp_path / "claims.yaml"
    fixture.write_text(
        "claims:\n"
        "  - {name: holds, kind: forward, params: {Q: 256}, expect: 'E > 0.98'}\n"
        "  - {name: fails, kind: forward, params: {P: 48, Q: 256}, expect: 'E > 0.98'}\n",
        encoding="utf-8",
    )
    result = invoke("claims", str(fixture))
    assert result.exit_code == 1
    assert "✓ holds" in result.stdout
    assert "✗ fails" in result.stdout


def test_claims_command_rejects_bad_expression(tmp_path):
    fixture = tmp_path / "claims.yaml"
    fixture.write_text(
        "claims:\n  - {name: bad, kind: forward, expect: 'E.real > 0'}\n",
        encoding="utf-8",
    )
    assert invoke("claims", str(fixture)).exit_code == 2


def test_report_header_hashes_effective_config():
    config = RunConfig(command="table1", seed=3)
    report = build_report(config, ["Q", "E"], [{"Q": 1, "E": 1.0}])
    assert report.header.config_hash == config_hash(config)
    assert report.header.config["seed"] == 3
    assert config_hash(config) != config_hash(RunConfig(command="table1", seed=4))
    assert read_report(to_json(report)) == report
    assert to_csv(report) == "Q,E\n1,1\n"


def test_missing_inputs_are_usage_errors(tmp_path):
    missing = str(tmp_path / "nope.json")
    assert invoke("render", missing).exit_code == 2
    assert invoke("claims", str(tmp_path / "nope.yaml")).exit_code == 2


def test_render_rejects_unknown_format(tmp_path):
    out = tmp_path / "t1.json"
    assert invoke("table1", "--Q", "1", "--format", "json", "--out", str(out)).exit_code == 0
    assert invoke("render", str(out), "--format", "xml").exit_code == 2


def test_compare_trace_covers_both_bilateral_regimes(tmp_path):
    out = tmp_path / "cmp.json"
    result = invoke("compare", "--n", "2", "--trace", "--format", "json", "--out", str(out))
    assert result.exit_code == 0
    text = result.output
    assert "# eftp" in text and "# oae" in text
    assert text.index("# eftp") < text.index("# oae")
    assert "time_us,actor,event,seq,phase_before,phase_after" in text
    assert "time_us,direction,frame_id,slice_or_sack,detail" in text
    assert "# transfer 0 Committed" in text
    assert json.loads(out.read_text(encoding="utf-8"))["header"]["config"]["trace"] is True


def test_sim_commands_report_forward_reference(tmp_path):
    eftp = tmp_path / "e.json"
    assert invoke("sim-eftp", "--n", "2", "--T", "16e-6", "--Q", "256", "--out", str(eftp)).exit_code == 0
    (row,) = json.loads(eftp.read_text(encoding="utf-8"))["rows"]
    assert row["forward_E"] == pytest.approx(0.980321, abs=1e-6)

    oae = tmp_path / "o.json"
    result = invoke("sim-oae", "--n", "2", "--T", "16e-6", "--P", "4096", "--Q", "1", "--out", str(oae))
    assert result.exit_code == 0
    doc = json.loads(oae.read_text(encoding="utf-8"))
    (row,) = doc["rows"]
    assert row["forward_E"] == 1.0
    assert doc["header"]["config"]["params"]["stations_Q"] == 1
