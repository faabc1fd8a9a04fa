import csv
import json
import math

import pytest

from siif_pdn import cli
from siif_pdn.netlist import parse_interchange


def test_run_writes_report(tmp_path):
    out = tmp_path / "r.json"
    assert cli.main(["run", "--app", "loihi", "--topology", "pt", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["report"]["fd_count"] == 825
    assert doc["report"]["topology"] == "PT"
    assert doc["meta"]["config"] == {"app": "loihi", "topology": "pt", "outputs": {"report": str(out)}}
    assert doc["solve"]["unknowns"] > 0
    assert doc["report"]["flags"] == []


def test_run_report_to_stdout(capsys):
    assert cli.main(["run", "--app", "loihi", "--topology", "bt1"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["report"]["fd_count"] == 1178


def test_run_is_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    base = ["run", "--app", "loihi", "--topology", "bt2_8", "--out"]
    assert cli.main(base + [str(a)]) == 0
    assert cli.main(base + [str(b)]) == 0
    strip = lambda p: {k: v for k, v in json.loads(p.read_text()).items() if k != "meta"}
    assert strip(a) == strip(b)


def test_export_netlist_and_waveforms(tmp_path):
    net, wav = tmp_path / "pdn.cir", tmp_path / "w.csv"
    rc = cli.main(["run", "--app", "loihi", "--topology", "bt3", "--export-netlist", str(net),
                   "--waveforms", str(wav), "--out", str(tmp_path / "r.json")])
    assert rc == 0
    parsed = parse_interchange(net.read_text())
    assert len(parsed.nodes) > 100
    with wav.open() as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["time_s", "node_label", "voltage_v"]
    labels = {r[1] for r in rows[1:]}
    assert 1 <= len(labels) <= 2
    assert all(math.isfinite(float(r[2])) for r in rows[1:])


def test_config_file_with_overrides(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({
        "app": {"base": "loihi", "dielet": {"throughput_tflops": 2.0}},
        "topology": {"kind": "bt1", "converter_efficiency": 0.95},
        "solver": {"grid_granularity": 16},
        "transient": False,
    }))
    out = tmp_path / "r.json"
    assert cli.main(["run", "--config", str(cfg), "--out", str(out)]) == 0
    rep = json.loads(out.read_text())["report"]
    assert rep["computing_performance"] == pytest.approx(1178 * 2.0 / 1000)
    assert rep["inductive_droop_worst"] == 0.0
    # modified dielet: published values no longer apply
    assert rep["flags"] == []


@pytest.mark.parametrize("content", [
    '{"app": "loihi", "topology": "pt", "bogus": 1}',
    '{"app": "loihi", "topology": "pt"',
    '{"app": "nosuchapp", "topology": "pt"}',
    '{"app": "loihi", "topology": "bt9"}',
    '{"app": "loihi", "topology": "pt", "platform": {"wafer_diameter_mm": -300}}',
    '{"app": "loihi", "topology": "pt", "solver": {"dt": 0}}',
    '{"app": "loihi", "topology": {"kind": "pt", "converter_efficiency": 1.5}}',
    '[1, 2]',
])
def test_malformed_config_exits_2_without_output(tmp_path, content, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(content)
    out, net = tmp_path / "r.json", tmp_path / "n.cir"
    rc = cli.main(["run", "--config", str(cfg), "--out", str(out), "--export-netlist", str(net)])
    assert rc == 2
    assert not out.exists() and not net.exists()
    assert "error: config" in capsys.readouterr().err


def test_validation_reports_every_field(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"app": "loihi", "topology": "pt",
                               "platform": {"pillar_pitch_um": -1, "pin_pitch_mm": 0}}))
    assert cli.main(["run", "--config", str(cfg)]) == 2
    err = capsys.readouterr().err
    assert "pillar_pitch_um" in err and "pin_pitch_mm" in err


def test_model_error_exits_1(tmp_path, capsys):
    d = 8.0
    cfg = tmp_path / "tiny.json"
    cfg.write_text(json.dumps({"app": "loihi", "topology": "pt",
                               "platform": {"wafer_diameter_mm": d, "wafer_area_mm2": math.pi * d * d / 4}}))
    out = tmp_path / "r.json"
    assert cli.main(["run", "--config", str(cfg), "--out", str(out)]) == 1
    assert not out.exists()
    assert "PlacementError" in capsys.readouterr().err


def test_unwritable_output_exits_2(tmp_path):
    out = tmp_path / "missing_dir" / "r.json"
    assert cli.main(["run", "--app", "loihi", "--topology", "pt", "--out", str(out)]) == 2


def test_compare_single_app(tmp_path):
    out = tmp_path / "cmp"
    assert cli.main(["compare", "--app", "loihi", "--out", str(out)]) == 0
    with (out / "comparison.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == list(cli.CSV_COLUMNS)
    assert [r["topology"] for r in rows] == ["PT", "BT1", "BT2_8", "BT2_24", "BT3"]
    ranks = {r["topology"]: int(r["rank"]) for r in rows}
    assert ranks["PT"] == 1
    assert sorted(ranks.values()) == [1, 2, 3, 4, 5]
    pt = rows[0]
    assert float(pt["norm_drop"]) == float(pt["norm_loss"]) == float(pt["norm_performance"]) == 1.0
    summary = json.loads((out / "comparison.json").read_text())
    assert summary["ranking"]["LOIHI"][0] == "PT"
    assert len(list((out / "reports").glob("*.json"))) == 5
    first = (out / "comparison.csv").read_bytes()
    out2 = tmp_path / "cmp2"
    assert cli.main(["compare", "--app", "loihi", "--out", str(out2)]) == 0
    assert (out2 / "comparison.csv").read_bytes() == first
    assert (out2 / "comparison.json").read_bytes() == (out / "comparison.json").read_bytes()


def test_compare_needs_pt(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"scenarios": [{"app": "loihi", "topology": "bt1"},
                                             {"app": "loihi", "topology": "bt3"}]}))
    assert cli.main(["compare", "--config", str(cfg)]) == 2


def test_compare_rejects_bad_weights(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"app": "loihi", "weights": {"drop": 1, "noise": 1}}))
    assert cli.main(["compare", "--config", str(cfg)]) == 2


def test_matrix_rows(matrix):
    rows = cli.comparison_rows(matrix["runs"])
    assert len(rows) == 15
    text = cli.comparison_csv(rows)
    assert text == cli.comparison_csv(cli.comparison_rows(matrix["runs"]))
    assert text.count("\n") == 16
    for app in ("LOIHI", "EPYC", "TPU"):
        assert sorted(int(r["rank"]) for r in rows if r["app"] == app) == [1, 2, 3, 4, 5]
