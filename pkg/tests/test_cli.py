import json
import subprocess
import sys

import pytest

from binview import cli
from conftest import FIXTURES


def run(argv, capsys):
    code = cli.run([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli")
    for name in ("alpha", "beta", "gamma"):
        assert cli.run(["ingest", "--binary", str(FIXTURES / f"{name}.exe"),
                        "--static", str(FIXTURES / f"{name}.static.json"),
                        "--trace", str(FIXTURES / f"{name}.trace.jsonl"),
                        "--out", str(out / f"{name}.bundle.json")]) == 0
        assert cli.run(["embed", str(out / f"{name}.bundle.json"), "--out", str(out / f"{name}.views.json")]) == 0
    return out


def test_inspect(capsys):
    code, out, _ = run(["inspect", FIXTURES / "gamma.exe"], capsys)
    assert code == 0
    assert json.loads(out) == {"artifact_id": "gamma", "bitness": "PE32Plus", "machine_code": 0x8664}


def test_inspect_not_pe(tmp_path, capsys):
    bad = tmp_path / "x.bin"
    bad.write_bytes(b"ZZ" + bytes(100))
    code, _, err = run(["inspect", bad], capsys)
    assert code == 1 and json.loads(err)["error"] == "MissingDosMagic"


def test_ingest_schema_violation(tmp_path, capsys):
    doc = json.loads((FIXTURES / "alpha.static.json").read_text())
    del doc["functions"][2]["size_bytes"]
    bad = tmp_path / "bad.static.json"
    bad.write_text(json.dumps(doc))
    code, _, err = run(["ingest", "--binary", FIXTURES / "alpha.exe", "--static", bad,
                        "--out", tmp_path / "b.json"], capsys)
    assert code == 1
    payload = json.loads(err)
    assert payload["error"] == "SchemaViolation"
    assert "$.functions[2].size_bytes" in json.dumps(payload)
    assert not (tmp_path / "b.json").exists()


def test_ingest_malformed_json(tmp_path, capsys):
    bad = tmp_path / "bad.static.json"
    bad.write_text("{not json")
    code, _, err = run(["ingest", "--binary", FIXTURES / "alpha.exe", "--static", bad,
                        "--out", tmp_path / "b.json"], capsys)
    assert code == 1 and json.loads(err)["error"] == "SchemaViolation"


def test_compare_identical(pipeline, tmp_path, capsys):
    v = pipeline / "alpha.views.json"
    code, _, _ = run(["compare", v, v, "--out", tmp_path / "r.json"], capsys)
    assert code == 0
    rep = json.loads((tmp_path / "r.json").read_text())
    assert rep["breakdown"]["global_cosine"] == 1.0
    assert all(s == 1.0 for s in rep["breakdown"]["view_scores"].values())
    assert rep["config_echo"]["seed"] == 42


def test_compare_weights_and_pca(pipeline, tmp_path, capsys):
    code, _, _ = run(["compare", pipeline / "alpha.views.json", pipeline / "beta.views.json",
                      "--weights", "traces=2", "--pca", "--std-population", "pair",
                      "--out", tmp_path / "r.json"], capsys)
    assert code == 0
    br = json.loads((tmp_path / "r.json").read_text())["breakdown"]
    assert br["pca_k"] == 4 and br["std_population"] == "pair"
    assert br["weights_used"]["traces"] == pytest.approx(2 / 2.8, abs=1e-9)


def test_batch(pipeline, tmp_path, capsys):
    views = [pipeline / f"{n}.views.json" for n in ("gamma", "beta", "alpha")]
    code, _, _ = run(["batch", *views, "--out", tmp_path / "m.json", "--reports-dir", tmp_path / "reps",
                      "--jobs", "3"], capsys)
    assert code == 0
    doc = json.loads((tmp_path / "m.json").read_text())
    assert doc["artifacts"] == ["alpha", "beta", "gamma"]
    assert doc["pairs"] == [["alpha", "beta"], ["alpha", "gamma"], ["beta", "gamma"]]
    m = doc["global_cosine"]
    assert all(m[i][i] == 1.0 and m[i][j] == m[j][i] for i in range(3) for j in range(3))
    assert sorted(p.name for p in (tmp_path / "reps").iterdir()) == [
        "alpha__beta.json", "alpha__gamma.json", "beta__gamma.json"]


def test_report_extracts_charts(pipeline, tmp_path, capsys):
    run(["compare", pipeline / "alpha.views.json", pipeline / "gamma.views.json", "--out", tmp_path / "r.json"],
        capsys)
    code, _, _ = run(["report", tmp_path / "r.json", "--charts-out", tmp_path / "c.json"], capsys)
    assert code == 0
    charts = json.loads((tmp_path / "c.json").read_text())
    assert charts["format"] == "bin2vec-charts-v1" and len(charts["charts"]) == 12


def test_report_rejects_views_file(pipeline, tmp_path, capsys):
    code, _, err = run(["report", pipeline / "alpha.views.json", "--charts-out", tmp_path / "c.json"], capsys)
    assert code == 1 and json.loads(err)["error"] == "FormatError"


def test_version(capsys):
    code, out, _ = run(["--version"], capsys)
    assert code == 0 and json.loads(out)["formats"]["report"] == "bin2vec-report-v1"


def test_seed_env(pipeline, tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("BIN2VEC_SEED", "7")
    assert run(["embed", pipeline / "alpha.bundle.json", "--out", tmp_path / "v.json"], capsys)[0] == 0
    assert json.loads((tmp_path / "v.json").read_text())["encoder"]["seed"] == 7
    assert run(["embed", pipeline / "alpha.bundle.json", "--seed", "9", "--out", tmp_path / "w.json"], capsys)[0] == 0
    assert json.loads((tmp_path / "w.json").read_text())["encoder"]["seed"] == 9
    code, _, err = run(["compare", tmp_path / "v.json", pipeline / "beta.views.json", "--out", tmp_path / "r.json"],
                       capsys)
    assert code == 1 and json.loads(err)["error"] == "EncoderMismatch"


def test_external_encoder(pipeline, tmp_path, capsys):
    table = tmp_path / "tok.jsonl"
    table.write_text("\n".join(json.dumps({"token": t, "vector": [float(i == k) for i in range(384)]})
                               for k, t in enumerate(["mov", "push", "call"])) + "\n")
    code, _, _ = run(["embed", pipeline / "alpha.bundle.json", "--encoder", "external", "--vectors", table,
                      "--out", tmp_path / "v.json"], capsys)
    assert code == 0
    assert json.loads((tmp_path / "v.json").read_text())["encoder"]["encoder_id"] == "external:tok"
    code, _, err = run(["embed", pipeline / "alpha.bundle.json", "--encoder", "external",
                        "--out", tmp_path / "w.json"], capsys)
    assert code == 1


def test_internal_error_exit_2(monkeypatch, capsys):
    def boom(args):
        raise RuntimeError("kaboom")
    monkeypatch.setattr(cli, "cmd_inspect", boom)
    code, _, err = run(["inspect", FIXTURES / "alpha.exe"], capsys)
    assert code == 2 and json.loads(err)["error"] == "InternalError"


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "binview", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "bin2vec-views-v1" in proc.stdout
