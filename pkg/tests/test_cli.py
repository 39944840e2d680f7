from __future__ import annotations

import json
import os
import shutil
import subprocess
import sys

import jsonschema
import numpy as np
import pyarrow as pa
import pytest

from conftest import sha256, write_table
from pqforge.cli import main
from pqforge.schemas import load_schema


def run(capsys, *argv) -> tuple[int, str, str]:
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, schema: str, *argv):
    code, out, err = run(capsys, *argv, "--format", "json")
    assert code == 0, err
    doc = json.loads(out)
    jsonschema.validate(doc, load_schema(schema))
    return doc


@pytest.fixture(autouse=True)
def _clean_env(monkeypatch):
    for k in list(os.environ):
        if k.startswith("PQFORGE_"):
            monkeypatch.delenv(k)


@pytest.fixture(scope="module")
def src(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    path = d / "src.parquet"
    assert main(["gen-fixture", str(path), "--rows", "20000", "--seed", "4", "--rg-rows", "3000"]) == 0
    return path


def test_every_json_document_matches_its_schema(capsys, src, tmp_path):
    run_json(capsys, "file_report", "inspect", src)
    run_json(capsys, "file_report", "inspect", src, "--no-scan-pages")
    run_json(capsys, "findings", "grade", src)
    run_json(capsys, "rewrite_plan", "plan", src, "--rg-rows", "8000")
    out = tmp_path / "out.parquet"
    run_json(capsys, "rewrite_report", "rewrite", src, out, "--rg-rows", "8000", "--parallelism", "1")
    run_json(capsys, "rewrite_report", "rewrite", src, tmp_path / "v.parquet", "--verify")
    run_json(capsys, "equality_report", "verify", src, out)
    run_json(capsys, "bench_report", "bench", out, "--repetitions", "1")
    run_json(capsys, "bench_report", "bench", out, "--repetitions", "1", "--baseline", src)
    run_json(capsys, "fixture_report", "gen-fixture", tmp_path / "f.parquet", "--rows", "10")


def test_plan_file_reproduces_direct_rewrite(capsys, src, tmp_path):
    plan = tmp_path / "plan.json"
    assert run(capsys, "plan", src, "--rg-rows", "7000", "-o", plan)[0] == 0
    a, b = tmp_path / "a.parquet", tmp_path / "b.parquet"
    assert run(capsys, "rewrite", src, a, "--plan", plan)[0] == 0
    assert run(capsys, "rewrite", src, b, "--rg-rows", "7000", "--parallelism", "3")[0] == 0
    assert sha256(a) == sha256(b)


def test_rewrite_verify_prints_confirmation(capsys, src, tmp_path):
    code, out, _ = run(capsys, "rewrite", src, tmp_path / "o.parquet", "--verify")
    assert code == 0 and "verified equal" in out


def test_exit_codes(capsys, src, tmp_path):
    other = write_table(pa.table({"x": np.arange(5)}), tmp_path / "other.parquet")
    garbage = tmp_path / "garbage.parquet"
    garbage.write_bytes(b"not parquet at all")
    plan = tmp_path / "plan.json"
    run(capsys, "plan", other, "-o", plan)

    assert run(capsys, "verify", src, src)[0] == 0
    assert run(capsys, "verify", src, other)[0] == 1
    assert run(capsys, "inspect", tmp_path / "missing.parquet")[0] == 2
    assert run(capsys, "inspect", garbage)[0] == 2
    assert run(capsys, "rewrite", src, tmp_path / "x.parquet", "--plan", plan)[0] == 2  # plan mismatch
    assert not (tmp_path / "x.parquet").exists()
    assert run(capsys, "rewrite", src, src)[0] == 3  # in place
    assert run(capsys, "inspect")[0] == 3
    assert run(capsys, "plan", src, "--threshold", "1.5")[0] == 3
    assert run(capsys, "plan", src, "--codec", "gzip")[0] == 3
    assert run(capsys, "plan", src, "--candidates", "DOUBLE=DELTA_BYTE_ARRAY,PLAIN")[0] == 3
    assert run(capsys, "plan", src, "--force-codec", "zstd", "--no-compression")[0] == 3
    assert run(capsys, "bench", src, "--repetitions", "0")[0] == 3
    assert run(capsys, "no-such-command")[0] == 3


def test_policy_errors_name_the_field(capsys, src):
    code, _, err = run(capsys, "plan", src, "--rg-rows", "0", "--threshold", "2")
    assert code == 3 and "target_rg_rows" in err and "compression_threshold" in err


def _effective(capsys, *argv) -> dict:
    code, out, err = run(capsys, "plan", "x.parquet", "--show-config", "--format", "json", *argv)
    assert code == 0, err
    return json.loads(out)


def test_settings_precedence(capsys, tmp_path, monkeypatch):
    cfg = tmp_path / "pq.ini"
    cfg.write_text("[pqforge]\nrg_rows = 111\npages_per_chunk = 7\nthreshold = 0.2\n")
    assert _effective(capsys)["rg_rows"] == {"value": 10_000_000, "source": "default"}
    c = _effective(capsys, "--config", cfg)
    assert c["rg_rows"] == {"value": 111, "source": "config"}
    monkeypatch.setenv("PQFORGE_RG_ROWS", "222")
    c = _effective(capsys, "--config", cfg)
    assert c["rg_rows"] == {"value": 222, "source": "env"}
    assert c["pages_per_chunk"] == {"value": 7, "source": "config"}
    c = _effective(capsys, "--config", cfg, "--rg-rows", "333")
    assert c["rg_rows"] == {"value": 333, "source": "flag"}
    assert c["policy"]["value"]["target_rg_rows"] == 333
    assert c["policy"]["value"]["compression_threshold"] == 0.2
    monkeypatch.setenv("PQFORGE_CONFIG", str(cfg))
    assert _effective(capsys)["threshold"]["source"] == "config"


def test_bad_settings_are_argument_errors(capsys, tmp_path, monkeypatch):
    cfg = tmp_path / "pq.ini"
    cfg.write_text("[pqforge]\nbogus = 1\n")
    assert run(capsys, "plan", "x", "--show-config", "--config", cfg)[0] == 3
    monkeypatch.setenv("PQFORGE_RG_ROWS", "many")
    assert run(capsys, "plan", "x", "--show-config")[0] == 3


def test_gen_fixture_is_deterministic(capsys, tmp_path):
    a, b, c = (tmp_path / f"{n}.parquet" for n in "abc")
    for p, seed in ((a, 1), (b, 1), (c, 2)):
        assert run(capsys, "gen-fixture", p, "--profile", "mixed", "--rows", "5000", "--seed", seed)[0] == 0
    assert sha256(a) == sha256(b) != sha256(c)


def test_gen_fixture_zero_rows(capsys, tmp_path):
    out = tmp_path / "z.parquet"
    assert run(capsys, "gen-fixture", out, "--rows", "0")[0] == 0
    doc = run_json(capsys, "file_report", "inspect", out)
    assert doc["total_rows"] == 0 and doc["summary"]["compression_ratio"] is None


def test_bench_csv_appends(capsys, src, tmp_path):
    csv_path = tmp_path / "b.csv"
    for _ in range(2):
        assert run(capsys, "bench", src, "--repetitions", "1", "--csv", csv_path)[0] == 0
    lines = csv_path.read_text().splitlines()
    assert len(lines) == 3 and lines[0].startswith("file,")


def test_human_output(capsys, src):
    code, out, _ = run(capsys, "inspect", src)
    assert code == 0 and "rows/RG" in out and "SNAPPY" in out
    code, out, _ = run(capsys, "plan", src)
    assert code == 0 and "row groups" in out


@pytest.mark.skipif(shutil.which("pqforge") is None, reason="console script not installed")
def test_console_script(src):
    res = subprocess.run(["pqforge", "inspect", str(src), "--format", "json"], capture_output=True, text=True)
    assert res.returncode == 0 and json.loads(res.stdout)["total_rows"] == 20_000
    res = subprocess.run([sys.executable, "-m", "pqforge", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "rewrite" in res.stdout


def test_failed_verify_removes_output(capsys, src, tmp_path, monkeypatch):
    from pqforge import cli
    from pqforge.verify import EqualityReport, Mismatch

    monkeypatch.setattr(cli, "verify_equal", lambda a, b: EqualityReport(False, 3, ("c",), Mismatch(3, "c", "a", "b")))
    out = tmp_path / "o.parquet"
    code, text, _ = run(capsys, "rewrite", src, out, "--verify")
    assert code == 1 and "VERIFY FAILED" in text and not out.exists()
