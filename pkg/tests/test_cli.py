import json
import shutil
from pathlib import Path

import pytest

from syndcim.cli import main

ROOT = Path(__file__).resolve().parents[1]
SPEC16 = ROOT / "configs" / "macro_16x16.toml"


@pytest.fixture(scope="module")
def run16(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "run"
    assert main(["search", "--spec", str(SPEC16), "--out", str(out)]) == 0
    return out


def test_search_layout(run16):
    for rel in ("frontier.csv", "spec.toml", "manifest.json", "designs/d000.json", "logs/d000.log"):
        assert (run16 / rel).is_file(), rel
    man = json.loads((run16 / "manifest.json").read_text())
    assert set(man["artifacts"]) >= {"frontier.csv", "designs/d000.json"}
    assert set(man["timestamps"]) == {"started", "finished"}


def test_manifest_hashes_match(run16):
    import hashlib

    man = json.loads((run16 / "manifest.json").read_text())
    for rel, digest in man["artifacts"].items():
        assert hashlib.sha256((run16 / rel).read_bytes()).hexdigest() == digest


def test_emit_and_verify(run16, capsys):
    assert main(["emit", "--out", str(run16), "--design", "d001"]) == 0
    assert (run16 / "hdl" / "d001_macro.v").is_file()
    assert main(["verify", "--out", str(run16), "--design", "d001", "--vectors", "64", "--seed", "4"]) == 0
    assert "PASS" in capsys.readouterr().out
    assert "PASS" in (run16 / "hdl" / "d001_verify.log").read_text()


def test_verify_emits_when_missing(run16):
    assert main(["verify", "--out", str(run16), "--design", "d002", "--vectors", "16"]) == 0
    assert (run16 / "hdl" / "d002_macro.v").is_file()


def test_verify_catches_mutation(run16, tmp_path, capsys):
    out = tmp_path / "mut"
    shutil.copytree(run16, out)
    main(["emit", "--out", str(out), "--design", "d000"])
    hdl = out / "hdl" / "d000_macro.v"
    text = hdl.read_text()
    hdl.write_text(text.replace("  nor g_nor_", "  nand g_nor_", 1))
    assert main(["verify", "--out", str(out), "--design", "d000", "--vectors", "64"]) == 3
    err = capsys.readouterr().err
    assert "counterexample" in err


def test_unknown_design(run16, capsys):
    assert main(["emit", "--out", str(run16), "--design", "d999"]) == 1
    assert "unknown design id 'd999'" in capsys.readouterr().err


def test_auto_select(tmp_path, capsys):
    out = tmp_path / "auto"
    assert main(["search", "--spec", str(SPEC16), "--out", str(out), "--auto"]) == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["selected"] and (out / "hdl" / f"{man['selected']}_macro.v").is_file()
    assert main(["emit", "--out", str(out), "--auto"]) == 0


def test_bad_spec_names_path(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("[array]\nheight = 48\nwidth = 64\n[precision]\nformats=['INT4']\n"
                   "[performance]\nmac_frequency_hz=1e8\nweight_update_frequency_hz=1e8\n")
    assert main(["search", "--spec", str(bad), "--out", str(tmp_path / "o")]) == 1
    err = capsys.readouterr().err
    assert str(bad) in err and "array.height" in err
    assert main(["search", "--spec", str(tmp_path / "nope.toml"), "--out", str(tmp_path / "o")]) == 1


def test_empty_frontier_exit_2(tmp_path, capsys):
    spec = tmp_path / "fast.toml"
    spec.write_text(SPEC16.read_text().replace("800e6\nweight", "20e9\nweight"))
    assert main(["search", "--spec", str(spec), "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    miss = json.loads(err.strip().splitlines()[-1])
    assert miss["worst_stage_ps"] > miss["budget_ps"]


def test_library_env_var(tmp_path, monkeypatch, capsys):
    broken = tmp_path / "lib"
    broken.mkdir()
    monkeypatch.setenv("SYNDCIM_LIBRARY", str(broken))
    assert main(["search", "--spec", str(SPEC16), "--out", str(tmp_path / "o")]) == 1
    assert str(broken) in capsys.readouterr().err


def test_sweep_and_report(tmp_path, run16):
    spec = ROOT / "configs" / "sweep_int.toml"
    assert main(["sweep", "--spec", str(spec), "--dims", "32,64", "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "trend.csv").read_text().splitlines()
    assert len(rows) == 5
    assert main(["report", "--out", str(run16), "--format", "svg"]) == 0
    svg = (run16 / "report.svg").read_text()
    assert svg.startswith("<svg") and svg.count("<circle") == len((run16 / "frontier.csv").read_text().splitlines()) - 1
    assert main(["report", "--out", str(run16)]) == 0
    assert (run16 / "report.csv").read_text().startswith("design_id,")


def test_report_without_search(tmp_path):
    assert main(["report", "--out", str(tmp_path)]) == 1


def test_bad_dims(tmp_path):
    assert main(["sweep", "--spec", str(SPEC16), "--dims", "a,b", "--out", str(tmp_path)]) == 1
    assert main(["sweep", "--spec", str(SPEC16), "--dims", "48", "--out", str(tmp_path)]) == 1
