from __future__ import annotations

import json

import pytest

from fairdiffusion.cli import main


@pytest.fixture
def fixture_file(tmp_path):
    path = tmp_path / "fixture.json"
    assert main(["fixture", "--out", str(path)]) == 0
    return str(path)


def test_fixture_file_carries_caveat(fixture_file):
    data = json.loads(open(fixture_file).read())
    assert "comment" in data and len(data["buyers"]) == 14


def test_run_fdm_dump(fixture_file, tmp_path, capsys):
    dump = tmp_path / "out.json"
    assert main(["run", fixture_file, "--mechanism", "fdm", "--dump", str(dump)]) == 0
    text = capsys.readouterr().out
    assert "seller revenue: 22/3" in text
    assert "(11, 0, 1/3)" in text and "(7, 8, 0)" in text
    out = json.loads(dump.read_text())
    assert out["winner"] == "l" and out["payment"]["l"] == "32/3"


@pytest.mark.parametrize("mech, revenue", [("idm", "7"), ("vcg", "3")])
def test_run_other_mechanisms(fixture_file, capsys, mech, revenue):
    assert main(["run", fixture_file, "--mechanism", mech]) == 0
    assert f"seller revenue: {revenue}\n" in capsys.readouterr().out


def test_run_with_overrides(fixture_file, capsys):
    assert main(["run", fixture_file, "--report", "b=8"]) == 0
    assert "winner: b" in capsys.readouterr().out
    assert main(["run", fixture_file, "--absent", "b"]) == 0
    out = capsys.readouterr().out
    assert "winner: d" in out and "seller revenue: 3\n" in out


def test_run_exit_codes(tmp_path, fixture_file, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"seller": "s", "seller_neighbors": ["a"], "buyers": [{"id": "a", "valuation": "1"}]}')
    assert main(["run", str(bad)]) == 2
    empty = tmp_path / "empty.json"
    empty.write_text('{"seller": "s", "seller_neighbors": [], "buyers": [{"id": "a", "valuation": "1"}]}')
    assert main(["run", str(empty)]) == 3
    assert main(["run", fixture_file, "--report", "a=1:m"]) == 2


def test_verify_fixture_all_suites(fixture_file, capsys):
    assert main(["verify", fixture_file, "--suite", "all"]) == 0
    out = capsys.readouterr().out
    for name in ("ir[fdm]", "ic[idm]", "revenue_chain", "oracle"):
        assert f"PASS {name}" in out


def test_verify_corrupted_stub_fails(fixture_file, capsys):
    assert main(["verify", fixture_file, "--suite", "ic", "--stub", "first_price"]) == 1
    assert "FAIL ic[first_price_stub]" in capsys.readouterr().out


def test_verify_oversized_ic_refused(tmp_path, capsys):
    assert main(["gen", "--generator", "star", "--n", "30", "--seed", "1", "--count", "1", "--out-dir", str(tmp_path)]) == 0
    path = next(tmp_path.glob("star_*.json"))
    assert main(["verify", str(path), "--suite", "ic"]) == 4


def test_verify_with_config(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"generator": {"kind": "random_tree", "n": 6}, "count": 3, "seed": 5}))
    assert main(["verify", "--config", str(cfg), "--suite", "revenue"]) == 0


def test_gen_to_stdout(capsys):
    assert main(["gen", "--generator", "random_tree", "--n", "4", "--seed", "2"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert len(data["buyers"]) == 4


def test_experiment_command(tmp_path, fixture_file):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"instance": fixture_file, "count": 1, "seed": 0}))
    out = tmp_path / "rows.csv"
    assert main(["experiment", "--config", str(cfg), "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[1].endswith("1,1.00") and lines[2].endswith("2/7,0.29")


def test_experiment_bad_config(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"generator": {"kind": "star", "n": 3}, "count": 0}))
    assert main(["experiment", "--config", str(cfg)]) == 2
