import json
import os
import stat

import jsonschema
import pytest

from phonotypo import cli
from phonotypo.cli import atomic_write, load_schema, main, parse_args
from phonotypo.errors import UsageError
from phonotypo.typology import dumps_phoible

from conftest import PHOIBLE, REPO, TINY_CSV

BENCH_JSON = REPO / "src" / "phonotypo" / "data" / "transfer_benchmark.json"


@pytest.fixture(scope="module")
def work(tmp_path_factory, bench):
    """Benchmark database as CSV plus two generated streams."""
    d = tmp_path_factory.mktemp("cli")
    db, _ = bench
    (d / "bench.csv").write_text(dumps_phoible(db), encoding="utf-8")
    (d / "tiny.csv").write_text(TINY_CSV, encoding="utf-8")
    (d / "streams").mkdir()
    for i in range(2):
        assert main(["gen-stream", "--db", str(d / "bench.csv"), "--inventory-id", "1", "--frames", "30",
                     "--seed", str(i), "--out", str(d / "streams" / f"s{i}.tsv"),
                     "--truth", str(d / f"truth{i}.json"), "--quiet"]) == 0
    return d


def run(argv, capsys):
    code = main([*argv, "--quiet"])
    out, err = capsys.readouterr()
    return code, out, err


def validate(name, doc):
    jsonschema.validate(doc, load_schema(name), format_checker=jsonschema.FormatChecker())


# -- parse_args --------------------------------------------------------------

def test_parse_import_example():
    cmd = parse_args(["import", "--db", "phoible.csv", "--out", "db.bin"])
    assert cmd.subcommand == "import"
    assert cmd.options["db"] == "phoible.csv" and cmd.out == "db.bin"
    assert cmd.options["conflict_policy"] == "per_inventory"


def test_decode_without_stream_names_flag():
    with pytest.raises(UsageError, match="--stream"):
        parse_args(["decode", "--db", "x.csv", "--inventory-id", "1"])
    with pytest.raises(UsageError):
        parse_args(["decode"])


def test_flag_overrides_config(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"db": "a.csv", "inventory_id": "7", "switch-penalty": 2.5,
                               "stream": "s.tsv"}))
    cmd = parse_args(["decode", "--config", str(cfg), "--switch-penalty", "0.5"])
    assert cmd.options["switch_penalty"] == 0.5
    assert cmd.options["inventory_id"] == "7" and cmd.options["db"] == "a.csv"


def test_config_rejects_unknown_key(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"db": "a.csv", "bogus": 1}))
    with pytest.raises(UsageError, match="bogus"):
        parse_args(["import", "--config", str(cfg), "--out", "x"])


@pytest.mark.parametrize("argv", [
    ["nearest-langs", "--db", "x"],
    ["nearest-langs", "--db", "x", "--seed-language", "A", "--prior", "p.json"],
    ["decode", "--db", "x", "--stream", "s", "--inventory-id", "1", "--min-duration", "0"],
    ["decode", "--db", "x", "--stream", "s", "--inventory-id", "1", "--top-k", "many"],
    ["contrast-eval", "--contrast-config", "c.json", "--protocol", "heldout"],
])
def test_invalid_combinations(argv):
    with pytest.raises(UsageError):
        parse_args(argv)


# -- exit codes --------------------------------------------------------------

def test_exit_code_matrix(work, tmp_path, capsys):
    db = str(work / "bench.csv")
    empty = tmp_path / "empty.tsv"
    empty.write_text("")
    bad_cfg = tmp_path / "bad.json"
    bad_cfg.write_text("{not json")
    cases = [
        (["frobnicate"], 2),
        (["import", "--db", db, "--out", str(tmp_path / "x"), "--colour"], 2),
        (["decode", "--db", db, "--inventory-id", "1"], 2),
        (["import", "--config", str(tmp_path / "nope.json"), "--db", db, "--out", "x"], 2),
        (["import", "--config", str(bad_cfg), "--db", db, "--out", "x"], 2),
        (["decode", "--db", db, "--stream", str(empty), "--inventory-id", "1"], 1),
        (["import", "--db", str(tmp_path / "missing.csv"), "--out", str(tmp_path / "y")], 1),
        (["decode", "--db", db, "--stream", str(work / "streams" / "s0.tsv"), "--inventory-id", "999"], 2),
        (["decode", "--db", db, "--stream", str(work / "streams" / "s0.tsv"), "--inventory-id", "1"], 0),
    ]
    for argv, expected in cases:
        code, _, err = run(argv, capsys)
        assert code == expected, (argv, err)
        if code:
            assert "error" in json.loads(err.strip().splitlines()[-1])


def test_malformed_csv_is_domain_error(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("Phoneme,voice\np,+\n")
    code, _, err = run(["import", "--db", str(bad), "--out", str(tmp_path / "o")], capsys)
    assert code == 1
    assert "InventoryID" in json.loads(err)["message"]


def test_data_dir_env_resolves_relative_inputs(work, tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("PHONOTYPO_DATA_DIR", str(work))
    monkeypatch.chdir(tmp_path)
    code, out, _ = run(["nearest-langs", "--db", "tiny.csv", "--seed-language", "Alpha", "--k", "2"], capsys)
    assert code == 0
    assert [r["language"] for r in json.loads(out)["ranking"]] == ["Alpha", "Beta"]


# -- outputs and schemas -----------------------------------------------------

def test_every_subcommand_output_validates(work, tmp_path, capsys):
    db = str(work / "bench.csv")
    streams = str(work / "streams")
    runs = {
        "import": ["import", "--db", db, "--out", str(tmp_path / "db.bin")],
        "gen-stream": ["gen-stream", "--db", db, "--inventory-id", "5", "--frames", "12",
                       "--out", str(tmp_path / "g.tsv")],
        "decode": ["decode", "--db", db, "--stream", str(work / "streams" / "s0.tsv"),
                   "--inventory-id", "1", "--switch-penalty", "0.5"],
        "score-inventory": ["score-inventory", "--db", db, "--streams", streams, "--inventory-ids", "1", "5"],
        "induce": ["induce", "--db", db, "--streams", streams, "--seed-language", "a1", "--k", "3",
                   "--pool-size", "10"],
        "nearest-langs": ["nearest-langs", "--db", db, "--seed-language", "a1", "--k", "3"],
        "contrast-eval": ["contrast-eval", "--contrast-config", str(BENCH_JSON), "--languages",
                          "a1", "a2", "a3", "--mode", "synthetic"],
    }
    for name, argv in runs.items():
        code, out, err = run(argv, capsys)
        assert code == 0, (name, err)
        doc = json.loads(out)
        validate(name, doc)
        if name == "import":
            assert doc["inventories"] == 8
    # snapshot loads back as a database
    code, out, _ = run(["nearest-langs", "--db", str(tmp_path / "db.bin"), "--seed-language", "a1",
                        "--k", "1"], capsys)
    assert code == 0 and json.loads(out)["ranking"][0]["language"] == "a1"


def test_transfer_protocol_output(tmp_path, capsys):
    out = tmp_path / "t.json"
    code, _, _ = run(["contrast-eval", "--contrast-config", str(BENCH_JSON), "--protocol", "transfer",
                      "--out", str(out)], capsys)
    assert code == 0
    doc = json.loads(out.read_text())
    validate("contrast-eval", doc)
    assert doc["seed"] == 20201 and doc["shared"] >= 0.95
    validate("manifest", json.loads((tmp_path / "t.json.manifest.json").read_text()))


def test_gen_stream_truth_and_manifest(work):
    truth = json.loads((work / "truth0.json").read_text())
    validate("gen-stream", truth)
    man = json.loads((work / "streams" / "s0.tsv.manifest.json").read_text())
    validate("manifest", man)
    assert man["seeds"] == {"seed": 0}
    assert set(man["outputs"]) == {str(work / "streams" / "s0.tsv"), str(work / "truth0.json")}


def test_score_inventory_names_best(work, tmp_path, capsys):
    # streams come from inventory 1, so it must beat inventory 5
    code, out, _ = run(["score-inventory", "--db", str(work / "bench.csv"), "--streams",
                        str(work / "streams"), "--inventory-ids", "5", "1"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["best"] == "1" and doc["ranking"] == ["1", "5"]
    assert doc["n_streams"] == 2


# -- reproducibility -----------------------------------------------------------

def test_manifest_replay_is_byte_identical(work, tmp_path, capsys):
    first = tmp_path / "a.json"
    argv = ["induce", "--db", str(work / "bench.csv"), "--streams", str(work / "streams"),
            "--seed-language", "a1", "--k", "3", "--lambda", "0.3", "--out", str(first)]
    assert run(argv, capsys)[0] == 0
    manifest = tmp_path / "a.json.manifest.json"
    man = json.loads(manifest.read_text())
    validate("manifest", man)
    assert man["options"]["lambda"] == 0.3
    second = tmp_path / "b.json"
    assert run(["induce", "--config", str(manifest), "--out", str(second)], capsys)[0] == 0
    assert first.read_bytes() == second.read_bytes()
    man2 = json.loads((tmp_path / "b.json.manifest.json").read_text())
    assert man2["inputs"] == man["inputs"]
    assert {k: v for k, v in man2["options"].items() if k != "out"} == \
        {k: v for k, v in man["options"].items() if k != "out"}


def test_manifest_for_wrong_subcommand(work, tmp_path, capsys):
    out = tmp_path / "n.json"
    run(["nearest-langs", "--db", str(work / "tiny.csv"), "--seed-language", "Beta", "--out", str(out)], capsys)
    code, _, _ = run(["decode", "--config", str(tmp_path / "n.json.manifest.json")], capsys)
    assert code == 2


def test_atomic_write_replaces_and_keeps_mode(tmp_path):
    p = tmp_path / "f.txt"
    p.write_text("old")
    atomic_write(p, "new")
    assert p.read_text() == "new"
    assert [x.name for x in tmp_path.iterdir()] == ["f.txt"]
    umask = cli._umask()
    assert stat.S_IMODE(os.stat(p).st_mode) == 0o666 & ~umask


def test_atomic_write_leaves_target_on_failure(tmp_path, monkeypatch):
    p = tmp_path / "f.txt"
    p.write_text("old")

    def boom(*a):
        raise OSError("disk full")
    monkeypatch.setattr(os, "replace", boom)
    with pytest.raises(OSError):
        atomic_write(p, "new")
    assert p.read_text() == "old"
    assert [x.name for x in tmp_path.iterdir()] == ["f.txt"]


# -- real data ----------------------------------------------------------------

@pytest.fixture(scope="module")
def snapshot(tmp_path_factory):
    if not PHOIBLE.exists():
        pytest.skip("PHOIBLE file not available")
    path = tmp_path_factory.mktemp("snap") / "phoible.bin"
    assert main(["import", "--db", str(PHOIBLE), "--out", str(path), "--quiet"]) == 0
    return path


def test_nearest_langs_javanese(snapshot, capsys):
    code, out, _ = run(["nearest-langs", "--db", str(snapshot), "--seed-language", "Javanese", "--k", "5"],
                       capsys)
    doc = json.loads(out)
    validate("nearest-langs", doc)
    assert code == 0 and len(doc["ranking"]) == 5
    # values from a run on the ingested data
    assert [r["language"] for r in doc["ranking"][:3]] == ["Javanese", "Indonesian", "Standard Malay"]
    assert doc["ranking"][1]["score"] == pytest.approx(0.882, abs=1e-3)


def test_score_inventory_javanese(snapshot, tmp_path, capsys):
    for i in range(2):
        assert run(["gen-stream", "--db", str(snapshot), "--inventory-id", "1675", "--frames", "200",
                    "--seed", str(500 + i), "--out", str(tmp_path / f"s{i}.tsv")], capsys)[0] == 0
    code, out, _ = run(["score-inventory", "--db", str(snapshot), "--streams", str(tmp_path / "s0.tsv"),
                        str(tmp_path / "s1.tsv"), "--inventory-ids", "380", "1675"], capsys)
    doc = json.loads(out)
    validate("score-inventory", doc)
    assert code == 0 and doc["best"] == "1675"
