from __future__ import annotations

import json
from pathlib import Path

import pytest

from namegender import cli
from namegender.corpus import pairwise_overlap, read_table

DATA = Path(__file__).parent / "data"


def run(*argv: str) -> int:
    return cli.main(list(argv))


@pytest.fixture
def corpus_csv(tmp_path: Path) -> Path:
    path = tmp_path / "tiny.csv"
    path.write_text(
        "name,gender,count\n"
        "mary,F,95\nmary,M,5\n"
        "john,M,80\n"
        "pat,F,10\npat,M,10\n"
        "anna,F,40\n"
        "erik,M,30\n"
        "lisa,F,22\n"
        "omar,M,17\n"
        "ruth,F,9\n",
        encoding="utf-8",
    )
    return path


def ingest_tiny(corpus_csv: Path, out: Path) -> Path:
    assert run(
        "ingest", "--csv", str(corpus_csv),
        "--name-col", "name", "--gender-col", "gender", "--count-col", "count",
        "--source-id", "tiny", "--out-dir", str(out),
    ) == 0
    return out / "tiny.table.tsv"


# --- ingest ---------------------------------------------------------------------


def test_ingest_writes_table_report_and_manifest(corpus_csv, tmp_path):
    out = tmp_path / "out"
    table_path = ingest_tiny(corpus_csv, out)
    table = read_table(table_path)
    assert len(table) == 8
    report = (out / "tiny.ingest-report.tsv").read_text(encoding="utf-8")
    assert "retained\t10" in report
    manifest = json.loads((out / "ingest.manifest.json").read_text(encoding="utf-8"))
    assert str(corpus_csv) in manifest["input_digests"]
    assert manifest["tool_version"]


def test_ingest_ssa_directory(tmp_path):
    ssa = tmp_path / "ssa"
    ssa.mkdir()
    (ssa / "yob1990.txt").write_text("Mary,F,10\nJohn,M,8\n", encoding="utf-8")
    (ssa / "yob1991.txt").write_text("Mary,F,5\n", encoding="utf-8")
    out = tmp_path / "out"
    assert run("ingest", "--ssa-dir", str(ssa), "--years", "1990-1991", "--out-dir", str(out)) == 0
    table = read_table(out / "ssa1990-1991.table.tsv")
    assert table.entries["mary"].female == 15


def test_ingest_empty_corpus_exits_nonzero(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("name,gender\nX,F\n", encoding="utf-8")
    code = run("ingest", "--csv", str(bad), "--name-col", "name", "--gender-col", "gender",
               "--out-dir", str(tmp_path / "out"))
    assert code == 1
    assert "error" in capsys.readouterr().err


def test_ingest_malformed_file_names_first_bad_line(tmp_path, capsys):
    bad = tmp_path / "junk.csv"
    bad.write_text("name,gender,count\nonly-one-field\nalso-bad\n", encoding="utf-8")
    code = run("ingest", "--csv", str(bad), "--name-col", "name", "--gender-col", "gender",
               "--count-col", "count", "--out-dir", str(tmp_path / "out"))
    assert code == 1
    err = capsys.readouterr().err
    assert "line 2" in err


def test_ingest_missing_file_exits_nonzero(tmp_path):
    assert run("ingest", "--csv", str(tmp_path / "none.csv"), "--name-col", "n",
               "--gender-col", "g", "--out-dir", str(tmp_path)) == 1


# --- combine and stats ------------------------------------------------------------


def test_combine_merges_tables(corpus_csv, tmp_path):
    out = tmp_path / "out"
    table_path = ingest_tiny(corpus_csv, out)
    assert run("combine", str(table_path), str(table_path), "--id", "both",
               "--out-dir", str(out)) == 0
    merged = read_table(out / "both.table.tsv")
    assert merged.entries["mary"].female == 190


def test_combine_full_table_requires_split_flag(tmp_path):
    full = tmp_path / "full.table.tsv"
    full.write_text("# name_type=full\tsource_id=v\nmaria garcia\t2\t0\n", encoding="utf-8")
    assert run("combine", str(full), str(full), "--out-dir", str(tmp_path)) == 1
    assert run("combine", str(full), str(full), "--split-full", "--id", "c",
               "--out-dir", str(tmp_path)) == 0
    merged = read_table(tmp_path / "c.table.tsv")
    assert merged.entries["maria"].female == 4


def test_stats_overlap_matches_library_oracle(corpus_csv, tmp_path):
    out = tmp_path / "out"
    t1 = ingest_tiny(corpus_csv, out)
    other = tmp_path / "other.csv"
    other.write_text("name,gender,count\nmary,F,3\nzoe,F,2\n", encoding="utf-8")
    assert run("ingest", "--csv", str(other), "--name-col", "name", "--gender-col", "gender",
               "--count-col", "count", "--source-id", "mini", "--out-dir", str(out)) == 0
    t2 = out / "mini.table.tsv"
    assert run("stats", str(t1), str(t2), "--bins", "4", "--out-dir", str(out)) == 0

    matrix = pairwise_overlap([read_table(t1), read_table(t2)])
    overlap_lines = (out / "overlap.tsv").read_text(encoding="utf-8").splitlines()
    assert overlap_lines[1].split("\t")[2] == f"{matrix[0][1][0]} ({matrix[0][1][1]:.1f}%)"
    assert overlap_lines[2].split("\t")[1] == f"{matrix[1][0][0]} ({matrix[1][0][1]:.1f}%)"

    stats_lines = (out / "stats.tsv").read_text(encoding="utf-8").splitlines()
    assert stats_lines[1].split("\t")[3] == "8"  # tiny: unique names
    assert (out / "ambiguity-tiny.tsv").exists()
    assert not (out / "ambiguity-mini.tsv").exists()  # mini has no ambiguous names


def test_stats_structured_format(corpus_csv, tmp_path):
    out = tmp_path / "out"
    table_path = ingest_tiny(corpus_csv, out)
    assert run("stats", str(table_path), "--format", "structured", "--out-dir", str(out)) == 0
    document = json.loads((out / "stats.json").read_text(encoding="utf-8"))
    assert document["datasets"][0]["unique_names"] == 8
    assert document["datasets"][0]["ambiguous"] == 2  # mary (95,5) and pat (10,10)


# --- split / train / infer -----------------------------------------------------------


def test_split_requires_seed(corpus_csv, tmp_path, capsys):
    out = tmp_path / "out"
    table_path = ingest_tiny(corpus_csv, out)
    assert run("split", str(table_path), "--test-fraction", "0.3", "--out-dir", str(out)) == 1
    assert "seed" in capsys.readouterr().err


def test_split_train_infer_round(corpus_csv, tmp_path, capsys):
    out = tmp_path / "out"
    table_path = ingest_tiny(corpus_csv, out)
    assert run("split", str(table_path), "--test-fraction", "0.3", "--seed", "11",
               "--out-dir", str(out)) == 0
    assert run("train", str(out / "tiny-train.table.tsv"), "--tau", "0.9",
               "--out-dir", str(out)) == 0
    names = tmp_path / "names.txt"
    names.write_text("mary\nnobody\n", encoding="utf-8")
    capsys.readouterr()
    assert run("infer", str(names), "--model", str(out / "tiny-train.model.tsv")) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "name\tlabel\tp_female\tsource"
    assert len(lines) == 3
    assert lines[2].startswith("nobody\tunknown\tNA")


def test_infer_prediction_matches_model_counts(tmp_path, capsys):
    # model counts (95, 5) force p_female = 0.95 -> female at tau 0.9
    table = tmp_path / "t.table.tsv"
    table.write_text("# name_type=first\tsource_id=t\nmary\t95\t5\n", encoding="utf-8")
    out = tmp_path / "out"
    assert run("train", str(table), "--tau", "0.9", "--out-dir", str(out)) == 0
    names = tmp_path / "names.txt"
    names.write_text("mary\n", encoding="utf-8")
    capsys.readouterr()
    assert run("infer", str(names), "--model", str(out / "t.model.tsv")) == 0
    line = capsys.readouterr().out.splitlines()[1]
    assert line == "mary\tfemale\t0.950000\tmle:t"


def test_infer_stdin_matches_file_input(tmp_path, capsys, monkeypatch):
    table = tmp_path / "t.table.tsv"
    table.write_text("# name_type=first\tsource_id=t\nmary\t95\t5\nkim\t2\t2\n", encoding="utf-8")
    out = tmp_path / "out"
    assert run("train", str(table), "--out-dir", str(out)) == 0
    model = str(out / "t.model.tsv")
    names = tmp_path / "names.txt"
    names.write_text("mary\nkim\nzzz\n", encoding="utf-8")
    capsys.readouterr()
    assert run("infer", str(names), "--model", model) == 0
    from_file = capsys.readouterr().out

    import io
    monkeypatch.setattr("sys.stdin", io.StringIO("mary\nkim\nzzz\n"))
    assert run("infer", "-", "--model", model) == 0
    from_stdin = capsys.readouterr().out
    assert from_stdin == from_file


def test_infer_structured_output(tmp_path, capsys):
    table = tmp_path / "t.table.tsv"
    table.write_text("# name_type=first\tsource_id=t\nmary\t95\t5\n", encoding="utf-8")
    out = tmp_path / "out"
    assert run("train", str(table), "--out-dir", str(out)) == 0
    names = tmp_path / "names.txt"
    names.write_text("mary\n", encoding="utf-8")
    capsys.readouterr()
    assert run("infer", str(names), "--model", str(out / "t.model.tsv"),
               "--format", "structured") == 0
    record = json.loads(capsys.readouterr().out.splitlines()[0])
    assert record == {"label": "female", "name": "mary", "p_female": 0.95, "source": "mle:t"}


# --- eval / analyze -------------------------------------------------------------------


def write_testset_file(path: Path, pairs) -> None:
    lines = ["# testset=demo"] + [f"{n}\t{g}" for n, g in pairs]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_mock_file(path: Path, mapping) -> None:
    path.write_text(json.dumps(mapping), encoding="utf-8")


def test_eval_with_mock_matches_hand_fixture(tmp_path):
    testset = tmp_path / "demo.test.tsv"
    write_testset_file(testset, [("ana", "female"), ("bea", "female"), ("carl", "male"), ("dan", "male")])
    mock = tmp_path / "mock.json"
    write_mock_file(mock, {
        "ana": {"label": "female", "p_female": 0.9},
        "bea": {"label": "male", "p_female": 0.2},
        "carl": {"label": "male", "p_female": 0.1},
    })
    out = tmp_path / "out"
    assert run("eval", "--test", str(testset), "--inferrer", f"m=mock:{mock}",
               "--out-dir", str(out)) == 0
    lines = (out / "report.tsv").read_text(encoding="utf-8").splitlines()
    # hand fixture: TF=1 TM=1 FM=1 undecided=1 -> acc 50, prec 100, rec 50, f1 66.67, gbe -33.33
    assert lines[1] == "m\tdemo\t4\t50.00\t100.00\t50.00\t66.67\t-33.33"


def test_eval_na_flag_marks_cells(tmp_path):
    testset = tmp_path / "demo.test.tsv"
    write_testset_file(testset, [("ana", "female")])
    mock = tmp_path / "mock.json"
    write_mock_file(mock, {"ana": {"label": "female", "p_female": 1.0}})
    out = tmp_path / "out"
    assert run("eval", "--test", str(testset), "--inferrer", f"m=mock:{mock}",
               "--na", "m=demo", "--out-dir", str(out)) == 0
    lines = (out / "report.tsv").read_text(encoding="utf-8").splitlines()
    assert lines[1] == "m\tdemo\t1\tNA\tNA\tNA\tNA\tNA"


def test_eval_structured_format(tmp_path):
    testset = tmp_path / "demo.test.tsv"
    write_testset_file(testset, [("ana", "female")])
    mock = tmp_path / "mock.json"
    write_mock_file(mock, {"ana": {"label": "female", "p_female": 1.0}})
    out = tmp_path / "out"
    assert run("eval", "--test", str(testset), "--inferrer", f"m=mock:{mock}",
               "--format", "structured", "--out-dir", str(out)) == 0
    document = json.loads((out / "report.json").read_text(encoding="utf-8"))
    assert document["records"][0]["accuracy"] == 100.0


def test_eval_twostage_spec_and_tie_notes(tmp_path):
    model_table = tmp_path / "m.table.tsv"
    model_table.write_text(
        "# name_type=first\tsource_id=m\nana\t99\t1\npat\t5\t5\n", encoding="utf-8"
    )
    out = tmp_path / "out"
    assert run("train", str(model_table), "--tau", "0.9", "--out-dir", str(out)) == 0
    for i, label in enumerate(("female", "male", "female")):
        write_mock_file(tmp_path / f"v{i}.json", {"pat": {"label": label, "p_female": 0.9 if label == "female" else 0.1}})
    ensemble = tmp_path / "ens.conf"
    ensemble.write_text(
        "\n".join([
            "id = hybrid",
            f"model = {out / 'm.model.tsv'}",
            "band = 0.25, 0.75",
            f"voters = a=mock:{tmp_path}/v0.json; b=mock:{tmp_path}/v1.json; c=mock:{tmp_path}/v2.json",
        ]) + "\n",
        encoding="utf-8",
    )
    testset = tmp_path / "demo.test.tsv"
    write_testset_file(testset, [("ana", "female"), ("pat", "female")])
    assert run("eval", "--test", str(testset), "--inferrer", f"twostage:{ensemble}",
               "--out-dir", str(out)) == 0
    lines = (out / "report.tsv").read_text(encoding="utf-8").splitlines()
    # ana answered by stage 1, pat by 2:1 vote -> both correct
    assert lines[1].startswith("hybrid\tdemo\t2\t100.00")


def test_eval_reports_vote_ties(tmp_path):
    model_table = tmp_path / "m.table.tsv"
    model_table.write_text("# name_type=first\tsource_id=m\npat\t5\t5\n", encoding="utf-8")
    out = tmp_path / "out"
    assert run("train", str(model_table), "--out-dir", str(out)) == 0
    write_mock_file(tmp_path / "v0.json", {"pat": {"label": "female", "p_female": 0.9}})
    write_mock_file(tmp_path / "v1.json", {"pat": {"label": "male", "p_female": 0.1}})
    write_mock_file(tmp_path / "v2.json", {})
    ensemble = tmp_path / "ens.conf"
    ensemble.write_text(
        "\n".join([
            "id = hybrid",
            f"model = {out / 'm.model.tsv'}",
            f"voters = a=mock:{tmp_path}/v0.json; b=mock:{tmp_path}/v1.json; c=mock:{tmp_path}/v2.json",
        ]) + "\n",
        encoding="utf-8",
    )
    testset = tmp_path / "demo.test.tsv"
    write_testset_file(testset, [("pat", "female")])
    assert run("eval", "--test", str(testset), "--inferrer", f"twostage:{ensemble}",
               "--out-dir", str(out)) == 0
    assert "hybrid: vote ties = 1" in (out / "report.txt").read_text(encoding="utf-8")


def test_analyze_exports(tmp_path):
    testset = tmp_path / "demo.test.tsv"
    write_testset_file(testset, [("ana", "female"), ("josé", "male"), ("bo", "male")])
    mock = tmp_path / "mock.json"
    write_mock_file(mock, {
        "ana": {"label": "female", "p_female": 0.9},
        "josé": {"label": "female", "p_female": 0.8},
        "bo": {"label": "male", "p_female": 0.1},
    })
    out = tmp_path / "out"
    assert run("analyze", "--test", str(testset), "--inferrer", f"m=mock:{mock}",
               "--out-dir", str(out)) == 0
    lengths = (out / "lengths.tsv").read_text(encoding="utf-8")
    assert "TF\t3\t100.0000" in lengths
    non_english = (out / "non_english.tsv").read_text(encoding="utf-8").splitlines()
    assert "FF\t1\t100.0000" in non_english
    assert (out / "bigrams.tsv").exists()
    assert (out / "trigrams.tsv").exists()


# --- reproducibility and config --------------------------------------------------------


def test_pipeline_outputs_byte_reproducible(corpus_csv, tmp_path):
    outputs = []
    for run_dir in ("r1", "r2"):
        out = tmp_path / run_dir
        table_path = ingest_tiny(corpus_csv, out)
        assert run("split", str(table_path), "--test-fraction", "0.3", "--seed", "5",
                   "--out-dir", str(out)) == 0
        assert run("train", str(out / "tiny-train.table.tsv"), "--out-dir", str(out)) == 0
        blob = b"".join(
            (out / name).read_bytes()
            for name in ("tiny.table.tsv", "tiny-train.table.tsv", "tiny.test.tsv",
                         "tiny.ties.txt", "tiny-train.model.tsv")
        )
        outputs.append(blob)
    assert outputs[0] == outputs[1]


def test_config_file_supplies_defaults(corpus_csv, tmp_path):
    out = tmp_path / "out"
    table_path = ingest_tiny(corpus_csv, out)
    config = tmp_path / "defaults.conf"
    config.write_text("seed = 11\ntest-fraction = 0.3\n", encoding="utf-8")
    assert run("split", str(table_path), "--config", str(config), "--out-dir", str(out)) == 0
    manifest = json.loads((out / "split.manifest.json").read_text(encoding="utf-8"))
    assert manifest["seed"] == 11


def test_config_rejects_unknown_keys(corpus_csv, tmp_path, capsys):
    out = tmp_path / "out"
    table_path = ingest_tiny(corpus_csv, out)
    config = tmp_path / "defaults.conf"
    config.write_text("bogus = 1\n", encoding="utf-8")
    assert run("split", str(table_path), "--config", str(config), "--seed", "1",
               "--out-dir", str(out)) == 1
    assert "bogus" in capsys.readouterr().err


def test_unknown_inferrer_kind_rejected(tmp_path, capsys):
    testset = tmp_path / "demo.test.tsv"
    write_testset_file(testset, [("ana", "female")])
    assert run("eval", "--test", str(testset), "--inferrer", "nope:x",
               "--out-dir", str(tmp_path)) == 1
    assert "unknown inferrer kind" in capsys.readouterr().err
