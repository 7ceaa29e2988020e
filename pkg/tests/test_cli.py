import json
import subprocess
import sys

import numpy as np
import pytest

from topickd.cli import main


def run_cli(*argv):
    return main([str(a) for a in argv])


def train_args(corpus_dir, out, **extra):
    args = ["train", "--corpus-dir", corpus_dir, "--out", out,
            "--k", "4", "--hidden-dim", "6", "--epochs", "2",
            "--batch-size", "8", "--seed", "1", "--restarts", "1",
            "--lambda", "0"]
    for key, value in extra.items():
        args.extend([f"--{key}", str(value)])
    return args


class TestTrainCommand:
    def test_smoke(self, corpus_dir, tmp_path, capsys):
        out = tmp_path / "run"
        assert run_cli(*train_args(corpus_dir, out, epochs=5)) == 0
        lines = (out / "run-1" / "metrics.jsonl").read_text().splitlines()
        assert len(lines) == 5
        assert (out / "resolved_config.json").exists()
        assert (out / "aggregate.json").exists()
        summary = json.loads(capsys.readouterr().out)
        assert "mean_dev_npmi" in summary

    def test_lambda_without_teacher_exits_2(self, corpus_dir, tmp_path, capsys):
        code = run_cli("train", "--corpus-dir", corpus_dir,
                       "--out", tmp_path / "x", "--k", "4",
                       "--epochs", "1", "--lambda", "0.75")
        assert code == 2
        assert "--teacher-logits" in capsys.readouterr().err

    def test_deterministic_metrics(self, corpus_dir, tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert run_cli(*train_args(corpus_dir, out_a)) == 0
        assert run_cli(*train_args(corpus_dir, out_b)) == 0
        assert (out_a / "run-1" / "metrics.jsonl").read_bytes() == \
               (out_b / "run-1" / "metrics.jsonl").read_bytes()

    def test_config_file_with_flag_override(self, corpus_dir, tmp_path):
        cfg_file = tmp_path / "cfg.json"
        cfg_file.write_text(json.dumps({"epochs": 3, "n_topics": 4,
                                        "kd_lambda": 0.0, "restarts": 1,
                                        "hidden_dim": 6}))
        out = tmp_path / "run"
        code = run_cli("train", "--corpus-dir", corpus_dir, "--out", out,
                       "--config", cfg_file, "--epochs", "2")
        assert code == 0
        resolved = json.loads((out / "resolved_config.json").read_text())
        assert resolved["epochs"] == 2  # flag wins
        assert resolved["n_topics"] == 4  # from file
        lines = (out / "run-1" / "metrics.jsonl").read_text().splitlines()
        assert len(lines) == 2

    def test_unknown_config_key_rejected(self, corpus_dir, tmp_path):
        cfg_file = tmp_path / "cfg.json"
        cfg_file.write_text(json.dumps({"learning_rat": 0.1}))
        assert run_cli("train", "--corpus-dir", corpus_dir,
                       "--out", tmp_path / "x", "--config", cfg_file) == 2

    def test_missing_corpus_exits_3(self, tmp_path):
        assert run_cli(*train_args(tmp_path / "nowhere", tmp_path / "x")) == 3

    def test_unknown_flag_exits_2(self, corpus_dir, tmp_path):
        with pytest.raises(SystemExit) as exc:
            run_cli("train", "--corpus-dir", corpus_dir,
                    "--out", tmp_path / "x", "--frobnicate", "7")
        assert exc.value.code == 2


class TestTeacherCommands:
    def test_surrogate_then_check_then_train(self, corpus_dir, tmp_path, capsys):
        logits = tmp_path / "teacher.batl"
        assert run_cli("surrogate-teacher", "--corpus-dir", corpus_dir,
                       "--split", "train", "--smoothing", "0.01",
                       "--out", logits) == 0
        info = json.loads(capsys.readouterr().out)
        assert info["docs"] == 24 and info["vocab"] == 30

        assert run_cli("check-teacher", "--teacher-logits", logits,
                       "--corpus-dir", corpus_dir, "--split", "train",
                       "--out-dir", tmp_path) == 0
        assert json.loads(capsys.readouterr().out)["aligned"] is True

        out = tmp_path / "kd-run"
        code = run_cli(
            "train", "--corpus-dir", corpus_dir, "--out", out, "--k", "4",
            "--hidden-dim", "6", "--epochs", "2", "--batch-size", "8",
            "--seed", "1", "--restarts", "1", "--lambda", "0.75",
            "--temp", "2.0", "--teacher-logits", logits)
        assert code == 0

    def test_check_teacher_mismatch_exits_3(self, corpus_dir, tmp_path, capsys):
        from topickd.distill import TeacherLogits, save_teacher_logits
        bad = tmp_path / "bad.batl"
        save_teacher_logits(bad, TeacherLogits(rows=np.zeros((3, 30))))
        assert run_cli("check-teacher", "--teacher-logits", bad,
                       "--corpus-dir", corpus_dir, "--out-dir", tmp_path) == 3


@pytest.fixture()
def trained_checkpoint(corpus_dir, tmp_path):
    out = tmp_path / "trained"
    assert run_cli(*train_args(corpus_dir, out, epochs=3)) == 0
    return out / "run-1" / "checkpoint.batm"


class TestEvalCommand:
    def test_report_on_two_splits(self, corpus_dir, trained_checkpoint,
                                  tmp_path, capsys):
        for split in ("dev", "test"):
            out_dir = tmp_path / f"eval-{split}"
            assert run_cli("eval", "--model", trained_checkpoint,
                           "--corpus-dir", corpus_dir, "--split", split,
                           "--out-dir", out_dir) == 0
            report = json.loads(capsys.readouterr().out)
            assert set(report) == {"topics", "mean_npmi", "redundant_pairs",
                                   "perplexity"}
            on_disk = json.loads((out_dir / "report.json").read_text())
            assert on_disk == report
            assert (out_dir / "resolved_config.json").exists()

    def test_external_counts_add_field(self, corpus_dir, trained_checkpoint,
                                       tmp_path, capsys):
        ext = tmp_path / "ext.json"
        ext.write_text(json.dumps({"doc_count": 50,
                                   "df": {"w00000": 10, "w00001": 10},
                                   "joint": [["w00000", "w00001", 5]]}))
        assert run_cli("eval", "--model", trained_checkpoint,
                       "--corpus-dir", corpus_dir, "--split", "dev",
                       "--external-counts", ext,
                       "--out-dir", tmp_path / "e") == 0
        report = json.loads(capsys.readouterr().out)
        assert "external_npmi" in report

    def test_corrupted_checkpoint_exits_3(self, corpus_dir, tmp_path, capsys):
        bad = tmp_path / "bad.batm"
        bad.write_bytes(b"BATM" + b"\x01\x00\x00\x00" + b"\xff" * 8)
        assert run_cli("eval", "--model", bad, "--corpus-dir", corpus_dir,
                       "--out-dir", tmp_path) == 3
        assert "data error" in capsys.readouterr().err


class TestAlignCommand:
    def test_self_alignment(self, corpus_dir, trained_checkpoint, tmp_path,
                            capsys):
        assert run_cli("align", "--model-a", trained_checkpoint,
                       "--model-b", trained_checkpoint,
                       "--corpus-dir", corpus_dir, "--split", "dev",
                       "--out-dir", tmp_path / "al") == 0
        report = json.loads(capsys.readouterr().out)
        assert all(p["jsd"] < 1e-10 for p in report["pairs"])
        wins = report["wins"]
        assert wins["a"] == 0 and wins["b"] == 0
        assert wins["ties"] == len(report["pairs"]) == report["threshold"]

    def test_threshold_and_brackets(self, corpus_dir, trained_checkpoint,
                                    tmp_path, capsys):
        assert run_cli("align", "--model-a", trained_checkpoint,
                       "--model-b", trained_checkpoint,
                       "--corpus-dir", corpus_dir, "--split", "dev",
                       "--threshold", "2", "--brackets", "4",
                       "--per-bracket", "1", "--seed", "7",
                       "--out-dir", tmp_path / "al") == 0
        report = json.loads(capsys.readouterr().out)
        assert report["threshold"] == 2
        assert len(report["bracket_sample"]) == 4

    def test_table_rendering(self, corpus_dir, trained_checkpoint, tmp_path,
                             capsys):
        assert run_cli("align", "--model-a", trained_checkpoint,
                       "--model-b", trained_checkpoint,
                       "--corpus-dir", corpus_dir, "--split", "dev",
                       "--table", "--out-dir", tmp_path / "al") == 0
        out = capsys.readouterr().out
        assert "wins:" in out
        assert (tmp_path / "al" / "alignment.json").exists()

    def test_vocab_mismatch_exits_3(self, corpus_dir, trained_checkpoint,
                                    tmp_path):
        from topickd.model import load_checkpoint, save_checkpoint
        params = load_checkpoint(trained_checkpoint)
        params.hyper.vocab_size = 29
        params.topics = params.topics[:, :29]
        params.background = params.background[:29]
        params.w_hidden = params.w_hidden[:, :29]
        other = tmp_path / "other.batm"
        save_checkpoint(other, params)
        assert run_cli("align", "--model-a", trained_checkpoint,
                       "--model-b", other, "--corpus-dir", corpus_dir,
                       "--out-dir", tmp_path) == 3


class TestTopicsCommand:
    def test_listing(self, corpus_dir, trained_checkpoint, tmp_path, capsys):
        assert run_cli("topics", "--model", trained_checkpoint,
                       "--corpus-dir", corpus_dir, "--n", "5",
                       "--out-dir", tmp_path / "t") == 0
        report = json.loads(capsys.readouterr().out)
        assert len(report["topics"]) == 4
        assert all(len(t["words"]) == 5 for t in report["topics"])


def test_console_entry_point(corpus_dir, tmp_path):
    result = subprocess.run(
        [sys.executable, "-m", "topickd.cli", "train",
         "--corpus-dir", str(corpus_dir), "--out", str(tmp_path / "o"),
         "--k", "4", "--hidden-dim", "6", "--epochs", "1", "--lambda", "0",
         "--restarts", "1"],
        capture_output=True, text=True)
    assert result.returncode == 0, result.stderr
    assert "mean_dev_npmi" in result.stdout
