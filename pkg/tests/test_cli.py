import json
import os

import numpy as np
import pytest

from dkvc.cli import run_command
from dkvc.fileio import load_checkpoint, load_corpus, load_utterance, save_utterance
from dkvc.pipeline import Utterance


def write_pair(tmp_path, stem, n_src, n_tgt, seed):
    """One parallel utterance pair with voiced F0 and smooth-ish MCCs."""
    rng = np.random.default_rng(seed)
    base = rng.standard_normal(25)

    def make(n, shift):
        mcc = base + 0.3 * rng.standard_normal((n, 25)) + shift
        f0 = rng.uniform(100, 200, n)
        f0[rng.random(n) < 0.2] = 0.0
        return Utterance(
            sample_rate_hz=16000, frame_period_ms=5.0, f0_hz=f0, mcc=mcc
        )

    src = make(n_src, 0.0)
    tgt = make(n_tgt, 0.5)
    save_utterance(src, str(tmp_path / f"{stem}.src.vcfeat"))
    save_utterance(tgt, str(tmp_path / f"{stem}.tgt.vcfeat"))
    return src, tgt


class TestAlign:
    def test_writes_corpus(self, tmp_path):
        write_pair(tmp_path, "u1", 6, 8, seed=0)
        out = tmp_path / "corpus.json"
        code = run_command(
            [
                "align",
                str(tmp_path / "u1.src.vcfeat"),
                str(tmp_path / "u1.tgt.vcfeat"),
                "--out",
                str(out),
            ]
        )
        assert code == 0
        corpus = load_corpus(str(out))
        assert corpus.x.shape[1] == 24
        assert corpus.x.shape[0] >= 8

    def test_missing_file_exits_2(self, tmp_path, capsys):
        code = run_command(
            ["align", str(tmp_path / "no.vcfeat"), str(tmp_path / "no2.vcfeat"), "--out", str(tmp_path / "c.json")]
        )
        assert code == 2
        assert "error" in capsys.readouterr().err

    def test_missing_argument_exits_1(self, capsys):
        assert run_command(["align", "only_one.vcfeat"]) == 1
        capsys.readouterr()


class TestTrainConvertEvaluate:
    @pytest.fixture()
    def trained(self, tmp_path):
        for i in range(3):
            write_pair(tmp_path, f"u{i}", 10, 12, seed=10 + i)
        ckpt = tmp_path / "model.vcmodel"
        code = run_command(
            [
                "train",
                str(tmp_path),
                "--out",
                str(ckpt),
                "--epochs",
                "2",
                "--inducing",
                "8",
                "--layers",
                "24,16,6",
                "--seed",
                "3",
            ]
        )
        assert code == 0
        return tmp_path, ckpt

    def test_train_writes_loadable_checkpoint(self, trained):
        _, ckpt = trained
        model = load_checkpoint(str(ckpt))
        assert len(model.heads) == 24
        assert model.f0_source is not None

    def test_convert_roundtrip(self, trained, tmp_path):
        root, ckpt = trained
        out = tmp_path / "converted.vcfeat"
        code = run_command(
            ["convert", str(ckpt), str(root / "u0.src.vcfeat"), "--out", str(out)]
        )
        assert code == 0
        conv = load_utterance(str(out))
        src = load_utterance(str(root / "u0.src.vcfeat"))
        assert conv.mcc.shape == src.mcc.shape
        assert np.array_equal(conv.mcc[:, 0], src.mcc[:, 0])

    def test_evaluate_prints_mcd(self, trained, capsys):
        root, _ = trained
        code = run_command(
            ["evaluate", str(root / "u0.src.vcfeat"), str(root / "u0.tgt.vcfeat")]
        )
        assert code == 0
        value = float(capsys.readouterr().out.strip())
        assert value > 0.0

    def test_train_verbose_logs_epochs(self, tmp_path, capsys):
        for i in range(2):
            write_pair(tmp_path, f"v{i}", 8, 8, seed=20 + i)
        code = run_command(
            [
                "train",
                str(tmp_path),
                "--out",
                str(tmp_path / "m.vcmodel"),
                "--epochs",
                "2",
                "--inducing",
                "6",
                "--layers",
                "24,8,4",
                "--verbose",
            ]
        )
        assert code == 0
        lines = [l for l in capsys.readouterr().out.splitlines() if l.strip()]
        assert len(lines) >= 2

    def test_empty_dir_exits_2(self, tmp_path, capsys):
        empty = tmp_path / "empty"
        empty.mkdir()
        code = run_command(
            ["train", str(empty), "--out", str(tmp_path / "m.vcmodel")]
        )
        assert code == 2
        capsys.readouterr()


class TestSpectrum:
    def test_prints_requested_bins(self, tmp_path, capsys):
        rng = np.random.default_rng(1)
        utt = Utterance(
            sample_rate_hz=16000,
            frame_period_ms=5.0,
            f0_hz=np.array([120.0, 130.0]),
            mcc=rng.standard_normal((2, 25)),
        )
        path = tmp_path / "u.vcfeat"
        save_utterance(utt, str(path))
        code = run_command(["spectrum", str(path), "--frame", "1", "--bins", "17"])
        assert code == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 17
        first_omega = float(lines[0].split("\t")[0])
        last_omega = float(lines[-1].split("\t")[0])
        assert first_omega == 0.0
        assert last_omega == pytest.approx(np.pi, rel=1e-12)

    def test_frame_out_of_range_exits_2(self, tmp_path, capsys):
        rng = np.random.default_rng(2)
        utt = Utterance(
            sample_rate_hz=16000,
            frame_period_ms=5.0,
            f0_hz=np.array([120.0]),
            mcc=rng.standard_normal((1, 25)),
        )
        path = tmp_path / "u.vcfeat"
        save_utterance(utt, str(path))
        assert run_command(["spectrum", str(path), "--frame", "5"]) == 2
        capsys.readouterr()


class TestGradcheck:
    def test_reports_all_groups_below_tolerance(self, capsys):
        code = run_command(["gradcheck", "--seed", "0"])
        assert code == 0
        out = capsys.readouterr().out
        for group in ("net", "ard", "variational_mean", "chol_s", "inducing", "noise"):
            assert group in out
        assert "fail" not in out.lower()


class TestUsage:
    def test_no_command_exits_1(self, capsys):
        assert run_command([]) == 1
        capsys.readouterr()

    def test_unknown_command_exits_1(self, capsys):
        assert run_command(["frobnicate"]) == 1
        capsys.readouterr()

    def test_bad_config_json_exits_2(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text("{broken")
        write_pair(tmp_path, "w", 6, 6, seed=30)
        code = run_command(
            [
                "train",
                str(tmp_path),
                "--config",
                str(cfg),
                "--out",
                str(tmp_path / "m.vcmodel"),
            ]
        )
        assert code == 2
        capsys.readouterr()
