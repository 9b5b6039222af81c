import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from dkvc.errors import DataError
from dkvc.fileio import (
    load_checkpoint,
    load_config,
    load_corpus,
    load_utterance,
    save_checkpoint,
    save_config,
    save_corpus,
    save_utterance,
)
from dkvc.kernels import ArdKernelParams
from dkvc.net import init_net
from dkvc.pipeline import AlignedCorpus, F0Stats, Utterance
from dkvc.svgp import SvdklModel, SvgpHead, VariationalState, predict
from dkvc.trainer import TrainConfig


def sample_utterance(seed=0, frames=4, with_ap=False):
    rng = np.random.default_rng(seed)
    f0 = rng.uniform(80, 240, frames)
    f0[::3] = 0.0
    return Utterance(
        sample_rate_hz=16000,
        frame_period_ms=5.0,
        f0_hz=f0,
        mcc=rng.standard_normal((frames, 25)),
        aperiodicity=[[0.1, 0.2]] * frames if with_ap else None,
    )


def sample_model(seed=0, d_in=3, q=2, n_heads=2, m=4):
    rng = np.random.default_rng(seed)
    network = init_net([d_in, 5, q], seed=seed)
    kernel = ArdKernelParams(np.log(1.3), np.log(rng.uniform(0.5, 2.0, q)))
    heads = []
    for _ in range(n_heads):
        z = rng.standard_normal((m, q))
        raw = 0.2 * rng.standard_normal((m, m))
        chol = np.tril(raw, -1) + np.diag(np.exp(np.diag(raw)))
        heads.append(
            SvgpHead(VariationalState(z, rng.standard_normal(m), chol), float(np.log(0.15)))
        )
    return SvdklModel(
        net=network,
        kernel=kernel,
        heads=heads,
        input_mean=rng.standard_normal(d_in),
        input_scale=np.abs(rng.standard_normal(d_in)) + 0.5,
        output_centers=rng.standard_normal(n_heads),
        f0_source=F0Stats(4.6, 0.2, 11),
        f0_target=F0Stats(5.0, 0.3, 13),
    )


class TestUtteranceRoundTrip:
    def test_all_fields_identical(self, tmp_path):
        utt = sample_utterance(with_ap=True)
        path = str(tmp_path / "utt.json")
        save_utterance(utt, path)
        back = load_utterance(path)
        assert back.sample_rate_hz == utt.sample_rate_hz
        assert back.frame_period_ms == utt.frame_period_ms
        assert np.array_equal(back.f0_hz, utt.f0_hz)
        assert np.array_equal(back.mcc, utt.mcc)
        assert back.aperiodicity == utt.aperiodicity

    def test_missing_aperiodicity_stays_none(self, tmp_path):
        path = str(tmp_path / "utt.json")
        save_utterance(sample_utterance(), path)
        assert load_utterance(path).aperiodicity is None

    def test_unknown_key_rejected_by_name(self, tmp_path):
        path = str(tmp_path / "utt.json")
        save_utterance(sample_utterance(), path)
        doc = json.load(open(path))
        doc["surprise"] = 1
        json.dump(doc, open(path, "w"))
        with pytest.raises(DataError, match="surprise"):
            load_utterance(path)

    def test_missing_key_rejected(self, tmp_path):
        path = str(tmp_path / "utt.json")
        save_utterance(sample_utterance(), path)
        doc = json.load(open(path))
        del doc["f0_hz"]
        json.dump(doc, open(path, "w"))
        with pytest.raises(DataError, match="f0_hz"):
            load_utterance(path)

    def test_short_mcc_row_names_the_row(self, tmp_path):
        path = str(tmp_path / "utt.json")
        save_utterance(sample_utterance(), path)
        doc = json.load(open(path))
        doc["mcc"][2] = doc["mcc"][2][:24]
        doc["f0_hz"] = doc["f0_hz"]
        json.dump(doc, open(path, "w"))
        with pytest.raises(DataError, match="2"):
            load_utterance(path)

    def test_f0_mcc_length_mismatch_rejected(self, tmp_path):
        path = str(tmp_path / "utt.json")
        save_utterance(sample_utterance(), path)
        doc = json.load(open(path))
        doc["f0_hz"] = doc["f0_hz"][:-1]
        json.dump(doc, open(path, "w"))
        with pytest.raises(DataError):
            load_utterance(path)

    def test_malformed_json_is_data_error(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(DataError):
            load_utterance(str(path))

    def test_missing_file_is_data_error(self, tmp_path):
        with pytest.raises(DataError):
            load_utterance(str(tmp_path / "absent.json"))

    def test_version_mismatch_rejected(self, tmp_path):
        path = str(tmp_path / "utt.json")
        save_utterance(sample_utterance(), path)
        doc = json.load(open(path))
        doc["version"] = 99
        json.dump(doc, open(path, "w"))
        with pytest.raises(DataError, match="version"):
            load_utterance(path)


class TestCorpusRoundTrip:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        corpus = AlignedCorpus(
            x=rng.standard_normal((6, 24)),
            y=rng.standard_normal((6, 24)),
            provenance=[(0, i, i) for i in range(6)],
        )
        path = str(tmp_path / "corpus.json")
        save_corpus(corpus, path)
        back = load_corpus(path)
        assert np.array_equal(back.x, corpus.x)
        assert np.array_equal(back.y, corpus.y)
        assert [tuple(p) for p in back.provenance] == corpus.provenance

    def test_row_count_mismatch_rejected(self, tmp_path):
        rng = np.random.default_rng(2)
        corpus = AlignedCorpus(
            x=rng.standard_normal((3, 24)),
            y=rng.standard_normal((3, 24)),
            provenance=[(0, i, i) for i in range(3)],
        )
        path = str(tmp_path / "corpus.json")
        save_corpus(corpus, path)
        doc = json.load(open(path))
        doc["y"] = doc["y"][:-1]
        json.dump(doc, open(path, "w"))
        with pytest.raises(DataError):
            load_corpus(path)


class TestConfigRoundTrip:
    def test_round_trip(self, tmp_path):
        cfg = TrainConfig(
            layer_sizes=[24, 128, 8],
            epochs=7,
            batch_size=64,
            step_size=0.02,
            net_step_size=0.002,
            inducing_count=50,
            pretrain_epochs=3,
            seed=42,
        )
        path = str(tmp_path / "cfg.json")
        save_config(cfg, path)
        back = load_config(path)
        assert back == cfg

    def test_unknown_key_rejected(self, tmp_path):
        path = str(tmp_path / "cfg.json")
        save_config(TrainConfig(layer_sizes=[4, 2]), path)
        doc = json.load(open(path))
        doc["momentum"] = 0.9
        json.dump(doc, open(path, "w"))
        with pytest.raises(DataError, match="momentum"):
            load_config(path)

    def test_partial_config_uses_defaults(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"layer_sizes": [24, 100, 8], "epochs": 3}))
        cfg = load_config(str(path))
        assert cfg.epochs == 3
        assert cfg.batch_size == TrainConfig(layer_sizes=[1, 1]).batch_size


class TestCheckpointRoundTrip:
    def test_predictions_bitwise_identical(self, tmp_path):
        model = sample_model()
        path = str(tmp_path / "model.json")
        save_checkpoint(model, path)
        back = load_checkpoint(path)
        rng = np.random.default_rng(3)
        x = rng.standard_normal((5, 3))
        for a, b in zip(predict(model, x), predict(back, x)):
            assert np.array_equal(a.mean, b.mean)
            assert np.array_equal(a.variance, b.variance)

    def test_save_is_deterministic(self, tmp_path):
        model = sample_model()
        p1 = tmp_path / "a.json"
        p2 = tmp_path / "b.json"
        save_checkpoint(model, str(p1))
        save_checkpoint(model, str(p2))
        assert p1.read_bytes() == p2.read_bytes()

    def test_f0_stats_survive(self, tmp_path):
        model = sample_model()
        path = str(tmp_path / "model.json")
        save_checkpoint(model, path)
        back = load_checkpoint(path)
        assert back.f0_source == model.f0_source
        assert back.f0_target == model.f0_target

    def test_unknown_key_rejected(self, tmp_path):
        path = str(tmp_path / "model.json")
        save_checkpoint(sample_model(), path)
        doc = json.load(open(path))
        doc["extra_block"] = {}
        json.dump(doc, open(path, "w"))
        with pytest.raises(DataError, match="extra_block"):
            load_checkpoint(path)

    def test_inconsistent_head_shapes_rejected(self, tmp_path):
        path = str(tmp_path / "model.json")
        save_checkpoint(sample_model(), path)
        doc = json.load(open(path))
        doc["heads"][0]["mean"] = doc["heads"][0]["mean"][:-1]
        json.dump(doc, open(path, "w"))
        with pytest.raises(DataError):
            load_checkpoint(path)

    def test_single_head_checkpoint_accepted(self, tmp_path):
        model = sample_model(n_heads=1)
        path = str(tmp_path / "model.json")
        save_checkpoint(model, path)
        back = load_checkpoint(path)
        assert len(back.heads) == 1

    def test_atomic_write_leaves_no_temp_files(self, tmp_path):
        save_checkpoint(sample_model(), str(tmp_path / "model.json"))
        leftovers = [p for p in tmp_path.iterdir() if p.name != "model.json"]
        assert leftovers == []

    def test_kernel_params_survive_exactly(self, tmp_path):
        model = sample_model()
        path = str(tmp_path / "model.json")
        save_checkpoint(model, path)
        back = load_checkpoint(path)
        assert np.array_equal(
            back.kernel.log_length_scales, model.kernel.log_length_scales
        )
        assert back.kernel.log_signal_variance == model.kernel.log_signal_variance
        assert back.jitter_base == model.jitter_base
        assert back.warp_alpha == model.warp_alpha
