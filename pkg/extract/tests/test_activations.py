import numpy as np
import pytest
import torch

from hemitrace_extract.activations import dump_activations, read_words
from hemitrace_extract.checkpoint import load_checkpoint
from hemitrace_extract import formats

WORDS = ["Alice", "was", "reading", "a", "book", "near", "the", "window"]
ONSETS = [0.0, 0.4, 0.8, 1.5, 1.9, 2.6, 3.1, 3.4]


def write_inputs(tmp_path, words=WORDS, onsets=ONSETS):
    words_path = tmp_path / "transcript.txt"
    words_path.write_text("\n".join(words) + "\n", encoding="utf-8")
    onsets_path = tmp_path / "onsets.txt"
    onsets_path.write_text("\n".join(repr(float(t)) for t in onsets) + "\n", encoding="utf-8")
    return words_path, onsets_path


class TestReadWords:
    def test_skips_blank_lines(self, tmp_path):
        path = tmp_path / "w.txt"
        path.write_text("a\n\nb\n  \nc\n", encoding="utf-8")
        assert read_words(path) == ["a", "b", "c"]


class TestDumpActivations:
    def test_shapes_and_sidecar(self, checkpoint_ref, tmp_path):
        words_path, onsets_path = write_inputs(tmp_path)
        out_dir = tmp_path / "features"
        written = dump_activations(checkpoint_ref, words_path, onsets_path, layers=[1, 2], out_dir=out_dir)
        names = sorted(p.name for p in written)
        assert names == ["features_layer01_r00.f32", "features_layer02_r00.f32"]
        assert (out_dir / "run00.onsets.txt").exists()
        matrix, sidecar = formats.read_matrix(out_dir / "features_layer01_r00.f32")
        assert matrix.shape == (len(WORDS), 32)
        assert matrix.dtype == np.float32
        assert sidecar["kind"] == "features"
        assert sidecar["layer_index"] == 1
        assert sidecar["checkpoint_tokens"] == checkpoint_ref.tokens_seen
        assert sidecar["run_index"] == 0
        assert sidecar["onsets_path"] == "run00.onsets.txt"
        assert formats.read_onsets(out_dir / "run00.onsets.txt") == ONSETS

    def test_primary_reader_parses_output(self, checkpoint_ref, tmp_path):
        # interop check only: the analysis package is a test dependency here,
        # never a runtime one
        hemitrace_formats = pytest.importorskip("hemitrace.formats")
        words_path, onsets_path = write_inputs(tmp_path)
        out_dir = tmp_path / "features"
        dump_activations(checkpoint_ref, words_path, onsets_path, layers=[2], out_dir=out_dir)
        fm, run_index = hemitrace_formats.read_feature_matrix(
            out_dir / "features_layer02_r00.f32"
        )
        assert fm.data.shape == (len(WORDS), 32)
        assert np.array_equal(fm.onsets, np.array(ONSETS))
        assert fm.layer_index == 2
        assert fm.checkpoint_tokens == checkpoint_ref.tokens_seen
        assert run_index == 0

    def test_round_trip_bit_exact(self, checkpoint_ref, tmp_path):
        words_path, onsets_path = write_inputs(tmp_path)
        out_dir = tmp_path / "features"
        dump_activations(checkpoint_ref, words_path, onsets_path, layers=[1], out_dir=out_dir)
        path = out_dir / "features_layer01_r00.f32"
        matrix, _ = formats.read_matrix(path)
        raw = np.frombuffer(path.read_bytes(), dtype="<f4").reshape(matrix.shape)
        assert raw.tobytes() == matrix.tobytes()

    def test_last_vs_mean_pooling(self, checkpoint_ref, tmp_path):
        # multi-character words span several character-level tokens, so the
        # two pooling rules must disagree there
        words_path, onsets_path = write_inputs(tmp_path)
        last_dir = tmp_path / "last"
        mean_dir = tmp_path / "mean"
        dump_activations(checkpoint_ref, words_path, onsets_path, layers=[1], out_dir=last_dir)
        dump_activations(
            checkpoint_ref, words_path, onsets_path, layers=[1], out_dir=mean_dir, pool="mean"
        )
        last, _ = formats.read_matrix(last_dir / "features_layer01_r00.f32")
        mean, _ = formats.read_matrix(mean_dir / "features_layer01_r00.f32")
        assert not np.allclose(last, mean)

    def test_single_token_words_pool_identically(self, checkpoint_ref, tmp_path):
        words = ["a", "b", "c", "d"]
        words_path, onsets_path = write_inputs(tmp_path, words=words, onsets=[0.0, 0.5, 1.0, 1.5])
        last_dir = tmp_path / "last"
        mean_dir = tmp_path / "mean"
        dump_activations(checkpoint_ref, words_path, onsets_path, layers=[1], out_dir=last_dir)
        dump_activations(
            checkpoint_ref, words_path, onsets_path, layers=[1], out_dir=mean_dir, pool="mean"
        )
        last, _ = formats.read_matrix(last_dir / "features_layer01_r00.f32")
        mean, _ = formats.read_matrix(mean_dir / "features_layer01_r00.f32")
        assert np.array_equal(last, mean)

    def test_run_index_in_names(self, checkpoint_ref, tmp_path):
        words_path, onsets_path = write_inputs(tmp_path)
        out_dir = tmp_path / "features"
        written = dump_activations(
            checkpoint_ref, words_path, onsets_path, layers=[1], out_dir=out_dir, run_index=3
        )
        assert [p.name for p in written] == ["features_layer01_r03.f32"]
        assert (out_dir / "run03.onsets.txt").exists()

    def test_count_mismatch_error(self, checkpoint_ref, tmp_path):
        words_path, onsets_path = write_inputs(tmp_path, onsets=ONSETS[:-1])
        with pytest.raises(ValueError, match="transcript has 8 words but 7 onsets"):
            dump_activations(checkpoint_ref, words_path, onsets_path, layers=[1], out_dir=tmp_path / "f")

    def test_layer_out_of_range(self, checkpoint_ref, tmp_path):
        words_path, onsets_path = write_inputs(tmp_path)
        with pytest.raises(ValueError, match="layer 9"):
            dump_activations(checkpoint_ref, words_path, onsets_path, layers=[9], out_dir=tmp_path / "f")

    def test_rerun_byte_identical(self, checkpoint_ref, tmp_path):
        words_path, onsets_path = write_inputs(tmp_path)
        out_dir = tmp_path / "features"
        dump_activations(checkpoint_ref, words_path, onsets_path, layers=[1], out_dir=out_dir)
        path = out_dir / "features_layer01_r00.f32"
        first = path.read_bytes()
        dump_activations(checkpoint_ref, words_path, onsets_path, layers=[1], out_dir=out_dir)
        assert path.read_bytes() == first

    def test_layer_zero_is_embeddings(self, checkpoint_ref, tmp_path):
        # layer 0 comes straight from the embedding tables, so for identical
        # single-token words at the same position offset pattern the row is a
        # pure lookup: two dumps of the same transcript agree exactly
        model, tokenizer = load_checkpoint(checkpoint_ref)
        words = ["x", "y"]
        words_path, onsets_path = write_inputs(tmp_path, words=words, onsets=[0.0, 0.5])
        out_dir = tmp_path / "features"
        dump_activations(checkpoint_ref, words_path, onsets_path, layers=[0], out_dir=out_dir)
        matrix, _ = formats.read_matrix(out_dir / "features_layer00_r00.f32")
        ids = [tokenizer(w, add_special_tokens=False).input_ids[0] for w in ["x", " y"]]
        wte = model.transformer.wte.weight.detach()
        wpe = model.transformer.wpe.weight.detach()
        expected = torch.stack([wte[ids[0]] + wpe[1], wte[ids[1]] + wpe[2]]).numpy()
        assert np.allclose(matrix, expected.astype(np.float32), atol=1e-6)
