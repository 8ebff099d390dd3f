import numpy as np
import pytest

from neural_gpu import evaluate, model, tasks


def small_model(rng, vocab=3, relax=1, channels=5):
    cfg = model.ModelConfig(layers=1, width=2, channels=channels,
                            vocab_size=vocab, relax_sets=relax)
    return model.init_params(cfg, 0.2, rng, np.float64), cfg


def self_consistent_dataset(params, cfg, task, lengths, rng):
    """Examples whose targets are the model's own decoded outputs, so the
    model scores exactly 1.0 on them."""
    out = []
    for d in lengths:
        ex = tasks.gen_example(task, d, rng)
        logits, _ = model.forward(ex.input, params, cfg)
        out.append(tasks.Example(task, d, ex.input, model.decode(logits)))
    return out


class TestSequenceAccuracy:
    def test_perfect_outputs_score_one(self, rng):
        params, cfg = small_model(rng)
        data = self_consistent_dataset(params, cfg, "copy", [1, 2, 3, 3, 4], rng)
        assert evaluate.sequence_accuracy(params, cfg, data) == 1.0

    def test_one_wrong_symbol_in_one_example(self, rng):
        params, cfg = small_model(rng)
        data = self_consistent_dataset(params, cfg, "copy", [2] * 10, rng)
        data[3].target[0] = (data[3].target[0] + 1) % 3
        assert evaluate.sequence_accuracy(params, cfg, data) == 0.9

    def test_zero_output_matrix_on_badd_scores_zero(self, rng):
        params, cfg = small_model(rng, vocab=4)
        params.output[:] = 0.0  # ties decode to PAD everywhere
        data = tasks.make_dataset("badd", [3], 64, seed=0, split="eval")
        assert evaluate.sequence_accuracy(params, cfg, data) == 0.0

    def test_permutation_invariance(self, rng):
        params, cfg = small_model(rng)
        data = self_consistent_dataset(params, cfg, "copy", [2] * 8, rng)
        data[5].target[0] = (data[5].target[0] + 1) % 3
        acc1 = evaluate.sequence_accuracy(params, cfg, data)
        perm = [data[i] for i in rng.permutation(len(data))]
        assert evaluate.sequence_accuracy(params, cfg, perm) == acc1

    def test_empty_dataset_rejected(self, rng):
        params, cfg = small_model(rng)
        with pytest.raises(ValueError):
            evaluate.sequence_accuracy(params, cfg, [])


class TestEvalExamples:
    def test_exhaustive_when_space_fits(self):
        examples = evaluate.eval_examples("badd", 2, 1000, seed=0)
        assert len(examples) == 16
        assert len({tuple(e.input) for e in examples}) == 16

    def test_sampled_when_space_large(self):
        examples = evaluate.eval_examples("badd", 10, 50, seed=0)
        assert len(examples) == 50

    def test_deterministic(self):
        a = evaluate.eval_examples("bmul", 12, 30, seed=5)
        b = evaluate.eval_examples("bmul", 12, 30, seed=5)
        for x, y in zip(a, b):
            assert np.array_equal(x.input, y.input)

    def test_exhaustive_and_sampled_agree_when_covering(self, rng):
        params, cfg = small_model(rng)
        full = evaluate.eval_examples("copy", 3, 8, seed=0)      # exhaustive
        assert len(full) == 8
        acc_full = evaluate.sequence_accuracy(params, cfg, full)
        again = evaluate.eval_examples("copy", 3, 100, seed=1)   # still exhaustive
        assert evaluate.sequence_accuracy(params, cfg, again) == acc_full


class TestEnsemble:
    def test_identical_members_match_single_decode(self, rng):
        params, cfg = small_model(rng)
        for d in (1, 3, 5):
            ex = tasks.gen_example("copy", d, rng)
            single, _ = model.forward(ex.input, params, cfg)
            got = evaluate.ensemble_decode([(params, cfg)] * 5, ex.input)
            assert np.array_equal(got, model.decode(single))

    def test_probability_averaging_rule(self, rng):
        # two models identical up to the output head, rigged so that model A
        # emits probabilities (0.9, 0.1) and model B (0.2, 0.8) at the single
        # position; the average (0.55, 0.45) decodes to symbol 0
        params_a, cfg = small_model(rng, vocab=2)
        _, trace = model.forward([1], params_a, cfg)
        h = trace.s_fin[0, 0, 0, :]  # first-column state at the one position

        def rig_output(target_logits):
            out = np.outer(h / np.dot(h, h), target_logits)
            return out

        params_a.output = rig_output(np.log([0.9, 0.1]))
        params_b = params_a.copy()
        params_b.output = rig_output(np.log([0.2, 0.8]))
        a_probs = np.exp(model.forward([1], params_a, cfg)[0][0])
        a_probs /= a_probs.sum()
        assert np.allclose(a_probs, [0.9, 0.1], atol=1e-9)
        assert model.decode(model.forward([1], params_b, cfg)[0]).tolist() == [1]
        got = evaluate.ensemble_decode([(params_a, cfg), (params_b, cfg)], [1])
        assert got.tolist() == [0]

    def test_vocab_mismatch_rejected(self, rng):
        pa, ca = small_model(rng, vocab=3)
        pb, cb = small_model(rng, vocab=4)
        with pytest.raises(ValueError):
            evaluate.ensemble_decode([(pa, ca), (pb, cb)], [1])

    def test_ensemble_accuracy_of_identical_members(self, rng):
        params, cfg = small_model(rng)
        data = self_consistent_dataset(params, cfg, "copy", [2] * 6, rng)
        acc = evaluate.ensemble_accuracy([(params, cfg)] * 3, data)
        assert acc == evaluate.sequence_accuracy(params, cfg, data) == 1.0


class TestSweep:
    def test_report_shape_and_determinism(self, rng):
        params, cfg = small_model(rng)
        rep1 = evaluate.generalization_sweep([(params, cfg)], "copy",
                                             [1, 2, 3], 10, seed=3)
        rep2 = evaluate.generalization_sweep([(params, cfg)], "copy",
                                             [1, 2, 3], 10, seed=3)
        assert rep1.rows == rep2.rows
        assert [r["length"] for r in rep1.rows] == [1, 2, 3]
        assert rep1.rows[0]["num_examples"] == 2  # exhaustive at d=1

    def test_lengths_must_increase(self, rng):
        params, cfg = small_model(rng)
        with pytest.raises(ValueError):
            evaluate.generalization_sweep([(params, cfg)], "copy", [3, 2], 5, 0)

    def test_text_and_json_outputs(self, rng):
        params, cfg = small_model(rng)
        rep = evaluate.generalization_sweep([(params, cfg)], "copy",
                                            [2, 4], 8, seed=0, model_id="x")
        text = rep.to_text()
        assert "fully_correct" in text and "x" in text
        import json
        payload = json.loads(rep.to_json())
        assert payload["task"] == "copy" and len(payload["rows"]) == 2
