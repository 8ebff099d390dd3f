"""Sequence-accuracy measurement, length-generalization sweeps, ensembling.

The headline metric is the fraction of fully correct output sequences: every
position of the decoded output, PAD included, must match the target.
Evaluation pads nothing; each length runs at its own n.  Ensembles average
per-position softmax probabilities across models before the argmax.
"""

import json
from dataclasses import dataclass

import numpy as np

from neural_gpu import model, tasks

EVAL_BATCH = 64


def _batches(examples):
    """Group same-length examples into input/target matrices."""
    by_n = {}
    for ex in examples:
        by_n.setdefault(len(ex.input), []).append(ex)
    for group in by_n.values():
        for lo in range(0, len(group), EVAL_BATCH):
            chunk = group[lo : lo + EVAL_BATCH]
            yield (np.stack([e.input for e in chunk]),
                   np.stack([e.target for e in chunk]))


def sequence_accuracy(params, config, examples):
    """Fraction of examples whose decoded output matches the target at every
    position."""
    if not examples:
        raise ValueError("empty dataset")
    correct = 0
    for inputs, targets in _batches(examples):
        logits, _ = model.forward_batch(inputs, params, config)
        correct += int((model.decode(logits) == targets).all(axis=1).sum())
    return correct / len(examples)


def _mean_probs(models, inputs):
    probs = None
    for params, config in models:
        logits, _ = model.forward_batch(inputs, params, config)
        z = logits - logits.max(axis=-1, keepdims=True)
        ez = np.exp(z)
        p = ez / ez.sum(axis=-1, keepdims=True)
        probs = p if probs is None else probs + p
    return probs / len(models)


def ensemble_decode(models, input_symbols):
    """Decode one input by averaging the member models' softmax outputs."""
    vocabs = {config.vocab_size for _, config in models}
    if len(vocabs) != 1:
        raise ValueError(f"models disagree on vocabulary size: {sorted(vocabs)}")
    inputs = np.asarray(input_symbols)[None]
    return model.decode(_mean_probs(models, inputs)[0])


def ensemble_accuracy(models, examples):
    """Fully-correct fraction of the probability-averaged ensemble."""
    vocabs = {config.vocab_size for _, config in models}
    if len(vocabs) != 1:
        raise ValueError(f"models disagree on vocabulary size: {sorted(vocabs)}")
    if not examples:
        raise ValueError("empty dataset")
    correct = 0
    for inputs, targets in _batches(examples):
        decoded = model.decode(_mean_probs(models, inputs))
        correct += int((decoded == targets).all(axis=1).sum())
    return correct / len(examples)


def eval_examples(task, d, samples, seed):
    """Held-out examples at length d: exhaustive when the whole input space
    fits the sample budget, fresh seeded draws otherwise."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if tasks.space_size(task, d) <= samples:
        return tasks.enumerate_all(task, d)
    return tasks.make_dataset(task, [d], samples, seed=seed, split="eval")


@dataclass
class GeneralizationReport:
    task: str
    model_id: str
    rows: list  # {"length", "num_examples", "accuracy"}

    def to_json(self):
        return json.dumps({"task": self.task, "model": self.model_id,
                           "rows": self.rows}, indent=2)

    def to_text(self):
        lines = [f"task {self.task}  model {self.model_id}",
                 f"{'length':>8} {'examples':>10} {'fully_correct':>14}"]
        for row in self.rows:
            lines.append(f"{row['length']:>8} {row['num_examples']:>10} "
                         f"{row['accuracy']:>14.4f}")
        return "\n".join(lines)


def generalization_sweep(models, task, lengths, samples_per_length, seed,
                         model_id="model"):
    """Accuracy at each length on held-out data; lengths must increase.

    models is a list of (params, config) pairs; a single pair measures one
    model, several measure their output-averaging ensemble.
    """
    lengths = list(lengths)
    if lengths != sorted(lengths) or len(set(lengths)) != len(lengths):
        raise ValueError("lengths must be strictly increasing")
    rows = []
    for d in lengths:
        examples = eval_examples(task, d, samples_per_length, seed)
        if len(models) == 1:
            acc = sequence_accuracy(models[0][0], models[0][1], examples)
        else:
            acc = ensemble_accuracy(models, examples)
        rows.append({"length": int(d), "num_examples": len(examples),
                     "accuracy": float(acc)})
    return GeneralizationReport(task, model_id, rows)
