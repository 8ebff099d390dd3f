"""Command-line interface: train, eval, grid, gen, ensemble, frames, bench.

Config precedence is flags over config-file values over defaults.  Training
writes a checkpoint, an NDJSON log ({step, d, loss, seq_acc, pull,
noise_std} per line), and a manifest that pins the fully resolved config
plus a content hash; re-running from the manifest reproduces the run (bit
for bit in float64 mode).  Train exit codes: 0 converged, 10 max-steps
reached, 11 diverged.
"""

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import asdict, fields

import numpy as np

from neural_gpu import backend, checkpoint, evaluate, model, tasks, trainer

EXIT_CONVERGED = 0
EXIT_MAX_STEPS = 10
EXIT_DIVERGED = 11
_STATUS_EXIT = {"converged": EXIT_CONVERGED, "max-steps": EXIT_MAX_STEPS,
                "diverged": EXIT_DIVERGED}

# desk-sized default grid: 2 values x 3 hyperparameters
DESK_GRID = {
    "learning_rate": [0.01, 0.003],
    "noise_scale": [0.0, 0.5],
    "dropout_rate": [0.06, 0.09],
}

_FRAME_CHARS = {"0": tasks.BIT0, "1": tasks.BIT1, "+": tasks.OP, "*": tasks.OP,
                ".": tasks.OP, "_": tasks.PAD}


def _outdir(args):
    path = args.out or os.environ.get("NEURAL_GPU_OUTDIR", ".")
    os.makedirs(path, exist_ok=True)
    return path


def _config_hash(payload):
    blob = json.dumps(payload, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def _load_config_file(parser, path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        parser.error(f"cannot read config {path}: {exc}")
    manifest_extras = {"config_hash", "artifacts", "backend", "status",
                       "steps_run", "final_d", "phase"}
    for key in doc:
        if key not in {"task", "train_config", "model_config"} | manifest_extras:
            parser.error(f"unknown config key {key!r} in {path}")
    train_fields = {f.name for f in fields(trainer.TrainConfig)}
    for key in doc.get("train_config", {}):
        if key not in train_fields:
            parser.error(f"unknown train_config key {key!r} in {path}")
    model_fields = {f.name for f in fields(model.ModelConfig)}
    for key in doc.get("model_config", {}):
        if key not in model_fields:
            parser.error(f"unknown model_config key {key!r} in {path}")
    return doc


_TRAIN_FLAGS = {
    "learning_rate": "learning_rate", "init_scale": "init_scale",
    "pull_factor": "relaxation_pull_factor", "threshold": "curriculum_threshold",
    "noise_scale": "noise_scale", "dropout": "dropout_rate",
    "batch_size": "minibatch_size", "max_length": "max_train_length",
    "initial_pull": "initial_pull", "max_steps": "max_steps", "seed": "seed",
    "examples_per_length": "examples_per_length",
    "stop_threshold": "stop_threshold", "dtype": "dtype",
}
_MODEL_FLAGS = {"layers": "layers", "width": "width", "m": "channels",
                "kernel_w": "kernel_w", "kernel_h": "kernel_h",
                "relax_sets": "relax_sets"}


def _resolve_configs(parser, args):
    doc = _load_config_file(parser, args.config) if args.config else {}
    task = args.task or doc.get("task")
    if not task:
        parser.error("a task is required (--task or config file)")
    if task not in tasks.TASKS:
        parser.error(f"unknown task {task!r}; choices: {tasks.TASKS}")

    train_kw = dict(doc.get("train_config", {}))
    for flag, field_name in _TRAIN_FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            train_kw[field_name] = value
    model_kw = dict(doc.get("model_config", {}))
    for flag, field_name in _MODEL_FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            model_kw[field_name] = value
    model_kw.setdefault("vocab_size", tasks.vocab_size(task))
    try:
        return task, trainer.TrainConfig(**train_kw), model.ModelConfig(**model_kw)
    except (TypeError, ValueError) as exc:
        parser.error(f"invalid config: {exc}")


def _write_manifest(path, task, config, mc, artifacts, extra=None):
    payload = {"task": task, "train_config": asdict(config),
               "model_config": asdict(mc)}
    manifest = dict(payload)
    manifest["config_hash"] = _config_hash(payload)
    manifest["backend"] = backend.active()
    manifest["artifacts"] = artifacts
    if extra:
        manifest.update(extra)
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2)
    return manifest


def _write_log(path, records):
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")


def cmd_train(parser, args):
    task, config, mc = _resolve_configs(parser, args)
    outdir = _outdir(args)
    result = trainer.train(task, config, mc)
    ckpt = os.path.join(outdir, "checkpoint.ngpu")
    log_path = os.path.join(outdir, "train_log.ndjson")
    manifest_path = os.path.join(outdir, "manifest.json")
    checkpoint.save(ckpt, result.model_config, result.params)
    _write_log(log_path, result.log)
    artifacts = {"checkpoint": ckpt, "log": log_path, "manifest": manifest_path}
    _write_manifest(manifest_path, task, config, mc, artifacts,
                    {"status": result.status, "steps_run": result.steps_run,
                     "final_d": result.curriculum.d,
                     "phase": result.curriculum.phase})
    print(f"{result.status} after {result.steps_run} steps "
          f"(d={result.curriculum.d}, phase={result.curriculum.phase})")
    print(f"checkpoint: {ckpt}")
    return _STATUS_EXIT[result.status]


def _parse_lengths(parser, text):
    try:
        lengths = [int(tok) for tok in text.split(",") if tok]
    except ValueError:
        parser.error(f"bad --lengths {text!r}; expected comma-separated ints")
    if not lengths:
        parser.error("--lengths is empty")
    return lengths


def _load_checkpoint(parser, path):
    try:
        return checkpoint.load(path)
    except FileNotFoundError:
        parser.error(f"checkpoint not found: {path}")
    except checkpoint.CheckpointError as exc:
        parser.error(str(exc))


def cmd_eval(parser, args):
    cfg, params = _load_checkpoint(parser, args.checkpoint)
    if cfg.vocab_size < tasks.vocab_size(args.task):
        parser.error(f"checkpoint vocab {cfg.vocab_size} too small for "
                     f"task {args.task}")
    lengths = _parse_lengths(parser, args.lengths)
    report = evaluate.generalization_sweep(
        [(params, cfg)], args.task, lengths, args.samples, args.seed,
        model_id=os.path.basename(args.checkpoint))
    print(report.to_text())
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(report.to_json() + "\n")
    return 0


def cmd_grid(parser, args):
    task = args.task
    if task not in tasks.TASKS:
        parser.error(f"unknown task {task!r}")
    grid = DESK_GRID
    if args.grid:
        with open(args.grid) as fh:
            grid = json.load(fh)
        train_fields = {f.name for f in fields(trainer.TrainConfig)}
        for key in grid:
            if key not in train_fields:
                parser.error(f"unknown grid key {key!r}")
    seeds = [int(tok) for tok in args.seeds.split(",") if tok]
    base_kw = {}
    for flag, field_name in _TRAIN_FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            base_kw[field_name] = value
    model_kw = {"vocab_size": tasks.vocab_size(task)}
    for flag, field_name in _MODEL_FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            model_kw[field_name] = value
    base = trainer.TrainConfig(**base_kw)
    mc = model.ModelConfig(**model_kw)
    lengths = _parse_lengths(parser, args.lengths) if args.lengths else None
    records = trainer.grid_search(task, grid, seeds, base_config=base,
                                  model_config=mc, eval_lengths=lengths,
                                  eval_samples=args.samples,
                                  workers=args.workers)
    outdir = _outdir(args)
    best = records[0]
    if best["params"] is not None:
        checkpoint.save(os.path.join(outdir, "best.ngpu"), mc, best["params"])
    rows = []
    for rec in records:
        row = {k: v for k, v in rec.items() if k != "params"}
        rows.append(row)
    with open(os.path.join(outdir, "grid_results.json"), "w") as fh:
        json.dump({"task": task, "grid": grid, "seeds": seeds, "runs": rows},
                  fh, indent=2)
    print(f"{len(records)} runs; best: {best['overrides']} seed={best['seed']} "
          f"accuracies={best['accuracies']}")
    return 0


def cmd_gen(parser, args):
    if args.task not in tasks.TASKS:
        parser.error(f"unknown task {args.task!r}")
    d_values = range(args.min_d, args.max_d + 1)
    examples = tasks.make_dataset(args.task, d_values, args.per_length,
                                  seed=args.seed, split=args.split)
    outdir = _outdir(args)
    path = os.path.join(outdir,
                        f"{args.task}_{args.split}_{args.min_d}-{args.max_d}.txt")
    tasks.write_dataset(examples, path)
    print(f"{len(examples)} examples -> {path}")
    return 0


def cmd_ensemble(parser, args):
    paths = [p for p in args.checkpoints.split(",") if p]
    if len(paths) < 2:
        parser.error("--checkpoints needs at least two comma-separated paths")
    models = [_load_checkpoint(parser, p) for p in paths]
    models = [(params, cfg) for cfg, params in models]
    lengths = _parse_lengths(parser, args.lengths)
    try:
        report = evaluate.generalization_sweep(
            models, args.task, lengths, args.samples, args.seed,
            model_id=f"ensemble[{len(models)}]")
    except ValueError as exc:
        parser.error(str(exc))
    print(report.to_text())
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(report.to_json() + "\n")
    return 0


def parse_frame_input(text):
    try:
        return np.array([_FRAME_CHARS[ch] for ch in text], dtype=np.int64)
    except KeyError as exc:
        raise ValueError(
            f"bad input symbol {exc.args[0]!r}; use 0, 1, +, *, . or _") from None


def state_to_pixels(state):
    """Map one state [w, n, m] to a grayscale image [w*m, n]: channels tiled
    vertically, -1 -> 255 (white), 1 -> 0 (black), 0 -> 128."""
    v = np.clip(np.asarray(state, dtype=np.float64), -1.0, 1.0)
    p = np.floor(255.0 * (1.0 - v) / 2.0 + 0.5)  # round half away from zero
    return np.transpose(p, (2, 0, 1)).reshape(-1, state.shape[1]).astype(np.uint8)


def write_pgm(path, image):
    header = f"P5\n{image.shape[1]} {image.shape[0]}\n255\n".encode()
    with open(path, "wb") as fh:
        fh.write(header + image.tobytes())


def cmd_frames(parser, args):
    cfg, params = _load_checkpoint(parser, args.checkpoint)
    try:
        symbols = parse_frame_input(args.input)
    except ValueError as exc:
        parser.error(str(exc))
    if symbols.size == 0:
        parser.error("empty input")
    if symbols.max() >= cfg.vocab_size:
        parser.error(f"input symbol exceeds checkpoint vocab {cfg.vocab_size}")
    outdir = _outdir(args)
    if not os.access(outdir, os.W_OK):
        parser.error(f"output directory not writable: {outdir}")
    _, trace = model.forward(symbols, params, cfg, keep_states=True)
    for t, state in enumerate(trace.states):
        write_pgm(os.path.join(outdir, f"frame_{t:03d}.pgm"),
                  state_to_pixels(state))
    print(f"wrote {len(trace.states)} frames to {outdir}")
    return 0


def _bench_once(mc, n, batch, dtype, iters, rng_seed=0):
    rng = np.random.default_rng(rng_seed)
    params = model.init_params(mc, 0.1, rng, dtype)
    inputs = rng.integers(0, mc.vocab_size, (batch, n))
    targets = rng.integers(0, mc.vocab_size, (batch, n))

    def step():
        logits, trace = model.forward_batch(inputs, params, mc, mode="train")
        model.backward(trace, targets)

    step()  # warm caches and allocator
    times = []
    for _ in range(iters):
        t0 = time.perf_counter()
        step()
        times.append(time.perf_counter() - t0)
    return float(np.mean(times)), float(np.std(times))


def cmd_bench(parser, args):
    if args.backends == "both":
        names = backend.available()
    else:
        if args.backends not in backend.available():
            parser.error(f"backend {args.backends!r} not available "
                         f"(have {backend.available()})")
        names = [args.backends]
    mc = model.ModelConfig(layers=args.layers, width=args.width,
                           channels=args.m, vocab_size=4, relax_sets=1)
    dtype = np.float32 if args.dtype == "float32" else np.float64
    results = []
    for name in names:
        prev = backend.use(name)
        for batch in (args.batch, 1):
            mean, std = _bench_once(mc, args.n, batch, dtype, args.iters)
            results.append({"backend": name, "batch": batch, "n": args.n,
                            "m": args.m, "layers": args.layers,
                            "width": args.width, "dtype": args.dtype,
                            "iters": args.iters, "mean_s": mean, "std_s": std})
            print(f"{name:9s} batch={batch:3d} n={args.n} m={args.m} "
                  f"l={args.layers} w={args.width}: "
                  f"{mean * 1e3:9.2f} ms/step +- {std * 1e3:.2f}")
        backend.use(prev)
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(results, fh, indent=2)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="neural-gpu",
        description="Train and evaluate convolutional gated recurrent "
                    "networks on algorithmic tasks.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_train_flags(p, with_task=True):
        if with_task:
            p.add_argument("--task", choices=tasks.TASKS)
        p.add_argument("--seed", type=int)
        p.add_argument("--max-length", dest="max_length", type=int,
                       help="maximal operand bit-length of the curriculum")
        p.add_argument("--learning-rate", "--lr", dest="learning_rate", type=float)
        p.add_argument("--init-scale", dest="init_scale", type=float)
        p.add_argument("--pull-factor", dest="pull_factor", type=float)
        p.add_argument("--threshold", dest="threshold", type=float)
        p.add_argument("--noise-scale", dest="noise_scale", type=float)
        p.add_argument("--dropout", dest="dropout", type=float)
        p.add_argument("--batch-size", dest="batch_size", type=int)
        p.add_argument("--max-steps", dest="max_steps", type=int)
        p.add_argument("--initial-pull", dest="initial_pull", type=float)
        p.add_argument("--examples-per-length", dest="examples_per_length", type=int)
        p.add_argument("--stop-threshold", dest="stop_threshold", type=float)
        p.add_argument("--dtype", choices=["float32", "float64"])
        p.add_argument("--layers", type=int)
        p.add_argument("--width", type=int)
        p.add_argument("--m", type=int, help="channels per mental image point")
        p.add_argument("--kernel-w", dest="kernel_w", type=int)
        p.add_argument("--kernel-h", dest="kernel_h", type=int)
        p.add_argument("--relax-sets", "-r", dest="relax_sets", type=int)
        p.add_argument("--out", help="output directory")

    p_train = sub.add_parser("train", help="train one model")
    add_train_flags(p_train)
    p_train.add_argument("--config", help="JSON config or manifest to start from")

    p_eval = sub.add_parser("eval", help="length-generalization report")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--task", required=True, choices=tasks.TASKS)
    p_eval.add_argument("--lengths", default="20,25,100,200,2000")
    p_eval.add_argument("--samples", type=int, default=1000)
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.add_argument("--out", help="also write the report as JSON here")

    p_grid = sub.add_parser("grid", help="hyperparameter grid search")
    add_train_flags(p_grid, with_task=False)
    p_grid.add_argument("--task", required=True, choices=tasks.TASKS)
    p_grid.add_argument("--grid", help="JSON file {hyperparameter: [values]}")
    p_grid.add_argument("--seeds", default="0,1")
    p_grid.add_argument("--lengths", help="eval lengths for ranking")
    p_grid.add_argument("--samples", type=int, default=200)
    p_grid.add_argument("--workers", type=int, default=1)

    p_gen = sub.add_parser("gen", help="write a dataset file")
    p_gen.add_argument("--task", required=True, choices=tasks.TASKS)
    p_gen.add_argument("--per-length", dest="per_length", type=int, default=10000)
    p_gen.add_argument("--min-d", dest="min_d", type=int, default=1)
    p_gen.add_argument("--max-d", dest="max_d", type=int, default=20)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--split", choices=["train", "eval"], default="train")
    p_gen.add_argument("--out", help="output directory")

    p_ens = sub.add_parser("ensemble", help="evaluate an output-averaging ensemble")
    p_ens.add_argument("--checkpoints", required=True,
                       help="comma-separated checkpoint paths (5 per the recipe)")
    p_ens.add_argument("--task", required=True, choices=tasks.TASKS)
    p_ens.add_argument("--lengths", default="20,25")
    p_ens.add_argument("--samples", type=int, default=1000)
    p_ens.add_argument("--seed", type=int, default=0)
    p_ens.add_argument("--out", help="also write the report as JSON here")

    p_frames = sub.add_parser("frames", help="dump the mental image per step "
                                             "as PGM images")
    p_frames.add_argument("--checkpoint", required=True)
    p_frames.add_argument("--input", required=True,
                          help="symbols, e.g. 1010+0111 (PAD as _)")
    p_frames.add_argument("--out", help="output directory")

    p_bench = sub.add_parser("bench", help="forward+backward step timing")
    p_bench.add_argument("--n", type=int, default=32)
    p_bench.add_argument("--m", type=int, default=64)
    p_bench.add_argument("--layers", type=int, default=2)
    p_bench.add_argument("--width", type=int, default=4)
    p_bench.add_argument("--batch", type=int, default=32)
    p_bench.add_argument("--iters", type=int, default=20)
    p_bench.add_argument("--dtype", choices=["float32", "float64"],
                         default="float32")
    p_bench.add_argument("--backends", default="both",
                         help="compiled, python, or both")
    p_bench.add_argument("--out", help="write timings as JSON here")

    handlers = {"train": cmd_train, "eval": cmd_eval, "grid": cmd_grid,
                "gen": cmd_gen, "ensemble": cmd_ensemble,
                "frames": cmd_frames, "bench": cmd_bench}
    parser.set_defaults(handlers=handlers)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.handlers[args.command](parser, args)


if __name__ == "__main__":
    sys.exit(main())
