"""Command-line entry point: synth | train | eval | decode | stats | serve.

Flag resolution order: built-in default < --config JSON file < explicit
flag. Every subcommand takes --seed and produces bit-deterministic output
files. Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric
failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import ctc, dataset, metrics, neural, pipeline, shark2, synthgen
from .discretize import DiscretizerConfig, IndexEncoding, RegionShape
from .errors import DataError, NumericError
from .geometry import (
    DEFAULT_CLAMP,
    DEFAULT_RESAMPLE_STEP,
    KeyboardLayout,
    Trajectory,
    default_qwerty,
    load_layout,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

REPORT_SCHEMA = "g2t-report/1"


def _load_config_file(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as f:
            obj = json.load(f)
    except OSError as e:
        raise DataError(f"cannot read config file: {e}") from e
    except json.JSONDecodeError as e:
        raise DataError(f"config file {path} is not valid JSON: {e}") from e
    if not isinstance(obj, dict):
        raise DataError(f"config file {path} must hold a JSON object")
    return obj


class _Resolver:
    """default < config file < explicit flag (flags parse to None when absent)."""

    def __init__(self, args):
        self.args = args
        self.file_cfg = _load_config_file(getattr(args, "config", None))

    def get(self, key, default):
        val = getattr(self.args, key, None)
        if val is not None:
            return val
        if key in self.file_cfg:
            return self.file_cfg[key]
        return default


def _layout_from_args(res) -> KeyboardLayout:
    path = res.get("layout", None)
    return load_layout(path) if path else default_qwerty()


def _encode_config(res) -> pipeline.EncodeConfig:
    return pipeline.EncodeConfig(
        step=float(res.get("step", DEFAULT_RESAMPLE_STEP)),
        clamp=(int(res.get("clamp_min", DEFAULT_CLAMP[0])), int(res.get("clamp_max", DEFAULT_CLAMP[1]))),
        discretizer=DiscretizerConfig(
            region_shape=RegionShape(res.get("region_shape", "square")),
            ratio=float(res.get("ratio", 2.0)),
            encoding=IndexEncoding.ONE_HOT,
        ),
    )


def _read_words_file(path) -> list[str]:
    return shark2.load_lexicon(path)


# ---------------------------------------------------------------- synth

def cmd_synth(args) -> int:
    res = _Resolver(args)
    words = _read_words_file(args.words)
    layout = _layout_from_args(res)
    cfg = synthgen.SynthConfig(
        noise_sigma=float(res.get("sigma", 0.25)),
        smoothing_window=int(res.get("smoothing_window", 5)),
        points_per_segment=int(res.get("points_per_segment", 12)),
        seed=int(res.get("seed", 0)),
    )
    count = int(res.get("count", 10))
    n_users = int(res.get("users", 1))
    samples = []
    for word in words:
        samples.extend(synthgen.generate(word, layout, cfg, count))
    samples = [
        Trajectory(points=s.points, word=s.word, user_id=f"u{i % n_users:03d}")
        for i, s in enumerate(samples)
    ]
    ds = dataset.GestureDataset(tuple(samples), layout_name=layout.name, source="synthgen")
    dataset.save_jsonl(ds, args.out)
    print(f"wrote {len(samples)} samples ({len(words)} words) to {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------- train

def _dataset_to_samples(ds: dataset.GestureDataset, layout, enc_cfg, input_dim):
    samples = []
    for s in ds.samples:
        x = pipeline.encode_input(s, layout, enc_cfg, input_dim)
        samples.append((x, s.word))
    return samples


def _check_ctc_feasible(samples):
    bad = []
    for x, word in samples:
        if ctc.min_alignment_length(ctc.LabelSequence.from_word(word)) > len(x):
            bad.append(word)
    if bad:
        raise DataError(f"samples too short for their labels under CTC: {sorted(set(bad))}")


def cmd_train(args) -> int:
    res = _Resolver(args)
    ds = dataset.load_jsonl(args.data)
    layout = _layout_from_args(res)
    enc_cfg = _encode_config(res)
    decoder = res.get("decoder", "neural")
    if decoder not in ("neural", "conventional"):
        raise DataError(f"cannot train decoder {decoder!r} (expected neural or conventional)")
    input_dim = 26 if decoder == "neural" else 2

    seed = int(res.get("seed", 0))
    model_cfg = neural.ModelConfig(
        input_dim=input_dim,
        lstm_layers=int(res.get("lstm_layers", 2)),
        hidden_dim=int(res.get("hidden_dim", 48)),
        dropout_rate=float(res.get("dropout", 0.3)),
        seed=seed,
    )
    train_cfg = neural.TrainConfig(
        learning_rate=float(res.get("learning_rate", 0.003)),
        weight_decay=float(res.get("weight_decay", 1e-5)),
        epochs=int(res.get("epochs", 30)),
        batch_size=int(res.get("batch_size", 32)),
        seed=seed,
    )

    init = neural.load_params(args.resume) if args.resume else None
    if init is not None and init.config.input_dim != input_dim:
        raise DataError(
            f"--resume model has input_dim {init.config.input_dim}, "
            f"but decoder {decoder!r} needs {input_dim}"
        )

    val_fraction = float(res.get("val_fraction", 0.2))
    train_ds, val_ds = dataset.random_split(ds, 1.0 - val_fraction, seed=seed)
    train_samples = _dataset_to_samples(train_ds, layout, enc_cfg, input_dim)
    val_samples = _dataset_to_samples(val_ds, layout, enc_cfg, input_dim)
    _check_ctc_feasible(train_samples)

    lexicon = ctc.LexiconTrie(ds.words())
    beam_cfg = ctc.BeamConfig(
        beam_width=int(res.get("beam_width", 16)), k=4, lexicon=lexicon
    )

    metrics_path = res.get("metrics", None) or f"{args.out}.metrics.jsonl"
    rows = []

    def log(row):
        rows.append(row)
        print(
            f"epoch {row.epoch}: loss {row.train_loss:.4f} "
            f"val top1 {row.val_top1:.3f} top4 {row.val_top4:.3f}"
        )

    params, history = neural.train(
        train_samples, val_samples, model_cfg, train_cfg,
        beam_cfg=beam_cfg, init=init, log=log,
    )
    neural.save_params(params, args.out)
    with open(metrics_path, "w", encoding="utf-8") as f:
        for row in history:
            f.write(json.dumps(row.to_json(), sort_keys=True) + "\n")
    print(f"saved best checkpoint to {args.out} ({len(history)} epochs logged)")
    return EXIT_OK


# ---------------------------------------------------------------- eval

def _decode_fn(decoder, res, layout, vocab):
    """Returns (decode(traj, k) -> ranked words, label) for the chosen decoder."""
    if decoder == "shark2":
        lex_path = res.get("lexicon", None)
        if lex_path is None:
            raise DataError("shark2 evaluation needs --lexicon")
        words = _read_words_file(lex_path)
        tset = pipeline.build_template_set(words, layout)
        return lambda traj, k: [w for w, _ in pipeline.shark2_decode_topk(traj, layout, tset, k)]
    model_path = res.get("model", None)
    if model_path is None:
        raise DataError(f"decoder {decoder!r} needs --model")
    params = neural.load_params(model_path)
    lex_path = res.get("lexicon", None)
    words = _read_words_file(lex_path) if lex_path else vocab
    beam_cfg = ctc.BeamConfig(
        beam_width=int(res.get("beam_width", 16)),
        k=int(res.get("k", 4)),
        lexicon=ctc.LexiconTrie(words),
    )
    enc_cfg = _encode_config(res)

    def decode(traj, k):
        cands = pipeline.neural_decode_topk(traj, layout, params, beam_cfg, enc_cfg)
        return [w for w, _ in cands[:k]]

    return decode


def _eval_split(decode, test_ds, k):
    preds = [decode(s, k) for s in test_ds.samples]
    truths = [s.word for s in test_ds.samples]
    top1 = metrics.topk_accuracy(preds, truths, 1)
    topk = metrics.topk_accuracy(preds, truths, k)
    cers = [metrics.cer(p[0] if p else "", t) for p, t in zip(preds, truths)]
    return {"top1": top1, f"top{k}": topk, "cer": float(np.mean(cers)), "n": len(truths)}


def cmd_eval(args) -> int:
    res = _Resolver(args)
    ds = dataset.load_jsonl(args.data)
    layout = _layout_from_args(res)
    k = int(res.get("k", 4))
    decoder = res.get("decoder", "neural")
    if decoder not in ("shark2", "neural", "conventional"):
        raise DataError(f"unknown decoder {decoder!r}")
    decode = _decode_fn(decoder, res, layout, ds.words())

    split_mode = res.get("split", None)
    if split_mode is None:
        split_mode = "loso" if len(ds.user_ids()) >= 2 else "random"
    if split_mode == "loso":
        pairs = dataset.loso_splits(ds)
        names = [test.samples[0].user_id for _, test in pairs]
    elif split_mode == "random":
        pairs = [dataset.random_split(ds, float(res.get("train_fraction", 0.8)), seed=int(res.get("seed", 0)))]
        names = ["holdout"]
    else:
        raise DataError(f"unknown split mode {split_mode!r}")

    per_split = {}
    for name, (_, test) in zip(names, pairs):
        per_split[name] = _eval_split(decode, test, k)

    top1s = [v["top1"] for v in per_split.values()]
    topks = [v[f"top{k}"] for v in per_split.values()]
    cers = [v["cer"] for v in per_split.values()]
    report = {
        "schema": REPORT_SCHEMA,
        "decoder": decoder,
        "split": split_mode,
        "k": k,
        "top1": float(np.mean(top1s)),
        "top1_std": float(np.std(top1s)),
        f"top{k}": float(np.mean(topks)),
        f"top{k}_std": float(np.std(topks)),
        "cer": float(np.mean(cers)),
        "wer": 1.0 - float(np.mean(top1s)),
        "per_user": per_split,
    }
    text = json.dumps(report, sort_keys=True, indent=2)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(text + "\n")
    print(text)
    return EXIT_OK


# ---------------------------------------------------------------- decode

def _read_points(path):
    try:
        if path == "-":
            obj = json.load(sys.stdin)
        else:
            with open(path, "r", encoding="utf-8") as f:
                obj = json.load(f)
    except json.JSONDecodeError as e:
        raise DataError(f"points input is not valid JSON: {e}") from e
    if not isinstance(obj, list) or len(obj) < 2:
        raise DataError("points input must be a JSON array of at least 2 [x, y] pairs")
    try:
        return Trajectory.from_list(obj)
    except ValueError as e:
        raise DataError(f"bad points: {e}") from e


def cmd_decode(args) -> int:
    res = _Resolver(args)
    layout = _layout_from_args(res)
    traj = _read_points(args.points)
    k = int(res.get("k", 4))
    decoder = res.get("decoder", "neural")
    if decoder == "shark2":
        lex_path = res.get("lexicon", None)
        if lex_path is None:
            raise DataError("shark2 decoding needs --lexicon")
        tset = pipeline.build_template_set(_read_words_file(lex_path), layout)
        cands = pipeline.shark2_decode_topk(traj, layout, tset, k)
    else:
        model_path = res.get("model", None)
        if model_path is None:
            raise DataError("neural decoding needs --model")
        lex_path = res.get("lexicon", None)
        if lex_path is None:
            raise DataError("neural decoding needs --lexicon for the beam search")
        params = neural.load_params(model_path)
        beam_cfg = ctc.BeamConfig(
            beam_width=int(res.get("beam_width", 16)), k=k,
            lexicon=ctc.LexiconTrie(_read_words_file(lex_path)),
        )
        cands = pipeline.neural_decode_topk(traj, layout, params, beam_cfg, _encode_config(res))
    for word, score in cands[:k]:
        print(f"{word}\t{score:.6f}")
    return EXIT_OK


# ---------------------------------------------------------------- stats

def cmd_stats(args) -> int:
    res = _Resolver(args)
    ds = dataset.load_jsonl(args.data)
    layout = _layout_from_args(res)
    enc_cfg = _encode_config(res)

    touches = []
    curvatures = []
    for s in ds.samples:
        touches.extend(pipeline.extract_touch_points(s, layout))
        enc = pipeline.resample_normalized(s, layout, enc_cfg)
        if len(enc) >= 3:
            curvatures.extend(metrics.curvature(enc).tolist())
    stats = metrics.touch_point_stats(touches, layout.normalized())

    report = {
        "schema": REPORT_SCHEMA,
        "adkc": stats.adkc,
        "amal": stats.amal,
        "per_key": [
            {
                "key": s.key,
                "center": list(s.center),
                "eigenvalues": list(s.eigenvalues),
                "n_points": s.n_points,
            }
            for s in stats.per_key
        ],
        "skipped_keys": [list(s) for s in stats.skipped],
        "curvature": metrics.summarize(curvatures),
    }
    text = json.dumps(report, sort_keys=True, indent=2)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(text + "\n")
    print(text)

    if args.dump_discretized:
        index = int(res.get("sample", 0))
        if not 0 <= index < len(ds.samples):
            raise DataError(f"--sample {index} out of range (dataset has {len(ds.samples)})")
        disc = pipeline.discretize_trajectory(ds.samples[index], layout, enc_cfg)
        with open(args.dump_discretized, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(list("abcdefghijklmnopqrstuvwxyz"))
            writer.writerows(disc.one_hot.astype(int).tolist())
        print(f"wrote discretized matrix for sample {index} to {args.dump_discretized}")
    return EXIT_OK


# ---------------------------------------------------------------- serve

def cmd_serve(args) -> int:
    import uvicorn

    from .serve import ServeState, create_app

    res = _Resolver(args)
    layouts = {}
    base = _layout_from_args(res)
    layouts[base.name] = base
    for path in args.extra_layout or []:
        extra = load_layout(path)
        layouts[extra.name] = extra

    params = neural.load_params(res.get("model")) if res.get("model", None) else None
    lex_path = res.get("lexicon", None)
    words = _read_words_file(lex_path) if lex_path else None
    state = ServeState.build(
        layouts=layouts,
        params=params,
        lexicon_words=words,
        beam_width=int(res.get("beam_width", 16)),
        encode_cfg=_encode_config(res),
        default_layout=base.name,
    )
    app = create_app(state)
    host = res.get("host", "127.0.0.1")
    port = int(res.get("port", 8790))
    print(f"serving on http://{host}:{port} (decoders: {', '.join(state.available_decoders())})")
    uvicorn.run(app, host=host, port=port, log_level="warning")
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="g2t", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON file of flag defaults")
        p.add_argument("--seed", type=int)
        p.add_argument("--layout", help="layout JSON file (default: built-in QWERTY)")

    p = sub.add_parser("synth", help="generate a synthetic gesture dataset")
    common(p)
    p.add_argument("--words", required=True, help="word list file, one word per line")
    p.add_argument("--out", required=True, help="output dataset JSONL")
    p.add_argument("--count", type=int, help="samples per word (default 10)")
    p.add_argument("--sigma", type=float, help="waypoint jitter in key-widths (default 0.25)")
    p.add_argument("--smoothing-window", type=int, dest="smoothing_window")
    p.add_argument("--points-per-segment", type=int, dest="points_per_segment")
    p.add_argument("--users", type=int, help="number of synthetic user ids (default 1)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train the neural decoder")
    common(p)
    p.add_argument("--data", required=True, help="dataset JSONL")
    p.add_argument("--out", required=True, help="model output path")
    p.add_argument("--decoder", choices=["neural", "conventional"])
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--learning-rate", "--lr", type=float, dest="learning_rate")
    p.add_argument("--weight-decay", type=float, dest="weight_decay")
    p.add_argument("--hidden-dim", type=int, dest="hidden_dim")
    p.add_argument("--lstm-layers", type=int, dest="lstm_layers")
    p.add_argument("--dropout", type=float)
    p.add_argument("--val-fraction", type=float, dest="val_fraction")
    p.add_argument("--beam-width", type=int, dest="beam_width")
    p.add_argument("--resume", help="continue training from a saved model")
    p.add_argument("--metrics", help="metrics log path (default <out>.metrics.jsonl)")
    p.add_argument("--step", type=float, help="resample step in key-widths")
    p.add_argument("--clamp-min", type=int, dest="clamp_min")
    p.add_argument("--clamp-max", type=int, dest="clamp_max")
    p.add_argument("--region-shape", choices=["square", "ellipse"], dest="region_shape")
    p.add_argument("--ratio", type=float, help="region scale ratio (default 2.0)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a decoder on a dataset")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--decoder", choices=["shark2", "neural", "conventional"])
    p.add_argument("--model", help="trained model (neural/conventional)")
    p.add_argument("--lexicon", help="lexicon file (required for shark2)")
    p.add_argument("--split", choices=["loso", "random"])
    p.add_argument("--train-fraction", type=float, dest="train_fraction")
    p.add_argument("--k", type=int)
    p.add_argument("--beam-width", type=int, dest="beam_width")
    p.add_argument("--out", help="report JSON path")
    p.add_argument("--step", type=float)
    p.add_argument("--clamp-min", type=int, dest="clamp_min")
    p.add_argument("--clamp-max", type=int, dest="clamp_max")
    p.add_argument("--region-shape", choices=["square", "ellipse"], dest="region_shape")
    p.add_argument("--ratio", type=float)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("decode", help="decode one trajectory from JSON points")
    common(p)
    p.add_argument("--points", required=True, help="JSON [[x,y],...] file, or - for stdin")
    p.add_argument("--decoder", choices=["shark2", "neural"])
    p.add_argument("--model")
    p.add_argument("--lexicon")
    p.add_argument("--k", type=int)
    p.add_argument("--beam-width", type=int, dest="beam_width")
    p.add_argument("--step", type=float)
    p.add_argument("--clamp-min", type=int, dest="clamp_min")
    p.add_argument("--clamp-max", type=int, dest="clamp_max")
    p.add_argument("--region-shape", choices=["square", "ellipse"], dest="region_shape")
    p.add_argument("--ratio", type=float)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("stats", help="touch-point and curvature statistics")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--out", help="stats JSON path")
    p.add_argument("--dump-discretized", dest="dump_discretized", help="CSV path for one sample's T x 26 matrix")
    p.add_argument("--sample", type=int, help="sample index for --dump-discretized (default 0)")
    p.add_argument("--step", type=float)
    p.add_argument("--clamp-min", type=int, dest="clamp_min")
    p.add_argument("--clamp-max", type=int, dest="clamp_max")
    p.add_argument("--region-shape", choices=["square", "ellipse"], dest="region_shape")
    p.add_argument("--ratio", type=float)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("serve", help="run the local HTTP decode service")
    common(p)
    p.add_argument("--model")
    p.add_argument("--lexicon")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.add_argument("--beam-width", type=int, dest="beam_width")
    p.add_argument("--extra-layout", action="append", dest="extra_layout", help="additional layout JSON files")
    p.add_argument("--step", type=float)
    p.add_argument("--clamp-min", type=int, dest="clamp_min")
    p.add_argument("--clamp-max", type=int, dest="clamp_max")
    p.add_argument("--region-shape", choices=["square", "ellipse"], dest="region_shape")
    p.add_argument("--ratio", type=float)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DataError as e:
        print(f"g2t: data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as e:
        print(f"g2t: numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as e:
        print(f"g2t: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
