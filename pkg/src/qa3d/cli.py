"""Command-line entry points: prepare | train | eval | predict | report."""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np
import torch

from .data.dataset import load_dataset, write_dataset
from .data.proposals import load_proposals, write_proposals
from .data.synthetic import GeneratorConfig, generate_synthetic_dataset
from .data.vocab import build_vocabulary
from .decode import beam_decode, greedy_decode
from .geometry import box_corners
from .metrics import format_report, score_corpus
from .model import load_checkpoint
from .tokenizer import tokenize
from .train import DataBundle, TrainConfig, collate, evaluate, train_stage, train_vqg


def _add_common(parser):
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--device", default="cpu", choices=["cpu"], help="only cpu is supported")


def _write_json(payload, path):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)


# ---------------------------------------------------------------------- prepare

def cmd_prepare(args):
    if args.synthetic == bool(args.from_scanqa):
        raise SystemExit("prepare: pass exactly one of --synthetic / --from-scanqa")
    os.makedirs(args.out, exist_ok=True)
    prop_dir = os.path.join(args.out, "proposals")
    os.makedirs(prop_dir, exist_ok=True)

    if args.synthetic:
        base = dict(
            objects_min=args.objects_min,
            objects_max=args.objects_max,
            questions_per_scene=args.questions_per_scene,
            sentence_answers=not args.short_answers,
            feature_noise=args.feature_noise,
        )
        cfg_train = GeneratorConfig(scenes=args.scenes, scene_prefix="trn", **base)
        cfg_val = GeneratorConfig(
            scenes=args.val_scenes,
            scene_prefix="val",
            answer_variants=2 if args.val_paraphrases else 1,
            **base,
        )
        train_props, train_samples = generate_synthetic_dataset(cfg_train, args.seed)
        val_props, val_samples = generate_synthetic_dataset(cfg_val, args.seed + 1)
        for pset in train_props + val_props:
            write_proposals(pset, os.path.join(prop_dir, f"{pset.scene_id}.bin"))
        write_dataset(train_samples, os.path.join(args.out, "train.json"))
        write_dataset(val_samples, os.path.join(args.out, "val.json"))
    else:
        for split, src in (("train", args.from_scanqa), ("val", args.val_json), ("test", args.test_json)):
            if not src:
                continue
            samples = load_dataset(src, "val")  # keep multi-answer records intact on disk
            write_dataset(samples, os.path.join(args.out, f"{split}.json"))
        if args.proposals_dir:
            for name in sorted(os.listdir(args.proposals_dir)):
                if name.endswith(".bin"):
                    pset = load_proposals(os.path.join(args.proposals_dir, name), name[:-4])
                    write_proposals(pset, os.path.join(prop_dir, name))

    train_samples = load_dataset(os.path.join(args.out, "train.json"), "train")
    vocab = build_vocabulary(train_samples)
    n_scenes = len({s.scene_id for s in train_samples})
    print(f"train samples (expanded): {len(train_samples)}")
    print(f"train scenes:             {n_scenes}")
    print(f"vocabulary size:          {len(vocab)}")
    val_path = os.path.join(args.out, "val.json")
    if os.path.exists(val_path):
        print(f"val samples:              {len(load_dataset(val_path, 'val'))}")


# ------------------------------------------------------------------------ train

def cmd_train(args):
    if args.stage == "scst" and not args.init_checkpoint:
        raise SystemExit("train: --stage scst needs --init-checkpoint")
    cfg_kwargs = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            cfg_kwargs.update(json.load(fh))
    cfg_kwargs["stage"] = args.stage
    cfg_kwargs["seed"] = args.seed
    optional = dict(
        lr=args.lr,
        batch_size=args.batch_size,
        max_iterations=args.iterations,
        beam_k=args.beam_k,
        vqg_reward=args.vqg_reward,
        target_embeddings=args.target_embeddings,
        scst_switched=args.scst_switched,
        val_every=args.val_every,
    )
    cfg_kwargs.update({k: v for k, v in optional.items() if v is not None})
    if args.loc is not None:
        cfg_kwargs["use_localization"] = args.loc != "off"
        cfg_kwargs["multi_object_bce"] = args.loc == "bce"
    if args.no_augment is not None:
        cfg_kwargs["augment"] = not args.no_augment
    cfg = TrainConfig(**cfg_kwargs)
    if cfg.stage == "scst" and cfg.vqg_reward and not args.vqg_checkpoint:
        raise SystemExit("train: --stage scst with the VQG reward needs --vqg-checkpoint")

    data = DataBundle.from_dir(args.data, min_count=cfg.min_count, embed_seed=cfg.embed_seed,
                               embedding_file=args.embeddings)
    if args.task == "vqg":
        summary = train_vqg(cfg, data, args.out)
    else:
        summary = train_stage(
            cfg, data, args.out,
            checkpoint_in=args.init_checkpoint,
            vqg_checkpoint=args.vqg_checkpoint,
        )
    print(f"best checkpoint: {summary['best_checkpoint']}")
    if summary["best_val_cider"] is not None:
        print(f"best val CIDEr:  {summary['best_val_cider'] * 100:.2f}")


# ------------------------------------------------------------------------- eval

def _report_payload(scores, acc):
    extra = {"Acc@0.5": acc} if acc is not None else {}
    payload = {name: round(s.value * 100.0, 2) for name, s in scores.items()}
    payload.update({name: round(v * 100.0, 2) for name, v in extra.items()})
    return payload, format_report(scores, extra)


def cmd_eval(args):
    data = DataBundle.from_dir(args.data)
    model, _ = load_checkpoint(args.checkpoint, data.vocab, expected_role="vqa")
    samples = data.val if args.split == "val" else data.load_split(args.data, args.split)
    scores, acc, _ = evaluate(model, samples, data.proposals, data.vocab)
    payload, table = _report_payload(scores, acc)
    print(table)
    if args.out:
        _write_json(payload, args.out)


# ---------------------------------------------------------------------- predict

def cmd_predict(args):
    data = DataBundle.from_dir(args.data)
    model, _ = load_checkpoint(args.checkpoint, data.vocab, expected_role="vqa")
    samples = data.val if args.split == "val" else data.load_split(args.data, args.split)
    dtype = next(model.parameters()).dtype
    caps = dict(max_question_len=model.config.max_question_len, max_answer_len=model.config.max_answer_len)
    records = []
    for start in range(0, len(samples), args.batch_size):
        chunk = samples[start : start + args.batch_size]
        batch = collate(chunk, data.proposals, data.vocab, role="vqa", dtype=dtype, **caps)
        with torch.no_grad():
            enc = model.encode(batch.features, batch.centers, batch.prop_pad, batch.input_ids, batch.text_pad)
        greedy = greedy_decode(model, enc)
        beams = beam_decode(model, enc, args.beam_size)
        picks = None
        if model.config.use_localization:
            with torch.no_grad():
                picks = model.localize(enc).argmax(dim=1).cpu().numpy()
        for i, s in enumerate(chunk):
            first = " ".join(data.vocab.decode(greedy[i].tokens))
            ranked = [" ".join(data.vocab.decode(r.tokens)) for r in beams[i].results]
            top = [first] + [a for a in ranked if a != first]
            record = {
                "scene_id": s.scene_id,
                "question_id": s.question_id,
                "answer_top10": top[:10],
                "bbox": None,
                "bbox_corners": None,
            }
            if picks is not None:
                box = batch.prop_boxes[i, int(picks[i])]
                record["bbox"] = [float(x) for x in box]
                record["bbox_corners"] = [[float(x) for x in corner] for corner in box_corners(box)]
            records.append(record)
    _write_json(records, args.out)
    print(f"wrote {len(records)} prediction records to {args.out}")


# ----------------------------------------------------------------------- report

def _load_predictions(path):
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    if isinstance(raw, list):  # cmd_predict records
        return {r["question_id"]: tokenize(r["answer_top10"][0]) for r in raw}
    return {qid: tokenize(text) for qid, text in raw.items()}


def _load_gold(path):
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    if isinstance(raw, list):  # dataset file
        return {r["question_id"]: [tokenize(a) for a in r["answers"]] for r in raw}
    return {qid: [tokenize(a) for a in answers] for qid, answers in raw.items()}


def cmd_report(args):
    predictions = _load_predictions(args.predictions)
    gold = _load_gold(args.gold)
    scores = score_corpus(predictions, gold)
    payload, table = _report_payload(scores, None)
    print(table)
    if args.out:
        _write_json(payload, args.out)


# ------------------------------------------------------------------------ main

def build_parser():
    parser = argparse.ArgumentParser(prog="qa3d", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="write dataset JSON + proposal binaries")
    _add_common(p)
    p.add_argument("--synthetic", action="store_true")
    p.add_argument("--from-scanqa", metavar="TRAIN_JSON")
    p.add_argument("--val-json")
    p.add_argument("--test-json")
    p.add_argument("--proposals-dir")
    p.add_argument("--out", required=True)
    p.add_argument("--scenes", type=int, default=8)
    p.add_argument("--val-scenes", type=int, default=2)
    p.add_argument("--objects-min", type=int, default=3)
    p.add_argument("--objects-max", type=int, default=8)
    p.add_argument("--questions-per-scene", type=int, default=2)
    p.add_argument("--short-answers", action="store_true")
    p.add_argument("--val-paraphrases", action="store_true")
    p.add_argument("--feature-noise", type=float, default=0.0)
    p.set_defaults(fn=cmd_prepare)

    p = sub.add_parser("train", help="run one training stage")
    _add_common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--task", choices=["vqa", "vqg"], default="vqa")
    p.add_argument("--stage", choices=["xe", "scst"], default="xe")
    p.add_argument("--config", help="JSON file with TrainConfig fields")
    p.add_argument("--iterations", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--beam-k", type=int)
    p.add_argument("--init-checkpoint")
    p.add_argument("--vqg-checkpoint")
    p.add_argument("--embeddings", help="optional pretrained word-vector text file")
    p.add_argument("--vqg-reward", dest="vqg_reward", action="store_true", default=None)
    p.add_argument("--no-vqg-reward", dest="vqg_reward", action="store_false")
    p.add_argument("--loc", choices=["ce", "bce", "off"], default=None)
    p.add_argument("--target-embeddings", action="store_true", default=None)
    p.add_argument("--scst-switched", action="store_true", default=None)
    p.add_argument("--no-augment", action="store_true", default=None)
    p.add_argument("--val-every", type=int)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="greedy-decode a split and score it")
    _add_common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="val", choices=["train", "val", "test"])
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("predict", help="export ranked answers + boxes")
    _add_common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="val", choices=["train", "val", "test"])
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--beam-size", type=int, default=10)
    p.add_argument("--batch-size", type=int, default=64)
    p.set_defaults(fn=cmd_predict)

    p = sub.add_parser("report", help="re-score a prediction file against gold answers")
    _add_common(p)
    p.add_argument("--predictions", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_report)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    np.random.seed(args.seed)
    torch.manual_seed(args.seed)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
