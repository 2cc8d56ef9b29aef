"""Training loop: stage-2 teacher forcing, stage-3 self-critical tuning.

Everything is seeded and single-device; two runs with the same config and
seed produce byte-identical metric logs. The log is JSON-lines, one record
per iteration plus one per validation pass.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np
import torch

from ..data.dataset import QASample, load_dataset
from ..data.proposals import ProposalSet, load_proposals
from ..data.vocab import EmbeddingTable, Vocabulary, build_vocabulary
from ..decode import greedy_decode
from ..geometry import box_iou
from ..metrics import CIDER, score_corpus
from ..model import ModelConfig, QATransformer, load_checkpoint, save_checkpoint
from .batching import collate
from .losses import localization_loss, next_token_accuracy, xe_loss
from .rewards import RewardComputer
from .scst import scst_step, scst_switched_step


class TrainingDiverged(Exception):
    pass


DEFAULT_LR = {"xe": 8e-5, "scst": 2e-5}


@dataclass
class TrainConfig:
    stage: str = "xe"                  # xe | scst
    lr: float | None = None            # default 8e-5 (xe) / 2e-5 (scst)
    batch_size: int = 64
    max_iterations: int = 1000
    seed: int = 0
    beam_k: int = 3
    vqg_reward: bool = True
    use_localization: bool = True
    multi_object_bce: bool = False
    target_embeddings: bool = False
    scst_switched: bool = False
    sample_temperature: float = 1.0
    augment: bool = True
    val_every: int = 500
    grad_clip: float = 5.0
    ban_unk_decode: bool = False
    min_count: int = 1
    embed_seed: int = 0
    model_seed: int = 0

    def __post_init__(self):
        if self.stage not in ("xe", "scst"):
            raise ValueError(f"unknown stage '{self.stage}'")
        if self.lr is None:
            self.lr = DEFAULT_LR[self.stage]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_file(cls, path) -> "TrainConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls(**json.load(fh))


def cosine_lr(base: float, iteration: int, max_iterations: int) -> float:
    """Anneal from ``base`` at iteration 0 to exactly 0 at max_iterations."""
    t = min(max(iteration, 0), max_iterations)
    return 0.5 * base * (1.0 + math.cos(math.pi * t / max_iterations))


@dataclass
class DataBundle:
    train: list[QASample]
    val: list[QASample]
    proposals: dict[str, ProposalSet]
    vocab: Vocabulary
    embeddings: EmbeddingTable
    extra_splits: dict = field(default_factory=dict)

    @classmethod
    def from_dir(
        cls,
        data_dir,
        min_count: int = 1,
        embed_dim: int = 300,
        embed_seed: int = 0,
        embedding_file=None,
    ) -> "DataBundle":
        train = load_dataset(os.path.join(data_dir, "train.json"), "train")
        val_path = os.path.join(data_dir, "val.json")
        val = load_dataset(val_path, "val") if os.path.exists(val_path) else []
        prop_dir = os.path.join(data_dir, "proposals")
        proposals = {}
        for name in sorted(os.listdir(prop_dir)):
            if name.endswith(".bin"):
                scene_id = name[: -len(".bin")]
                proposals[scene_id] = load_proposals(os.path.join(prop_dir, name), scene_id)
        vocab = build_vocabulary(train, min_count)
        if embedding_file:
            table = EmbeddingTable.from_text_file(vocab, embedding_file, embed_dim, embed_seed)
        else:
            table = EmbeddingTable.random(vocab, embed_dim, embed_seed)
        bundle = cls(train, val, proposals, vocab, table)
        bundle.resolve_gt_boxes(bundle.train)
        bundle.resolve_gt_boxes(bundle.val)
        return bundle

    def resolve_gt_boxes(self, samples: list[QASample]):
        """Fill gt_boxes from the scene proposals the target ids point at."""
        for s in samples:
            pset = self.proposals.get(s.scene_id)
            if pset is None:
                continue
            s.gt_boxes = [pset.boxes[i].copy() for i in s.target_object_ids if 0 <= i < pset.count]

    def load_split(self, data_dir, split: str) -> list[QASample]:
        samples = load_dataset(os.path.join(data_dir, f"{split}.json"), split)
        self.resolve_gt_boxes(samples)
        return samples


def state_hash(model: torch.nn.Module) -> str:
    digest = hashlib.sha256()
    for name, tensor in sorted(model.state_dict().items()):
        digest.update(name.encode())
        digest.update(tensor.detach().cpu().numpy().tobytes())
    return digest.hexdigest()


def _batch_indices(n: int, batch_size: int, rng: np.random.Generator):
    """Endless shuffled index batches (fresh permutation per epoch)."""
    queue: list[int] = []
    while True:
        while len(queue) < batch_size:
            queue.extend(int(i) for i in rng.permutation(n))
        yield queue[:batch_size]
        del queue[:batch_size]


def evaluate(model, samples, proposals, vocab, batch_size: int = 64, ban_unk: bool = False):
    """Greedy-decode a split and score it.

    Returns (metric scores, localization accuracy at IoU 0.5 or None,
    predictions as token lists keyed by question id).
    """
    model.eval()
    predictions, gold = {}, {}
    loc_hits, loc_total = 0, 0
    caps = dict(max_question_len=model.config.max_question_len, max_answer_len=model.config.max_answer_len)
    dtype = next(model.parameters()).dtype
    for start in range(0, len(samples), batch_size):
        chunk = samples[start : start + batch_size]
        batch = collate(chunk, proposals, vocab, role=model.role, dtype=dtype, **caps)
        with torch.no_grad():
            enc = model.encode(batch.features, batch.centers, batch.prop_pad, batch.input_ids, batch.text_pad)
        results = greedy_decode(model, enc, ban_unk=ban_unk)
        for i, s in enumerate(chunk):
            predictions[s.question_id] = vocab.decode(results[i].tokens)
            gold[s.question_id] = s.answers if model.role == "vqa" else [s.question]
        if model.config.use_localization:
            with torch.no_grad():
                conf = model.localize(enc)
            picks = conf.argmax(dim=1).cpu().numpy()
            for i, s in enumerate(chunk):
                if not batch.gt_boxes[i]:
                    continue
                loc_total += 1
                box = batch.prop_boxes[i, int(picks[i])]
                if box_iou(box[None], np.asarray(batch.gt_boxes[i])).max() >= 0.5:
                    loc_hits += 1
    scores = score_corpus(predictions, gold)
    acc = (loc_hits / loc_total) if loc_total else None
    return scores, acc, predictions


def teacher_accuracy(model, samples, proposals, vocab, batch_size: int = 64) -> float:
    """Teacher-forced next-token accuracy over a split (no augmentation)."""
    model.eval()
    hits, total = 0.0, 0
    caps = dict(max_question_len=model.config.max_question_len, max_answer_len=model.config.max_answer_len)
    dtype = next(model.parameters()).dtype
    for start in range(0, len(samples), batch_size):
        chunk = samples[start : start + batch_size]
        batch = collate(chunk, proposals, vocab, role=model.role, dtype=dtype, **caps)
        with torch.no_grad():
            enc = model.encode(batch.features, batch.centers, batch.prop_pad, batch.input_ids, batch.text_pad)
            logits = model.decode_logits(model.prepare_memory(enc), batch.target_in)
        n = int((batch.target_out != 0).sum().item())
        hits += next_token_accuracy(logits, batch.target_out) * n
        total += n
    return hits / max(1, total)


def _mean(values):
    return float(np.mean(values)) if values else 0.0


def train_stage(
    cfg: TrainConfig,
    data: DataBundle,
    out_dir,
    role: str = "vqa",
    model_config: ModelConfig | None = None,
    checkpoint_in=None,
    vqg_checkpoint=None,
    dtype: torch.dtype = torch.float32,
):
    """Run one training stage and write checkpoints + a JSONL metrics log.

    Stage "scst" requires ``checkpoint_in`` (the converged XE model) and,
    when the question-reconstruction reward is on, ``vqg_checkpoint``.
    Returns a summary dict with checkpoint paths and the best validation
    CIDEr.
    """
    if role not in ("vqa", "vqg"):
        raise ValueError(f"unknown role '{role}'")
    if cfg.stage == "scst":
        if role != "vqa":
            raise ValueError("self-critical training applies to the answer model only")
        if checkpoint_in is None:
            raise ValueError("scst stage needs an XE checkpoint to start from")
        if cfg.vqg_reward and vqg_checkpoint is None:
            raise ValueError("vqg_reward needs a trained question-generation checkpoint")

    os.makedirs(out_dir, exist_ok=True)
    torch.manual_seed(cfg.seed)
    order_rng = np.random.default_rng(cfg.seed + 1)
    augment_rng = np.random.default_rng(cfg.seed + 2)
    sample_rng = np.random.default_rng(cfg.seed + 3)

    if checkpoint_in is not None:
        model, _ = load_checkpoint(checkpoint_in, data.vocab, expected_role=role)
    else:
        if model_config is None:
            model_config = ModelConfig(
                vocab_size=len(data.vocab),
                use_localization=cfg.use_localization and role == "vqa",
                multi_object_bce=cfg.multi_object_bce,
                target_embeddings=cfg.target_embeddings and role == "vqa",
            )
        model = QATransformer(model_config, data.embeddings.vectors, role=role, seed=cfg.model_seed)
    model = model.to(dtype=dtype)

    vqg_model = None
    rewards = None
    if cfg.stage == "scst":
        if cfg.vqg_reward:
            vqg_model, _ = load_checkpoint(vqg_checkpoint, data.vocab, expected_role="vqg")
            vqg_model = vqg_model.to(dtype=dtype)
            for p in vqg_model.parameters():
                p.requires_grad_(False)
            vqg_model.eval()
        rewards = RewardComputer.from_training_split(data.train, data.vocab, with_questions=cfg.vqg_reward)

    optimizer = torch.optim.Adam((p for p in model.parameters() if p.requires_grad), lr=cfg.lr)
    caps = dict(max_question_len=model.config.max_question_len, max_answer_len=model.config.max_answer_len)
    use_loc = cfg.use_localization and model.config.use_localization and role == "vqa"

    log_path = os.path.join(out_dir, "metrics.jsonl")
    best_path = os.path.join(out_dir, "best.pt")
    last_path = os.path.join(out_dir, "last.pt")
    best_cider = -1.0
    batches = _batch_indices(len(data.train), min(cfg.batch_size, len(data.train)), order_rng)

    def run_validation(iteration, log_fh):
        nonlocal best_cider
        if not data.val:
            return
        scores, acc, _ = evaluate(model, data.val, data.proposals, data.vocab, ban_unk=cfg.ban_unk_decode)
        record = {
            "iteration": iteration,
            "val": {name: s.value for name, s in scores.items()},
        }
        if acc is not None:
            record["val"]["acc_at_0.5"] = acc
        log_fh.write(json.dumps(record, sort_keys=True) + "\n")
        cider_val = scores[CIDER].value
        if cider_val > best_cider:
            best_cider = cider_val
            save_checkpoint(model, data.vocab, best_path, extras={"iteration": iteration, "val_cider": cider_val, "train_config": cfg.to_dict()})

    with open(log_path, "w", encoding="utf-8") as log_fh:
        for it in range(cfg.max_iterations):
            lr = cosine_lr(cfg.lr, it, cfg.max_iterations)
            for group in optimizer.param_groups:
                group["lr"] = lr
            idx = next(batches)
            chunk = [data.train[i] for i in idx]
            batch = collate(
                chunk, data.proposals, data.vocab, role=role, dtype=dtype,
                rng=augment_rng, augment=cfg.augment and role == "vqa", **caps,
            )

            record = {"iteration": it, "lr": lr, "stage": cfg.stage}
            if cfg.stage == "xe":
                model.train()
                enc = model.encode(batch.features, batch.centers, batch.prop_pad, batch.input_ids, batch.text_pad)
                logits = model.decode_logits(model.prepare_memory(enc), batch.target_in)
                loss_xe = xe_loss(logits, batch.target_out)
                total = loss_xe
                record["xe"] = float(loss_xe.item())
                if use_loc:
                    loc, _ = localization_loss(
                        model.localize(enc), batch.prop_boxes, batch.prop_counts, batch.gt_boxes,
                        mode="bce" if cfg.multi_object_bce else "ce",
                    )
                    total = total + loc
                    record["loc"] = float(loc.item())
                optimizer.zero_grad()
                total.backward()
                if cfg.grad_clip > 0:
                    torch.nn.utils.clip_grad_norm_(
                        (p for p in model.parameters() if p.requires_grad), cfg.grad_clip
                    )
                optimizer.step()
                record["loss"] = float(total.item())
            else:
                step_fn = scst_switched_step if cfg.scst_switched else scst_step
                args = (model, vqg_model, batch, rewards, optimizer, cfg)
                stats = step_fn(*args, sample_rng) if cfg.scst_switched else step_fn(*args)
                record["loss"] = stats["loss"]
                record["policy"] = stats["policy_loss"]
                if stats["loc_loss"] is not None:
                    record["loc"] = stats["loc_loss"]
                bundles = stats["bundles"]
                adv = np.array(stats["advantages"])
                gap_err = max(
                    abs(b.advantage - ((b.r_vqa_g - b.r_vqa_b) + ((b.r_vqg_g - b.r_vqg_b) if b.r_vqg_g is not None else 0.0)))
                    for b in bundles
                )
                record["reward"] = {
                    "vqa_g": _mean([b.r_vqa_g for b in bundles]),
                    "vqa_b": _mean([b.r_vqa_b for b in bundles]),
                    "adv_mean": float(adv.mean()),
                    "adv_var": float(adv.var()),
                    "adv_gap_max_err": float(gap_err),
                    "orientation": "sampled_vs_greedy" if cfg.scst_switched else "greedy_vs_beam",
                }
                if bundles and bundles[0].r_vqg_g is not None:
                    record["reward"]["vqg_g"] = _mean([b.r_vqg_g for b in bundles])
                    record["reward"]["vqg_b"] = _mean([b.r_vqg_b for b in bundles])

            if not math.isfinite(record["loss"]):
                dump_path = os.path.join(out_dir, "diverged.json")
                with open(dump_path, "w", encoding="utf-8") as fh:
                    json.dump({"iteration": it, "question_ids": batch.qids, "record": record}, fh, indent=1)
                raise TrainingDiverged(f"non-finite loss at iteration {it}; batch dumped to {dump_path}")

            log_fh.write(json.dumps(record, sort_keys=True) + "\n")
            if (it + 1) % cfg.val_every == 0 or it + 1 == cfg.max_iterations:
                run_validation(it + 1, log_fh)

    save_checkpoint(model, data.vocab, last_path, extras={"iteration": cfg.max_iterations, "train_config": cfg.to_dict()})
    if best_cider < 0:
        save_checkpoint(model, data.vocab, best_path, extras={"iteration": cfg.max_iterations, "train_config": cfg.to_dict()})
    return {
        "best_checkpoint": best_path,
        "last_checkpoint": last_path,
        "best_val_cider": best_cider if best_cider >= 0 else None,
        "log_path": log_path,
        "model": model,
    }


def train_vqg(cfg: TrainConfig, data: DataBundle, out_dir, model_config: ModelConfig | None = None, dtype=torch.float32):
    """XE-train the swapped-IO question generator (frozen afterwards)."""
    if model_config is None:
        model_config = ModelConfig(vocab_size=len(data.vocab), use_localization=False)
    if cfg.stage != "xe":
        raise ValueError("the question-generation model trains with XE only")
    return train_stage(cfg, data, out_dir, role="vqg", model_config=model_config, dtype=dtype)
