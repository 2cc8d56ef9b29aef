"""Self-critical policy-gradient steps.

Default orientation: the gradient-bearing sequence is the greedy decode and
the baseline is the mean reward of k beam-search answers. The "switched"
variant restores the classic orientation (sampled sequence vs. greedy
baseline). Either way the surrogate loss is

    -(advantage) * sum_t log p(w_t | w_<t)

with the advantage and the sequence treated as constants, so its gradient
matches the policy-gradient estimator. Rewards, baselines, and the frozen
question-generation model never contribute gradients.
"""

from __future__ import annotations

import numpy as np
import torch
import torch.nn.functional as F

from ..data.vocab import PAD_ID
from ..decode import beam_decode, greedy_decode, sample_decode
from .batching import Batch, sequences_to_teacher
from .losses import localization_loss
from .rewards import RewardBundle, RewardComputer


def regenerate_questions(vqg_model, batch: Batch, answer_lists: list[list[list[int]]]):
    """Greedy question decodes from a frozen question-generation model.

    ``answer_lists[i]`` holds the candidate answers for batch sample i; the
    scene proposals are repeated per candidate. Returns the generated
    question ids in the same nested layout.
    """
    per_sample = [len(a) for a in answer_lists]
    reps = torch.as_tensor(per_sample)
    flat_answers = [a[: vqg_model.max_input_len] for group in answer_lists for a in group]
    width = max(1, max((len(a) for a in flat_answers), default=1))
    ids = np.full((len(flat_answers), width), PAD_ID, dtype=np.int64)
    for i, a in enumerate(flat_answers):
        ids[i, : len(a)] = a
    ids_t = torch.as_tensor(ids)
    with torch.no_grad():
        enc = vqg_model.encode(
            batch.features.repeat_interleave(reps, dim=0),
            batch.centers.repeat_interleave(reps, dim=0),
            batch.prop_pad.repeat_interleave(reps, dim=0),
            ids_t,
            ids_t == PAD_ID,
        )
    results = greedy_decode(vqg_model, enc, max_len=vqg_model.max_output_len)
    out, cursor = [], 0
    for n in per_sample:
        out.append([list(r.tokens) for r in results[cursor : cursor + n]])
        cursor += n
    return out


def _policy_loss(model, batch: Batch, results, advantages, cfg):
    """Gradient-bearing pass: advantage-weighted sequence log-likelihood."""
    enc = model.encode(batch.features, batch.centers, batch.prop_pad, batch.input_ids, batch.text_pad)
    prefix, target = sequences_to_teacher(results)
    logits = model.decode_logits(model.prepare_memory(enc), prefix)
    logp = F.log_softmax(logits, dim=-1)
    mask = target != PAD_ID
    token_logp = logp.gather(2, target.clamp(min=0).unsqueeze(-1)).squeeze(-1)
    seq_logp = (token_logp * mask.to(token_logp.dtype)).sum(dim=1)
    adv = torch.as_tensor(advantages, dtype=seq_logp.dtype)
    policy = -(adv * seq_logp).mean()

    loc = None
    info = {}
    if cfg.use_localization and model.config.use_localization:
        conf = model.localize(enc)
        loc, info = localization_loss(
            conf, batch.prop_boxes, batch.prop_counts, batch.gt_boxes,
            mode="bce" if cfg.multi_object_bce else "ce",
        )
    return policy, loc, seq_logp, info


def _bundles(rewards: RewardComputer, batch: Batch, grad_results, baseline_lists, vqg_grad, vqg_base, use_vqg):
    bundles = []
    for i in range(batch.size):
        key = batch.qids[i]
        refs = batch.answer_refs[i]
        r_g = rewards.answer_reward(list(grad_results[i].tokens), key, refs)
        r_b = float(np.mean([rewards.answer_reward(list(t), key, refs) for t in baseline_lists[i]]))
        if use_vqg:
            q = batch.question_ids[i]
            rq_g = rewards.question_reward(vqg_grad[i], key, q)
            rq_b = float(np.mean([rewards.question_reward(t, key, q) for t in vqg_base[i]]))
            bundles.append(RewardBundle(r_g, r_b, rq_g, rq_b))
        else:
            bundles.append(RewardBundle(r_g, r_b))
    return bundles


def _step_common(model, vqg_model, batch, rewards, optimizer, cfg, grad_results, baseline_lists):
    use_vqg = cfg.vqg_reward and vqg_model is not None
    vqg_grad = vqg_base = None
    if use_vqg:
        grad_answers = [[list(r.tokens)] for r in grad_results]
        regen = regenerate_questions(
            vqg_model, batch, [g + b for g, b in zip(grad_answers, baseline_lists)]
        )
        vqg_grad = [group[0] for group in regen]
        vqg_base = [group[1:] for group in regen]

    bundles = _bundles(rewards, batch, grad_results, baseline_lists, vqg_grad, vqg_base, use_vqg)
    advantages = [b.advantage for b in bundles]

    model.train()
    policy, loc, seq_logp, loc_info = _policy_loss(model, batch, grad_results, advantages, cfg)
    total = policy if loc is None else policy + loc
    optimizer.zero_grad()
    total.backward()
    if cfg.grad_clip > 0:
        torch.nn.utils.clip_grad_norm_((p for p in model.parameters() if p.requires_grad), cfg.grad_clip)
    optimizer.step()

    return {
        "loss": float(total.item()),
        "policy_loss": float(policy.item()),
        "loc_loss": None if loc is None else float(loc.item()),
        "bundles": bundles,
        "advantages": advantages,
        "seq_logp": [float(x) for x in seq_logp.detach()],
        "loc_fallbacks": loc_info.get("fallbacks", 0),
    }


def scst_step(model, vqg_model, batch: Batch, rewards: RewardComputer, optimizer, cfg):
    """Greedy sequence carries the gradient; beam-mean is the baseline."""
    model.eval()
    with torch.no_grad():
        enc = model.encode(batch.features, batch.centers, batch.prop_pad, batch.input_ids, batch.text_pad)
    grad_results = greedy_decode(model, enc, ban_unk=cfg.ban_unk_decode)
    beams = beam_decode(model, enc, cfg.beam_k, ban_unk=cfg.ban_unk_decode)
    baseline_lists = [[list(r.tokens) for r in bs.results] for bs in beams]
    return _step_common(model, vqg_model, batch, rewards, optimizer, cfg, grad_results, baseline_lists)


def scst_switched_step(model, vqg_model, batch: Batch, rewards: RewardComputer, optimizer, cfg, rng):
    """Classic orientation: sampled sequence learns against greedy baseline."""
    model.eval()
    with torch.no_grad():
        enc = model.encode(batch.features, batch.centers, batch.prop_pad, batch.input_ids, batch.text_pad)
    grad_results = sample_decode(
        model, enc, rng, temperature=cfg.sample_temperature, ban_unk=cfg.ban_unk_decode
    )
    greedy = greedy_decode(model, enc, ban_unk=cfg.ban_unk_decode)
    baseline_lists = [[list(r.tokens)] for r in greedy]
    return _step_common(model, vqg_model, batch, rewards, optimizer, cfg, grad_results, baseline_lists)
