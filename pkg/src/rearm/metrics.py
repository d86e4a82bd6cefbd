"""All-ranking evaluation: Recall@K, NDCG@K, and the score-difference
matrix export used for model-vs-model inspection."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
import torch
from scipy.special import expit

from .data import InteractionDataset


@dataclass
class EvalReport:
    split: str
    n_users_evaluated: int
    recall: dict[int, float]
    ndcg: dict[int, float]

    def rows(self) -> list[dict]:
        return [{"split": self.split, "K": k,
                 "recall": self.recall[k], "ndcg": self.ndcg[k],
                 "n_users": self.n_users_evaluated}
                for k in sorted(self.recall)]

    def to_json(self) -> str:
        return json.dumps(self.rows(), sort_keys=True)


def _to_numpy(x) -> np.ndarray:
    if isinstance(x, torch.Tensor):
        return x.detach().cpu().numpy()
    return np.asarray(x)


def rank_items(u_star, i_star, mask, k: int) -> np.ndarray:
    """Top-k item indices for one user by inner-product score, masked
    items excluded, ties resolved toward the smaller index."""
    scores = _to_numpy(i_star) @ _to_numpy(u_star)
    mask = np.asarray(sorted(mask), dtype=np.int64) if len(mask) else None
    if mask is not None:
        if mask.min() < 0 or mask.max() >= scores.size:
            raise ValueError("mask index out of range")
        available = scores.size - mask.size
    else:
        available = scores.size
    if k > available:
        raise ValueError(f"cannot rank top-{k} of {available} unmasked items")
    scores = scores.astype(np.float64, copy=True)
    if mask is not None:
        scores[mask] = -np.inf
    order = np.argsort(-scores, kind="stable")
    return order[:k]


def compute_metrics(topk_lists, truth_sets, ks,
                    split: str = "val") -> EvalReport:
    """Average Recall@K and NDCG@K over users with nonempty ground truth.

    DCG uses 1/log2(rank+1) with 1-based ranks; the ideal DCG places
    min(K, |truth|) hits at the top.
    """
    ks = tuple(int(k) for k in ks)
    rec_sum = {k: 0.0 for k in ks}
    ndcg_sum = {k: 0.0 for k in ks}
    n = 0
    for top, truth in zip(topk_lists, truth_sets):
        truth = set(int(t) for t in truth)
        if not truth:
            continue
        n += 1
        top = [int(t) for t in top]
        for k in ks:
            hit_ranks = [r for r, t in enumerate(top[:k], start=1)
                         if t in truth]
            rec_sum[k] += len(hit_ranks) / len(truth)
            idcg = sum(1.0 / math.log2(r + 1)
                       for r in range(1, min(k, len(truth)) + 1))
            dcg = sum(1.0 / math.log2(r + 1) for r in hit_ranks)
            ndcg_sum[k] += dcg / idcg
    if n == 0:
        return EvalReport(split, 0, {k: 0.0 for k in ks},
                          {k: 0.0 for k in ks})
    return EvalReport(split, n, {k: rec_sum[k] / n for k in ks},
                      {k: ndcg_sum[k] / n for k in ks})


def evaluate_split(ds: InteractionDataset, u_star, i_star, split: str,
                   ks=(10, 20), batch_users: int = 1024) -> EvalReport:
    """Full-ranking evaluation of one split.

    The mask removes train items for the val split and train+val items
    for the test split. Cutoffs clamp to the per-user candidate count on
    tiny datasets.
    """
    if split not in ("val", "test"):
        raise ValueError(f"split must be 'val' or 'test', got {split!r}")
    truth_lists = ds.items_by_split(split)
    if split == "val":
        mask_lists = [list(a) for a in ds.train_adjacency]
    else:
        val_lists = ds.items_by_split("val")
        mask_lists = [list(a) + v
                      for a, v in zip(ds.train_adjacency, val_lists)]
    users = _to_numpy(u_star)
    items = _to_numpy(i_star)
    kmax = max(int(k) for k in ks)
    tops, truths = [], []
    for start in range(0, ds.n_users, batch_users):
        stop = min(start + batch_users, ds.n_users)
        block = users[start:stop] @ items.T
        for row, u in enumerate(range(start, stop)):
            if not truth_lists[u]:
                continue
            scores = block[row].astype(np.float64, copy=True)
            if mask_lists[u]:
                scores[np.asarray(mask_lists[u], dtype=np.int64)] = -np.inf
            order = np.argsort(-scores, kind="stable")
            k_eff = min(kmax, ds.n_items - len(mask_lists[u]))
            tops.append(order[:k_eff])
            truths.append(set(truth_lists[u]))
    return compute_metrics(tops, truths, ks, split)


def score_difference_matrix(u_star_a, i_star_a, u_star_b, i_star_b,
                            user_subset, item_subset) -> np.ndarray:
    """sigmoid(score_b) - sigmoid(score_a) over a user/item grid."""
    ua, ia = _to_numpy(u_star_a), _to_numpy(i_star_a)
    ub, ib = _to_numpy(u_star_b), _to_numpy(i_star_b)
    if ua.shape != ub.shape or ia.shape != ib.shape:
        raise ValueError("parameter sets produce mismatched shapes")
    users = np.asarray(list(user_subset), dtype=np.int64)
    items = np.asarray(list(item_subset), dtype=np.int64)
    if users.size == 0 or items.size == 0:
        raise ValueError("user and item subsets must be nonempty")
    if users.min() < 0 or users.max() >= ua.shape[0]:
        raise ValueError("user subset index out of range")
    if items.min() < 0 or items.max() >= ia.shape[0]:
        raise ValueError("item subset index out of range")
    s_a = ua[users].astype(np.float64) @ ia[items].astype(np.float64).T
    s_b = ub[users].astype(np.float64) @ ib[items].astype(np.float64).T
    return expit(s_b) - expit(s_a)


def write_difference_matrix(path, diff: np.ndarray, user_subset,
                            item_subset) -> None:
    """TSV export: header row of item indices, first column user indices."""
    users = [int(u) for u in user_subset]
    items = [int(i) for i in item_subset]
    if diff.shape != (len(users), len(items)):
        raise ValueError("matrix shape does not match the subsets")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("user\\item\t" + "\t".join(str(i) for i in items) + "\n")
        for row, u in enumerate(users):
            vals = "\t".join(f"{v:.8g}" for v in diff[row])
            fh.write(f"{u}\t{vals}\n")
