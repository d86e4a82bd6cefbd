"""Modality projection and channel-wise self/cross attention over item
features.

Attention here acts on feature dimensions, not on items: the score matrix
is d x d (softmax per column by default) and right-multiplies the value
projection, so it rescales feature channels for the whole item set.
"""

from __future__ import annotations

import math

import torch
from torch import nn


class ProjectionParams(nn.Module):
    """Affine map from raw modality space (d_m) to embedding space (d)."""

    def __init__(self, d: int, d_m: int, dtype=torch.float32):
        super().__init__()
        self.weight = nn.Parameter(torch.empty(d, d_m, dtype=dtype))
        self.bias = nn.Parameter(torch.zeros(d, dtype=dtype))


class AttentionBlockParams(nn.Module):
    """Query/key/value projections for one attention block."""

    def __init__(self, d: int, dtype=torch.float32):
        super().__init__()
        self.w_q = nn.Parameter(torch.empty(d, d, dtype=dtype))
        self.w_k = nn.Parameter(torch.empty(d, d, dtype=dtype))
        self.w_v = nn.Parameter(torch.empty(d, d, dtype=dtype))


def project_modality(raw: torch.Tensor, p: ProjectionParams) -> torch.Tensor:
    if raw.shape[1] != p.weight.shape[1]:
        raise ValueError(f"feature width {raw.shape[1]} does not match "
                         f"projection input {p.weight.shape[1]}")
    return raw @ p.weight.T + p.bias


def layer_norm(x: torch.Tensor, eps: float = 1e-6) -> torch.Tensor:
    """Row-wise normalization without learned affine parameters."""
    mean = x.mean(dim=-1, keepdim=True)
    var = x.var(dim=-1, unbiased=False, keepdim=True)
    return (x - mean) / torch.sqrt(var + eps)


def inverted_dropout(x: torch.Tensor, rate: float, training: bool,
                     gen: torch.Generator | None) -> torch.Tensor:
    if not training or rate == 0.0:
        return x
    if not 0.0 <= rate < 1.0:
        raise ValueError("dropout rate must be in [0, 1)")
    keep = (torch.rand(x.shape, generator=gen,
                       dtype=x.dtype) >= rate).to(x.dtype)
    return x * keep / (1.0 - rate)


def _channel_scores(q_input: torch.Tensor, k_input: torch.Tensor,
                    p_q: AttentionBlockParams, p_k: AttentionBlockParams,
                    softmax_axis: str) -> torch.Tensor:
    d = q_input.shape[1]
    scores = (q_input @ p_q.w_q).T @ (k_input @ p_k.w_k) / math.sqrt(d)
    if softmax_axis == "column":
        return torch.softmax(scores, dim=0)
    if softmax_axis == "row":
        return torch.softmax(scores, dim=1)
    raise ValueError(f"softmax_axis must be 'column' or 'row', "
                     f"got {softmax_axis!r}")


def self_attention_block(x: torch.Tensor, p: AttentionBlockParams, *,
                         dropout_rate: float = 0.0, training: bool = False,
                         gen: torch.Generator | None = None,
                         softmax_axis: str = "column") -> torch.Tensor:
    attn = _channel_scores(x, x, p, p, softmax_axis)       # (d, d)
    attended = (x @ p.w_v) @ attn                          # (M, d)
    attended = inverted_dropout(attended, dropout_rate, training, gen)
    return layer_norm(x + attended)


def cross_attention_block(x_v: torch.Tensor, x_t: torch.Tensor,
                          p_v: AttentionBlockParams,
                          p_t: AttentionBlockParams, *,
                          dropout_rate: float = 0.0, training: bool = False,
                          gen: torch.Generator | None = None,
                          softmax_axis: str = "column"):
    """Each modality is reweighted by scores computed against the other
    modality's query projection; returns (visual, textual) outputs."""
    if x_v.shape != x_t.shape:
        raise ValueError(f"modality shapes differ: {tuple(x_v.shape)} vs "
                         f"{tuple(x_t.shape)}")
    attn_v = _channel_scores(x_t, x_v, p_t, p_v, softmax_axis)
    attn_t = _channel_scores(x_v, x_t, p_v, p_t, softmax_axis)
    attended_v = inverted_dropout((x_v @ p_v.w_v) @ attn_v,
                                  dropout_rate, training, gen)
    attended_t = inverted_dropout((x_t @ p_t.w_v) @ attn_t,
                                  dropout_rate, training, gen)
    return layer_norm(x_v + attended_v), layer_norm(x_t + attended_t)
