"""Refined contrastive learning.

Three pieces: InfoNCE alignment between the two modal views, a meta-network
that extracts modal-shared knowledge and transfers it onto the ID embedding
through per-row low-rank maps, and an orthogonality penalty that keeps the
modal-unique features decorrelated before they are fused back in.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn

from .errors import ConfigError


@dataclass
class RefineLossWeights:
    tau: float = 0.2
    lambda_cl: float = 0.01
    lambda_ort: float = 0.01
    lambda_p: float = 1e-4

    def __post_init__(self):
        if self.tau <= 0:
            raise ConfigError("temperature tau must be positive")
        for name in ("lambda_cl", "lambda_ort", "lambda_p"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be nonnegative")


def prelu(x: torch.Tensor, slope: torch.Tensor) -> torch.Tensor:
    # clamp form keeps the graph free of data-dependent control flow
    return x.clamp(min=0) + slope * x.clamp(max=0)


class MetaNetParams(nn.Module):
    """Per-side parameters: the shared-knowledge extractor, two meta-learners
    emitting row-wise low-rank factors, and the PReLU slopes used by the
    shared/unique fusions.

    The meta-learners g1, g2 are two-layer affine chains d -> h -> d*k and
    d -> h -> k*d with a PReLU between the layers; their outputs reshape to
    the per-row transfer factors W1 (d x k) and W2 (k x d).
    """

    def __init__(self, d: int, k: int, h: int | None = None,
                 dtype=torch.float32):
        if k < 1:
            raise ConfigError("meta rank k must be at least 1")
        if k >= d:
            raise ConfigError(f"meta rank k={k} must be smaller than d={d}")
        super().__init__()
        h = d if h is None else h
        self.d, self.k, self.h = d, k, h

        def mat(rows, cols):
            return nn.Parameter(torch.empty(rows, cols, dtype=dtype))

        def vec(rows):
            return nn.Parameter(torch.zeros(rows, dtype=dtype))

        self.w_share = mat(d, 2 * d)
        self.b_share = vec(d)
        self.w_g1_in, self.b_g1_in = mat(h, d), vec(h)
        self.w_g1_out, self.b_g1_out = mat(d * k, h), vec(d * k)
        self.w_g2_in, self.b_g2_in = mat(h, d), vec(h)
        self.w_g2_out, self.b_g2_out = mat(k * d, h), vec(k * d)
        for name in ("a_g1", "a_g2", "a_share",
                     "a_uni_visual", "a_uni_textual"):
            setattr(self, name,
                    nn.Parameter(torch.full((), 0.25, dtype=dtype)))


def infonce_loss(v: torch.Tensor, t: torch.Tensor,
                 tau: float) -> torch.Tensor:
    """Mean over the batch of -log softmax of the aligned pair, cosine
    similarities at temperature tau, negatives drawn from the batch."""
    if tau <= 0:
        raise ValueError("temperature tau must be positive")
    if v.shape != t.shape:
        raise ValueError(f"view shapes differ: {tuple(v.shape)} vs "
                         f"{tuple(t.shape)}")
    logits = F.normalize(v, dim=1) @ F.normalize(t, dim=1).T / tau
    # logsumexp subtracts the row max internally
    return (torch.logsumexp(logits, dim=1) - logits.diagonal()).mean()


def meta_shared(vbar: torch.Tensor, tbar: torch.Tensor, idbar: torch.Tensor,
                p: MetaNetParams) -> torch.Tensor:
    """Transfer modal-shared knowledge onto the ID embeddings.

    Per row: shared = W_share (v || t) + b_share, the meta-learners map
    shared to W1 (d x k) and W2 (k x d), and the output is
    PReLU(W1 W2 id) + id.
    """
    if not (vbar.shape == tbar.shape == idbar.shape):
        raise ValueError("modal and ID shapes must agree")
    n, d = idbar.shape
    if d != p.d:
        raise ValueError(f"embedding width {d} does not match params {p.d}")
    shared = torch.cat([vbar, tbar], dim=1) @ p.w_share.T + p.b_share
    h1 = prelu(shared @ p.w_g1_in.T + p.b_g1_in, p.a_g1)
    w1 = (h1 @ p.w_g1_out.T + p.b_g1_out).reshape(n, d, p.k)
    h2 = prelu(shared @ p.w_g2_in.T + p.b_g2_in, p.a_g2)
    w2 = (h2 @ p.w_g2_out.T + p.b_g2_out).reshape(n, p.k, d)
    transferred = torch.bmm(w1, torch.bmm(w2, idbar.unsqueeze(2))).squeeze(2)
    return prelu(transferred, p.a_share) + idbar


def orthogonal_loss(v: torch.Tensor, t: torch.Tensor) -> torch.Tensor:
    """Mean squared per-row dot product between the two modal views."""
    if v.shape != t.shape:
        raise ValueError(f"view shapes differ: {tuple(v.shape)} vs "
                         f"{tuple(t.shape)}")
    return ((v * t).sum(dim=1) ** 2).mean()


def fuse_unique(vbar: torch.Tensor, tbar: torch.Tensor, idbar: torch.Tensor,
                p: MetaNetParams) -> torch.Tensor:
    """Concatenate the ID-anchored modal-unique features, visual first."""
    if not (vbar.shape == tbar.shape == idbar.shape):
        raise ValueError("modal and ID shapes must agree")
    return torch.cat([prelu(vbar, p.a_uni_visual) + idbar,
                      prelu(tbar, p.a_uni_textual) + idbar], dim=1)
