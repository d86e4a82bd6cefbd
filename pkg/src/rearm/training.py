"""Model assembly and optimization.

Holds the parameter store, the full forward pass (homograph smoothing ->
item attention -> bipartite propagation -> shared/unique refinement), the
joint BPR + contrastive + orthogonality objective, the training loop with
early stopping, checkpoint I/O, and a finite-difference gradient checker.
"""

from __future__ import annotations

import dataclasses
import json
import math
import struct
import time
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from . import metrics
from .attention import (AttentionBlockParams, ProjectionParams,
                        cross_attention_block, project_modality,
                        self_attention_block)
from .bipartite import BipartiteGraph, build_bipartite, propagate_bipartite
from .contrast import (MetaNetParams, RefineLossWeights, fuse_unique,
                       infonce_loss, meta_shared, orthogonal_loss)
from .data import MODALITIES, InteractionDataset, ModalFeatures
from .errors import ConfigError, DataError, NumericError
from .graphs import (HomographConfig, SparseGraph, build_homographs,
                     fuse_homograph, propagate_homograph)

CHECKPOINT_MAGIC = b"REARM"
CHECKPOINT_VERSION = 1

ABLATION_FLAGS = ("wo_uu", "wo_ii", "wo_co", "wo_sim", "wo_hom",
                  "wo_meta", "wo_ort", "wo_ref")


@dataclass(frozen=True)
class Ablation:
    """Component bypass switches. Composite flags expand through the
    derived properties, so wo_ref and wo_meta+wo_ort follow the exact same
    code path."""

    wo_uu: bool = False
    wo_ii: bool = False
    wo_co: bool = False
    wo_sim: bool = False
    wo_hom: bool = False
    wo_meta: bool = False
    wo_ort: bool = False
    wo_ref: bool = False

    @classmethod
    def from_flags(cls, flags) -> "Ablation":
        flags = list(flags)
        unknown = [f for f in flags if f not in ABLATION_FLAGS]
        if unknown:
            raise ConfigError(
                f"unknown ablation flags: {', '.join(sorted(unknown))}; "
                f"known: {', '.join(ABLATION_FLAGS)}")
        ab = cls(**{f: True for f in flags})
        ab.validate()
        return ab

    def validate(self) -> None:
        if self.wo_co and self.wo_sim:
            raise ConfigError("wo_co and wo_sim together leave no "
                              "homogeneous graph; use wo_hom instead")

    def flags(self) -> list[str]:
        return [f for f in ABLATION_FLAGS if getattr(self, f)]

    @property
    def skip_user_graph(self) -> bool:
        return self.wo_uu or self.wo_hom

    @property
    def skip_item_graph(self) -> bool:
        return self.wo_ii or self.wo_hom

    @property
    def bypass_meta(self) -> bool:
        return self.wo_meta or self.wo_ref

    @property
    def zero_ort(self) -> bool:
        return self.wo_ort or self.wo_ref

    def alpha_co(self, configured: float) -> float:
        if self.wo_co:
            return 0.0
        if self.wo_sim:
            return 1.0
        return configured


@dataclass
class HyperParams:
    d: int = 64
    batch_size: int = 2048
    learning_rate: float = 1e-3
    layers: int = 4                 # bipartite propagation depth L
    meta_rank: int = 4              # k, rank of the per-row transfer maps
    meta_hidden: int | None = None  # meta-learner hidden width, None -> d
    dropout: float = 0.1
    epochs_max: int = 2000
    patience: int = 20
    eval_topk: tuple = (10, 20)
    seed: int = 2026
    attention_softmax: str = "column"
    hom: HomographConfig = field(default_factory=HomographConfig)
    refine: RefineLossWeights = field(default_factory=RefineLossWeights)

    def __post_init__(self):
        if self.d <= 0:
            raise ConfigError("d must be positive")
        if self.batch_size <= 0:
            raise ConfigError("batch_size must be positive")
        if self.learning_rate < 0:
            raise ConfigError("learning_rate must be nonnegative")
        if self.layers < 0:
            raise ConfigError("layers must be nonnegative")
        if not 1 <= self.meta_rank < self.d:
            raise ConfigError(f"meta_rank must satisfy 1 <= k < d, "
                              f"got k={self.meta_rank}, d={self.d}")
        if self.meta_hidden is not None and self.meta_hidden < 1:
            raise ConfigError("meta_hidden must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must be in [0, 1)")
        if self.epochs_max < 1:
            raise ConfigError("epochs_max must be at least 1")
        if self.patience < 1:
            raise ConfigError("patience must be positive")
        self.eval_topk = tuple(int(k) for k in self.eval_topk)
        if not self.eval_topk or min(self.eval_topk) < 1:
            raise ConfigError("eval_topk must be a nonempty list of "
                              "positive cutoffs")
        if self.attention_softmax not in ("column", "row"):
            raise ConfigError("attention_softmax must be 'column' or 'row'")


def hyperparams_to_dict(hp: HyperParams) -> dict:
    return dataclasses.asdict(hp)


def hyperparams_from_dict(raw: dict) -> HyperParams:
    raw = dict(raw)
    raw["hom"] = HomographConfig(**raw["hom"])
    raw["refine"] = RefineLossWeights(**raw["refine"])
    return HyperParams(**raw)


class ParameterStore(nn.Module):
    """Every trainable tensor of the model.

    Matrices get Xavier-uniform values from an explicit generator seeded
    with hp.seed; biases stay zero and PReLU slopes stay at 0.25, so a
    (seed, shape) pair pins the whole initial state.
    """

    def __init__(self, n_users: int, n_items: int, hp: HyperParams,
                 d_m: dict[str, int], dtype=torch.float32):
        super().__init__()
        d = hp.d
        self.n_users, self.n_items = n_users, n_items
        self.user_id = nn.Parameter(torch.empty(n_users, d, dtype=dtype))
        self.item_id = nn.Parameter(torch.empty(n_items, d, dtype=dtype))
        self.proj = nn.ModuleDict(
            {m: ProjectionParams(d, d_m[m], dtype) for m in MODALITIES})
        self.attn_self = nn.ModuleDict(
            {m: AttentionBlockParams(d, dtype) for m in MODALITIES})
        self.attn_cross = nn.ModuleDict(
            {m: AttentionBlockParams(d, dtype) for m in MODALITIES})
        self.meta_user = MetaNetParams(d, hp.meta_rank, hp.meta_hidden, dtype)
        self.meta_item = MetaNetParams(d, hp.meta_rank, hp.meta_hidden, dtype)
        self.reset_parameters(hp.seed)

    def reset_parameters(self, seed: int) -> None:
        gen = torch.Generator().manual_seed(seed)
        with torch.no_grad():
            for _, p in self.named_parameters():
                if p.dim() >= 2:
                    bound = math.sqrt(6.0 / (p.shape[0] + p.shape[1]))
                    p.uniform_(-bound, bound, generator=gen)

    def first_nonfinite(self) -> str | None:
        for name, p in self.named_parameters():
            if not torch.isfinite(p).all():
                return name
        return None


@dataclass
class ForwardCache:
    """Stage outputs of one forward pass, in computation order."""

    u_id: torch.Tensor
    i_id: torch.Tensor
    u_visual: torch.Tensor
    i_visual: torch.Tensor
    u_textual: torch.Tensor
    i_textual: torch.Tensor
    u_share: torch.Tensor
    i_share: torch.Tensor
    u_unique: torch.Tensor
    i_unique: torch.Tensor
    u_star: torch.Tensor
    i_star: torch.Tensor

    def named(self):
        for f in dataclasses.fields(self):
            yield f.name, getattr(self, f.name)


@dataclass
class GraphBundle:
    """Prebuilt graphs consumed by forward; a None homograph means that
    side skips homogeneous smoothing."""

    user_graph: SparseGraph | None
    item_graph: SparseGraph | None
    bipartite: BipartiteGraph


def assemble_graph_bundle(components: dict[str, SparseGraph],
                          bipartite: BipartiteGraph, hp: HyperParams,
                          ablation: Ablation = Ablation()) -> GraphBundle:
    """Blend the cached co-occurrence/semantic components into the final
    per-side homographs, honoring ablation overrides."""
    ablation.validate()
    user_graph = item_graph = None
    if not ablation.skip_user_graph:
        user_graph = fuse_homograph(components["user_co"],
                                    components["user_sem"],
                                    ablation.alpha_co(hp.hom.alpha_co_user))
    if not ablation.skip_item_graph:
        item_graph = fuse_homograph(components["item_co"],
                                    components["item_sem"],
                                    ablation.alpha_co(hp.hom.alpha_co_item))
    return GraphBundle(user_graph, item_graph, bipartite)


def build_graph_bundle(ds: InteractionDataset,
                       features: dict[str, ModalFeatures], hp: HyperParams,
                       ablation: Ablation = Ablation()) -> GraphBundle:
    components = build_homographs(ds, features, hp.hom)
    return assemble_graph_bundle(components, build_bipartite(ds), hp,
                                 ablation)


def features_to_torch(features: dict[str, ModalFeatures], dtype):
    """dict modality -> (item tensor, user tensor) in the model dtype."""
    return {m: (torch.from_numpy(np.ascontiguousarray(features[m].item_matrix)).to(dtype),
                torch.from_numpy(np.ascontiguousarray(features[m].user_matrix)).to(dtype))
            for m in MODALITIES}


@contextmanager
def _stage(name: str):
    try:
        yield
    except ValueError as e:
        raise ValueError(f"forward stage '{name}': {e}") from e


def forward(graphs: GraphBundle, features_t, params: ParameterStore,
            hp: HyperParams, *, training: bool = False,
            ablation: Ablation = Ablation(),
            gen: torch.Generator | None = None) -> ForwardCache:
    with _stage("projection"):
        proj_i = {m: project_modality(features_t[m][0], params.proj[m])
                  for m in MODALITIES}
        proj_u = {m: project_modality(features_t[m][1], params.proj[m])
                  for m in MODALITIES}

    with _stage("homograph"):
        if graphs.item_graph is not None:
            h0 = torch.cat([params.item_id, proj_i["visual"],
                            proj_i["textual"]], dim=1)
            i_id0, i_v0, i_t0 = propagate_homograph(graphs.item_graph, h0,
                                                    hp.hom.layers)
        else:
            i_id0, i_v0, i_t0 = (params.item_id, proj_i["visual"],
                                 proj_i["textual"])
        if graphs.user_graph is not None:
            h0 = torch.cat([params.user_id, proj_u["visual"],
                            proj_u["textual"]], dim=1)
            u_id0, u_v0, u_t0 = propagate_homograph(graphs.user_graph, h0,
                                                    hp.hom.layers)
        else:
            u_id0, u_v0, u_t0 = (params.user_id, proj_u["visual"],
                                 proj_u["textual"])

    # item modal features pass through self- then cross-attention;
    # user modal features are used as-is
    with _stage("attention"):
        kw = dict(dropout_rate=hp.dropout, training=training, gen=gen,
                  softmax_axis=hp.attention_softmax)
        i_v1 = self_attention_block(i_v0, params.attn_self["visual"], **kw)
        i_t1 = self_attention_block(i_t0, params.attn_self["textual"], **kw)
        i_v2, i_t2 = cross_attention_block(i_v1, i_t1,
                                           params.attn_cross["visual"],
                                           params.attn_cross["textual"],
                                           **kw)

    with _stage("bipartite"):
        bip = graphs.bipartite
        u_id, i_id = propagate_bipartite(bip, u_id0, i_id0, hp.layers)
        u_v, i_v = propagate_bipartite(bip, u_v0, i_v2, hp.layers)
        u_t, i_t = propagate_bipartite(bip, u_t0, i_t2, hp.layers)

    with _stage("refine"):
        if ablation.bypass_meta:
            u_share, i_share = u_id, i_id
        else:
            u_share = meta_shared(u_v, u_t, u_id, params.meta_user)
            i_share = meta_shared(i_v, i_t, i_id, params.meta_item)
        u_uni = fuse_unique(u_v, u_t, u_id, params.meta_user)
        i_uni = fuse_unique(i_v, i_t, i_id, params.meta_item)
        u_star = torch.cat([u_share, u_uni], dim=1)
        i_star = torch.cat([i_share, i_uni], dim=1)

    return ForwardCache(u_id=u_id, i_id=i_id, u_visual=u_v, i_visual=i_v,
                        u_textual=u_t, i_textual=i_t, u_share=u_share,
                        i_share=i_share, u_unique=u_uni, i_unique=i_uni,
                        u_star=u_star, i_star=i_star)


def predict(u_star: torch.Tensor, i_star: torch.Tensor) -> torch.Tensor:
    """Inner-product score; broadcasts over leading batch dimensions."""
    if u_star.shape[-1] != i_star.shape[-1]:
        raise ValueError(f"representation widths differ: "
                         f"{u_star.shape[-1]} vs {i_star.shape[-1]}")
    return (u_star * i_star).sum(-1)


def sample_triplets(ds: InteractionDataset, batch_size: int,
                    rng: np.random.Generator):
    """Uniform train pairs plus a rejection-sampled negative per pair."""
    if ds.train.shape[0] == 0:
        raise DataError("cannot sample from an empty train split")
    sets = ds.train_item_sets()
    idx = rng.integers(0, ds.train.shape[0], size=batch_size)
    users = ds.train[idx, 0].copy()
    pos = ds.train[idx, 1].copy()
    neg = np.empty(batch_size, dtype=np.int64)
    for row, u in enumerate(users):
        owned = sets[u]
        if len(owned) >= ds.n_items:
            raise DataError(f"user {u} interacts with every item; "
                            f"no negative exists")
        draw = int(rng.integers(0, ds.n_items))
        while draw in owned:
            draw = int(rng.integers(0, ds.n_items))
        neg[row] = draw
    return users, pos, neg


def bpr_loss(pos_scores: torch.Tensor,
             neg_scores: torch.Tensor) -> torch.Tensor:
    if pos_scores.shape != neg_scores.shape:
        raise ValueError("score vectors must have equal length")
    # -log sigmoid(pos - neg) == softplus(neg - pos)
    return F.softplus(neg_scores - pos_scores).mean()


def total_loss(bpr, cl, ort, params, weights: RefineLossWeights,
               batch_size: int):
    total = bpr
    if weights.lambda_cl != 0:
        total = total + weights.lambda_cl * cl
    if weights.lambda_ort != 0:
        total = total + weights.lambda_ort * ort
    if weights.lambda_p != 0:
        reg = sum((p ** 2).sum() for p in params.parameters())
        total = total + weights.lambda_p * reg / batch_size
    return total


def effective_weights(base: RefineLossWeights,
                      ablation: Ablation) -> RefineLossWeights:
    if ablation.zero_ort and base.lambda_ort != 0:
        return RefineLossWeights(base.tau, base.lambda_cl, 0.0,
                                 base.lambda_p)
    return base


def _component_losses(cache: ForwardCache, batch,
                      weights: RefineLossWeights):
    users, pos, neg = (torch.from_numpy(np.ascontiguousarray(b))
                       for b in batch)
    u = cache.u_star[users]
    bpr = bpr_loss((u * cache.i_star[pos]).sum(1),
                   (u * cache.i_star[neg]).sum(1))
    # alignment over the batch's unique users/positive items;
    # orthogonality over the full tables (cheap, one row per node)
    uu = torch.from_numpy(np.unique(batch[0]))
    ii = torch.from_numpy(np.unique(batch[1]))
    cl = infonce_loss(cache.u_visual[uu], cache.u_textual[uu], weights.tau) \
        + infonce_loss(cache.i_visual[ii], cache.i_textual[ii], weights.tau)
    ort = orthogonal_loss(cache.u_visual, cache.u_textual) \
        + orthogonal_loss(cache.i_visual, cache.i_textual)
    return bpr, cl, ort


def _first_nonfinite(cache: ForwardCache, parts: dict) -> str:
    for name, t in cache.named():
        if not torch.isfinite(t).all():
            return name
    for name, v in parts.items():
        if not torch.isfinite(v).all():
            return f"{name} loss"
    return "total loss"


def train_step(graphs: GraphBundle, features_t, params: ParameterStore,
               hp: HyperParams, opt: torch.optim.Optimizer, batch, *,
               ablation: Ablation = Ablation(),
               gen: torch.Generator | None = None,
               weights: RefineLossWeights | None = None):
    """One optimization step on a sampled batch; returns the loss parts
    and the global gradient norm."""
    if weights is None:
        weights = effective_weights(hp.refine, ablation)
    cache = forward(graphs, features_t, params, hp, training=True,
                    ablation=ablation, gen=gen)
    bpr, cl, ort = _component_losses(cache, batch, weights)
    total = total_loss(bpr, cl, ort, params, weights, len(batch[0]))
    if not torch.isfinite(total):
        culprit = _first_nonfinite(cache, {"bpr": bpr, "cl": cl, "ort": ort})
        raise NumericError(f"non-finite training loss; first non-finite "
                           f"tensor: {culprit}")
    opt.zero_grad(set_to_none=True)
    total.backward()
    grad_sq = 0.0
    for p in params.parameters():
        if p.grad is not None:
            grad_sq += float((p.grad.detach() ** 2).sum())
    opt.step()
    parts = {"loss": float(total.detach()), "bpr": float(bpr.detach()),
             "cl": float(cl.detach()), "ort": float(ort.detach())}
    return parts, math.sqrt(grad_sq)


class EarlyStopper:
    """Best-so-far tracking with a patience budget; snapshots the state
    dict at every improvement."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = -math.inf
        self.best_epoch = 0
        self.best_state = None
        self.stale = 0

    def update(self, metric: float, epoch: int,
               params: ParameterStore) -> bool:
        if metric > self.best:
            self.best, self.best_epoch, self.stale = metric, epoch, 0
            self.best_state = {k: v.detach().clone()
                               for k, v in params.state_dict().items()}
            return False
        self.stale += 1
        return self.stale >= self.patience


def fit(ds: InteractionDataset, features: dict[str, ModalFeatures],
        hp: HyperParams, ablation: Ablation = Ablation(), *,
        graphs: GraphBundle | None = None, record_seconds: bool = True,
        log=None):
    """Train with early stopping on validation recall@20.

    Returns (params at the best validation epoch, history), history being
    one dict per epoch with the averaged loss parts and the validation
    metrics.
    """
    ablation.validate()
    if graphs is None:
        graphs = build_graph_bundle(ds, features, hp, ablation)
    d_m = {m: features[m].d_m for m in MODALITIES}
    params = ParameterStore(ds.n_users, ds.n_items, hp, d_m)
    features_t = features_to_torch(features, torch.float32)
    weights = effective_weights(hp.refine, ablation)
    opt = torch.optim.Adam(params.parameters(), lr=hp.learning_rate,
                           betas=(0.9, 0.999), eps=1e-8)
    gen = torch.Generator().manual_seed(hp.seed + 1)
    rng = np.random.default_rng(hp.seed + 2)
    stopper = EarlyStopper(hp.patience)
    steps = max(1, math.ceil(ds.train.shape[0] / hp.batch_size))
    history = []
    for epoch in range(1, hp.epochs_max + 1):
        tic = time.perf_counter()
        sums = {"loss": 0.0, "bpr": 0.0, "cl": 0.0, "ort": 0.0}
        for _ in range(steps):
            batch = sample_triplets(ds, hp.batch_size, rng)
            parts, _ = train_step(graphs, features_t, params, hp, opt,
                                  batch, ablation=ablation, gen=gen,
                                  weights=weights)
            for key in sums:
                sums[key] += parts[key]
        with torch.no_grad():
            cache = forward(graphs, features_t, params, hp, training=False,
                            ablation=ablation)
            report = metrics.evaluate_split(ds, cache.u_star, cache.i_star,
                                            "val", (20,))
        entry = {"epoch": epoch,
                 "loss": sums["loss"] / steps,
                 "bpr": sums["bpr"] / steps,
                 "cl": sums["cl"] / steps,
                 "ort": sums["ort"] / steps,
                 "val_recall20": report.recall[20],
                 "val_ndcg20": report.ndcg[20],
                 "seconds": time.perf_counter() - tic if record_seconds
                 else 0.0}
        history.append(entry)
        if log is not None:
            log(entry)
        if stopper.update(entry["val_recall20"], epoch, params):
            break
    if stopper.best_state is not None:
        params.load_state_dict(stopper.best_state)
    return params, history


def gradient_check(ds: InteractionDataset,
                   features: dict[str, ModalFeatures], hp: HyperParams,
                   ablation: Ablation = Ablation(), *, batch=None,
                   eps: float = 1e-4,
                   graphs: GraphBundle | None = None) -> dict[str, float]:
    """Max relative error between backward gradients and central finite
    differences of the full batch objective, per parameter tensor.

    Everything runs in float64; the dropout generator is re-seeded before
    every evaluation so the mask is held fixed.
    """
    if graphs is None:
        graphs = build_graph_bundle(ds, features, hp, ablation)
    d_m = {m: features[m].d_m for m in MODALITIES}
    params = ParameterStore(ds.n_users, ds.n_items, hp, d_m,
                            dtype=torch.float64)
    features_t = features_to_torch(features, torch.float64)
    weights = effective_weights(hp.refine, ablation)
    if batch is None:
        batch = sample_triplets(ds, hp.batch_size,
                                np.random.default_rng(hp.seed + 2))

    def objective():
        gen = torch.Generator().manual_seed(hp.seed + 1)
        cache = forward(graphs, features_t, params, hp, training=True,
                        ablation=ablation, gen=gen)
        bpr, cl, ort = _component_losses(cache, batch, weights)
        return total_loss(bpr, cl, ort, params, weights, len(batch[0]))

    objective().backward()
    analytic = {name: (p.grad.detach().clone() if p.grad is not None
                       else torch.zeros_like(p))
                for name, p in params.named_parameters()}
    errors: dict[str, float] = {}
    with torch.no_grad():
        for name, p in params.named_parameters():
            flat = p.view(-1)
            grad = analytic[name].view(-1)
            worst = 0.0
            for j in range(flat.numel()):
                orig = float(flat[j])
                flat[j] = orig + eps
                f_plus = float(objective())
                flat[j] = orig - eps
                f_minus = float(objective())
                flat[j] = orig
                fd = (f_plus - f_minus) / (2.0 * eps)
                a = float(grad[j])
                denom = max(abs(a), abs(fd))
                err = abs(a - fd) if denom < 1e-8 else abs(a - fd) / denom
                worst = max(worst, err)
            errors[name] = worst
    return errors


def save_checkpoint(path, params: ParameterStore, hp: HyperParams, *,
                    dataset_digest: str, ablation: Ablation = Ablation(),
                    extra: dict | None = None) -> None:
    """Binary checkpoint: magic, version, header length, JSON header with
    the tensor manifest, then the tensors as little-endian float32."""
    state = params.state_dict()
    header = {
        "ablation": ablation.flags(),
        "dataset_digest": dataset_digest,
        "hyperparams": hyperparams_to_dict(hp),
        "manifest": [{"name": k, "shape": list(v.shape)}
                     for k, v in state.items()],
    }
    if extra:
        header.update(extra)
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<IQ", CHECKPOINT_VERSION, len(blob)))
        fh.write(blob)
        for value in state.values():
            fh.write(value.detach().to(torch.float32).numpy()
                     .astype("<f4").tobytes())


def load_checkpoint(path, expected_digest: str | None = None):
    """Returns (header dict, name -> float32 ndarray)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise DataError(f"{path}: not a checkpoint file")
    off = len(CHECKPOINT_MAGIC)
    version, header_len = struct.unpack_from("<IQ", raw, off)
    if version != CHECKPOINT_VERSION:
        raise DataError(f"{path}: unsupported checkpoint version {version}")
    off += struct.calcsize("<IQ")
    header = json.loads(raw[off:off + header_len].decode("utf-8"))
    off += header_len
    if expected_digest is not None \
            and header.get("dataset_digest") != expected_digest:
        raise DataError("checkpoint was built from a different dataset "
                        f"(digest {header.get('dataset_digest')!r}, "
                        f"expected {expected_digest!r})")
    tensors = {}
    for entry in header["manifest"]:
        count = int(np.prod(entry["shape"])) if entry["shape"] else 1
        end = off + 4 * count
        if end > len(raw):
            raise DataError(f"{path}: truncated checkpoint")
        arr = np.frombuffer(raw, dtype="<f4", count=count, offset=off)
        tensors[entry["name"]] = arr.reshape(entry["shape"]).copy()
        off = end
    if off != len(raw):
        raise DataError(f"{path}: trailing bytes after tensor data")
    return header, tensors


def restore_params(params: ParameterStore, tensors: dict) -> None:
    state = {}
    for name, current in params.state_dict().items():
        if name not in tensors:
            raise DataError(f"checkpoint is missing tensor {name!r}")
        arr = tensors[name]
        if tuple(arr.shape) != tuple(current.shape):
            raise DataError(f"checkpoint tensor {name!r} has shape "
                            f"{tuple(arr.shape)}, expected "
                            f"{tuple(current.shape)}")
        state[name] = torch.from_numpy(np.ascontiguousarray(arr)) \
            .to(current.dtype)
    params.load_state_dict(state)
