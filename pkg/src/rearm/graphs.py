"""Homogeneous relation graphs: co-occurrence, semantic kNN, fusion, and
message passing.

All graphs are weighted CSR with ascending column indices per row and no
self-loops or explicit zero-weight edges. Construction is deterministic:
top-k ties break toward the smaller node index.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import torch

from .data import MODALITIES, InteractionDataset, ModalFeatures
from .errors import ConfigError, DataError

CSR_MAGIC = b"CSRG"
CSR_VERSION = 1

GRAPH_KINDS = ("cooccurrence", "semantic", "fused", "bipartite")


@dataclass
class HomographConfig:
    """Knobs for building and fusing the homogeneous relation graphs.

    alpha_modal_* weight the per-modality semantic graphs (order follows
    MODALITIES) and must sum to 1; alpha_co_* blends co-occurrence against
    the fused semantic graph.
    """
    top_k_co: int = 10
    top_k_sem: int = 10
    alpha_modal_user: tuple = (0.5, 0.5)
    alpha_modal_item: tuple = (0.5, 0.5)
    alpha_co_user: float = 0.5
    alpha_co_item: float = 0.5
    layers: int = 1

    def __post_init__(self):
        if self.top_k_co < 1 or self.top_k_sem < 1:
            raise ConfigError("graph top_k values must be at least 1")
        if self.layers < 0:
            raise ConfigError("homograph layer count must be nonnegative")
        for name in ("alpha_modal_user", "alpha_modal_item"):
            alphas = tuple(getattr(self, name))
            setattr(self, name, alphas)
            if len(alphas) != len(MODALITIES):
                raise ConfigError(f"{name} needs {len(MODALITIES)} weights")
            if abs(sum(alphas) - 1.0) > 1e-9:
                raise ConfigError(f"{name} must sum to 1")
        for name in ("alpha_co_user", "alpha_co_item"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1]")


@dataclass
class SparseGraph:
    """Weighted CSR adjacency over ``n`` nodes."""

    n: int
    row_ptr: np.ndarray   # int64, length n + 1
    col_idx: np.ndarray   # int64, length nnz
    weights: np.ndarray   # float32, length nnz
    kind: str
    _torch_cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def nnz(self) -> int:
        return int(self.col_idx.size)

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        s, e = self.row_ptr[i], self.row_ptr[i + 1]
        return self.col_idx[s:e], self.weights[s:e]

    def empty_row_mask(self) -> np.ndarray:
        return np.diff(self.row_ptr) == 0

    def to_dense(self) -> np.ndarray:
        dense = np.zeros((self.n, self.n), dtype=np.float64)
        for i in range(self.n):
            cols, w = self.row(i)
            dense[i, cols] = w
        return dense

    def to_scipy(self) -> sp.csr_matrix:
        return sp.csr_matrix(
            (self.weights.astype(np.float64), self.col_idx, self.row_ptr),
            shape=(self.n, self.n))

    def to_torch(self, dtype=torch.float32) -> torch.Tensor:
        key = dtype
        if key not in self._torch_cache:
            rows = np.repeat(np.arange(self.n, dtype=np.int64),
                             np.diff(self.row_ptr))
            indices = torch.from_numpy(np.stack([rows, self.col_idx]))
            values = torch.from_numpy(self.weights.astype(np.float64)).to(dtype)
            # indices come from a valid CSR, so skip the invariant scan
            adj = torch.sparse_coo_tensor(indices, values, (self.n, self.n),
                                          check_invariants=False).coalesce()
            self._torch_cache[key] = adj
        return self._torch_cache[key]

    def validate(self) -> None:
        if self.kind not in GRAPH_KINDS:
            raise DataError(f"unknown graph kind {self.kind!r}")
        if self.row_ptr.shape != (self.n + 1,) or self.row_ptr[0] != 0 \
                or self.row_ptr[-1] != self.nnz:
            raise DataError("inconsistent CSR row pointers")
        if not np.isfinite(self.weights).all() or (self.weights < 0).any():
            raise DataError("graph weights must be finite and nonnegative")
        for i in range(self.n):
            cols, _ = self.row(i)
            if cols.size and (np.diff(cols) <= 0).any():
                raise DataError(f"row {i}: columns not strictly increasing")
            if cols.size and ((cols < 0).any() or (cols >= self.n).any()):
                raise DataError(f"row {i}: column index out of range")


def build_cooccurrence_graph(ds: InteractionDataset, side: str,
                             top_k: int) -> SparseGraph:
    """Count co-interactors over train pairs, keep each node's top_k
    neighbors by count, and softmax the retained counts per row."""
    if top_k <= 0:
        raise ValueError("top_k must be positive")
    if side not in ("user", "item"):
        raise ValueError(f"side must be 'user' or 'item', got {side!r}")
    if ds.train.size == 0:
        raise DataError("train split is empty")
    ones = np.ones(len(ds.train), dtype=np.float64)
    interact = sp.csr_matrix((ones, (ds.train[:, 0], ds.train[:, 1])),
                             shape=(ds.n_users, ds.n_items))
    counts = (interact @ interact.T if side == "user"
              else interact.T @ interact).tocsr()
    counts.setdiag(0)
    counts.eliminate_zeros()
    counts.sort_indices()

    n = ds.n_users if side == "user" else ds.n_items
    return _rows_to_graph(n, "cooccurrence", _topk_softmax_rows(counts, top_k))


def build_semantic_graph(features: np.ndarray, top_k: int) -> SparseGraph:
    """Cosine-similarity kNN graph with negative similarities clamped to 0
    and symmetric degree normalization over the retained edges."""
    if top_k <= 0:
        raise ValueError("top_k must be positive")
    n = features.shape[0]
    x = np.asarray(features, dtype=np.float64)
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    xn = np.divide(x, norms, out=np.zeros_like(x), where=norms > 0)

    row_cols: list[np.ndarray] = []
    row_vals: list[np.ndarray] = []
    block = 1024
    for start in range(0, n, block):
        stop = min(start + block, n)
        sims = xn[start:stop] @ xn.T          # (block, n)
        np.maximum(sims, 0.0, out=sims)
        for r in range(start, stop):
            vals = sims[r - start]
            vals[r] = -1.0                     # exclude self
            keep = _topk_by_value(vals, top_k)
            kept_vals = vals[keep]
            positive = kept_vals > 0
            row_cols.append(keep[positive])
            row_vals.append(kept_vals[positive])

    degrees = np.array([v.sum() for v in row_vals])
    rows = []
    for i in range(n):
        cols, vals = row_cols[i], row_vals[i]
        if cols.size:
            vals = vals / np.sqrt(degrees[i] * degrees[cols])
        order = np.argsort(cols)
        rows.append((cols[order], vals[order]))
    return _rows_to_graph(n, "semantic", rows)


def fuse_semantic_graphs(graphs: list[SparseGraph],
                         alphas) -> SparseGraph:
    """Edge-wise weighted sum of per-modality semantic graphs."""
    alphas = list(alphas)
    if not graphs:
        raise ValueError("no graphs to fuse")
    if len(alphas) != len(graphs):
        raise ValueError(f"{len(alphas)} weights for {len(graphs)} graphs")
    if any(g.n != graphs[0].n for g in graphs):
        raise DataError("graphs must share the node count")
    acc = None
    for g, a in zip(graphs, alphas):
        term = g.to_scipy() * float(a)
        acc = term if acc is None else acc + term
    return _from_scipy(acc, graphs[0].n, "semantic")


def fuse_homograph(co: SparseGraph, sem: SparseGraph,
                   alpha_co: float) -> SparseGraph:
    """alpha_co * co + (1 - alpha_co) * sem over the edge-set union."""
    if co.n != sem.n:
        raise DataError(f"node count mismatch: {co.n} vs {sem.n}")
    if not 0.0 <= alpha_co <= 1.0:
        raise ValueError("alpha_co must be in [0, 1]")
    fused = co.to_scipy() * float(alpha_co) \
        + sem.to_scipy() * float(1.0 - alpha_co)
    return _from_scipy(fused, co.n, "fused")


def build_homographs(ds: InteractionDataset,
                     features: dict[str, ModalFeatures],
                     cfg: HomographConfig) -> dict[str, SparseGraph]:
    """Build the four cacheable homogeneous graphs: co-occurrence and fused
    semantic, for both sides. The co/semantic blend happens later so the
    blend weight never invalidates these."""
    for m in MODALITIES:
        if m not in features:
            raise DataError(f"missing features for modality '{m}'")
    item_sem = [build_semantic_graph(features[m].item_matrix, cfg.top_k_sem)
                for m in MODALITIES]
    user_sem = [build_semantic_graph(features[m].user_matrix, cfg.top_k_sem)
                for m in MODALITIES]
    return {
        "user_co": build_cooccurrence_graph(ds, "user", cfg.top_k_co),
        "item_co": build_cooccurrence_graph(ds, "item", cfg.top_k_co),
        "user_sem": fuse_semantic_graphs(user_sem, cfg.alpha_modal_user),
        "item_sem": fuse_semantic_graphs(item_sem, cfg.alpha_modal_item),
    }


def propagate_homograph(g: SparseGraph, h0: torch.Tensor, layers: int):
    """Repeatedly aggregate neighbor rows; nodes with no edges keep their
    current features. Returns the final layer split into three equal-width
    slices (id, visual, textual)."""
    if h0.shape[0] != g.n:
        raise ValueError(f"feature rows {h0.shape[0]} != graph nodes {g.n}")
    if h0.shape[1] % 3 != 0:
        raise ValueError("feature width must be divisible by 3")
    h = h0
    if layers > 0 and g.nnz > 0:
        adj = g.to_torch(h0.dtype)
        isolated = torch.from_numpy(g.empty_row_mask()).unsqueeze(1)
        for _ in range(layers):
            h = torch.where(isolated, h, torch.sparse.mm(adj, h))
    d = h0.shape[1] // 3
    return h[:, :d], h[:, d:2 * d], h[:, 2 * d:]


def save_graph(path, g: SparseGraph) -> None:
    with open(path, "wb") as fh:
        fh.write(CSR_MAGIC)
        fh.write(struct.pack("<IQQ", CSR_VERSION, g.n, g.nnz))
        fh.write(g.row_ptr.astype("<u8").tobytes())
        fh.write(g.col_idx.astype("<u8").tobytes())
        fh.write(g.weights.astype("<f4").tobytes())


def load_graph(path, kind: str) -> SparseGraph:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != CSR_MAGIC:
            raise DataError(f"{path}: not a graph file")
        version, n, nnz = struct.unpack("<IQQ", fh.read(4 + 8 + 8))
        if version != CSR_VERSION:
            raise DataError(f"{path}: unsupported graph version {version}")
        row_ptr = np.fromfile(fh, dtype="<u8", count=n + 1).astype(np.int64)
        col_idx = np.fromfile(fh, dtype="<u8", count=nnz).astype(np.int64)
        weights = np.fromfile(fh, dtype="<f4", count=nnz).astype(np.float32)
    if row_ptr.size != n + 1 or col_idx.size != nnz or weights.size != nnz:
        raise DataError(f"{path}: truncated graph file")
    g = SparseGraph(int(n), row_ptr, col_idx, weights, kind)
    g.validate()
    return g


def _topk_softmax_rows(counts: sp.csr_matrix, top_k: int):
    rows = []
    for i in range(counts.shape[0]):
        s, e = counts.indptr[i], counts.indptr[i + 1]
        cols = counts.indices[s:e].astype(np.int64)
        vals = counts.data[s:e]
        if cols.size == 0:
            rows.append((cols, vals))
            continue
        if cols.size > top_k:
            keep = np.lexsort((cols, -vals))[:top_k]
            cols, vals = cols[keep], vals[keep]
        shifted = np.exp(vals - vals.max())
        weights = shifted / shifted.sum()
        order = np.argsort(cols)
        rows.append((cols[order], weights[order]))
    return rows


def _topk_by_value(vals: np.ndarray, top_k: int) -> np.ndarray:
    """Indices of the top_k largest values, ties toward smaller index."""
    idx = np.arange(vals.size)
    order = np.lexsort((idx, -vals))
    return order[:top_k]


def _rows_to_graph(n, kind, rows) -> SparseGraph:
    lengths = np.array([cols.size for cols, _ in rows], dtype=np.int64)
    row_ptr = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
    if lengths.sum():
        col_idx = np.concatenate([cols for cols, _ in rows]).astype(np.int64)
        weights = np.concatenate([w for _, w in rows]).astype(np.float32)
    else:
        col_idx = np.empty(0, dtype=np.int64)
        weights = np.empty(0, dtype=np.float32)
    return SparseGraph(n, row_ptr, col_idx, weights, kind)


def _from_scipy(mat: sp.spmatrix, n: int, kind: str) -> SparseGraph:
    csr = mat.tocsr()
    csr.eliminate_zeros()
    csr.sort_indices()
    return SparseGraph(n, csr.indptr.astype(np.int64),
                       csr.indices.astype(np.int64),
                       csr.data.astype(np.float32), kind)
