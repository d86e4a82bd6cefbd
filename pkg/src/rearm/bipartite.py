"""User-item bipartite graph with symmetric normalization and LightGCN-style
layer-averaged propagation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from .data import InteractionDataset
from .errors import DataError
from .graphs import SparseGraph


@dataclass
class BipartiteGraph:
    """Normalized train-interaction adjacency in both directions.

    Each edge (u, i) carries weight 1 / (sqrt(deg_u) * sqrt(deg_i)) using
    train degrees; the same weight appears in both direction CSRs.
    """

    n_users: int
    n_items: int
    user_ptr: np.ndarray    # user -> items
    user_cols: np.ndarray
    user_weights: np.ndarray
    item_ptr: np.ndarray    # item -> users
    item_cols: np.ndarray
    item_weights: np.ndarray
    _torch_cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def nnz(self) -> int:
        return int(self.user_cols.size)

    def to_torch(self, dtype=torch.float32):
        """(user->item, item->user) sparse operators."""
        if dtype not in self._torch_cache:
            ui = _csr_to_torch(self.user_ptr, self.user_cols,
                               self.user_weights,
                               (self.n_users, self.n_items), dtype)
            iu = _csr_to_torch(self.item_ptr, self.item_cols,
                               self.item_weights,
                               (self.n_items, self.n_users), dtype)
            self._torch_cache[dtype] = (ui, iu)
        return self._torch_cache[dtype]

    def to_block_graph(self) -> SparseGraph:
        """Square (n_users + n_items) adjacency [[0, R], [R^T, 0]] for
        serialization through the CSR graph format."""
        n = self.n_users + self.n_items
        row_ptr = np.concatenate([
            self.user_ptr,
            self.user_ptr[-1] + self.item_ptr[1:],
        ]).astype(np.int64)
        col_idx = np.concatenate([
            self.user_cols + self.n_users,
            self.item_cols,
        ]).astype(np.int64)
        weights = np.concatenate([self.user_weights,
                                  self.item_weights]).astype(np.float32)
        return SparseGraph(n, row_ptr, col_idx, weights, "bipartite")

    @classmethod
    def from_block_graph(cls, g: SparseGraph, n_users: int) -> "BipartiteGraph":
        if g.kind != "bipartite":
            raise DataError(f"expected bipartite graph, got {g.kind!r}")
        n_items = g.n - n_users
        user_ptr = g.row_ptr[:n_users + 1].copy()
        split = int(user_ptr[-1])
        user_cols = g.col_idx[:split] - n_users
        user_weights = g.weights[:split].copy()
        item_ptr = (g.row_ptr[n_users:] - split).astype(np.int64)
        item_cols = g.col_idx[split:].copy()
        item_weights = g.weights[split:].copy()
        if (user_cols < 0).any() or (user_cols >= n_items).any() \
                or (item_cols >= n_users).any():
            raise DataError("block graph does not match the stated user count")
        return cls(n_users, n_items, user_ptr, user_cols, user_weights,
                   item_ptr, item_cols, item_weights)


def build_bipartite(ds: InteractionDataset) -> BipartiteGraph:
    """Per-edge weight 1 / (sqrt(deg_u) * sqrt(deg_i)) over train pairs."""
    if ds.train.size == 0:
        raise DataError("train split is empty")
    users = ds.train[:, 0]
    items = ds.train[:, 1]
    deg_u = np.bincount(users, minlength=ds.n_users).astype(np.float64)
    deg_i = np.bincount(items, minlength=ds.n_items).astype(np.float64)
    weights = 1.0 / np.sqrt(deg_u[users] * deg_i[items])

    user_ptr, user_cols, user_w = _sorted_csr(users, items, weights,
                                              ds.n_users)
    item_ptr, item_cols, item_w = _sorted_csr(items, users, weights,
                                              ds.n_items)
    return BipartiteGraph(ds.n_users, ds.n_items,
                          user_ptr, user_cols, user_w.astype(np.float32),
                          item_ptr, item_cols, item_w.astype(np.float32))


def propagate_bipartite(g: BipartiteGraph, u0: torch.Tensor,
                        i0: torch.Tensor, layers: int):
    """Alternate user/item aggregation and return the mean over layers
    0..layers for each side.

    Aggregation runs in float64 regardless of input dtype and the result
    is cast back, so rounding stays bounded and run-order independent.
    """
    if u0.shape[0] != g.n_users or i0.shape[0] != g.n_items:
        raise ValueError("embedding row counts do not match the graph")
    if layers == 0:
        return u0, i0
    ui, iu = g.to_torch(torch.float64)
    u_sum = u = u0.to(torch.float64)
    i_sum = i = i0.to(torch.float64)
    for _ in range(layers):
        u, i = torch.sparse.mm(ui, i), torch.sparse.mm(iu, u)
        u_sum = u_sum + u
        i_sum = i_sum + i
    return (u_sum / (layers + 1)).to(u0.dtype), \
        (i_sum / (layers + 1)).to(i0.dtype)


def _sorted_csr(rows, cols, weights, n_rows):
    order = np.lexsort((cols, rows))
    rows, cols, weights = rows[order], cols[order], weights[order]
    ptr = np.zeros(n_rows + 1, dtype=np.int64)
    np.add.at(ptr, rows + 1, 1)
    np.cumsum(ptr, out=ptr)
    return ptr, cols.astype(np.int64), weights


def _csr_to_torch(ptr, cols, weights, shape, dtype):
    rows = np.repeat(np.arange(shape[0], dtype=np.int64), np.diff(ptr))
    indices = torch.from_numpy(np.stack([rows, cols]))
    values = torch.from_numpy(weights.astype(np.float64)).to(dtype)
    return torch.sparse_coo_tensor(indices, values, shape,
                                   check_invariants=False).coalesce()
