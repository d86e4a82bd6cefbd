"""Interaction data: loading, k-core filtering, splitting, and modal features.

Interaction files are UTF-8 TSV with one ``user_token<TAB>item_token`` pair
per line; a third column is ignored and lines starting with ``#`` are
skipped. Feature matrices are either binary (magic ``MMFT``) or plain text
with one whitespace-separated row per line.
"""

from __future__ import annotations

import json
import struct
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

FEATURE_MAGIC = b"MMFT"
FEATURE_VERSION = 1

MODALITIES = ("visual", "textual")


@dataclass
class InteractionDataset:
    """Implicit-feedback interactions with contiguous ids and a fixed split.

    ``train``/``val``/``test`` are int64 arrays of shape (n, 2) holding
    (user_index, item_index) rows. ``train_adjacency[u]`` lists u's train
    items in ascending order; every user has at least one train item.
    """

    n_users: int
    n_items: int
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    user_id_map: dict[str, int]
    item_id_map: dict[str, int]
    train_adjacency: list[np.ndarray]
    _train_sets: list[set[int]] | None = field(default=None, repr=False)

    @classmethod
    def from_index_pairs(cls, n_users, n_items, train, val, test,
                         user_id_map=None, item_id_map=None):
        """Build a dataset directly from already-indexed pairs."""
        train = np.asarray(train, dtype=np.int64).reshape(-1, 2)
        val = np.asarray(val, dtype=np.int64).reshape(-1, 2)
        test = np.asarray(test, dtype=np.int64).reshape(-1, 2)
        if user_id_map is None:
            user_id_map = {str(u): u for u in range(n_users)}
        if item_id_map is None:
            item_id_map = {str(i): i for i in range(n_items)}
        adjacency = _build_adjacency(n_users, train)
        ds = cls(n_users, n_items, train, val, test,
                 user_id_map, item_id_map, adjacency)
        ds.validate()
        return ds

    def train_item_sets(self) -> list[set[int]]:
        if self._train_sets is None:
            self._train_sets = [set(a.tolist()) for a in self.train_adjacency]
        return self._train_sets

    def items_by_split(self, split: str) -> list[list[int]]:
        """Per-user item lists for ``val`` or ``test``."""
        pairs = {"val": self.val, "test": self.test}[split]
        out: list[list[int]] = [[] for _ in range(self.n_users)]
        for u, i in pairs:
            out[u].append(int(i))
        return out

    def validate(self) -> None:
        for name, arr in (("train", self.train), ("val", self.val),
                          ("test", self.test)):
            if arr.size and (arr[:, 0].min() < 0 or arr[:, 0].max() >= self.n_users
                             or arr[:, 1].min() < 0 or arr[:, 1].max() >= self.n_items):
                raise DataError(f"{name} split contains out-of-range indices")
        seen: set[tuple[int, int]] = set()
        for arr in (self.train, self.val, self.test):
            for u, i in arr:
                key = (int(u), int(i))
                if key in seen:
                    raise DataError(f"duplicate pair {key} across splits")
                seen.add(key)
        users_with_train = {int(u) for u, _ in self.train}
        if len(users_with_train) != self.n_users:
            raise DataError("some users have no train interaction")


@dataclass
class ModalFeatures:
    """Dense item feature matrix for one modality plus the derived per-user
    preference matrix (mean of the user's train items' rows)."""

    modality: str
    item_matrix: np.ndarray   # (n_items, d_m)
    user_matrix: np.ndarray   # (n_users, d_m)

    @property
    def d_m(self) -> int:
        return self.item_matrix.shape[1]

    def validate(self) -> None:
        for name, mat in (("item", self.item_matrix), ("user", self.user_matrix)):
            if not np.isfinite(mat).all():
                raise DataError(f"{self.modality} {name} features contain NaN/Inf")


def load_interactions(path) -> list[tuple[str, str]]:
    """Parse a TSV interaction file into an ordered (user, item) token list.

    Duplicates are preserved; blank lines and '#'-comments are skipped.
    """
    pairs: list[tuple[str, str]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) < 2 or not cols[0] or not cols[1]:
                raise DataError(f"{path}: line {lineno}: expected "
                                f"'user<TAB>item', got {line!r}")
            pairs.append((cols[0], cols[1]))
    if not pairs:
        raise DataError(f"{path}: no interactions found")
    return pairs


def apply_k_core(pairs, k: int):
    """Deduplicate pairs, then iteratively drop users/items of degree < k."""
    if k < 1:
        raise ValueError("k must be >= 1")
    seen: set[tuple[str, str]] = set()
    current = [p for p in pairs if not (p in seen or seen.add(p))]
    while True:
        user_deg = Counter(u for u, _ in current)
        item_deg = Counter(i for _, i in current)
        kept = [(u, i) for u, i in current
                if user_deg[u] >= k and item_deg[i] >= k]
        if len(kept) == len(current):
            break
        current = kept
    if not current:
        raise DataError("dataset eliminated by k-core")
    return current


def split_dataset(pairs, ratios=(8, 1, 1), seed: int = 0) -> InteractionDataset:
    """Globally random split at the given ratios, with a repair pass that
    moves one val/test pair into train for any user left without one."""
    n = len(pairs)
    if n < 3:
        raise DataError("need at least 3 interactions to split")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    total = sum(ratios)
    n_val = int(n * ratios[1] / total)
    n_test = int(n * ratios[2] / total)
    n_train = n - n_val - n_test

    shuffled = [pairs[j] for j in order]
    train = shuffled[:n_train]
    val = shuffled[n_train:n_train + n_val]
    test = shuffled[n_train + n_val:]

    # repair: every user keeps at least one train interaction
    train_users = {u for u, _ in train}
    for bucket in (val, test):
        moved = []
        for idx, (u, i) in enumerate(bucket):
            if u not in train_users:
                train.append((u, i))
                train_users.add(u)
                moved.append(idx)
        for idx in reversed(moved):
            del bucket[idx]

    user_tokens = sorted({u for u, _ in pairs})
    item_tokens = sorted({i for _, i in pairs})
    user_id_map = {tok: j for j, tok in enumerate(user_tokens)}
    item_id_map = {tok: j for j, tok in enumerate(item_tokens)}

    def index(bucket):
        return np.array([(user_id_map[u], item_id_map[i]) for u, i in bucket],
                        dtype=np.int64).reshape(-1, 2)

    train_idx, val_idx, test_idx = index(train), index(val), index(test)
    adjacency = _build_adjacency(len(user_tokens), train_idx)
    ds = InteractionDataset(len(user_tokens), len(item_tokens),
                            train_idx, val_idx, test_idx,
                            user_id_map, item_id_map, adjacency)
    ds.validate()
    return ds


def load_feature_matrix(path, expected_rows: int) -> np.ndarray:
    """Load a feature matrix, binary (MMFT) or whitespace-text fallback."""
    with open(path, "rb") as fh:
        head = fh.read(4)
        if head == FEATURE_MAGIC:
            version, rows, cols = struct.unpack("<IQQ", fh.read(4 + 8 + 8))
            if version != FEATURE_VERSION:
                raise DataError(f"{path}: unsupported feature version {version}")
            data = np.fromfile(fh, dtype="<f4", count=rows * cols)
            if data.size != rows * cols:
                raise DataError(f"{path}: truncated feature payload")
            matrix = data.reshape(rows, cols)
        else:
            matrix = _parse_text_matrix(path)
    if matrix.shape[0] != expected_rows:
        raise DataError(f"{path}: expected {expected_rows} rows, "
                        f"found {matrix.shape[0]}")
    if not np.isfinite(matrix).all():
        raise DataError(f"{path}: features contain NaN/Inf")
    return matrix.astype(np.float32, copy=False)


def save_feature_matrix(path, matrix: np.ndarray) -> None:
    matrix = np.ascontiguousarray(matrix, dtype=np.float32)
    with open(path, "wb") as fh:
        fh.write(FEATURE_MAGIC)
        fh.write(struct.pack("<IQQ", FEATURE_VERSION, *matrix.shape))
        fh.write(matrix.astype("<f4").tobytes())


def derive_user_features(ds: InteractionDataset, items: np.ndarray) -> np.ndarray:
    """Per-user mean of the item feature rows over the user's train items."""
    if items.shape[0] != ds.n_items:
        raise DataError(f"feature matrix has {items.shape[0]} rows, "
                        f"dataset has {ds.n_items} items")
    out = np.empty((ds.n_users, items.shape[1]), dtype=np.float64)
    for u, adj in enumerate(ds.train_adjacency):
        out[u] = items[adj].mean(axis=0, dtype=np.float64)
    return out.astype(items.dtype, copy=False)


def load_modal_features(path, ds: InteractionDataset, modality: str) -> ModalFeatures:
    items = load_feature_matrix(path, expected_rows=ds.n_items)
    users = derive_user_features(ds, items)
    feats = ModalFeatures(modality, items, users)
    feats.validate()
    return feats


def save_id_maps(path, ds: InteractionDataset) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"users": ds.user_id_map, "items": ds.item_id_map},
                  fh, sort_keys=True)


def _build_adjacency(n_users: int, train: np.ndarray) -> list[np.ndarray]:
    buckets: list[list[int]] = [[] for _ in range(n_users)]
    for u, i in train:
        buckets[int(u)].append(int(i))
    return [np.array(sorted(b), dtype=np.int64) for b in buckets]


def _parse_text_matrix(path) -> np.ndarray:
    rows: list[list[float]] = []
    width = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                values = [float(tok) for tok in line.split()]
            except ValueError as exc:
                raise DataError(f"{path}: line {lineno}: {exc}") from exc
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise DataError(f"{path}: line {lineno}: ragged row "
                                f"({len(values)} != {width} columns)")
            rows.append(values)
    if not rows:
        raise DataError(f"{path}: empty feature file")
    return np.array(rows, dtype=np.float32)
