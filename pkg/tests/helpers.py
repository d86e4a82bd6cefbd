"""Shared test data factories."""

import numpy as np

from rearm.data import InteractionDataset, ModalFeatures, derive_user_features

MODAL_DIMS = {"visual": 5, "textual": 3}


def make_instance(seed, max_nodes=20, modal_dims=None, zero_feature_row=False):
    """Random small dataset + features; every user keeps a train item.

    Returns (InteractionDataset, {modality: ModalFeatures}).
    """
    rng = np.random.default_rng(seed)
    n_users = int(rng.integers(3, max_nodes + 1))
    n_items = int(rng.integers(3, max_nodes + 1))
    pairs = {(u, int(rng.integers(0, n_items))) for u in range(n_users)}
    for _ in range(int(rng.integers(n_users, 4 * n_users + 1))):
        pairs.add((int(rng.integers(0, n_users)),
                   int(rng.integers(0, n_items))))
    pairs = sorted(pairs)

    first_of_user: dict[int, int] = {}
    rest = []
    for idx, (u, _) in enumerate(pairs):
        if u not in first_of_user:
            first_of_user[u] = idx
        else:
            rest.append(idx)
    rest = [rest[j] for j in rng.permutation(len(rest))]
    n_val = len(rest) // 6
    n_test = len(rest) // 6
    val_idx = rest[:n_val]
    test_idx = rest[n_val:n_val + n_test]
    train_idx = sorted(set(range(len(pairs))) - set(val_idx) - set(test_idx))

    arr = np.array(pairs, dtype=np.int64)
    ds = InteractionDataset.from_index_pairs(
        n_users, n_items, arr[train_idx],
        arr[sorted(val_idx)], arr[sorted(test_idx)])

    features = {}
    for modality, d_m in (modal_dims or MODAL_DIMS).items():
        items = rng.standard_normal((n_items, d_m)).astype(np.float32)
        if zero_feature_row:
            items[int(rng.integers(0, n_items))] = 0.0
        users = derive_user_features(ds, items)
        features[modality] = ModalFeatures(modality, items, users)
    return ds, features


def micro_instance():
    """Fixed 6-user / 8-item dataset for gradient and unit tests."""
    train = [(0, 0), (0, 1), (0, 4), (1, 1), (1, 2), (2, 2), (2, 3),
             (2, 5), (3, 0), (3, 3), (3, 6), (4, 4), (4, 5), (4, 7),
             (5, 6), (5, 7), (5, 0)]
    val = [(0, 2), (1, 3), (2, 0), (3, 1), (4, 6), (5, 5)]
    test = [(0, 3), (1, 0), (2, 6), (3, 7), (4, 1), (5, 2)]
    ds = InteractionDataset.from_index_pairs(6, 8, train, val, test)

    rng = np.random.default_rng(99)
    features = {}
    for modality, d_m in MODAL_DIMS.items():
        items = rng.standard_normal((8, d_m)).astype(np.float32)
        users = derive_user_features(ds, items)
        features[modality] = ModalFeatures(modality, items, users)
    return ds, features
