"""Synthetic two-block benchmark data.

Two user communities and two item categories: users interact with every
item of their own block and with the other block's items rarely (the 5%
cross noise). Modal features are two block prototypes plus per-item
noise.

The prototypes are nearly collinear and the features tiny on purpose.
Block membership is trivially recoverable from the interactions, but it
must be *learned*: an untrained forward pass sees almost no usable
feature geometry (cosine gap far below the noise floor, magnitudes far
below the ID embeddings), so initial rankings sit at chance and only
training separates the blocks.

Runnable: python -m rearm.synthetic OUT_DIR [--seed N]
"""

from __future__ import annotations

import argparse
import math
import os
from dataclasses import dataclass

import numpy as np

from .data import save_feature_matrix


@dataclass
class TwoBlockSpec:
    n_users: int = 200
    n_items: int = 100
    d_visual: int = 32
    d_textual: int = 16
    in_prob: float = 1.0
    cross_prob: float = 0.05
    feature_noise: float = 0.05
    feature_scale: float = 0.05
    prototype_cos: float = 0.999
    seed: int = 7


def _block_prototypes(rng: np.random.Generator, d: int,
                      cos: float) -> np.ndarray:
    """Two unit vectors at the requested cosine similarity."""
    basis, _ = np.linalg.qr(rng.standard_normal((d, 2)))
    p0 = basis[:, 0]
    p1 = cos * basis[:, 0] + math.sqrt(max(0.0, 1.0 - cos * cos)) \
        * basis[:, 1]
    return np.stack([p0, p1])


def two_block_arrays(spec: TwoBlockSpec = TwoBlockSpec()):
    """Returns (token pair list, {"visual": item matrix, "textual": ...})."""
    rng = np.random.default_rng(spec.seed)
    user_block = (np.arange(spec.n_users) * 2) // spec.n_users
    item_block = (np.arange(spec.n_items) * 2) // spec.n_items
    same = user_block[:, None] == item_block[None, :]
    prob = np.where(same, spec.in_prob, spec.cross_prob)
    hits = rng.random((spec.n_users, spec.n_items)) < prob
    # guarantee no empty user/item row so k-core cannot drop anyone
    half = spec.n_items // 2
    for u in range(spec.n_users):
        if not hits[u].any():
            hits[u, user_block[u] * half + u % half] = True
    u_half = spec.n_users // 2
    for i in range(spec.n_items):
        if not hits[:, i].any():
            hits[item_block[i] * u_half + i % u_half, i] = True

    u_width = len(str(spec.n_users - 1))
    i_width = len(str(spec.n_items - 1))
    pairs = [(f"u{u:0{u_width}d}", f"i{i:0{i_width}d}")
             for u, i in zip(*np.nonzero(hits))]

    features = {}
    for name, d in (("visual", spec.d_visual), ("textual", spec.d_textual)):
        protos = _block_prototypes(rng, d, spec.prototype_cos)
        noise = rng.standard_normal((spec.n_items, d)) \
            * (spec.feature_noise / math.sqrt(d))
        features[name] = (spec.feature_scale
                          * (protos[item_block] + noise)).astype(np.float32)
    return pairs, features


def write_two_block(out_dir, spec: TwoBlockSpec = TwoBlockSpec()) -> dict:
    """Write interactions.tsv plus one feature file per modality; returns
    the path map."""
    os.makedirs(out_dir, exist_ok=True)
    pairs, features = two_block_arrays(spec)
    paths = {"interactions": os.path.join(out_dir, "interactions.tsv")}
    with open(paths["interactions"], "w", encoding="utf-8") as fh:
        fh.write("# synthetic two-block dataset "
                 f"(seed {spec.seed}, {spec.n_users}x{spec.n_items})\n")
        for u, i in pairs:
            fh.write(f"{u}\t{i}\n")
    for name, mat in features.items():
        paths[name] = os.path.join(out_dir, f"{name}.mmft")
        save_feature_matrix(paths[name], mat)
    return paths


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        description="generate the synthetic two-block dataset")
    ap.add_argument("out_dir")
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--users", type=int, default=200)
    ap.add_argument("--items", type=int, default=100)
    args = ap.parse_args(argv)
    spec = TwoBlockSpec(n_users=args.users, n_items=args.items,
                        seed=args.seed)
    paths = write_two_block(args.out_dir, spec)
    for name, path in sorted(paths.items()):
        print(f"{name}: {path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
