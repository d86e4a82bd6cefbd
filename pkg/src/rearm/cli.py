"""Experiment runner.

Subcommands: build-graphs, train, evaluate, ablate, diff-matrix. Every
config key is also available as a --key value override; REARM_CACHE_DIR
overrides the cache location. Exit codes: 0 ok, 1 usage/config, 2 data,
3 numeric failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import torch

from . import metrics
from .bipartite import BipartiteGraph, build_bipartite
from .config import (RunConfig, apply_overrides, config_to_dict,
                     load_dataset_and_features, parse_config)
from .data import MODALITIES
from .errors import ConfigError, DataError, NumericError
from .graphs import HomographConfig, build_homographs, load_graph, save_graph
from .training import (ABLATION_FLAGS, Ablation, ParameterStore,
                       assemble_graph_bundle, effective_weights,
                       features_to_torch, fit, forward, hyperparams_from_dict,
                       hyperparams_to_dict, load_checkpoint, restore_params,
                       save_checkpoint)

_COMPONENT_KINDS = (("user_co", "cooccurrence"), ("item_co", "cooccurrence"),
                    ("user_sem", "semantic"), ("item_sem", "semantic"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rearm", description="multi-modal graph recommender runner")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", default=None,
                        help="key=value config file")
        for f in dataclasses.fields(RunConfig):
            sp.add_argument(f"--{f.name}", dest=f"cfg_{f.name}",
                            default=None, metavar="V",
                            help=f"override config key {f.name}")
        return sp

    add("build-graphs", "build and cache the relation graphs")
    add("train", "train a model and write checkpoint/history/metrics")

    sp = add("evaluate", "evaluate a checkpoint on a split")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--split", choices=("val", "test"), default="test")

    add("ablate", "train the full model and all single-flag ablations")

    sp = add("diff-matrix", "sigmoid score difference between checkpoints")
    sp.add_argument("--checkpoint-a", required=True)
    sp.add_argument("--checkpoint-b", required=True)
    sp.add_argument("--users", default="0:32",
                    help="user subset: 'a:b', comma list, or 'all'")
    sp.add_argument("--items", default="0:32",
                    help="item subset: 'a:b', comma list, or 'all'")
    return parser


def _resolve_config(args) -> RunConfig:
    cfg = parse_config(args.config) if args.config else RunConfig()
    overrides = {}
    for f in dataclasses.fields(RunConfig):
        value = getattr(args, f"cfg_{f.name}", None)
        if value is not None:
            overrides[f.name] = value
    apply_overrides(cfg, overrides)
    env_cache = os.environ.get("REARM_CACHE_DIR")
    if env_cache:
        cfg.cache_dir = env_cache
    if cfg.threads > 0:
        torch.set_num_threads(cfg.threads)
    return cfg


def _ensure_graphs(cfg: RunConfig, ds, features,
                   hom: HomographConfig | None = None):
    """Load the cached graph set for this config, building it on miss.
    Returns (components dict, bipartite graph, cache path, hit flag)."""
    hom = hom if hom is not None else cfg.hyperparams().hom
    digest = cfg.graph_digest(hom)
    root = os.path.join(cfg.cache_dir, digest)
    manifest_path = os.path.join(root, "cache_manifest.json")
    paths = {name: os.path.join(root, f"{name}.csrg")
             for name, _ in _COMPONENT_KINDS}
    paths["bipartite"] = os.path.join(root, "bipartite.csrg")
    if os.path.isfile(manifest_path) \
            and all(os.path.isfile(p) for p in paths.values()):
        components = {name: load_graph(paths[name], kind)
                      for name, kind in _COMPONENT_KINDS}
        block = load_graph(paths["bipartite"], "bipartite")
        bipartite = BipartiteGraph.from_block_graph(block, ds.n_users)
        return components, bipartite, root, True
    os.makedirs(root, exist_ok=True)
    components = build_homographs(ds, features, hom)
    bipartite = build_bipartite(ds)
    for name, _ in _COMPONENT_KINDS:
        save_graph(paths[name], components[name])
    save_graph(paths["bipartite"], bipartite.to_block_graph())
    manifest = {"digest": digest, "n_users": ds.n_users,
                "n_items": ds.n_items,
                "files": sorted(os.path.basename(p)
                                for p in paths.values())}
    _write_json(manifest_path, manifest)
    return components, bipartite, root, False


def _write_json(path, payload) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_manifest(cfg: RunConfig, command: str, artifacts: list[str],
                    extra: dict | None = None) -> None:
    payload = {"command": command, "artifacts": sorted(artifacts),
               "config": config_to_dict(cfg)}
    if extra:
        payload.update(extra)
    _write_json(os.path.join(cfg.out_dir, "manifest.json"), payload)


def cmd_build_graphs(cfg: RunConfig) -> int:
    ds, features = load_dataset_and_features(cfg)
    _, _, root, hit = _ensure_graphs(cfg, ds, features)
    status = "cache hit" if hit else "built"
    print(f"[rearm] graphs {status}: {root} "
          f"({ds.n_users} users, {ds.n_items} items)")
    return 0


def _train_one(cfg: RunConfig, ds, features, components, bipartite,
               ablation: Ablation, tag: str = ""):
    """Fit one model variant; writes history/checkpoint under out_dir."""
    hp = cfg.hyperparams()
    hp.refine = effective_weights(hp.refine, ablation)
    graphs = assemble_graph_bundle(components, bipartite, hp, ablation)
    suffix = f"_{tag}" if tag else ""
    history_name = f"history{suffix}.jsonl"
    checkpoint_name = f"checkpoint{suffix}.rearm"
    with open(os.path.join(cfg.out_dir, history_name), "w",
              encoding="utf-8") as fh:
        def log(entry):
            fh.write(json.dumps(entry, sort_keys=True) + "\n")
            fh.flush()
        params, history = fit(ds, features, hp, ablation, graphs=graphs,
                              record_seconds=cfg.record_seconds, log=log)
    save_checkpoint(os.path.join(cfg.out_dir, checkpoint_name), params, hp,
                    dataset_digest=cfg.dataset_digest(), ablation=ablation)
    with torch.no_grad():
        cache = forward(graphs, features_to_torch(features, torch.float32),
                        params, hp, training=False, ablation=ablation)
        reports = [metrics.evaluate_split(ds, cache.u_star, cache.i_star,
                                          split, hp.eval_topk)
                   for split in ("val", "test")]
    best = max(history, key=lambda e: e["val_recall20"])
    return {"history": history_name, "checkpoint": checkpoint_name,
            "reports": reports, "best_epoch": best["epoch"],
            "epochs_run": len(history)}


def cmd_train(cfg: RunConfig) -> int:
    ds, features = load_dataset_and_features(cfg)
    ablation = cfg.ablation_flags()
    components, bipartite, _, _ = _ensure_graphs(cfg, ds, features)
    os.makedirs(cfg.out_dir, exist_ok=True)
    result = _train_one(cfg, ds, features, components, bipartite, ablation)
    rows = [row for report in result["reports"] for row in report.rows()]
    _write_json(os.path.join(cfg.out_dir, "metrics.json"), rows)
    _write_manifest(cfg, "train",
                    [result["history"], result["checkpoint"],
                     "metrics.json"],
                    {"ablation": ablation.flags(),
                     "effective_lambda_ort":
                         effective_weights(cfg.hyperparams().refine,
                                           ablation).lambda_ort,
                     "best_epoch": result["best_epoch"],
                     "epochs_run": result["epochs_run"],
                     "dataset_digest": cfg.dataset_digest(),
                     "graph_digest": cfg.graph_digest()})
    for row in rows:
        print(f"[rearm] {row['split']} recall@{row['K']}={row['recall']:.4f}"
              f" ndcg@{row['K']}={row['ndcg']:.4f}")
    print(f"[rearm] best epoch {result['best_epoch']} of "
          f"{result['epochs_run']}; outputs in {cfg.out_dir}")
    return 0


def _representations_from_checkpoint(cfg: RunConfig, ds, features, path):
    """Rebuild a checkpoint's final representations on this dataset."""
    header, tensors = load_checkpoint(path,
                                      expected_digest=cfg.dataset_digest())
    hp = hyperparams_from_dict(header["hyperparams"])
    ablation = Ablation.from_flags(header.get("ablation", []))
    components, bipartite, _, _ = _ensure_graphs(cfg, ds, features, hp.hom)
    graphs = assemble_graph_bundle(components, bipartite, hp, ablation)
    d_m = {m: features[m].d_m for m in MODALITIES}
    params = ParameterStore(ds.n_users, ds.n_items, hp, d_m)
    restore_params(params, tensors)
    with torch.no_grad():
        cache = forward(graphs, features_to_torch(features, torch.float32),
                        params, hp, training=False, ablation=ablation)
    return cache, hp


def cmd_evaluate(cfg: RunConfig, checkpoint: str, split: str) -> int:
    ds, features = load_dataset_and_features(cfg)
    cache, hp = _representations_from_checkpoint(cfg, ds, features,
                                                 checkpoint)
    report = metrics.evaluate_split(ds, cache.u_star, cache.i_star, split,
                                    hp.eval_topk)
    os.makedirs(cfg.out_dir, exist_ok=True)
    out_path = os.path.join(cfg.out_dir, f"eval_{split}.json")
    _write_json(out_path, report.rows())
    _write_manifest(cfg, "evaluate", [f"eval_{split}.json"])
    print(report.to_json())
    return 0


def cmd_ablate(cfg: RunConfig) -> int:
    ds, features = load_dataset_and_features(cfg)
    if cfg.ablation.strip():
        raise ConfigError("ablate runs every variant itself; drop the "
                          "'ablation' key")
    components, bipartite, _, _ = _ensure_graphs(cfg, ds, features)
    os.makedirs(cfg.out_dir, exist_ok=True)
    ks = cfg.hyperparams().eval_topk
    table = []
    artifacts = []
    for variant in ("full",) + ABLATION_FLAGS:
        ablation = Ablation() if variant == "full" \
            else Ablation.from_flags([variant])
        result = _train_one(cfg, ds, features, components, bipartite,
                            ablation, tag=variant)
        test = next(r for r in result["reports"] if r.split == "test")
        row = {"variant": variant, "flags": ablation.flags(),
               "best_epoch": result["best_epoch"]}
        for k in ks:
            row[f"recall@{k}"] = test.recall[k]
            row[f"ndcg@{k}"] = test.ndcg[k]
        table.append(row)
        artifacts += [result["history"], result["checkpoint"]]
        print(f"[rearm] {variant}: " + " ".join(
            f"R@{k}={test.recall[k]:.4f}" for k in ks))
    _write_json(os.path.join(cfg.out_dir, "ablate.json"), table)
    md_path = os.path.join(cfg.out_dir, "ablate.md")
    with open(md_path, "w", encoding="utf-8") as fh:
        cols = ["variant"] + [f"recall@{k}" for k in ks] \
            + [f"ndcg@{k}" for k in ks]
        fh.write("| " + " | ".join(cols) + " |\n")
        fh.write("|" + "---|" * len(cols) + "\n")
        for row in table:
            cells = [row["variant"]] + [f"{row[c]:.4f}" for c in cols[1:]]
            fh.write("| " + " | ".join(cells) + " |\n")
    _write_manifest(cfg, "ablate",
                    artifacts + ["ablate.json", "ablate.md"])
    return 0


def _parse_subset(text: str, n: int, what: str) -> list[int]:
    text = text.strip()
    if text == "all":
        return list(range(n))
    try:
        if ":" in text:
            lo, hi = (int(p) for p in text.split(":", 1))
            subset = list(range(lo, min(hi, n)))
        else:
            subset = [int(p) for p in text.split(",")]
    except ValueError as e:
        raise ConfigError(f"bad {what} subset {text!r}: {e}") from e
    if not subset:
        raise ConfigError(f"{what} subset {text!r} is empty")
    if min(subset) < 0 or max(subset) >= n:
        raise ConfigError(f"{what} subset {text!r} out of range 0..{n - 1}")
    return subset


def cmd_diff_matrix(cfg: RunConfig, path_a: str, path_b: str,
                    users: str, items: str) -> int:
    ds, features = load_dataset_and_features(cfg)
    cache_a, _ = _representations_from_checkpoint(cfg, ds, features, path_a)
    cache_b, _ = _representations_from_checkpoint(cfg, ds, features, path_b)
    user_subset = _parse_subset(users, ds.n_users, "user")
    item_subset = _parse_subset(items, ds.n_items, "item")
    diff = metrics.score_difference_matrix(
        cache_a.u_star, cache_a.i_star, cache_b.u_star, cache_b.i_star,
        user_subset, item_subset)
    os.makedirs(cfg.out_dir, exist_ok=True)
    out_path = os.path.join(cfg.out_dir, "diff_matrix.tsv")
    metrics.write_difference_matrix(out_path, diff, user_subset,
                                    item_subset)
    _write_manifest(cfg, "diff-matrix", ["diff_matrix.tsv"])
    print(f"[rearm] wrote {out_path} "
          f"({len(user_subset)}x{len(item_subset)})")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _resolve_config(args)
        if args.command == "build-graphs":
            return cmd_build_graphs(cfg)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "evaluate":
            return cmd_evaluate(cfg, args.checkpoint, args.split)
        if args.command == "ablate":
            return cmd_ablate(cfg)
        if args.command == "diff-matrix":
            return cmd_diff_matrix(cfg, args.checkpoint_a,
                                   args.checkpoint_b, args.users,
                                   args.items)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return 2
    except NumericError as e:
        print(f"numeric error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
