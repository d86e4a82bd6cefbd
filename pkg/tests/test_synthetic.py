import numpy as np

from rearm.config import RunConfig, load_dataset_and_features
from rearm.synthetic import TwoBlockSpec, two_block_arrays, write_two_block


def test_two_block_interaction_structure():
    spec = TwoBlockSpec()
    pairs, features = two_block_arrays(spec)
    users = {u for u, _ in pairs}
    items = {i for _, i in pairs}
    assert len(users) == spec.n_users
    assert len(items) == spec.n_items
    seen = {(int(u[1:]), int(i[1:])) for u, i in pairs}
    # in_prob = 1 means every within-block pair is present
    i_half = spec.n_items // 2
    for u in range(spec.n_users):
        block = (u * 2) // spec.n_users
        for i in range(i_half):
            assert (u, block * i_half + i) in seen
    # cross-block edges exist but stay rare
    cross = sum(1 for u, i in seen
                if (u * 2) // spec.n_users != (i * 2) // spec.n_items)
    assert 0 < cross < 0.15 * len(pairs)


def test_two_block_features_are_weak_by_construction():
    spec = TwoBlockSpec()
    _, features = two_block_arrays(spec)
    vis = features["visual"].astype(np.float64)
    assert vis.shape == (spec.n_items, spec.d_visual)
    # tiny magnitude relative to unit-scale embeddings
    assert np.linalg.norm(vis, axis=1).max() < 0.2
    # block prototypes nearly collinear: within/between cosine gap is small
    unit = vis / np.linalg.norm(vis, axis=1, keepdims=True)
    half = spec.n_items // 2
    within = unit[:half] @ unit[:half].T
    between = unit[:half] @ unit[half:].T
    gap = within[np.triu_indices(half, 1)].mean() - between.mean()
    assert 0 < gap < 0.01


def test_two_block_generation_is_deterministic():
    a_pairs, a_feats = two_block_arrays(TwoBlockSpec())
    b_pairs, b_feats = two_block_arrays(TwoBlockSpec())
    assert a_pairs == b_pairs
    for name in a_feats:
        np.testing.assert_array_equal(a_feats[name], b_feats[name])
    c_pairs, _ = two_block_arrays(TwoBlockSpec(seed=123))
    assert c_pairs != a_pairs


def test_written_files_feed_the_pipeline(tmp_path):
    spec = TwoBlockSpec(n_users=20, n_items=10, d_visual=4, d_textual=3)
    paths = write_two_block(tmp_path, spec)
    cfg = RunConfig(interactions=str(paths["interactions"]),
                    features_visual=str(paths["visual"]),
                    features_textual=str(paths["textual"]),
                    k_core=1)
    ds, features = load_dataset_and_features(cfg)
    ds.validate()
    assert ds.n_users == 20 and ds.n_items == 10
    assert features["visual"].d_m == 4


def test_module_entry_point(tmp_path, capsys):
    from rearm.synthetic import main
    assert main([str(tmp_path), "--users", "12", "--items", "8"]) == 0
    out = capsys.readouterr().out
    assert "interactions" in out
    assert (tmp_path / "interactions.tsv").exists()
