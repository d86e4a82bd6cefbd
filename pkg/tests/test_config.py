import pytest

from rearm.config import (RunConfig, apply_overrides, config_to_dict,
                          load_dataset_and_features, parse_config,
                          parse_value)
from rearm.errors import ConfigError, DataError
from rearm.synthetic import TwoBlockSpec, write_two_block


def test_defaults_match_documented_training_setup():
    cfg = RunConfig()
    hp = cfg.hyperparams()
    assert hp.d == 64
    assert hp.batch_size == 2048
    assert hp.patience == 20
    assert hp.epochs_max == 2000
    assert hp.layers == 4
    assert hp.eval_topk == (10, 20)
    assert hp.refine.tau == pytest.approx(0.2)


def test_parse_value_types():
    assert parse_value("d", "32") == 32
    assert parse_value("learning_rate", "3e-4") == pytest.approx(3e-4)
    assert parse_value("eval_topk", "5,10,20") == (5, 10, 20)
    assert parse_value("alpha_modal_user", "0.3,0.7") == (0.3, 0.7)
    assert parse_value("record_seconds", "false") is False
    assert parse_value("meta_hidden", "none") is None
    assert parse_value("meta_hidden", "12") == 12
    assert parse_value("ablation", "wo_hom") == "wo_hom"
    with pytest.raises(ConfigError, match="unknown config key"):
        parse_value("banana", "1")
    with pytest.raises(ConfigError):
        parse_value("d", "not_a_number")
    with pytest.raises(ConfigError):
        parse_value("record_seconds", "maybe")


def test_parse_config_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(
        "# experiment setup\n"
        "d = 16\n"
        "eval_topk = 5,10   # cutoffs\n"
        "\n"
        "dropout = 0.2\n")
    cfg = parse_config(path)
    assert cfg.d == 16
    assert cfg.eval_topk == (5, 10)
    assert cfg.dropout == pytest.approx(0.2)
    assert cfg.batch_size == 2048    # untouched default


def test_parse_config_reports_line_numbers(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("d = 16\nthis line has no equals sign\n")
    with pytest.raises(ConfigError, match=r"cfg:2"):
        parse_config(path)
    path.write_text("nonsense_key = 3\n")
    with pytest.raises(ConfigError, match=r"cfg:1"):
        parse_config(path)


def test_apply_overrides_and_dict_roundtrip():
    cfg = apply_overrides(RunConfig(), {"d": "24", "ablation": "wo_ort"})
    assert cfg.d == 24
    assert cfg.ablation_flags().flags() == ["wo_ort"]
    as_dict = config_to_dict(cfg)
    assert as_dict["d"] == 24
    assert as_dict["eval_topk"] == [10, 20]    # JSON friendly


def test_ablation_flags_parsing_errors():
    cfg = apply_overrides(RunConfig(), {"ablation": "wo_co,wo_sim"})
    with pytest.raises(ConfigError):
        cfg.ablation_flags()


def test_require_inputs_lists_missing_keys(tmp_path):
    cfg = RunConfig()
    with pytest.raises(ConfigError, match="interactions"):
        cfg.require_inputs()
    cfg.interactions = str(tmp_path / "x.tsv")
    with pytest.raises(ConfigError, match="features_visual"):
        cfg.require_inputs()


@pytest.fixture(scope="module")
def synthetic_files(tmp_path_factory):
    root = tmp_path_factory.mktemp("twoblock")
    spec = TwoBlockSpec(n_users=24, n_items=16, d_visual=6, d_textual=4)
    paths = write_two_block(root, spec)
    return paths


def test_digests_react_to_inputs(synthetic_files, tmp_path):
    cfg = RunConfig(interactions=str(synthetic_files["interactions"]),
                    features_visual=str(synthetic_files["visual"]),
                    features_textual=str(synthetic_files["textual"]),
                    k_core=1)
    base_ds = cfg.dataset_digest()
    base_g = cfg.graph_digest()
    assert len(base_ds) == 16 and len(base_g) == 16

    cfg.split_seed = 99
    assert cfg.dataset_digest() != base_ds

    cfg.split_seed = 0
    cfg.top_k_sem = 3
    assert cfg.dataset_digest() == base_ds
    assert cfg.graph_digest() != base_g

    # alpha_co only blends cached components, so the cache key ignores it
    cfg.top_k_sem = 10
    cfg.alpha_co_user = 0.9
    assert cfg.graph_digest() == base_g


def test_load_dataset_and_features_pipeline(synthetic_files):
    cfg = RunConfig(interactions=str(synthetic_files["interactions"]),
                    features_visual=str(synthetic_files["visual"]),
                    features_textual=str(synthetic_files["textual"]),
                    k_core=1, split_seed=0)
    ds, features = load_dataset_and_features(cfg)
    ds.validate()
    assert ds.n_users == 24 and ds.n_items == 16
    assert features["visual"].item_matrix.shape == (16, 6)
    assert features["textual"].user_matrix.shape == (24, 4)

    cfg_bad = RunConfig(interactions="/nonexistent/file.tsv",
                        features_visual="x", features_textual="y")
    with pytest.raises(DataError):
        load_dataset_and_features(cfg_bad)
