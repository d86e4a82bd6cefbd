import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from rearm.contrast import (MetaNetParams, RefineLossWeights, fuse_unique,
                            infonce_loss, meta_shared, orthogonal_loss,
                            prelu)
from rearm.errors import ConfigError

import oracles


def _meta(d, k, seed, h=None):
    p = MetaNetParams(d, k, h, dtype=torch.float64)
    rng = np.random.default_rng(seed)
    with torch.no_grad():
        for name, param in p.named_parameters():
            fresh = np.asarray(rng.standard_normal(tuple(param.shape)) * 0.2)
            param.copy_(torch.from_numpy(fresh))
    return p


def test_loss_weights_validation():
    RefineLossWeights()
    with pytest.raises(ConfigError):
        RefineLossWeights(tau=0.0)
    with pytest.raises(ConfigError):
        RefineLossWeights(lambda_cl=-0.1)
    with pytest.raises(ConfigError):
        RefineLossWeights(lambda_p=-1e-9)


@given(st.integers(0, 500))
@settings(max_examples=30, deadline=None)
def test_prelu_matches_clamp_oracle(seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((6, 4)) * 3
    slope = float(rng.uniform(-1, 1))
    got = prelu(torch.from_numpy(x), torch.tensor(slope, dtype=torch.float64))
    np.testing.assert_allclose(got.numpy(), oracles.prelu_np(x, slope),
                               atol=1e-12)


def test_prelu_positive_is_identity():
    x = torch.rand(5, 3) + 0.1
    assert torch.equal(prelu(x, torch.tensor(0.7)), x)


def test_meta_params_shapes_and_validation():
    p = MetaNetParams(8, 2)
    assert tuple(p.w_share.shape) == (8, 16)
    assert tuple(p.w_g1_out.shape) == (16, 8)   # d*k rows, hidden=d cols
    assert tuple(p.w_g2_out.shape) == (16, 8)
    for name in ("a_g1", "a_g2", "a_share", "a_uni_visual", "a_uni_textual"):
        slope = getattr(p, name)
        assert slope.shape == () or tuple(slope.shape) == (1,)
        assert slope.detach().item() == pytest.approx(0.25)
    with pytest.raises(ConfigError):
        MetaNetParams(8, 0)
    with pytest.raises(ConfigError):
        MetaNetParams(8, 8)


def test_infonce_matches_oracle():
    for seed in range(8):
        rng = np.random.default_rng(seed)
        v = rng.standard_normal((10, 6))
        t = rng.standard_normal((10, 6))
        for tau in (0.2, 1.0):
            got = infonce_loss(torch.from_numpy(v), torch.from_numpy(t), tau)
            assert float(got) == pytest.approx(oracles.infonce_np(v, t, tau),
                                               abs=1e-10)


def test_infonce_aligned_single_row_is_zero():
    v = torch.tensor([[0.3, -1.2, 0.8]], dtype=torch.float64)
    assert float(infonce_loss(v, 2.5 * v, 0.2)) == pytest.approx(0.0,
                                                                 abs=1e-12)


def test_infonce_nonnegative_with_scale_invariance():
    rng = np.random.default_rng(11)
    v = torch.from_numpy(rng.standard_normal((7, 4)))
    t = torch.from_numpy(rng.standard_normal((7, 4)))
    base = float(infonce_loss(v, t, 0.5))
    assert base > 0
    # cosine similarity ignores per-tensor positive rescaling
    assert float(infonce_loss(3.0 * v, 0.25 * t, 0.5)) == pytest.approx(
        base, abs=1e-10)


def test_orthogonal_loss_matches_formula():
    rng = np.random.default_rng(5)
    v = rng.standard_normal((9, 4))
    t = rng.standard_normal((9, 4))
    got = float(orthogonal_loss(torch.from_numpy(v), torch.from_numpy(t)))
    expect = ((v * t).sum(axis=1) ** 2).mean()
    assert got == pytest.approx(expect, abs=1e-12)
    with pytest.raises(ValueError):
        orthogonal_loss(torch.zeros(3, 4), torch.zeros(4, 3))


def test_orthogonal_loss_zero_on_orthogonal_rows():
    v = torch.tensor([[1.0, 0.0], [0.0, 2.0]], dtype=torch.float64)
    t = torch.tensor([[0.0, 3.0], [4.0, 0.0]], dtype=torch.float64)
    assert float(orthogonal_loss(v, t)) == 0.0


def test_meta_shared_matches_rowwise_oracle():
    for seed in range(6):
        d, k = 6, 2
        rng = np.random.default_rng(seed)
        vbar = rng.standard_normal((5, d))
        tbar = rng.standard_normal((5, d))
        idbar = rng.standard_normal((5, d))
        p = _meta(d, k, seed + 30)
        got = meta_shared(torch.from_numpy(vbar), torch.from_numpy(tbar),
                          torch.from_numpy(idbar), p)
        expect = oracles.meta_shared_np(vbar, tbar, idbar, p)
        np.testing.assert_allclose(got.detach().numpy(), expect, atol=1e-10)


def test_meta_shared_supports_custom_hidden_width():
    p = _meta(6, 2, 0, h=11)
    assert tuple(p.w_g1_in.shape) == (11, 6)
    rng = np.random.default_rng(1)
    out = meta_shared(torch.from_numpy(rng.standard_normal((4, 6))),
                      torch.from_numpy(rng.standard_normal((4, 6))),
                      torch.from_numpy(rng.standard_normal((4, 6))), p)
    assert tuple(out.shape) == (4, 6)


def test_fuse_unique_layout_and_residual():
    d = 4
    p = _meta(d, 2, 9)
    rng = np.random.default_rng(9)
    vbar = torch.from_numpy(rng.standard_normal((3, d)))
    tbar = torch.from_numpy(rng.standard_normal((3, d)))
    idbar = torch.from_numpy(rng.standard_normal((3, d)))
    out = fuse_unique(vbar, tbar, idbar, p)
    assert tuple(out.shape) == (3, 2 * d)
    expect_v = oracles.prelu_np(
        vbar.numpy(), p.a_uni_visual.detach().item()) + idbar.numpy()
    expect_t = oracles.prelu_np(
        tbar.numpy(), p.a_uni_textual.detach().item()) + idbar.numpy()
    np.testing.assert_allclose(out.detach().numpy()[:, :d], expect_v,
                               atol=1e-12)
    np.testing.assert_allclose(out.detach().numpy()[:, d:], expect_t,
                               atol=1e-12)
    with pytest.raises(ValueError):
        fuse_unique(vbar, tbar[:2], idbar, p)


def test_infonce_two_row_orthogonal_closed_form():
    # identical rows would each see one aligned and one zero-sim negative
    v = torch.tensor([[1.0, 0.0], [0.0, 1.0]], dtype=torch.float64)
    loss = float(infonce_loss(v, v, 1.0))
    assert loss == pytest.approx(math.log(1.0 + math.exp(-1.0)), abs=1e-12)
