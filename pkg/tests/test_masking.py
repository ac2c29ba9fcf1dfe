import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rare import autodiff as ad
from rare.autodiff import Tensor
from rare.exceptions import ConfigError, DimensionError
from rare.graph import SparseGraph, generate_sbm
from rare.masking import MaskPartition, TokenBank, draw_mask, masked_views, recompose


def tokens(in_dim=2, latent_dim=2, raw=9.0, latent=7.0):
    return TokenBank(Tensor(np.full((1, in_dim), raw), requires_grad=True),
                     Tensor(np.full((1, latent_dim), latent), requires_grad=True))


def check_partition(part, n):
    vis, msk = part.visible_idx, part.masked_idx
    assert len(vis) + len(msk) == n
    assert np.intersect1d(vis, msk).size == 0
    assert np.array_equal(np.union1d(vis, msk), np.arange(n))
    assert np.all(np.diff(vis) > 0) and np.all(np.diff(msk) > 0)
    assert np.array_equal(part.b[vis], np.ones(len(vis))) and not part.b[msk].any()


class TestDrawMask:
    def test_partition_invariants_many_draws(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            n = int(rng.integers(1, 60))
            r = float(rng.random())
            seed = int(rng.integers(2 ** 31))
            check_partition(draw_mask(n, r, seed), n)

    def test_binomial_count(self):
        n, r = 10000, 0.75
        mean, sd = n * r, math.sqrt(n * r * (1 - r))
        for seed in range(5):
            assert abs(len(draw_mask(n, r, seed).masked_idx) - mean) < 3 * sd

    def test_zero_ratio(self):
        assert draw_mask(20, 0.0, 1).masked_idx.size == 0

    def test_full_ratio(self):
        part = draw_mask(20, 1.0, 1)
        assert part.visible_idx.size == 0 and part.masked_idx.size == 20

    def test_deterministic(self):
        assert np.array_equal(draw_mask(50, 0.5, 3).b, draw_mask(50, 0.5, 3).b)
        assert not np.array_equal(draw_mask(50, 0.5, 3).b, draw_mask(50, 0.5, 4).b)

    def test_degenerate_draw_is_redrawn(self):
        # two nodes at r=0.99 almost always mask both
        for seed in range(20):
            part = draw_mask(2, 0.99, seed)
            assert len(part.masked_idx) == 1 and len(part.visible_idx) == 1

    @pytest.mark.parametrize("r", [1e-9, 1 - 1e-9])
    def test_extreme_ratio_still_split(self, r):
        part = draw_mask(4, r, 0)
        assert len(part.masked_idx) in (1, 3) and len(part.visible_idx) in (1, 3)

    def test_degenerate_allowed_without_redraw(self):
        parts = [draw_mask(2, 0.99, s, redraw=False) for s in range(20)]
        assert any(p.visible_idx.size == 0 for p in parts)

    @pytest.mark.parametrize("r", [-0.1, 1.5, float("nan")])
    def test_bad_ratio(self, r):
        with pytest.raises(ConfigError) as err:
            draw_mask(5, r, 0)
        assert err.value.field == "mask_ratio"

    def test_invert(self):
        part = draw_mask(30, 0.4, 2)
        inv = part.invert()
        assert np.array_equal(inv.visible_idx, part.masked_idx)
        assert np.array_equal(inv.masked_idx, part.visible_idx)


class TestMaskedViews:
    def setup_method(self):
        self.g = SparseGraph(3, [(0, 1), (1, 2)], np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]))
        self.tok = tokens()

    def test_definition(self):
        part = MaskPartition.from_mask([1, 0, 1])
        gv, gm = masked_views(self.g, part, self.tok)
        assert gv.inputs.data.tolist() == [[1, 2], [9, 9], [5, 6]]
        assert gm.inputs.data.tolist() == [[9, 9], [3, 4], [9, 9]]

    def test_no_mask_is_raw_input(self):
        part = draw_mask(3, 0.0, 0)
        gv, _ = masked_views(self.g, part, self.tok)
        assert gv.inputs.data.tolist() == self.g.attributes.tolist()

    def test_invert_swaps_views(self):
        part = MaskPartition.from_mask([1, 0, 0])
        gv, gm = masked_views(self.g, part, self.tok)
        iv, im = masked_views(self.g, part.invert(), self.tok)
        assert iv.inputs.data.tolist() == gm.inputs.data.tolist()
        assert im.inputs.data.tolist() == gv.inputs.data.tolist()

    def test_edges_unchanged(self):
        g = generate_sbm([10, 10], 0.4, 0.1, 2, 1.0, seed=0)
        for seed in range(10):
            gv, gm = masked_views(g, draw_mask(20, 0.6, seed), self.tok)
            for view in (gv, gm):
                assert view.graph is g
                assert view.inputs.shape == (20, 2)
                for i in range(20):
                    assert np.array_equal(view.graph.neighbors(i), g.neighbors(i))

    def test_token_gradient_only_through_visible_view(self):
        part = MaskPartition.from_mask([1, 0, 0])
        gv, gm = masked_views(self.g, part, self.tok)
        ad.backward(ad.sum(ad.add(gv.inputs, gm.inputs)))
        # two masked rows in G_v; the G_m copy is detached
        assert self.tok.raw_token.grad.tolist() == [[2.0, 2.0]]

    def test_size_mismatch(self):
        with pytest.raises(DimensionError):
            masked_views(self.g, MaskPartition.from_mask([1, 0]), self.tok)


class TestRecompose:
    def test_example(self):
        part = MaskPartition.from_mask([1, 0])
        z = recompose(Tensor(np.array([[1.0, 2.0]])), part, tokens(latent=9.0))
        assert z.data.tolist() == [[1, 2], [9, 9]]

    def test_all_visible(self):
        zv = np.arange(6.0).reshape(3, 2)
        z = recompose(Tensor(zv), MaskPartition.from_mask([1, 1, 1]), tokens())
        assert z.data.tolist() == zv.tolist()

    def test_all_masked(self):
        z = recompose(Tensor(np.zeros((0, 2))), MaskPartition.from_mask([0, 0, 0]), tokens())
        assert z.data.tolist() == [[7, 7]] * 3

    def test_row_mismatch(self):
        with pytest.raises(DimensionError):
            recompose(Tensor(np.zeros((2, 2))), MaskPartition.from_mask([1, 0, 0]), tokens())

    def test_gradient_reaches_rows_and_token(self):
        zv = Tensor(np.ones((1, 2)), requires_grad=True)
        tok = tokens()
        ad.backward(ad.sum(recompose(zv, MaskPartition.from_mask([0, 1, 0]), tok)))
        assert zv.grad.tolist() == [[1, 1]]
        assert tok.latent_token.grad.tolist() == [[2, 2]]

    @settings(max_examples=100)
    @given(st.lists(st.integers(0, 1), min_size=1, max_size=20), st.integers(0, 2 ** 31))
    def test_gather_back(self, b, seed):
        part = MaskPartition.from_mask(b)
        zv = np.random.default_rng(seed).standard_normal((len(part.visible_idx), 3))
        z = recompose(Tensor(zv), part, tokens(latent_dim=3))
        assert np.array_equal(z.data[part.visible_idx], zv)
        assert np.all(z.data[part.masked_idx] == 7.0)


def test_token_init():
    tb = TokenBank.init(4, 3, np.random.default_rng(0))
    assert tb.raw_token.shape == (1, 4) and tb.latent_token.shape == (1, 3)
    assert [n for n, _ in tb.parameters()] == ["tokens.raw", "tokens.latent"]
    assert all(t.requires_grad for _, t in tb.parameters())
    assert np.all(np.abs(tb.raw_token.data) <= math.sqrt(6 / 5))
    zero = TokenBank.init(4, 3, np.random.default_rng(0), zero=True)
    assert zero.parameters() == [] and not zero.raw_token.data.any()
