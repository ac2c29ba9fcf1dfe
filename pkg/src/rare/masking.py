"""Random node masks, the two complementary masked inputs, and latent recomposition."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .exceptions import ConfigError, DimensionError

__all__ = ["MaskPartition", "TokenBank", "MaskedGraphView", "draw_mask", "masked_views",
           "recompose"]

_MAX_REDRAWS = 1000


@dataclass(frozen=True)
class MaskPartition:
    """Binary keep-vector ``b`` (1 = visible, 0 = masked) and its two index sets."""

    b: np.ndarray
    visible_idx: np.ndarray
    masked_idx: np.ndarray
    ratio: float

    @classmethod
    def from_mask(cls, b, ratio=float("nan")) -> "MaskPartition":
        b = np.asarray(b, dtype=np.int8)
        return cls(b, np.flatnonzero(b == 1), np.flatnonzero(b == 0), ratio)

    @property
    def num_nodes(self) -> int:
        return len(self.b)

    def invert(self) -> "MaskPartition":
        return MaskPartition.from_mask(1 - self.b, 1.0 - self.ratio)


def draw_mask(num_nodes: int, r: float, seed=None, redraw: bool = True) -> MaskPartition:
    """Mask each node independently with probability ``r``.

    With ``redraw`` and ``0 < r < 1``, a draw leaving no visible or no masked
    node is repeated with the seed incremented. If that keeps failing (``r``
    very close to 0 or 1), one random node of the majority side is flipped.
    """
    if not 0.0 <= r <= 1.0:
        raise ConfigError("mask_ratio", f"mask ratio must lie in [0, 1], got {r}")
    seed = 0 if seed is None else int(seed)
    check = redraw and 0.0 < r < 1.0 and num_nodes >= 2
    for attempt in range(_MAX_REDRAWS):
        rng = np.random.default_rng(seed + attempt)
        b = (rng.random(num_nodes) >= r).astype(np.int8)
        if not check or 0 < b.sum() < num_nodes:
            return MaskPartition.from_mask(b, r)
    b[rng.integers(num_nodes)] ^= 1
    return MaskPartition.from_mask(b, r)


@dataclass
class TokenBank:
    """Learnable replacement rows: one in attribute space, one in latent space.

    The raw token fills masked positions of both views; the latent token fills
    the masked rows of the recomposed representation. ``zero`` swaps both for
    constant zeros.
    """

    raw_token: Tensor
    latent_token: Tensor
    zero: bool = False

    @classmethod
    def init(cls, in_dim: int, latent_dim: int, rng, dtype=np.float64, zero=False):
        if zero:
            return cls(Tensor(np.zeros((1, in_dim), dtype)), Tensor(np.zeros((1, latent_dim), dtype)),
                       True)
        return cls(ad.xavier_init((1, in_dim), rng, dtype, name="tokens.raw"),
                   ad.xavier_init((1, latent_dim), rng, dtype, name="tokens.latent"), False)

    def parameters(self):
        if self.zero:
            return []
        return [("tokens.raw", self.raw_token), ("tokens.latent", self.latent_token)]


@dataclass
class MaskedGraphView:
    """Attribute input for one side of the mask; edges are those of the base graph."""

    graph: object
    partition: MaskPartition
    inputs: Tensor
    visible_role: str  # "visible" keeps raw rows at visible_idx, "masked" at masked_idx

    @property
    def kept_idx(self) -> np.ndarray:
        return self.partition.visible_idx if self.visible_role == "visible" else self.partition.masked_idx

    @property
    def token_idx(self) -> np.ndarray:
        return self.partition.masked_idx if self.visible_role == "visible" else self.partition.visible_idx


def _fill(x, keep_idx, token: Tensor, n: int) -> Tensor:
    base = ad.repeat_rows(token, n)
    return ad.scatter_rows(base, keep_idx, Tensor(x[keep_idx]))


def masked_views(g, partition: MaskPartition, tokens: TokenBank, dtype=None):
    """Build ``(G_v, G_m)``.

    ``G_v`` keeps visible rows and tokenizes masked ones; ``G_m`` is the
    complement. Only ``G_v`` routes gradient into the raw token, since ``G_m``
    feeds the momentum encoder.
    """
    if partition.num_nodes != g.num_nodes:
        raise DimensionError(f"partition has {partition.num_nodes} nodes, graph has {g.num_nodes}")
    x = g.attributes if dtype is None else g.attributes.astype(dtype, copy=False)
    n = g.num_nodes
    token = tokens.raw_token
    if token.dtype != x.dtype:
        raise DimensionError(f"token dtype {token.dtype} != attribute dtype {x.dtype}")
    gv = MaskedGraphView(g, partition, _fill(x, partition.visible_idx, token, n), "visible")
    gm = MaskedGraphView(g, partition, _fill(x, partition.masked_idx, ad.detach(token), n),
                         "masked")
    return gv, gm


def recompose(z_visible: Tensor, partition: MaskPartition, tokens: TokenBank) -> Tensor:
    """Place visible latent rows back at ``visible_idx``; masked rows get the latent token."""
    if z_visible.shape[0] != len(partition.visible_idx):
        raise DimensionError(
            f"recompose: {z_visible.shape[0]} rows for {len(partition.visible_idx)} visible nodes")
    base = ad.repeat_rows(tokens.latent_token, partition.num_nodes)
    return ad.scatter_rows(base, partition.visible_idx, z_visible)
