"""Masked graph autoencoder with latent-feature completion.

The online encoder sees the graph with masked rows tokenized, a predictor
fills in latent features for the masked nodes, and a momentum encoder (an
EMA copy of the online encoder, never back-propagated through) produces the
latent targets from the complementary view. A linear decoder maps predicted
latents back to attributes, scored with a scaled cosine error.
"""

from __future__ import annotations

import copy
import math
import time
from dataclasses import asdict, dataclass, field, fields
from typing import Callable

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .exceptions import ConfigError, DimensionError, NumericalError
from .graph import NormalizedAdjacency, SparseGraph, aggregation_adjacency
from .masking import MaskPartition, TokenBank, draw_mask, masked_views, recompose

__all__ = [
    "RareConfig", "RareModel", "TrainReport", "GraphStructure",
    "init_model", "encode", "predict_masked", "momentum_encode", "decode",
    "ema_update", "latent_matching_loss", "latent_matching_terms", "isce_loss", "isce_terms",
    "total_loss", "forward_step", "pretrain", "pretrain_dataset", "embed",
]

NORM_FLOOR = 1e-12
LOG_FLOOR = 1e-12


@dataclass
class RareConfig:
    backbone: str = "gat"
    mask_ratio: float = 0.75
    alpha: float = 6.0
    scale_t: float = 2.0
    momentum: float = 0.1
    layers: int = 2
    heads: int = 4
    hidden: int = 256
    latent_dim: int = 256
    lr: float = 1e-3
    epochs: int = 200
    precision: str = "f64"
    no_predictor: bool = False
    no_momentum_encoder: bool = False
    momentum_input: str = "masked"
    zero_tokens: bool = False
    latent_loss: str = "mse"
    raw_loss: str = "isce"
    ema_swap: bool = False
    gin_eps: float = 0.0
    batch_size: int = 32

    def validate(self, training: bool = True) -> "RareConfig":
        def need(cond, name, msg):
            if not cond:
                raise ConfigError(name, msg)

        need(self.backbone in ("gat", "gin"), "backbone", "must be 'gat' or 'gin'")
        if training:
            need(0.0 < self.mask_ratio < 1.0, "mask_ratio", f"must lie in (0, 1), got {self.mask_ratio}")
        else:
            need(0.0 <= self.mask_ratio <= 1.0, "mask_ratio", f"must lie in [0, 1], got {self.mask_ratio}")
        need(self.alpha >= 0, "alpha", "must be >= 0")
        need(self.scale_t >= 1, "scale_t", "must be >= 1")
        need(0.0 <= self.momentum <= 1.0, "momentum", "must lie in [0, 1]")
        need(self.layers >= 1, "layers", "must be >= 1")
        need(self.heads >= 1, "heads", "must be >= 1")
        need(self.hidden >= 1, "hidden", "must be >= 1")
        if self.backbone == "gat":
            need(self.hidden % self.heads == 0, "hidden", "must be divisible by heads")
        need(self.latent_dim >= 1, "latent_dim", "must be >= 1")
        need(self.lr > 0, "lr", "must be > 0")
        need(self.epochs >= 0, "epochs", "must be >= 0")
        need(self.precision in ("f32", "f64"), "precision", "must be 'f32' or 'f64'")
        need(self.momentum_input in ("masked", "full"), "momentum_input", "must be 'masked' or 'full'")
        need(self.latent_loss in ("mse", "mae", "isce"), "latent_loss", "must be mse, mae or isce")
        need(self.raw_loss in ("mse", "isce"), "raw_loss", "must be mse or isce")
        need(self.batch_size >= 1, "batch_size", "must be >= 1")
        return self

    @property
    def dtype(self):
        return np.float32 if self.precision == "f32" else np.float64

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RareConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(sorted(unknown)[0], f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class GraphStructure:
    """Precomputed index arrays shared by every layer pass over one graph."""

    adj: NormalizedAdjacency
    agg: NormalizedAdjacency
    row: np.ndarray
    col: np.ndarray

    @classmethod
    def of(cls, g: SparseGraph, gin_eps: float = 0.0) -> "GraphStructure":
        adj = g.normalized_adjacency()
        return cls(adj, aggregation_adjacency(g, gin_eps), adj.row, adj.indices)

    @property
    def num_nodes(self) -> int:
        return self.adj.num_nodes


# ---------------------------------------------------------------------------
# parameter construction


def _zeros(shape, dtype, name):
    return Tensor(np.zeros(shape, dtype), requires_grad=True, name=name)


def _slope(dtype, name):
    return Tensor(np.full((1, 1), 0.25, dtype), requires_grad=True, name=name)


def _linear_params(p, prefix, i, o, rng, dtype):
    p[f"{prefix}.weight"] = ad.xavier_init((i, o), rng, dtype, f"{prefix}.weight")
    p[f"{prefix}.bias"] = _zeros((1, o), dtype, f"{prefix}.bias")


def _gat_params(p, prefix, i, o, heads, rng, dtype):
    per_head = o // heads
    for k in range(heads):
        p[f"{prefix}.W{k}"] = ad.xavier_init((i, per_head), rng, dtype, f"{prefix}.W{k}")
        p[f"{prefix}.a_dst{k}"] = ad.xavier_init((per_head, 1), rng, dtype, f"{prefix}.a_dst{k}")
        p[f"{prefix}.a_src{k}"] = ad.xavier_init((per_head, 1), rng, dtype, f"{prefix}.a_src{k}")
    p[f"{prefix}.bias"] = _zeros((1, o), dtype, f"{prefix}.bias")
    p[f"{prefix}.prelu"] = _slope(dtype, f"{prefix}.prelu")


def _gin_params(p, prefix, i, o, rng, dtype):
    _linear_params(p, f"{prefix}.mlp0", i, o, rng, dtype)
    p[f"{prefix}.mlp_prelu"] = _slope(dtype, f"{prefix}.mlp_prelu")
    _linear_params(p, f"{prefix}.mlp1", o, o, rng, dtype)
    p[f"{prefix}.prelu"] = _slope(dtype, f"{prefix}.prelu")


def _graph_layer_params(p, prefix, cfg, i, o, heads, rng, dtype):
    if cfg.backbone == "gat":
        _gat_params(p, prefix, i, o, heads, rng, dtype)
    else:
        _gin_params(p, prefix, i, o, rng, dtype)


def init_encoder(cfg: RareConfig, in_dim: int, rng, dtype) -> dict:
    p = {}
    dims = [in_dim] + [cfg.hidden] * cfg.layers
    for layer in range(cfg.layers):
        _graph_layer_params(p, f"backbone.{layer}", cfg, dims[layer], dims[layer + 1], cfg.heads,
                            rng, dtype)
    _linear_params(p, "projector", cfg.hidden, cfg.latent_dim, rng, dtype)
    p["projector.prelu"] = _slope(dtype, "projector.prelu")
    return p


def init_predictor(cfg: RareConfig, rng, dtype) -> dict:
    p = {}
    _graph_layer_params(p, "predictor.graph", cfg, cfg.latent_dim, cfg.latent_dim, 1, rng, dtype)
    _linear_params(p, "predictor.mlp", cfg.latent_dim, cfg.latent_dim, rng, dtype)
    return p


def init_decoder(cfg: RareConfig, in_dim: int, rng, dtype) -> dict:
    p = {}
    _linear_params(p, "decoder", cfg.latent_dim, in_dim, rng, dtype)
    return p


# ---------------------------------------------------------------------------
# layers


def linear(p, prefix, h):
    return ad.add(ad.matmul(h, p[f"{prefix}.weight"]), p[f"{prefix}.bias"])


def gat_layer(p, prefix, h: Tensor, struct: GraphStructure, heads: int) -> Tensor:
    """Multi-head attention over the self-looped neighborhood, heads concatenated."""
    n = struct.num_nodes
    outs = []
    for k in range(heads):
        wh = ad.matmul(h, p[f"{prefix}.W{k}"])
        s_dst = ad.matmul(wh, p[f"{prefix}.a_dst{k}"])
        s_src = ad.matmul(wh, p[f"{prefix}.a_src{k}"])
        logits = ad.leaky_relu(
            ad.add(ad.gather_rows(s_dst, struct.row), ad.gather_rows(s_src, struct.col)), 0.2)
        att = ad.segment_softmax(logits, struct.row, n)
        outs.append(ad.sparse_spmm(struct.adj, wh, values=att))
    out = outs[0] if heads == 1 else ad.concat(outs, axis=1)
    return ad.prelu(ad.add(out, p[f"{prefix}.bias"]), p[f"{prefix}.prelu"])


def gin_layer(p, prefix, h: Tensor, struct: GraphStructure) -> Tensor:
    """``MLP((1 + eps) h_i + sum_j h_j)`` followed by PReLU."""
    agg = ad.sparse_spmm(struct.agg, h)
    hid = ad.prelu(linear(p, f"{prefix}.mlp0", agg), p[f"{prefix}.mlp_prelu"])
    return ad.prelu(linear(p, f"{prefix}.mlp1", hid), p[f"{prefix}.prelu"])


def _graph_layer(p, prefix, h, struct, cfg, heads):
    if cfg.backbone == "gat":
        return gat_layer(p, prefix, h, struct, heads)
    return gin_layer(p, prefix, h, struct)


def backbone_forward(p, x: Tensor, struct: GraphStructure, cfg: RareConfig) -> Tensor:
    h = x
    for layer in range(cfg.layers):
        h = _graph_layer(p, f"backbone.{layer}", h, struct, cfg, cfg.heads)
    return h


def encoder_forward(p, x: Tensor, struct: GraphStructure, cfg: RareConfig):
    """Return ``(backbone_output, projected_output)`` for every node."""
    h = backbone_forward(p, x, struct, cfg)
    z = ad.prelu(linear(p, "projector", h), p["projector.prelu"])
    return h, z


def encode(params, view, struct: GraphStructure, cfg: RareConfig) -> Tensor:
    """Projected latent features for all nodes of a masked view (``|V| x d``)."""
    if view.inputs.shape[0] != struct.num_nodes:
        raise DimensionError("view and graph structure disagree on node count")
    return encoder_forward(params, view.inputs, struct, cfg)[1]


def predict_masked(params, z_tilde: Tensor, struct: GraphStructure, masked_idx,
                   cfg: RareConfig) -> Tensor:
    """Graph layer over the recomposed latents, then an MLP; rows at ``masked_idx``."""
    masked_idx = np.asarray(masked_idx)
    if masked_idx.size == 0:
        raise DimensionError("predict_masked requires at least one masked node")
    h = _graph_layer(params, "predictor.graph", z_tilde, struct, cfg, 1)
    return linear(params, "predictor.mlp", ad.gather_rows(h, masked_idx))


def momentum_encode(params_m, view, struct: GraphStructure, cfg: RareConfig, masked_idx) -> Tensor:
    """Target latents for masked nodes; the result carries no gradient.

    ``view`` is a masked view or, for the full-graph variant, a plain input tensor.
    """
    inputs = view if isinstance(view, Tensor) else view.inputs
    frozen = {k: Tensor(v.data) for k, v in params_m.items()}
    z = encoder_forward(frozen, ad.detach(inputs), struct, cfg)[1]
    return ad.detach(ad.gather_rows(z, masked_idx))


def decode(params, z_hat: Tensor) -> Tensor:
    """Affine map from latent to attribute space, no output nonlinearity."""
    if z_hat.shape[1] != params["decoder.weight"].shape[0]:
        raise DimensionError(
            f"decode: latent width {z_hat.shape[1]} != {params['decoder.weight'].shape[0]}")
    return linear(params, "decoder", z_hat)


def ema_update(momentum_params: dict, online_params: dict, mu: float, swap: bool = False) -> None:
    """``theta_m <- mu * theta_m + (1 - mu) * theta_g`` in place.

    ``swap`` exchanges the weights (``(1 - mu) * theta_m + mu * theta_g``).
    """
    keep, take = (1.0 - mu, mu) if swap else (mu, 1.0 - mu)
    if momentum_params.keys() != online_params.keys():
        raise DimensionError("ema_update: parameter sets differ")
    for name, m in momentum_params.items():
        g = online_params[name]
        if m.shape != g.shape:
            raise DimensionError(f"ema_update: {name} shape {m.shape} != {g.shape}")
        m.data = (keep * m.data + take * g.data).astype(m.dtype, copy=False)


# ---------------------------------------------------------------------------
# losses


def _check_pair(a, b, op):
    if a.shape != b.shape:
        raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} differ")
    if a.shape[0] == 0:
        raise DimensionError(f"{op}: empty input")


def latent_matching_terms(z_hat: Tensor, z: Tensor) -> Tensor:
    """Squared euclidean distance per row, ``(n, 1)``."""
    _check_pair(z_hat, z, "latent_matching_loss")
    diff = ad.sub(z_hat, z)
    return ad.row_dot(diff, diff)


def latent_matching_loss(z_hat: Tensor, z: Tensor) -> Tensor:
    return ad.mean(latent_matching_terms(z_hat, z))


def mae_terms(a: Tensor, b: Tensor) -> Tensor:
    _check_pair(a, b, "mae")
    diff = ad.absolute(ad.sub(a, b))
    return ad.row_dot(diff, Tensor(np.ones_like(diff.data)))


def isce_terms(x_hat: Tensor, x: Tensor, t: float = 2.0) -> Tensor:
    """Per-row ``-t * log(1/2 + cos/2)`` with norm and log floors."""
    _check_pair(x_hat, x, "isce_loss")
    # sqrt(|a|^2 |b|^2) rather than |a| |b| so that identical rows give cos == 1 exactly
    sq_floor = NORM_FLOOR * NORM_FLOOR
    norms = ad.power(ad.mul(ad.clamp(ad.row_dot(x_hat, x_hat), lo=sq_floor),
                            ad.clamp(ad.row_dot(x, x), lo=sq_floor)), 0.5)
    cos = ad.div(ad.row_dot(x_hat, x), norms)
    half = Tensor(np.full(cos.shape, 0.5, cos.dtype))
    term = ad.clamp(ad.add(ad.scale(cos, 0.5), half), LOG_FLOOR, 1.0)
    return ad.scale(ad.log(term), -t)


def isce_loss(x_hat: Tensor, x: Tensor, t: float = 2.0) -> Tensor:
    return ad.mean(isce_terms(x_hat, x, t))


def total_loss(latent: Tensor, raw: Tensor, alpha: float) -> Tensor:
    if alpha < 0:
        raise ConfigError("alpha", "alpha must be >= 0")
    return ad.add(latent, ad.scale(raw, alpha))


def _latent_terms(cfg, z_hat, z):
    if cfg.latent_loss == "mse":
        return latent_matching_terms(z_hat, z)
    if cfg.latent_loss == "mae":
        return mae_terms(z_hat, z)
    return isce_terms(z_hat, z, cfg.scale_t)


def _raw_terms(cfg, x_hat, x):
    if cfg.raw_loss == "isce":
        return isce_terms(x_hat, x, cfg.scale_t)
    return latent_matching_terms(x_hat, x)


# ---------------------------------------------------------------------------
# model


@dataclass
class RareModel:
    config: RareConfig
    in_dim: int
    encoder: dict
    momentum: dict
    predictor: dict
    decoder: dict
    tokens: TokenBank

    def trainable_parameters(self):
        """``(name, tensor)`` pairs updated by the optimizer, in a fixed order."""
        out = [(f"encoder.{k}", v) for k, v in self.encoder.items()]
        out += [(k, v) for k, v in self.predictor.items()]
        out += [(k, v) for k, v in self.decoder.items()]
        out += self.tokens.parameters()
        return out

    def named_tensors(self):
        """Every stored tensor in checkpoint order."""
        out = [(f"encoder.{k}", v) for k, v in self.encoder.items()]
        out += [(f"momentum.{k}", v) for k, v in self.momentum.items()]
        out += [(k, v) for k, v in self.predictor.items()]
        out += [(k, v) for k, v in self.decoder.items()]
        out += [("tokens.raw", self.tokens.raw_token), ("tokens.latent", self.tokens.latent_token)]
        return out


def init_model(cfg: RareConfig, in_dim: int, seed=0) -> RareModel:
    """Xavier-initialized model; the momentum encoder starts as an exact copy."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    dtype = cfg.dtype
    encoder = init_encoder(cfg, in_dim, rng, dtype)
    momentum = {}
    for k, v in encoder.items():
        momentum[k] = Tensor(v.data.copy(), requires_grad=False, name=f"momentum.{k}")
    predictor = {} if cfg.no_predictor else init_predictor(cfg, rng, dtype)
    decoder = init_decoder(cfg, in_dim, rng, dtype)
    tokens = TokenBank.init(in_dim, cfg.latent_dim, rng, dtype, zero=cfg.zero_tokens)
    return RareModel(cfg, in_dim, encoder, momentum, predictor, decoder, tokens)


@dataclass
class StepOutput:
    total: Tensor
    latent: Tensor
    raw: Tensor
    latent_terms: np.ndarray
    raw_terms: np.ndarray
    target: Tensor | None


def momentum_target(model: RareModel, g: SparseGraph, struct: GraphStructure,
                    part: MaskPartition, gm=None) -> Tensor:
    cfg = model.config
    if cfg.momentum_input == "full":
        view = Tensor(g.attributes.astype(cfg.dtype, copy=False))
    else:
        if gm is None:
            gm = masked_views(g, part, model.tokens, cfg.dtype)[1]
        view = gm
    return momentum_encode(model.momentum, view, struct, cfg, part.masked_idx)


def forward_step(model: RareModel, g: SparseGraph, struct: GraphStructure, part: MaskPartition,
                 target: Tensor | None = None) -> StepOutput:
    """One pass of the objective for a fixed mask.

    ``target`` overrides the momentum-encoder output (gradient checks hold it
    fixed so finite differences see the same constant the tape does).
    """
    cfg = model.config
    masked = part.masked_idx
    if masked.size == 0 or part.visible_idx.size == 0:
        raise DimensionError("training step needs at least one visible and one masked node")
    gv, gm = masked_views(g, part, model.tokens, cfg.dtype)
    z_all = encode(model.encoder, gv, struct, cfg)
    if cfg.no_predictor:
        z_hat = ad.gather_rows(z_all, masked)
    else:
        z_tilde = recompose(ad.gather_rows(z_all, part.visible_idx), part, model.tokens)
        z_hat = predict_masked(model.predictor, z_tilde, struct, masked, cfg)

    x_hat = decode(model.decoder, z_hat)
    x_m = Tensor(g.attributes[masked].astype(cfg.dtype, copy=False))
    raw_terms = _raw_terms(cfg, x_hat, x_m)
    raw = ad.mean(raw_terms)

    if cfg.no_momentum_encoder:
        latent_terms = Tensor(np.zeros((len(masked), 1), cfg.dtype))
    else:
        if target is None:
            target = momentum_target(model, g, struct, part, gm)
        latent_terms = _latent_terms(cfg, z_hat, target)
    latent = ad.mean(latent_terms)
    total = total_loss(latent, raw, cfg.alpha)
    return StepOutput(total, latent, raw, latent_terms.data.reshape(-1).copy(),
                      raw_terms.data.reshape(-1).copy(), target)


# ---------------------------------------------------------------------------
# training


@dataclass
class TrainReport:
    """Per-iteration losses; group columns are filled only when outliers are tracked."""

    total: list = field(default_factory=list)
    latent: list = field(default_factory=list)
    raw: list = field(default_factory=list)
    raw_outlier: list = field(default_factory=list)
    raw_normal: list = field(default_factory=list)
    latent_outlier: list = field(default_factory=list)
    latent_normal: list = field(default_factory=list)
    seconds: list = field(default_factory=list)

    COLUMNS = ("iter", "L", "L_M", "L_R", "L_R_outlier", "L_R_normal", "L_M_outlier", "L_M_normal")

    def __len__(self):
        return len(self.total)

    def rows(self):
        for i in range(len(self)):
            def g(col):
                return col[i] if i < len(col) else math.nan
            yield (i, self.total[i], self.latent[i], self.raw[i], g(self.raw_outlier),
                   g(self.raw_normal), g(self.latent_outlier), g(self.latent_normal))

    def to_csv(self, path) -> None:
        def fmt(v):
            if isinstance(v, int):
                return str(v)
            return "" if math.isnan(v) else repr(float(v))
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(",".join(self.COLUMNS) + "\n")
            for row in self.rows():
                fh.write(",".join(fmt(v) for v in row) + "\n")


def _group_mean(terms, mask):
    return float(np.mean(terms[mask])) if np.any(mask) else math.nan


def _run_step(model, opt, g, struct, part, it, report, outlier_mask):
    cfg = model.config
    start = time.perf_counter()
    out = forward_step(model, g, struct, part)
    values = {"L": out.total.item(), "L_M": out.latent.item(), "L_R": out.raw.item()}
    if not all(math.isfinite(v) for v in values.values()):
        raise NumericalError(it, values)
    opt.zero_grad()
    ad.backward(out.total)
    opt.step()
    ema_update(model.momentum, model.encoder, cfg.momentum, cfg.ema_swap)
    report.total.append(values["L"])
    report.latent.append(values["L_M"])
    report.raw.append(values["L_R"])
    if outlier_mask is not None:
        is_out = outlier_mask[part.masked_idx]
        report.raw_outlier.append(_group_mean(out.raw_terms, is_out))
        report.raw_normal.append(_group_mean(out.raw_terms, ~is_out))
        report.latent_outlier.append(_group_mean(out.latent_terms, is_out))
        report.latent_normal.append(_group_mean(out.latent_terms, ~is_out))
    report.seconds.append(time.perf_counter() - start)


def _seeds(seed):
    init_ss, mask_ss = np.random.SeedSequence(int(seed)).spawn(2)
    return np.random.default_rng(init_ss), np.random.default_rng(mask_ss)


def pretrain(g: SparseGraph, cfg: RareConfig, seed: int = 0, outlier_idx=None,
             callback: Callable | None = None):
    """Self-supervised pre-training on one graph.

    Returns ``(model, report)``. ``outlier_idx`` enables per-group loss
    tracking; ``callback(iteration, model)`` runs after every update.
    """
    cfg.validate(training=True)
    init_rng, mask_rng = _seeds(seed)
    model = init_model(cfg, g.num_features, init_rng)
    report = TrainReport()
    struct = GraphStructure.of(g, cfg.gin_eps)
    params = [p for _, p in model.trainable_parameters()]
    opt = ad.Adam(params, lr=cfg.lr)
    outlier_mask = None
    if outlier_idx is not None:
        outlier_mask = np.zeros(g.num_nodes, dtype=bool)
        outlier_mask[np.asarray(outlier_idx, dtype=np.int64)] = True
    for it in range(cfg.epochs):
        part = draw_mask(g.num_nodes, cfg.mask_ratio, int(mask_rng.integers(2 ** 62)))
        _run_step(model, opt, g, struct, part, it, report, outlier_mask)
        if callback is not None:
            callback(it, model)
    return model, report


def pretrain_dataset(dataset, cfg: RareConfig, seed: int = 0):
    """Pre-train on a collection of graphs, one block-diagonal mini-batch per step."""
    from .graph import batch_graphs

    cfg.validate(training=True)
    init_rng, mask_rng = _seeds(seed)
    model = init_model(cfg, dataset.num_features, init_rng)
    report = TrainReport()
    params = [p for _, p in model.trainable_parameters()]
    opt = ad.Adam(params, lr=cfg.lr)
    it = 0
    for _ in range(cfg.epochs):
        order = mask_rng.permutation(len(dataset))
        for start in range(0, len(order), cfg.batch_size):
            g, _ = batch_graphs(dataset[i] for i in order[start:start + cfg.batch_size])
            if g.num_nodes < 2:
                continue
            struct = GraphStructure.of(g, cfg.gin_eps)
            part = draw_mask(g.num_nodes, cfg.mask_ratio, int(mask_rng.integers(2 ** 62)))
            _run_step(model, opt, g, struct, part, it, report, None)
            it += 1
    return model, report


def embed(model: RareModel, g: SparseGraph) -> np.ndarray:
    """Backbone output on the unmasked graph (projector excluded)."""
    if g.num_features != model.in_dim:
        raise DimensionError(f"graph has {g.num_features} attributes, model expects {model.in_dim}")
    cfg = model.config
    frozen = {k: Tensor(v.data) for k, v in model.encoder.items()}
    x = Tensor(g.attributes.astype(cfg.dtype, copy=False))
    return backbone_forward(frozen, x, GraphStructure.of(g, cfg.gin_eps), cfg).data


def clone_model(model: RareModel) -> RareModel:
    return copy.deepcopy(model)
