"""Central finite-difference checks of the analytic gradients."""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .graph import SparseGraph
from .masking import draw_mask
from .model import GraphStructure, RareConfig, forward_step, init_model

__all__ = ["numeric_grad", "relative_error", "check_function", "random_graph",
           "check_model_gradients", "run_suite"]

STEP = 1e-5
SCALE_FLOOR = 1e-6


def numeric_grad(fn, tensor: Tensor, step: float = STEP) -> np.ndarray:
    """Central differences of scalar ``fn()`` with respect to every entry of ``tensor``."""
    out = np.zeros_like(tensor.data)
    flat = tensor.data.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        hi = fn().item()
        flat[i] = orig - step
        lo = fn().item()
        flat[i] = orig
        out.reshape(-1)[i] = (hi - lo) / (2 * step)
    return out


def relative_error(analytic, numeric, floor: float = SCALE_FLOOR) -> float:
    """``|a - n| / max(|a|, |n|, floor)`` in the euclidean norm.

    The floor keeps a gradient that is exactly zero (e.g. an attention vector
    whose logits all shift together within every softmax group) from being
    compared against pure finite-difference round-off.
    """
    analytic = np.zeros_like(numeric) if analytic is None else analytic
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), floor)
    return float(np.linalg.norm(analytic - numeric) / scale)


def check_function(fn, params, step: float = STEP) -> dict:
    """Relative error per named tensor for scalar ``fn`` built on ``params``."""
    for _, p in params:
        p.grad = None
    ad.backward(fn())
    errors = {}
    for name, p in params:
        errors[name] = relative_error(p.grad, numeric_grad(fn, p, step))
    return errors


def random_graph(n: int, d: int, rng, p: float = 0.4) -> SparseGraph:
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(len(iu)) < p
    return SparseGraph(n, np.stack([iu[keep], ju[keep]], axis=1), rng.standard_normal((n, d)))


def check_model_gradients(seed: int, backbone: str = "gat", num_nodes: int = 8, in_dim: int = 5,
                          latent_dim: int = 4, **overrides) -> dict:
    """Per-parameter-group relative error of d(total loss)/d(theta) for one random setup.

    The momentum target is computed once and held fixed, matching what the
    tape differentiates.
    """
    rng = np.random.default_rng(seed)
    g = random_graph(num_nodes, in_dim, rng)
    cfg = RareConfig(backbone=backbone, layers=2, heads=2, hidden=6, latent_dim=latent_dim,
                     precision="f64", mask_ratio=0.5, **overrides).validate()
    model = init_model(cfg, in_dim, rng)
    # move the momentum encoder away from the online copy so the target is non-trivial
    for t in model.momentum.values():
        t.data = t.data + 0.1 * rng.standard_normal(t.shape)
    struct = GraphStructure.of(g, cfg.gin_eps)
    part = draw_mask(num_nodes, 0.5, int(rng.integers(2 ** 31)))
    target = forward_step(model, g, struct, part).target

    def fn():
        return forward_step(model, g, struct, part, target).total

    errors = check_function(fn, model.trainable_parameters())
    groups = {}
    for name, err in errors.items():
        if name.startswith("encoder."):
            group = "encoder"
        elif name.startswith("predictor."):
            group = "predictor"
        elif name.startswith("decoder."):
            group = "decoder"
        else:
            group = name
        groups[group] = max(groups.get(group, 0.0), err)
    return groups


def run_suite(seed: int = 0, num_seeds: int = 10) -> float:
    """Max relative error over both backbones and ``num_seeds`` seeds."""
    worst = 0.0
    for backbone in ("gat", "gin"):
        for s in range(seed, seed + num_seeds):
            worst = max(worst, max(check_model_gradients(s, backbone).values()))
    return worst
