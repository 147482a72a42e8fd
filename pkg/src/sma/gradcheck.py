"""Central finite-difference checks for every hand-written backward pass.

Used both by the test suite and by the ``gradcheck`` CLI command. All checks
run in float64; inputs near ReLU kinks are nudged away from zero so the
subgradient convention does not poison the comparison.
"""

from __future__ import annotations

import numpy as np

from . import nn


def numeric_grad(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar function at x, elementwise."""
    x = x.astype(np.float64)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        f_plus = f(x)
        flat[i] = orig - h
        f_minus = f(x)
        flat[i] = orig
        out[i] = (f_plus - f_minus) / (2 * h)
    return grad


def max_rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """max |a - n| / max(|a| + |n|, tiny), i.e. 0 when both vanish."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.abs(a) + np.abs(n), 1e-12)
    return float(np.max(np.abs(a - n) / denom)) if a.size else 0.0


def _nudge_from_zero(x: np.ndarray, margin: float = 1e-3) -> np.ndarray:
    """Push values inside (-margin, margin) out to ±margin, keeping sign (0 → +)."""
    sign = np.where(x >= 0, 1.0, -1.0)
    return np.where(np.abs(x) < margin, sign * margin, x)


def check_conv(rng: np.random.Generator) -> dict[str, float]:
    x = rng.standard_normal((2, 3, 12))
    p = nn.ConvParams(rng.standard_normal((4, 3, 3)), rng.standard_normal(4), dilation=2)
    grad_y = rng.standard_normal((2, 4, 12))

    def loss_of_x(xv):
        return float(np.sum(nn.causal_conv1d(xv, p) * grad_y))

    def loss_of_w(wv):
        return float(np.sum(nn.causal_conv1d(x, nn.ConvParams(wv, p.bias, p.dilation)) * grad_y))

    def loss_of_b(bv):
        return float(np.sum(nn.causal_conv1d(x, nn.ConvParams(p.weights, bv, p.dilation)) * grad_y))

    gx, gw, gb = nn.causal_conv1d_backward(x, p, grad_y)
    return {
        "conv.x": max_rel_error(gx, numeric_grad(loss_of_x, x)),
        "conv.w": max_rel_error(gw, numeric_grad(loss_of_w, p.weights)),
        "conv.bias": max_rel_error(gb, numeric_grad(loss_of_b, p.bias)),
    }


def check_relu(rng: np.random.Generator) -> dict[str, float]:
    x = _nudge_from_zero(rng.standard_normal((2, 4, 9)))
    grad_y = rng.standard_normal(x.shape)
    analytic = nn.relu_backward(x, grad_y)
    numeric = numeric_grad(lambda xv: float(np.sum(nn.relu(xv) * grad_y)), x)
    return {"relu.x": max_rel_error(analytic, numeric)}


def check_gap(rng: np.random.Generator) -> dict[str, float]:
    x = rng.standard_normal((3, 2, 7))
    grad_y = rng.standard_normal((3, 2))
    analytic = nn.global_avg_pool_backward(x, grad_y)
    numeric = numeric_grad(lambda xv: float(np.sum(nn.global_avg_pool(xv) * grad_y)), x)
    return {"gap.x": max_rel_error(analytic, numeric)}


def check_dense(rng: np.random.Generator) -> dict[str, float]:
    x = rng.standard_normal((5, 4))
    w = rng.standard_normal((3, 4))
    b = rng.standard_normal(3)
    grad_y = rng.standard_normal((5, 3))
    gx, gw, gb = nn.dense_backward(x, w, grad_y)
    return {
        "dense.x": max_rel_error(gx, numeric_grad(lambda v: float(np.sum(nn.dense(v, w, b) * grad_y)), x)),
        "dense.w": max_rel_error(gw, numeric_grad(lambda v: float(np.sum(nn.dense(x, v, b) * grad_y)), w)),
        "dense.bias": max_rel_error(gb, numeric_grad(lambda v: float(np.sum(nn.dense(x, w, v) * grad_y)), b)),
    }


def check_softmax_xent(rng: np.random.Generator) -> dict[str, float]:
    logits = rng.standard_normal((3, 5))
    labels = rng.integers(0, 5, size=3)
    _, analytic = nn.softmax_xent(logits, labels)
    numeric = numeric_grad(lambda v: nn.softmax_xent(v, labels)[0], logits)
    return {"softmax_xent.logits": max_rel_error(analytic, numeric)}


def check_model(rng: np.random.Generator) -> dict[str, float]:
    """End-to-end FD check of a tiny network (1 block, C=2, T=16), float64."""
    from . import model as model_mod

    cfg = model_mod.ResTcnConfig(
        in_channels=1,
        stem=(3, 2, 1),
        blocks=[(3, 2, 1)],
        num_classes=3,
        seed=int(rng.integers(0, 2**31)),
    )
    m = model_mod.build(cfg)
    params = [p.astype(np.float64) for p in m.parameters()]
    x = _nudge_from_zero(rng.standard_normal((4, 1, 16)))
    labels = rng.integers(0, 3, size=4)

    loss, grads = model_mod.loss_and_grads(cfg, params, x, labels)
    errs = {}
    for i, p in enumerate(params):
        def loss_of(pv, i=i):
            trial = list(params)
            trial[i] = pv
            return model_mod.loss_and_grads(cfg, trial, x, labels)[0]

        errs[f"model.param{i}"] = max_rel_error(grads[i], numeric_grad(loss_of, p))
    return errs


def run_all(seed: int = 0) -> dict[str, float]:
    """Every layer check plus the end-to-end model check; name → max rel error."""
    rng = np.random.default_rng(seed)
    results: dict[str, float] = {}
    for fn in (check_conv, check_relu, check_gap, check_dense, check_softmax_xent, check_model):
        results.update(fn(rng))
    return results


LAYER_TOL = 1e-4
MODEL_TOL = 1e-3


def passed(results: dict[str, float]) -> bool:
    return all(v < (MODEL_TOL if name.startswith("model.") else LAYER_TOL) for name, v in results.items())
