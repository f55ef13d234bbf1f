"""Structural property checks run by ``projsde selftest``.

Each check returns a :class:`CheckResult`; nothing here raises on a failed
property, so the CLI can print a full table before choosing its exit code.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .core import check_conserved, default_skew_gradient
from .models import MODELS, build_model
from .noise import TruncationConfig
from .projection import ProjectionConfig, project
from .schemes import SCHEMES, SchemeConfig, discrete_gradient


class CheckResult(NamedTuple):
    name: str
    passed: bool
    value: float
    tol: float


def orthogonality(model, samples: int = 1000, seed: int = 0, tol: float = 1e-12):
    """Invariant gradients orthogonal to drift and every diffusion field."""
    rep = check_conserved(model, samples=samples, seed=seed)
    worst = max(r for per in rep.values() for r in per.values())
    return CheckResult(f"{model.name}: orthogonality", worst <= tol, worst, tol)


def skew_gradient(model, samples: int = 1000, seed: int = 1, tol: float = 1e-12):
    """Default and model-supplied skew-gradient matrices are skew and reproduce f, g_r."""
    x = model.sample_states(samples, np.random.default_rng(seed))
    forms = [(inv, *default_skew_gradient(model, x, k))
             for k, inv in enumerate(model.invariants)]
    if model.sg_form is not None:
        sg = model.sg_form
        forms.append((model.invariants[0], sg.S(x), [T(x) for T in sg.T]))
    worst = 0.0
    for inv, S, T in forms:
        grad = inv.gradient(x)
        pairs = [(S, model.drift(x))] + list(zip(T, (g(x) for g in model.diffusions)))
        for M, v in pairs:
            skew = np.abs(M + np.swapaxes(M, -1, -2)).max()
            recon = np.abs(np.einsum("...ij,...j->...i", M, grad) - v).max()
            scale = max(1.0, float(np.abs(v).max()))
            worst = max(worst, float(skew), float(recon) / scale)
    return CheckResult(f"{model.name}: skew-gradient form", worst <= tol, worst, tol)


def gonzalez_identity(model, samples: int = 1000, seed: int = 2, tol: float = 1e-13):
    """``dg(x, y) . (y - x) = I(y) - I(x)`` relative to ``max(1, |I|)``."""
    rng = np.random.default_rng(seed)
    x = model.sample_states(samples, rng)
    y = model.sample_states(samples, rng)
    worst = 0.0
    for inv in model.invariants:
        lhs = np.sum(discrete_gradient(inv, x, y) * (y - x), axis=-1)
        rhs = inv.value(y) - inv.value(x)
        scale = np.maximum(1.0, np.maximum(np.abs(inv.value(x)), np.abs(inv.value(y))))
        worst = max(worst, float(np.max(np.abs(lhs - rhs) / scale)))
    return CheckResult(f"{model.name}: discrete-gradient identity", worst <= tol, worst, tol)


def projection_idempotence(model, samples: int = 200, seed: int = 3, tol: float = 1e-12):
    """Projecting an already projected state changes nothing."""
    rng = np.random.default_rng(seed)
    x = model.sample_states(samples, rng)
    x_hat = x + 0.01 * rng.standard_normal(x.shape)
    cfg = ProjectionConfig()
    targets = model.invariant_values(x)
    once = project(model, x, x_hat, cfg, targets).state
    twice = project(model, x, once, cfg, targets).state
    worst = float(np.abs(twice - once).max())
    return CheckResult(f"{model.name}: projection idempotence", worst <= tol, worst, tol)


def zero_step(model, samples: int = 50, seed: int = 4, tol: float = 0.0):
    """Every scheme returns its input for ``h = 0`` and ``dW = 0``."""
    x = model.sample_states(samples, np.random.default_rng(seed))
    dW = np.zeros(x.shape[:-1] + (model.noise_count,))
    worst = 0.0
    for name, step in SCHEMES.items():
        cfg = SchemeConfig(method=name, truncation=TruncationConfig())
        worst = max(worst, float(np.abs(step(model, x, 0.0, dW, cfg) - x).max()))
    return CheckResult(f"{model.name}: zero-step identity", worst <= tol, worst, tol)


CHECKS = (orthogonality, skew_gradient, gonzalez_identity, projection_idempotence, zero_step)


def run_all(models=None) -> list:
    """Run every check on every bundled model (or the given names)."""
    results = []
    for name in models or MODELS:
        model = build_model(name)
        for check in CHECKS:
            results.append(check(model))
    return results
