"""Projection of a one-step approximation back onto the invariant manifold.

After a supporting step produces ``x_hat``, the projected state is
``x_hat + Phi @ lam`` where the columns of ``Phi`` are invariant gradients
(at ``x_hat`` by default, or at the pre-step state) and ``lam`` solves
``I(x_hat + Phi @ lam) = targets`` by Newton's method started from zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (
    ConfigurationError,
    DegenerateGradientError,
    NonConvergenceError,
    SdeModel,
    SingularMatrixError,
    solve_dense,
)
from .schemes import SchemeConfig, get_scheme

DIRECTIONS = ("xhat", "x")


@dataclass(frozen=True)
class ProjectionConfig:
    direction: str = "xhat"
    newton_tol: float = 1e-12
    newton_max_iter: int = 25

    def __post_init__(self):
        if self.direction not in DIRECTIONS:
            raise ConfigurationError(f"projection direction must be one of {DIRECTIONS}")
        if not self.newton_tol > 0:
            raise ConfigurationError("newton_tol must be positive")
        if self.newton_max_iter < 1:
            raise ConfigurationError("newton_max_iter must be >= 1")


@dataclass
class ProjectionOutcome:
    state: np.ndarray
    lam: np.ndarray
    iterations: int
    residual: float


def _stall(name, it, x_prev, x_hat, bad):
    idx = tuple(np.argwhere(bad)[0]) if np.ndim(bad) else ()
    x_prev = np.broadcast_to(x_prev, np.shape(x_hat))
    return NonConvergenceError(
        f"{name}: Newton did not reach tolerance after {it} iterations",
        x_prev=x_prev[idx].copy(), x_hat=np.asarray(x_hat)[idx].copy(),
        row=int(idx[0]) if len(idx) == 1 else None)


def project_single(model: SdeModel, x_prev, x_hat, cfg: ProjectionConfig = ProjectionConfig(),
                   target=None, invariant: int = 0) -> ProjectionOutcome:
    """Scalar Newton projection for one invariant.

    ``target`` defaults to ``I(x_prev)``. Arrays may carry leading batch axes;
    ``iterations`` is then the maximum over the batch.
    """
    inv = model.invariants[invariant]
    x_prev = np.asarray(x_prev, dtype=float)
    x_hat = np.asarray(x_hat, dtype=float)
    if target is None:
        target = inv.value(x_prev)
    phi = inv.gradient(x_hat if cfg.direction == "xhat" else x_prev)
    if np.any(np.sqrt(np.sum(phi * phi, axis=-1)) < 1e-12):
        raise DegenerateGradientError(f"projection direction |grad {inv.label}| < 1e-12")
    lam = np.zeros(x_hat.shape[:-1])
    y = x_hat
    F = inv.value(y) - target
    it = 0
    while np.any(np.abs(F) > cfg.newton_tol):
        if it == cfg.newton_max_iter:
            raise _stall("project_single", it, x_prev, x_hat, np.abs(F) > cfg.newton_tol)
        active = np.abs(F) > cfg.newton_tol
        dF = np.einsum("...i,...i->...", inv.gradient(y), phi)
        if np.any(active & (dF == 0)):
            raise DegenerateGradientError("projection Newton derivative vanished")
        step = np.where(active, F / np.where(active, dF, 1.0), 0.0)
        lam = lam - step
        it += 1
        y = x_hat + phi * lam[..., None]
        F = inv.value(y) - target
    return ProjectionOutcome(state=y, lam=lam[..., None], iterations=it,
                             residual=float(np.max(np.abs(F), initial=0.0)))


def project_multi(model: SdeModel, x_prev, x_hat, cfg: ProjectionConfig = ProjectionConfig(),
                  targets=None) -> ProjectionOutcome:
    """Newton projection onto all declared invariants at once.

    ``Phi`` is the transposed invariant Jacobian; each iteration solves the
    ``l x l`` system ``I'(x_hat + Phi lam) Phi dlam = -(I(...) - targets)``.
    """
    x_prev = np.asarray(x_prev, dtype=float)
    x_hat = np.asarray(x_hat, dtype=float)
    l = model.n_invariants
    if l > model.dim:
        raise ConfigurationError("more invariants than state dimensions")
    if targets is None:
        targets = model.invariant_values(x_prev)
    jac0 = model.invariant_jacobian(x_hat if cfg.direction == "xhat" else x_prev)
    phi = np.swapaxes(jac0, -1, -2)  # (..., d, l)
    gram = np.einsum("...ki,...kj->...ij", phi, phi)
    diag = np.prod(np.diagonal(gram, axis1=-2, axis2=-1), axis=-1)
    if np.any(np.linalg.det(gram) <= 1e-14 * diag):
        raise SingularMatrixError("invariant gradients are (nearly) linearly dependent")
    lam = np.zeros(x_hat.shape[:-1] + (l,))
    y = x_hat
    F = model.invariant_values(y) - targets
    it = 0
    while np.any(np.abs(F) > cfg.newton_tol):
        if it == cfg.newton_max_iter:
            bad = np.any(np.abs(F) > cfg.newton_tol, axis=-1)
            raise _stall("project_multi", it, x_prev, x_hat, bad)
        active = np.any(np.abs(F) > cfg.newton_tol, axis=-1)
        J = np.einsum("...li,...ik->...lk", model.invariant_jacobian(y), phi)
        try:
            delta = solve_dense(J, -F)
        except SingularMatrixError as exc:
            raise SingularMatrixError(f"rank-deficient projection Jacobian: {exc}") from None
        lam = lam + np.where(active[..., None], delta, 0.0)
        it += 1
        y = x_hat + np.einsum("...ik,...k->...i", phi, lam)
        F = model.invariant_values(y) - targets
    return ProjectionOutcome(state=y, lam=lam, iterations=it,
                             residual=float(np.max(np.abs(F), initial=0.0)))


def project(model: SdeModel, x_prev, x_hat, cfg: ProjectionConfig, targets=None):
    """Dispatch to the scalar or multi-invariant projection."""
    if model.n_invariants == 1:
        t = None if targets is None else np.asarray(targets)[..., 0]
        return project_single(model, x_prev, x_hat, cfg, target=t)
    return project_multi(model, x_prev, x_hat, cfg, targets=targets)


def projected_step(model: SdeModel, scheme, x, h: float, dW, pcfg: ProjectionConfig,
                   scfg: SchemeConfig, targets: Optional[np.ndarray] = None) -> np.ndarray:
    """Supporting step followed by projection.

    ``targets`` are the invariant values the path must keep, normally those
    of its initial state; ``None`` means the values at ``x``.
    """
    if isinstance(scheme, str):
        scheme = get_scheme(scheme)
    x_hat = scheme(model, x, h, dW, scfg)
    return project(model, x, x_hat, pcfg, targets).state
