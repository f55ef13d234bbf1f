"""Supporting one-step methods for Stratonovich SDEs.

Every step function has the signature ``step(model, x, h, dW, cfg)`` where
``x`` has shape ``(..., d)`` and ``dW`` holds the raw (untruncated) Wiener
increments over the step with shape ``(..., m)``. Increments are truncated
inside the step according to ``cfg.truncation``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from .core import (
    ConfigurationError,
    Invariant,
    NonConvergenceError,
    SdeModel,
    SingularMatrixError,
    UnsupportedModelError,
    finite_diff_jacobian,
    solve_dense,
)
from .noise import TruncationConfig, truncate_increment

METHODS = ("euler", "milstein", "mid", "t32", "t2", "dg", "t2ito")
LABELS = {"euler": "Euler", "milstein": "Milstein", "mid": "Mid",
          "t32": "T3/2", "t2": "T2", "dg": "DG", "t2ito": "T2Ito"}


@dataclass(frozen=True)
class SchemeConfig:
    method: str = "euler"
    implicit_tol: float = 1e-14
    implicit_max_iter: int = 50
    truncation: TruncationConfig = field(default_factory=TruncationConfig)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigurationError(
                f"unknown method {self.method!r}; choose from {', '.join(METHODS)}")
        if not self.implicit_tol > 0:
            raise ConfigurationError("implicit_tol must be positive")
        if self.implicit_max_iter < 1:
            raise ConfigurationError("implicit_max_iter must be >= 1")


def _prepare(x, h, dW, cfg):
    x = np.asarray(x, dtype=float)
    dW = np.asarray(dW, dtype=float)
    if h < 0:
        raise ConfigurationError(f"step size must be non-negative, got {h}")
    zeta = dW if h == 0 else truncate_increment(dW, h, cfg.truncation)
    return x, zeta


def _matvec(A, v):
    return np.einsum("...ij,...j->...i", A, v)


def _diffusion_sum(model, x, zeta):
    out = 0.0
    for r, g in enumerate(model.diffusions):
        out = out + g(x) * zeta[..., r, None]
    return out


def _fprime_f(model, x):
    # f'(x) f(x) = 2 v_2 for the special class
    return 2.0 * model.special_class.ode_taylor_coeffs(x, 2)[1]


def _lambda_op(model, x, i, r):
    """Lambda_i g_r = g_r'(x) g_i(x)."""
    if model.diffusion_jacobians is not None:
        return _matvec(model.diffusion_jacobians[r](x), model.diffusions[i](x))
    if model.special_class is not None:
        c = model.special_class.c
        return c[i] * c[r] * _fprime_f(model, x)
    raise ConfigurationError(
        f"{model.name}: diffusion derivatives unavailable (need diffusion_jacobians "
        "or special-class data)")


def euler_step(model: SdeModel, x, h: float, dW, cfg: SchemeConfig) -> np.ndarray:
    """Euler-Maruyama applied to the Ito form of the Stratonovich SDE.

    ``x + h (f + 1/2 sum_r g_r' g_r) + sum_r g_r zeta_r``.
    """
    x, zeta = _prepare(x, h, dW, cfg)
    correction = 0.0
    for r in range(model.noise_count):
        correction = correction + _lambda_op(model, x, r, r)
    return x + h * (model.drift(x) + 0.5 * correction) + _diffusion_sum(model, x, zeta)


def milstein_step(model: SdeModel, x, h: float, dW, cfg: SchemeConfig) -> np.ndarray:
    """Milstein method for commutative noise (Stratonovich form)."""
    if not model.commutative:
        raise UnsupportedModelError(f"{model.name} is not flagged as having commutative noise")
    x, zeta = _prepare(x, h, dW, cfg)
    out = x + h * model.drift(x) + _diffusion_sum(model, x, zeta)
    m = model.noise_count
    for i in range(m):
        for r in range(i + 1, m):
            out = out + _lambda_op(model, x, i, r) * (zeta[..., i] * zeta[..., r])[..., None]
        out = out + 0.5 * _lambda_op(model, x, i, i) * (zeta[..., i] ** 2)[..., None]
    return out


def _as_batch(x, zeta):
    lead = x.shape[:-1]
    X = x.reshape(-1, x.shape[-1])
    Z = np.broadcast_to(zeta, lead + zeta.shape[-1:]).reshape(-1, zeta.shape[-1])
    return X, Z, lead


def _implicit_solve(residual, jacobian, x, guess, cfg: SchemeConfig, h: float, name: str):
    """Solve ``residual(X, rows) = 0`` row by row.

    Plain fixed-point iteration ``X <- X - residual(X)`` first; rows still
    unconverged after half the iteration budget switch to damped Newton.
    """
    X = guess.copy()
    B = X.shape[0]
    scale = np.maximum(1.0, np.abs(x).max(axis=-1))
    active = np.arange(B)
    half = max(1, cfg.implicit_max_iter // 2)
    for it in range(cfg.implicit_max_iter):
        G = residual(X[active], active)
        err = np.abs(G).max(axis=-1)
        done = err <= cfg.implicit_tol * scale[active]
        keep = ~done
        if not np.any(keep):
            return X
        active, G, err = active[keep], G[keep], err[keep]
        if it < half:
            X[active] = X[active] - G
            continue
        J = jacobian(X[active], active)
        try:
            delta = solve_dense(J, -G)
        except SingularMatrixError:  # fall back to a fixed-point move
            delta = -G
        t = np.ones(len(active))
        trial = X[active] + delta
        for _ in range(8):
            worse = np.abs(residual(trial, active)).max(axis=-1) > err
            if not np.any(worse):
                break
            t[worse] *= 0.5
            trial[worse] = X[active][worse] + t[worse, None] * delta[worse]
        X[active] = trial
    G = residual(X[active], active)
    bad = np.abs(G).max(axis=-1) > cfg.implicit_tol * scale[active]
    if np.any(bad):
        row = active[bad][0]
        raise NonConvergenceError(
            f"{name} solve did not converge in {cfg.implicit_max_iter} iterations",
            x=x[row].copy(), h=h, row=int(row))
    return X


def midpoint_step(model: SdeModel, x, h: float, dW, cfg: SchemeConfig) -> np.ndarray:
    """Implicit midpoint: X = x + h f(mid) + sum_r g_r(mid) zeta_r."""
    if not cfg.truncation.enabled and h > 0:
        raise ConfigurationError("the midpoint method requires truncated increments")
    x, zeta = _prepare(x, h, dW, cfg)
    X0, Z, lead = _as_batch(x, zeta)

    def residual(X, rows):
        mid = 0.5 * (X0[rows] + X)
        return X - X0[rows] - h * model.drift(mid) - _diffusion_sum(model, mid, Z[rows])

    if model.drift_jacobian is not None and model.diffusion_jacobians is not None:
        def jacobian(X, rows):
            mid = 0.5 * (X0[rows] + X)
            A = h * model.drift_jacobian(mid)
            for r, gj in enumerate(model.diffusion_jacobians):
                A = A + gj(mid) * Z[rows, r, None, None]
            return np.eye(X.shape[-1]) - 0.5 * A
    else:
        def jacobian(X, rows):
            return finite_diff_jacobian(lambda y: residual(y, rows), X)

    guess = X0 + h * model.drift(X0) + _diffusion_sum(model, X0, Z)
    X = _implicit_solve(residual, jacobian, X0, guess, cfg, h, "midpoint")
    return X.reshape(lead + X.shape[-1:])


def _hermite(k, S, var):
    # probabilists' Hermite polynomials He_k(S; var), k <= 4
    if k == 0:
        return 1.0
    if k == 1:
        return S
    if k == 2:
        return S * S - var
    if k == 3:
        return S ** 3 - 3.0 * var * S
    return S ** 4 - 6.0 * var * S * S + 3.0 * var * var


def _ito_taylor(v, h, S, q, weights):
    """Sum of Ito-Taylor terms for the class dX = f(X)(dt + sum c_r o dW_r).

    Generators reduce to ``L0 = D + q D^2 / 2`` and ``sum_r c_r L^r = D``
    with ``D`` the Lie derivative along f, and the sum of multiple Ito
    integrals with ``n`` time and ``k`` noise indices is
    ``h^n / n! * He_k(S; q h) / k!``. ``weights`` lists the kept ``(n, k)``.
    """
    out = v[0]
    var = q * h
    for n, k in weights:
        coef = 0.0
        for i in range(n + 1):
            j = n + i + k
            coef = coef + (math.comb(n, i) * (0.5 * q) ** i * math.factorial(j)) * v[j]
        scale = h ** n / math.factorial(n) / math.factorial(k)
        out = out + coef * (scale * _hermite(k, S, var))
    return out


# (n, k) pairs: l(alpha) + n(alpha) <= 3 plus the pure-time pair (2, 0) for
# order 1.5; l(alpha) + n(alpha) <= 4 for order 2.
_T32_TERMS = ((0, 1), (0, 2), (0, 3), (1, 0), (1, 1), (2, 0))
_T2ITO_TERMS = _T32_TERMS + ((0, 4), (1, 2))


def taylor_step(model: SdeModel, x, h: float, dW, cfg: SchemeConfig, order: str = "T2"):
    """Strong Taylor step for dX = f(X)(dt + sum_r c_r o dW_r).

    With ``S = sum_r c_r zeta_r``, ``ds = h + S``, ``q = sum_r c_r^2`` and
    flow coefficients ``v_k``:

    * ``T2``: ``x + sum_{k<=4} v_k ds^k``, the flow's Taylor polynomial in
      pseudo-time.
    * ``T32``: Ito-Taylor order 1.5, which here equals
      ``x + v_1 ds + v_2 ds^2 + v_3 (S^3 + 3 q h^2) + 3 q^2 h^2 v_4``.
    * ``T2ito``: Ito-Taylor order 2.0, i.e. T32 plus the ``He_4(S)`` and
      ``h He_2(S)`` terms.

    Both Ito-Taylor forms need no I_(1,0) samples for this class. Cutting the
    pseudo-time polynomial after ``ds^3`` would leave an O(h^2) mean in the
    local error and lose half an order.
    """
    if model.special_class is None:
        raise UnsupportedModelError(f"{model.name} has no special-class data for Taylor schemes")
    if order not in ("T2", "T32", "T2ito"):
        raise ConfigurationError(f"unknown Taylor order {order!r}")
    x, zeta = _prepare(x, h, dW, cfg)
    sc = model.special_class
    S = 0.0
    for r, c in enumerate(sc.c):
        S = S + c * zeta[..., r]
    S = np.asarray(S)[..., None]
    v = [x] + sc.ode_taylor_coeffs(x, 4)
    if order == "T2":
        ds = h + S
        return x + ds * (v[1] + ds * (v[2] + ds * (v[3] + ds * v[4])))
    terms = _T32_TERMS if order == "T32" else _T2ITO_TERMS
    return _ito_taylor(v, h, S, sc.c_sq, terms)


def discrete_gradient(inv: Invariant, x, y) -> np.ndarray:
    """Gonzalez midpoint discrete gradient of ``inv`` between ``x`` and ``y``.

    Satisfies ``dg . (y - x) = I(y) - I(x)``; falls back to ``grad I(x)``
    where ``|y - x| < 1e-10``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    dx = y - x
    mu = 0.5 * (x + y)
    g = inv.gradient(mu)
    n2 = np.sum(dx * dx, axis=-1)
    close = n2 < 1e-20
    safe = np.where(close, 1.0, n2)
    coef = (inv.value(y) - inv.value(x) - np.sum(g * dx, axis=-1)) / safe
    coef = np.where(close, 0.0, coef)
    out = g + coef[..., None] * dx
    if np.any(close):
        out = np.where(close[..., None], inv.gradient(x), out)
    return out


def discrete_gradient_step(model: SdeModel, x, h: float, dW, cfg: SchemeConfig) -> np.ndarray:
    """Conservative step ``X = x + (h S + sum_r zeta_r T_r) dg(x, X)``.

    Uses the model's skew-gradient form for its first invariant. Constant
    forms are used as is; state-dependent ones are evaluated at the midpoint.
    """
    sg = model.sg_form
    if sg is None:
        raise UnsupportedModelError(f"{model.name} provides no skew-gradient form")
    x, zeta = _prepare(x, h, dW, cfg)
    inv = model.invariants[0]
    X0, Z, lead = _as_batch(x, zeta)

    def skew(at, rows):
        M = h * sg.S(at)
        for r, T in enumerate(sg.T):
            M = M + T(at) * Z[rows, r, None, None]
        return M

    if sg.constant:
        fixed = skew(X0, slice(None))

    def residual(X, rows):
        M = fixed[rows] if sg.constant else skew(0.5 * (X0[rows] + X), rows)
        return X - X0[rows] - _matvec(M, discrete_gradient(inv, X0[rows], X))

    def jacobian(X, rows):
        return finite_diff_jacobian(lambda y: residual(y, rows), X)

    guess = X0 + _matvec(skew(X0, slice(None)), inv.gradient(X0))
    X = _implicit_solve(residual, jacobian, X0, guess, cfg, h, "discrete-gradient")
    return X.reshape(lead + X.shape[-1:])


SCHEMES = {
    "euler": euler_step,
    "milstein": milstein_step,
    "mid": midpoint_step,
    "t32": partial(taylor_step, order="T32"),
    "t2": partial(taylor_step, order="T2"),
    "t2ito": partial(taylor_step, order="T2ito"),
    "dg": discrete_gradient_step,
}


def get_scheme(method: str):
    try:
        return SCHEMES[method]
    except KeyError:
        raise ConfigurationError(
            f"unknown method {method!r}; choose from {', '.join(METHODS)}") from None
