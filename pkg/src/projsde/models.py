"""Benchmark systems: Kubo oscillator, stochastic pendulum, cyclic Lotka-Volterra.

All three belong to the class dX = f(X)(dt + sum_r c_r o dW_r), so the exact
solution is the deterministic flow of f run for the pseudo-time
t + sum_r c_r W_r(t). Each model ships the Taylor coefficients of that flow,
which the pseudo-time Taylor schemes consume.
"""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np

from .core import (
    ConfigurationError,
    Invariant,
    SdeModel,
    SkewGradientForm,
    SpecialClassData,
    UnsupportedModelError,
    default_sg_form,
)


def _const(mat):
    mat = np.asarray(mat, dtype=float)
    return lambda x: np.broadcast_to(mat, np.shape(x)[:-1] + mat.shape)


def _scaled(fn, c):
    return lambda x: c * fn(x)


def _kubo_taylor(a):
    def coeffs(x, n):
        x = np.asarray(x, dtype=float)
        out, v = [], x
        for k in range(1, n + 1):
            # A v with A = [[0, -a], [a, 0]]
            v = np.stack([-a * v[..., 1], a * v[..., 0]], axis=-1) / k
            out.append(v)
        return out
    return coeffs


def kubo(a: float = 1.0, sigma: float = 1.0) -> SdeModel:
    a, sigma = float(a), float(sigma)

    def drift(x):
        return np.stack([-a * x[..., 1], a * x[..., 0]], axis=-1)

    def diffusion(x):
        return np.stack([-sigma * x[..., 1], sigma * x[..., 0]], axis=-1)

    energy = Invariant(
        value=lambda x: 0.5 * (x[..., 0] ** 2 + x[..., 1] ** 2),
        gradient=lambda x: np.array(x, dtype=float),
        hessian=_const(np.eye(2)),
        label="I",
    )
    special = None
    if a != 0.0:
        special = SpecialClassData(c=(sigma / a,), ode_taylor_coeffs=_kubo_taylor(a))
    return SdeModel(
        name="kubo",
        dim=2,
        noise_count=1,
        drift=drift,
        diffusions=(diffusion,),
        invariants=(energy,),
        drift_jacobian=_const([[0.0, -a], [a, 0.0]]),
        diffusion_jacobians=(_const([[0.0, -sigma], [sigma, 0.0]]),),
        special_class=special,
        sg_form=SkewGradientForm(
            S=_const([[0.0, -a], [a, 0.0]]),
            T=(_const([[0.0, -sigma], [sigma, 0.0]]),),
            constant=True,
        ),
        commutative=True,
        sampling_box=(-2.0, 2.0),
        default_x0=(1.0, 0.0),
        params={"a": a, "sigma": sigma},
    )


def _pendulum_taylor(x, n):
    # Taylor-mode recursion for p' = -sin q, q' = p; S, C are the series of
    # sin q and cos q, from (sin q)' = q' cos q and (cos q)' = -q' sin q.
    x = np.asarray(x, dtype=float)
    P, Q = [x[..., 0]], [x[..., 1]]
    S, C = [np.sin(Q[0])], [np.cos(Q[0])]
    out = []
    for k in range(n):
        P.append(-S[k] / (k + 1))
        Q.append(P[k] / (k + 1))
        out.append(np.stack([P[k + 1], Q[k + 1]], axis=-1))
        if k + 1 < n:
            j = k + 1
            s = sum(i * Q[i] * C[j - i] for i in range(1, j + 1))
            c = sum(i * Q[i] * S[j - i] for i in range(1, j + 1))
            S.append(s / j)
            C.append(-c / j)
    return out


def pendulum(c1: float = 1.0, c2: float = 0.5) -> SdeModel:
    c1, c2 = float(c1), float(c2)
    if c1 < 0 or c2 < 0:
        raise ConfigurationError("pendulum noise intensities must be non-negative")

    def drift(x):
        return np.stack([-np.sin(x[..., 1]), x[..., 0]], axis=-1)

    def drift_jac(x):
        J = np.zeros(np.shape(x)[:-1] + (2, 2))
        J[..., 0, 1] = -np.cos(x[..., 1])
        J[..., 1, 0] = 1.0
        return J

    def hess(x):
        H = np.zeros(np.shape(x)[:-1] + (2, 2))
        H[..., 0, 0] = 1.0
        H[..., 1, 1] = np.cos(x[..., 1])
        return H

    energy = Invariant(
        value=lambda x: 0.5 * x[..., 0] ** 2 - np.cos(x[..., 1]),
        gradient=lambda x: np.stack([x[..., 0], np.sin(x[..., 1])], axis=-1),
        hessian=hess,
        label="I",
    )
    J = [[0.0, -1.0], [1.0, 0.0]]
    return SdeModel(
        name="pendulum",
        dim=2,
        noise_count=2,
        drift=drift,
        diffusions=(_scaled(drift, c1), _scaled(drift, c2)),
        invariants=(energy,),
        drift_jacobian=drift_jac,
        diffusion_jacobians=(_scaled(drift_jac, c1), _scaled(drift_jac, c2)),
        special_class=SpecialClassData(c=(c1, c2), ode_taylor_coeffs=_pendulum_taylor),
        sg_form=SkewGradientForm(
            S=_const(J),
            T=(_const(np.multiply(c1, J)), _const(np.multiply(c2, J))),
            constant=True,
        ),
        commutative=True,
        sampling_box=(-2.0, 2.0),
        default_x0=(0.1, 1.0),
        params={"c1": c1, "c2": c2},
    )


# cyclic index maps: component i pairs with (i+2) % 3 and (i+1) % 3
_NEXT = [2, 0, 1]
_PREV = [1, 2, 0]


def _lv_taylor(x, n):
    # f(u) = u * (u[NEXT] - u[PREV]); Cauchy products give the series.
    a = [np.asarray(x, dtype=float)]
    D = [a[0][..., _NEXT] - a[0][..., _PREV]]
    for k in range(n):
        acc = a[0] * D[k]
        for j in range(1, k + 1):
            acc = acc + a[j] * D[k - j]
        a.append(acc / (k + 1))
        D.append(a[k + 1][..., _NEXT] - a[k + 1][..., _PREV])
    return a[1:]


def lotka_volterra(c: float = 0.5) -> SdeModel:
    c = float(c)

    def drift(x):
        return x * (x[..., _NEXT] - x[..., _PREV])

    def drift_jac(x):
        X, Y, Z = x[..., 0], x[..., 1], x[..., 2]
        return np.stack([
            np.stack([Z - Y, -X, X], axis=-1),
            np.stack([Y, X - Z, -Y], axis=-1),
            np.stack([-Z, Z, Y - X], axis=-1),
        ], axis=-2)

    def prod_hess(x):
        X, Y, Z = x[..., 0], x[..., 1], x[..., 2]
        zero = np.zeros_like(X)
        return np.stack([
            np.stack([zero, Z, Y], axis=-1),
            np.stack([Z, zero, X], axis=-1),
            np.stack([Y, X, zero], axis=-1),
        ], axis=-2)

    total = Invariant(
        value=lambda x: x[..., 0] + x[..., 1] + x[..., 2],
        gradient=lambda x: np.ones_like(np.asarray(x, dtype=float)),
        hessian=_const(np.zeros((3, 3))),
        label="I1",
    )
    product = Invariant(
        value=lambda x: x[..., 0] * x[..., 1] * x[..., 2],
        gradient=lambda x: np.stack(
            [x[..., 1] * x[..., 2], x[..., 0] * x[..., 2], x[..., 0] * x[..., 1]], axis=-1),
        hessian=prod_hess,
        label="I2",
    )
    model = SdeModel(
        name="lotka",
        dim=3,
        noise_count=1,
        drift=drift,
        diffusions=(_scaled(drift, c),),
        invariants=(total, product),
        drift_jacobian=drift_jac,
        diffusion_jacobians=(_scaled(drift_jac, c),),
        special_class=SpecialClassData(c=(c,), ode_taylor_coeffs=_lv_taylor),
        commutative=True,
        sampling_box=(0.2, 3.0),
        default_x0=(1.0, 2.0, 1.0),
        params={"c": c},
    )
    # skew-gradient form relative to I1 = x + y + z, whose gradient never vanishes
    return replace(model, sg_form=default_sg_form(model, 0))


MODELS = {
    "kubo": (kubo, "Kubo oscillator, I = (x^2 + y^2)/2; params a, sigma"),
    "pendulum": (pendulum, "stochastic pendulum, I = p^2/2 - cos q; params c1, c2"),
    "lotka": (lotka_volterra, "cyclic Lotka-Volterra, I1 = x+y+z, I2 = xyz; param c"),
}


def build_model(name: str, **params) -> SdeModel:
    """Construct a bundled model by name with keyword parameters."""
    try:
        factory = MODELS[name][0]
    except KeyError:
        raise ConfigurationError(
            f"unknown model {name!r}; valid models: {', '.join(MODELS)}") from None
    try:
        return factory(**params)
    except TypeError as exc:
        raise ConfigurationError(f"invalid parameters for {name}: {exc}") from None


def exact_kubo(x0, t, W, a: float = 1.0, sigma: float = 1.0) -> np.ndarray:
    """Exact Kubo solution: rotate ``x0`` by the angle ``a t + sigma W``."""
    x0 = np.asarray(x0, dtype=float)
    theta = a * np.asarray(t, dtype=float) + sigma * np.asarray(W, dtype=float)
    c, s = np.cos(theta), np.sin(theta)
    return np.stack([c * x0[..., 0] - s * x0[..., 1], s * x0[..., 0] + c * x0[..., 1]], axis=-1)


def effective_noise(model: SdeModel):
    """Return ``(1, c_eff)`` with ``c_eff = sqrt(sum_r c_r^2)``.

    The Taylor schemes still combine the individual channel increments;
    ``c_eff`` only summarises the pseudo-time noise strength.
    """
    if model.special_class is None:
        raise UnsupportedModelError(f"{model.name} is not of the f(X)(dt + c o dW) form")
    return 1, math.sqrt(model.special_class.c_sq)
