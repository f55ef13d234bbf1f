"""Model and invariant abstractions plus small numerical utilities.

States are numpy arrays whose trailing axis has length ``d``; every evaluator
accepts leading batch axes so a whole block of sample paths can be advanced
with one call.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

Field = Callable[[np.ndarray], np.ndarray]


class ProjSDEError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(ProjSDEError, ValueError):
    pass


class UnsupportedModelError(ProjSDEError):
    pass


class NumericalError(ProjSDEError, ArithmeticError):
    pass


class DegenerateGradientError(NumericalError):
    pass


class SingularMatrixError(NumericalError):
    pass


class NonConvergenceError(NumericalError):
    """An iterative solve did not reach its tolerance.

    ``state`` holds whatever context the caller had (previous state, trial
    state, step size) so a failing path can be reproduced.
    """

    def __init__(self, message: str, **state):
        super().__init__(message)
        self.state = state


class ConservationCheckError(ProjSDEError):
    def __init__(self, message: str, x):
        super().__init__(f"{message} at state {np.asarray(x).tolist()}")
        self.x = np.asarray(x)


@dataclass(frozen=True)
class Invariant:
    """Scalar conserved quantity with its gradient and optional Hessian."""

    value: Field
    gradient: Field
    hessian: Optional[Field] = None
    label: str = "I"


@dataclass(frozen=True)
class SpecialClassData:
    """Data for SDEs of the form dX = f(X)(dt + sum_r c_r o dW_r).

    ``ode_taylor_coeffs(x, n)`` returns ``[v_1, ..., v_n]`` with
    ``v_k = phi^(k)(0) / k!`` for the flow ``phi' = f(phi)``, ``phi(0) = x``.
    """

    c: tuple
    ode_taylor_coeffs: Callable[[np.ndarray, int], list]

    @property
    def c_sq(self) -> float:
        return float(sum(ci * ci for ci in self.c))


@dataclass(frozen=True)
class SkewGradientForm:
    """Skew-symmetric S(x), T_r(x) with S grad I = f and T_r grad I = g_r."""

    S: Field
    T: tuple
    constant: bool = False


@dataclass(frozen=True)
class SdeModel:
    """A d-dimensional autonomous Stratonovich SDE with declared invariants.

    ``drift`` and every entry of ``diffusions`` map arrays of shape
    ``(..., d)`` to ``(..., d)``; Jacobians return ``(..., d, d)``.
    """

    name: str
    dim: int
    noise_count: int
    drift: Field
    diffusions: tuple
    invariants: tuple
    drift_jacobian: Optional[Field] = None
    diffusion_jacobians: Optional[tuple] = None
    special_class: Optional[SpecialClassData] = None
    sg_form: Optional[SkewGradientForm] = None
    commutative: bool = False
    sampling_box: Optional[tuple] = None
    min_grad_norm: float = 0.1
    default_x0: Optional[tuple] = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.diffusions) != self.noise_count:
            raise ConfigurationError(
                f"{self.name}: {len(self.diffusions)} diffusion fields for "
                f"noise_count={self.noise_count}")
        if not self.invariants:
            raise ConfigurationError(f"{self.name}: at least one invariant is required")
        if (self.diffusion_jacobians is not None
                and len(self.diffusion_jacobians) != self.noise_count):
            raise ConfigurationError(f"{self.name}: diffusion_jacobians length mismatch")

    @property
    def n_invariants(self) -> int:
        return len(self.invariants)

    def invariant_values(self, x: np.ndarray) -> np.ndarray:
        """Stack of all invariant values, shape ``(..., l)``."""
        return np.stack([inv.value(x) for inv in self.invariants], axis=-1)

    def invariant_jacobian(self, x: np.ndarray) -> np.ndarray:
        """Jacobian of the invariant vector, shape ``(..., l, d)``."""
        return np.stack([inv.gradient(x) for inv in self.invariants], axis=-2)

    def sample_states(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``n`` states uniformly from the sampling box.

        States where some invariant gradient is shorter than
        ``min_grad_norm`` are rejected.
        """
        if self.sampling_box is None:
            lo, hi = -2.0, 2.0
        else:
            lo, hi = self.sampling_box
        lo = np.broadcast_to(np.asarray(lo, dtype=float), (self.dim,))
        hi = np.broadcast_to(np.asarray(hi, dtype=float), (self.dim,))
        out = np.empty((0, self.dim))
        while len(out) < n:
            cand = rng.uniform(lo, hi, size=(2 * n, self.dim))
            grads = self.invariant_jacobian(cand)
            ok = np.all(np.linalg.norm(grads, axis=-1) >= self.min_grad_norm, axis=-1)
            out = np.concatenate([out, cand[ok]])
        return out[:n]


def check_conserved(model: SdeModel, samples: int = 100, seed: int = 0) -> dict:
    """Maximum normalised orthogonality residual per invariant and field.

    Returns ``{label: {"drift": r, "diffusion_1": r, ...}}`` where each ``r``
    is the max over sampled states of ``|grad I . v| / (|grad I| |v| + 1e-300)``.
    """
    if samples < 1:
        raise ConfigurationError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    states = model.sample_states(samples, rng)
    fields = [("drift", model.drift)]
    fields += [(f"diffusion_{r + 1}", g) for r, g in enumerate(model.diffusions)]
    report = {inv.label: {name: 0.0 for name, _ in fields} for inv in model.invariants}
    for x in states:
        try:
            grads = [inv.gradient(x) for inv in model.invariants]
            vals = [(name, fn(x)) for name, fn in fields]
        except Exception as exc:  # noqa: BLE001 - re-raised with the state attached
            raise ConservationCheckError(f"evaluation failed ({exc})", x) from exc
        for inv, gi in zip(model.invariants, grads):
            for name, v in vals:
                if not (np.all(np.isfinite(gi)) and np.all(np.isfinite(v))):
                    raise ConservationCheckError("non-finite evaluation", x)
                r = abs(gi @ v) / (np.linalg.norm(gi) * np.linalg.norm(v) + 1e-300)
                report[inv.label][name] = max(report[inv.label][name], float(r))
    return report


def _skew_from(v: np.ndarray, grad: np.ndarray, gnorm2: np.ndarray) -> np.ndarray:
    outer = v[..., :, None] * grad[..., None, :]
    return (outer - np.swapaxes(outer, -1, -2)) / gnorm2[..., None, None]


def default_skew_gradient(model: SdeModel, x: np.ndarray, invariant: int = 0):
    """Default skew-gradient matrices built from the drift and diffusions.

    ``S = (f g^T - g f^T) / |g|^2`` with ``g`` the gradient of the chosen
    invariant, and likewise ``T_r`` with ``g_r`` in place of ``f``.
    Returns ``(S, [T_1, ..., T_m])``.
    """
    x = np.asarray(x, dtype=float)
    grad = model.invariants[invariant].gradient(x)
    gnorm2 = np.sum(grad * grad, axis=-1)
    if np.any(np.sqrt(gnorm2) < 1e-12):
        raise DegenerateGradientError(
            f"|grad {model.invariants[invariant].label}| < 1e-12 at {x.tolist()}")
    S = _skew_from(model.drift(x), grad, gnorm2)
    T = [_skew_from(g(x), grad, gnorm2) for g in model.diffusions]
    return S, T


def default_sg_form(model: SdeModel, invariant: int = 0) -> SkewGradientForm:
    """Wrap :func:`default_skew_gradient` as a state-dependent form."""

    def S(x):
        return default_skew_gradient(model, x, invariant)[0]

    def make_T(r):
        return lambda x: default_skew_gradient(model, x, invariant)[1][r]

    return SkewGradientForm(S=S, T=tuple(make_T(r) for r in range(model.noise_count)))


def solve_dense(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``A x = b`` by Gaussian elimination with partial pivoting.

    Leading axes of ``A`` (shape ``(..., n, n)``) and ``b`` (``(..., n)``)
    are batch axes. Raises :class:`SingularMatrixError` when a pivot falls
    below ``1e-14 * max|A|`` of its system.
    """
    A = np.array(A, dtype=float)
    b = np.array(b, dtype=float)
    n = A.shape[-1]
    if A.shape[-2] != n or b.shape[-1] != n:
        raise ConfigurationError(f"incompatible shapes {A.shape} and {b.shape}")
    if not np.all(np.isfinite(A)):
        raise ConfigurationError("matrix has non-finite entries")
    batch = np.broadcast_shapes(A.shape[:-2], b.shape[:-1])
    A = np.broadcast_to(A, batch + (n, n)).reshape(-1, n, n).copy()
    b = np.broadcast_to(b, batch + (n,)).reshape(-1, n).copy()
    scale = np.abs(A).max(axis=(-1, -2))
    rows = np.arange(A.shape[0])
    for k in range(n):
        piv = k + np.argmax(np.abs(A[:, k:, k]), axis=-1)
        if np.any(np.abs(A[rows, piv, k]) <= 1e-14 * scale):
            raise SingularMatrixError("pivot below 1e-14 * max|A|")
        swap = piv != k
        if np.any(swap):
            r = rows[swap]
            A[r, k], A[r, piv[swap]] = A[r, piv[swap]].copy(), A[r, k].copy()
            b[r, k], b[r, piv[swap]] = b[r, piv[swap]].copy(), b[r, k].copy()
        mult = A[:, k + 1:, k] / A[:, k, k][:, None]
        A[:, k + 1:, k:] -= mult[:, :, None] * A[:, k, None, k:]
        b[:, k + 1:] -= mult * b[:, k, None]
    x = np.empty_like(b)
    for k in range(n - 1, -1, -1):
        x[:, k] = (b[:, k] - np.sum(A[:, k, k + 1:] * x[:, k + 1:], axis=-1)) / A[:, k, k]
    return x.reshape(batch + (n,))


def finite_diff_gradient(inv: Invariant, x: Sequence[float], eps: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of a scalar invariant (test oracle)."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.shape[-1]):
        e = np.zeros_like(x)
        e[..., i] = eps
        g[..., i] = (inv.value(x + e) - inv.value(x - e)) / (2 * eps)
    return g


def finite_diff_jacobian(fn: Field, x: np.ndarray, eps: float = 1e-7) -> np.ndarray:
    """Central-difference Jacobian of a vector field, shape ``(..., d, d)``."""
    x = np.asarray(x, dtype=float)
    d = x.shape[-1]
    cols = []
    for i in range(d):
        e = np.zeros(d)
        e[i] = eps
        cols.append((fn(x + e) - fn(x - e)) / (2 * eps))
    return np.stack(cols, axis=-1)
