"""Monte-Carlo convergence studies, invariant-drift runs and order fitting.

Every path draws one Brownian grid at the reference step. The reference
solution (T2 at ``h_ref``) and every method at every coarser step consume
coarsenings of that same grid, so errors are compared on common randomness.
Paths are processed in fixed-size blocks; block boundaries never depend on
the worker count, which keeps results bitwise reproducible.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .core import ConfigurationError, NumericalError, ProjSDEError, SdeModel
from .models import build_model
from .noise import RngStream, TruncationConfig, sample_grid, sample_grids
from .projection import ProjectionConfig, project
from .schemes import LABELS, SchemeConfig, get_scheme

_ALIASES = {"euler": "euler", "milstein": "milstein", "mid": "mid", "midpoint": "mid",
            "t32": "t32", "t3/2": "t32", "t2": "t2", "dg": "dg",
            "t2ito": "t2ito"}

DEFAULT_METHODS = {
    "kubo": ("euler", "eulerP", "milstein", "milsteinP", "mid", "t32", "t32P", "t2", "t2P"),
    "pendulum": ("euler", "eulerP", "milstein", "milsteinP", "mid", "midP",
                 "t32", "t32P", "t2", "t2P"),
    "lotka": ("euler", "eulerP", "milstein", "milsteinP", "mid", "midP",
              "t32", "t32P", "t2", "t2P"),
}

DEFAULT_LEVELS = {
    "kubo": tuple(2.0 ** -k for k in range(3, 9)),
    "pendulum": tuple(2.0 ** -k for k in range(3, 9)),
    "lotka": tuple(2.0 ** -k for k in range(5, 11)),
}


class StudyError(ProjSDEError):
    """A path failed numerically during a study."""

    def __init__(self, message, path_index=None, method=None, h=None, cause=None):
        super().__init__(message)
        self.path_index = path_index
        self.method = method
        self.h = h
        self.cause = cause


class MethodSpec(NamedTuple):
    base: str
    projected: bool

    @property
    def label(self) -> str:
        return LABELS[self.base] + ("P" if self.projected else "")


def parse_method(name: str) -> MethodSpec:
    """Parse ``euler``, ``eulerP``, ``t32P``, ``T3/2P`` and similar."""
    raw = name.strip()
    key = raw.lower()
    if key in _ALIASES:
        return MethodSpec(_ALIASES[key], False)
    if key.endswith("p") and key[:-1] in _ALIASES:
        return MethodSpec(_ALIASES[key[:-1]], True)
    raise ConfigurationError(
        f"unknown method {name!r}; use one of {', '.join(sorted(set(_ALIASES.values())))} "
        "with an optional P suffix")


class OrderFit(NamedTuple):
    order: float
    intercept: float
    residual: float


def fit_order(h: Sequence[float], e: Sequence[float]) -> OrderFit:
    """Least-squares slope of ``log e`` against ``log h``.

    ``residual`` is the root-mean-square deviation of ``log e`` from the line.
    """
    h = np.asarray(h, dtype=float)
    e = np.asarray(e, dtype=float)
    if len(h) != len(e) or len(h) < 3:
        raise ConfigurationError("order fitting needs at least three (h, e) pairs")
    if np.any(e <= 0) or np.any(h <= 0):
        raise ConfigurationError("order fitting needs strictly positive h and errors")
    X = np.column_stack([np.log(h), np.ones_like(h)])
    coef, *_ = np.linalg.lstsq(X, np.log(e), rcond=None)
    resid = np.log(e) - X @ coef
    return OrderFit(float(coef[0]), float(coef[1]), float(np.sqrt(np.mean(resid ** 2))))


def integrate(model: SdeModel, method: MethodSpec, x0, h: float, increments,
              scfg: SchemeConfig, pcfg: ProjectionConfig, record: bool = False):
    """Advance ``x0`` through ``increments`` of shape ``(..., N, m)``.

    Projected methods keep the invariant values of ``x0``. Returns the final
    state, or the whole trajectory ``(..., N + 1, d)`` when ``record`` is set.
    """
    step = get_scheme(method.base)
    x = np.array(x0, dtype=float)
    increments = np.asarray(increments, dtype=float)
    x = np.broadcast_to(x, increments.shape[:-2] + x.shape[-1:]).copy()
    targets = model.invariant_values(x) if method.projected else None
    traj = [x] if record else None
    for n in range(increments.shape[-2]):
        x_hat = step(model, x, h, increments[..., n, :], scfg)
        if method.projected:
            out = project(model, x, x_hat, pcfg, targets)
            if not out.residual <= pcfg.newton_tol:
                raise NumericalError(f"projection residual {out.residual} above tolerance")
            x = out.state
        else:
            x = x_hat
        if not np.all(np.isfinite(x)):
            raise NumericalError(f"non-finite state after step {n + 1}")
        if record:
            traj.append(x)
    return np.stack(traj, axis=-2) if record else x


@dataclass(frozen=True)
class StudyConfig:
    model: str = "kubo"
    params: dict = field(default_factory=dict)
    methods: tuple = ()
    T: float = 1.0
    h_levels: tuple = ()
    h_ref: float = 2.0 ** -14
    paths: int = 10000
    seed: int = 0
    x0: Optional[tuple] = None
    truncation: TruncationConfig = field(default_factory=TruncationConfig)
    projection: ProjectionConfig = field(default_factory=ProjectionConfig)
    implicit_tol: float = 1e-14
    implicit_max_iter: int = 50
    workers: int = 1
    block_size: int = 500

    def resolved_methods(self):
        names = self.methods or DEFAULT_METHODS.get(self.model, ("euler", "eulerP"))
        return [parse_method(m) for m in names]

    def resolved_levels(self):
        return tuple(self.h_levels or DEFAULT_LEVELS.get(self.model, DEFAULT_LEVELS["kubo"]))

    def validate(self):
        if self.paths < 1 or self.block_size < 1 or self.workers < 1:
            raise ConfigurationError("paths, block_size and workers must be >= 1")
        n_ref = self.T / self.h_ref
        if abs(n_ref - round(n_ref)) > 1e-9 * n_ref:
            raise ConfigurationError(f"T={self.T} is not a multiple of h_ref={self.h_ref}")
        for h in self.resolved_levels():
            f = h / self.h_ref
            if f < 1 or abs(f - round(f)) > 1e-9 * f or int(round(f)) & (int(round(f)) - 1):
                raise ConfigurationError(f"h={h} is not a dyadic multiple of h_ref={self.h_ref}")
        self.resolved_methods()


@dataclass
class ConvergenceReport:
    model: str
    methods: list
    h_levels: list
    errors: dict
    orders: dict
    metadata: dict

    def order(self, label: str) -> float:
        return self.orders[label][0]


def _scheme_config(cfg: StudyConfig, method: str = "t2") -> SchemeConfig:
    return SchemeConfig(method=method, implicit_tol=cfg.implicit_tol,
                        implicit_max_iter=cfg.implicit_max_iter, truncation=cfg.truncation)


def _run_block(cfg: StudyConfig, start: int, stop: int) -> np.ndarray:
    """Squared final-time errors, shape ``(n_methods, n_levels, stop - start)``."""
    model = build_model(cfg.model, **cfg.params)
    x0 = np.asarray(cfg.x0 if cfg.x0 is not None else model.default_x0, dtype=float)
    n_ref = int(round(cfg.T / cfg.h_ref))
    grid = sample_grids(cfg.seed, range(start, stop), model.noise_count, cfg.h_ref, n_ref)
    methods = cfg.resolved_methods()
    levels = cfg.resolved_levels()
    out = np.empty((len(methods), len(levels), stop - start))
    current = (MethodSpec("t2", False), cfg.h_ref)
    try:
        ref = integrate(model, current[0], x0, cfg.h_ref, grid.step_increments(cfg.h_ref),
                        _scheme_config(cfg), cfg.projection)
        for j, h in enumerate(levels):
            inc = grid.step_increments(h)
            for i, meth in enumerate(methods):
                current = (meth, h)
                xN = integrate(model, meth, x0, h, inc, _scheme_config(cfg, meth.base),
                               cfg.projection)
                out[i, j] = np.sum((xN - ref) ** 2, axis=-1)
    except NumericalError as exc:
        row = getattr(exc, "state", {}).get("row")
        path = start + row if row is not None else None
        where = f"path {path}" if path is not None else f"paths {start}..{stop - 1}"
        raise StudyError(f"{current[0].label} at h={current[1]:g} failed on {where}: {exc}",
                         path_index=path, method=current[0].label, h=current[1],
                         cause=exc) from exc
    return out


def _block_task(args):
    return _run_block(*args)


def run_convergence(cfg: StudyConfig) -> ConvergenceReport:
    """Mean-square errors at time ``T`` for every (method, h) pair."""
    cfg.validate()
    started = datetime.now(timezone.utc).isoformat()
    bounds = [(s, min(s + cfg.block_size, cfg.paths))
              for s in range(0, cfg.paths, cfg.block_size)]
    tasks = [(cfg, a, b) for a, b in bounds]
    if cfg.workers == 1 or len(tasks) == 1:
        parts = [_block_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=min(cfg.workers, len(tasks))) as pool:
            parts = list(pool.map(_block_task, tasks))
    sq = np.concatenate(parts, axis=-1)
    methods = [m.label for m in cfg.resolved_methods()]
    levels = list(cfg.resolved_levels())
    errors, orders = {}, {}
    for i, label in enumerate(methods):
        # fsum is correctly rounded, so the mean does not depend on summation order
        errors[label] = [math.sqrt(math.fsum(sq[i, j]) / cfg.paths) for j in range(len(levels))]
        if len(levels) >= 3 and all(e > 0 for e in errors[label]):
            fit = fit_order(levels, errors[label])
            orders[label] = (fit.order, fit.residual)
    meta = {
        "seed": cfg.seed, "paths": cfg.paths, "h_ref": cfg.h_ref, "T": cfg.T,
        "params": dict(cfg.params), "truncation_k": cfg.truncation.k,
        "truncation": cfg.truncation.enabled, "direction": cfg.projection.direction,
        "newton_tol": cfg.projection.newton_tol, "started": started,
        "finished": datetime.now(timezone.utc).isoformat(),
    }
    return ConvergenceReport(model=cfg.model, methods=methods, h_levels=levels,
                             errors=errors, orders=orders, metadata=meta)


@dataclass
class DriftReport:
    """Single-path trajectory with per-step invariant errors.

    ``inv_err[n, i] = |I_i(X_n) - I_i(X_0)|`` and ``combined`` is the
    Euclidean norm of each row.
    """

    method: str
    h: float
    times: np.ndarray
    states: np.ndarray
    inv_err: np.ndarray
    labels: list

    @property
    def combined(self) -> np.ndarray:
        return np.sqrt(np.sum(self.inv_err ** 2, axis=-1))

    @property
    def max_error(self) -> float:
        return float(self.combined.max())


def run_drift(model: SdeModel, method, h: float, T: float, seed: int = 0, x0=None,
              scfg: Optional[SchemeConfig] = None,
              pcfg: ProjectionConfig = ProjectionConfig(),
              truncation: TruncationConfig = TruncationConfig()) -> DriftReport:
    """Integrate one path to time ``T`` recording invariant errors each step."""
    meth = parse_method(method) if isinstance(method, str) else method
    n = int(round(T / h))
    if n < 1 or abs(n * h - T) > 1e-9 * T:
        raise ConfigurationError(f"T={T} is not a multiple of h={h}")
    if scfg is None:
        scfg = SchemeConfig(method=meth.base, truncation=truncation)
    x0 = np.asarray(x0 if x0 is not None else model.default_x0, dtype=float)
    grid = sample_grid(RngStream(seed, 0), model.noise_count, h, n)
    traj = integrate(model, meth, x0, h, grid.step_increments(h), scfg, pcfg, record=True)
    inv = np.abs(model.invariant_values(traj) - model.invariant_values(x0))
    return DriftReport(method=meth.label, h=h, times=np.arange(n + 1) * h, states=traj,
                       inv_err=inv, labels=[i.label for i in model.invariants])
