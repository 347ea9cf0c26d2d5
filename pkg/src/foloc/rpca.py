"""Robust PCA by the exact augmented Lagrange multiplier method.

Solves ``min ||L||_* + xi ||S||_1  s.t.  Y = L + S`` for a real matrix ``Y``.
Each outer iteration minimizes the augmented Lagrangian exactly (up to an
inner tolerance) by alternating the two proximal steps, then takes a dual
ascent step and enlarges the penalty ``mu``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class RpcaNumericalError(RuntimeError):
    """The SVD backend failed; carries the offending matrix shape."""


@dataclass(frozen=True)
class RpcaConfig:
    """Solver settings. ``None`` for xi, mu0 or rho means "choose automatically"."""

    xi: float | None = None
    tol_primal: float = 1e-7
    max_outer_iters: int = 500
    max_inner_iters: int = 100
    mu0: float | None = None
    rho: float | None = None
    tol_inner: float = 1e-6

    def __post_init__(self):
        if self.xi is not None and not self.xi > 0:
            raise ValueError(f"xi must be positive, got {self.xi}")
        if not 0 < self.tol_primal < 1:
            raise ValueError(f"tol_primal must lie in (0, 1), got {self.tol_primal}")
        if not 0 < self.tol_inner < 1:
            raise ValueError(f"tol_inner must lie in (0, 1), got {self.tol_inner}")
        if int(self.max_outer_iters) < 1 or int(self.max_inner_iters) < 1:
            raise ValueError("iteration limits must be positive")
        if self.mu0 is not None and not self.mu0 > 0:
            raise ValueError(f"mu0 must be positive, got {self.mu0}")
        if self.rho is not None and not self.rho > 1:
            raise ValueError(f"rho must exceed 1, got {self.rho}")


DEFAULT_RHO = 1.6
MU0_FACTOR = 1.25


@dataclass(frozen=True)
class RpcaResult:
    L: np.ndarray
    S: np.ndarray
    outer_iters: int
    residual: float
    converged: bool
    xi: float
    rank: int = 0
    inner_iters: int = 0
    mu0: float = 0.0
    rho: float = DEFAULT_RHO
    dual_init_scale: float = 0.0
    residual_history: tuple = field(default=(), repr=False)
    objective_history: tuple = field(default=(), repr=False)

    @property
    def objective(self) -> float:
        return nuclear_norm(self.L) + self.xi * float(np.abs(self.S).sum())

    def summary(self) -> dict:
        return {
            "converged": self.converged,
            "residual": self.residual,
            "outer_iters": self.outer_iters,
            "inner_iters": self.inner_iters,
            "rank": self.rank,
            "xi": self.xi,
            "mu0": self.mu0,
            "rho": self.rho,
            "dual_init_scale": self.dual_init_scale,
        }


def default_xi(rows: int, cols: int) -> float:
    """Sparsity weight ``1 / sqrt(max(rows, cols))``."""
    if rows < 1 or cols < 1:
        raise ValueError(f"matrix dimensions must be positive, got {rows}x{cols}")
    return 1.0 / math.sqrt(max(rows, cols))


def soft_threshold(X, tau: float) -> np.ndarray:
    """Entrywise ``sign(x) * max(|x| - tau, 0)``; the prox of ``tau * ||.||_1``."""
    if tau < 0:
        raise ValueError(f"threshold must be nonnegative, got {tau}")
    X = np.asarray(X, dtype=float)
    return np.sign(X) * np.maximum(np.abs(X) - tau, 0.0)


def _svd(X):
    try:
        return np.linalg.svd(X, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise RpcaNumericalError(f"SVD failed on {X.shape[0]}x{X.shape[1]} matrix: {exc}") from exc


def singular_value_threshold(X, tau: float):
    """Prox of ``tau * ||.||_*``.

    Returns
    -------
    (ndarray, int)
        ``U shrink(Sigma, tau) V^T`` and the number of singular values above ``tau``.
    """
    if tau < 0:
        raise ValueError(f"threshold must be nonnegative, got {tau}")
    X = np.asarray(X, dtype=float)
    U, s, Vt = _svd(X)
    keep = int(np.count_nonzero(s > tau))
    if keep == 0:
        return np.zeros_like(X), 0
    return (U[:, :keep] * (s[:keep] - tau)) @ Vt[:keep], keep


def nuclear_norm(X) -> float:
    return float(np.linalg.svd(np.asarray(X, dtype=float), compute_uv=False).sum())


def rpca_exact_alm(Y, cfg: RpcaConfig | None = None) -> RpcaResult:
    """Decompose ``Y`` into low-rank ``L`` plus sparse ``S``.

    Starts from ``L = S = 0`` and dual variable ``Y / max(sigma_1, max|Y| / xi)``.
    The inner loop alternates the l1 and nuclear-norm proximal steps until
    neither iterate moves by more than ``tol_inner * ||Y||_F``. Stops once
    ``||Y - L - S||_F / ||Y||_F < tol_primal``.

    Non-convergence is not an error: the iterate with the smallest primal
    residual is returned with ``converged=False``.
    """
    cfg = cfg or RpcaConfig()
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2:
        raise ValueError(f"expected a matrix, got shape {Y.shape}")
    if not np.all(np.isfinite(Y)):
        raise ValueError("input contains non-finite entries")
    xi = cfg.xi if cfg.xi is not None else default_xi(*Y.shape)
    rho = cfg.rho if cfg.rho is not None else DEFAULT_RHO

    norm_y = float(np.linalg.norm(Y))
    if norm_y == 0.0:
        zero = np.zeros_like(Y)
        return RpcaResult(zero, zero.copy(), 0, 0.0, True, xi, rho=rho)

    sigma1 = float(_svd(Y)[1][0])
    mu = cfg.mu0 if cfg.mu0 is not None else MU0_FACTOR / sigma1
    mu0 = mu
    dual_scale = max(sigma1, float(np.max(np.abs(Y))) / xi)
    Lam = Y / dual_scale

    L = np.zeros_like(Y)
    S = np.zeros_like(Y)
    inner_tol = cfg.tol_inner * norm_y
    rank = 0
    total_inner = 0
    residuals = []
    objectives = []
    best = None
    converged = False
    outer = 0
    while outer < cfg.max_outer_iters:
        outer += 1
        for _ in range(cfg.max_inner_iters):
            total_inner += 1
            S_new = soft_threshold(Y - L + Lam / mu, xi / mu)
            L_new, rank = singular_value_threshold(Y - S_new + Lam / mu, 1.0 / mu)
            step = max(np.linalg.norm(L_new - L), np.linalg.norm(S_new - S))
            L, S = L_new, S_new
            if step < inner_tol:
                break
        Z = Y - L - S
        res = float(np.linalg.norm(Z)) / norm_y
        residuals.append(res)
        objectives.append(nuclear_norm(L) + xi * float(np.abs(S).sum()))
        if best is None or res <= best[0]:
            best = (res, L, S, rank, outer)
        if res < cfg.tol_primal:
            converged = True
            break
        Lam = Lam + mu * Z
        mu *= rho

    res, L, S, rank, at = best
    return RpcaResult(
        L=L, S=S, outer_iters=outer, residual=res, converged=converged, xi=xi,
        rank=rank, inner_iters=total_inner, mu0=mu0, rho=rho,
        dual_init_scale=dual_scale,
        residual_history=tuple(residuals), objective_history=tuple(objectives),
    )
