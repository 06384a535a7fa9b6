"""Preconditioned conjugate-gradient solver for the reduced SPD system."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .assembly import SparseSystem
from .space import DiscreteFunction

# runaway residual growth signals an indefinite or singular operator
_DIVERGENCE_FACTOR = 1e12


class SolverError(RuntimeError):
    """CG failed: iteration cap reached or indefinite/singular matrix."""


@dataclass
class SolverConfig:
    tol: float = 1e-10
    max_iterations: int | None = None  # None: max(1000, ceil(20*sqrt(n_free)))
    preconditioner: str = "diagonal"   # "diagonal" or "none"

    def __post_init__(self):
        if not 0.0 < self.tol < 1.0:
            raise ValueError("tol must be in (0,1)")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.preconditioner not in ("diagonal", "none"):
            raise ValueError("preconditioner must be 'diagonal' or 'none'")

    def iteration_cap(self, n_free: int) -> int:
        if self.max_iterations is not None:
            return self.max_iterations
        return max(1000, math.ceil(20.0 * math.sqrt(max(n_free, 1))))


@dataclass
class SolveResult:
    function: DiscreteFunction
    iterations: int
    residual: float
    residual_history: np.ndarray


def solve_spd(system: SparseSystem, config: SolverConfig | None = None) -> SolveResult:
    """Solve the reduced system by (optionally Jacobi-preconditioned) CG and
    merge the solution with the Dirichlet lifting.

    Stops once the true residual satisfies |b - A x| <= tol * |b| and the
    preconditioned residual norm meets the same relative reduction; the second
    condition guards the small-scale solution components when the matrix
    carries widely different row scales (large lambda).
    """
    if config is None:
        config = SolverConfig()
    a_mat = system.matrix
    b = system.load
    n = system.n_free
    full = system.lifting.copy()

    if n == 0:
        return SolveResult(DiscreteFunction(system.dofmap, full), 0, 0.0,
                           np.zeros(0))

    if config.preconditioner == "diagonal":
        diag = a_mat.diagonal()
        if np.any(diag <= 0.0):
            raise SolverError("non-positive diagonal entry: matrix is not SPD "
                              "(missing Dirichlet constraints?)")
        inv_diag = 1.0 / diag
    else:
        inv_diag = np.ones(n)

    norm_b = np.linalg.norm(b)
    if norm_b == 0.0:
        return SolveResult(DiscreteFunction(system.dofmap, full), 0, 0.0,
                           np.zeros(0))

    x = np.zeros(n)
    r = b.copy()
    z = inv_diag * r
    rho = r @ z
    norm_bp = math.sqrt(b @ (inv_diag * b))
    p = z.copy()
    cap = config.iteration_cap(n)
    history = [norm_b]
    iterations = 0
    last_restart_residual = np.inf
    while iterations < cap:
        q = a_mat @ p
        pq = p @ q
        if not np.isfinite(pq) or pq <= 0.0:
            raise SolverError("non-positive curvature encountered: matrix is "
                              "indefinite or singular")
        alpha = rho / pq
        x += alpha * p
        r -= alpha * q
        iterations += 1
        norm_r = np.linalg.norm(r)
        history.append(norm_r)
        if not np.isfinite(norm_r):
            raise SolverError("non-finite residual encountered")
        if norm_r > _DIVERGENCE_FACTOR * norm_b:
            raise SolverError("residual diverged: matrix is indefinite or "
                              "singular (missing Dirichlet constraints?)")
        z = inv_diag * r
        rho_next = r @ z
        if norm_r <= config.tol * norm_b and math.sqrt(max(rho_next, 0.0)) <= config.tol * norm_bp:
            # confirm with the true residual (recursion may have drifted)
            true_r = np.linalg.norm(b - a_mat @ x)
            history[-1] = true_r
            if true_r <= config.tol * norm_b:
                break
            if true_r >= 0.9 * last_restart_residual:
                raise SolverError(
                    f"attainable residual floor reached: true relative residual "
                    f"{true_r / norm_b:.3e} cannot meet tol={config.tol:.1e} in "
                    "double precision (ill-scaled system; relax tol)"
                )
            last_restart_residual = true_r
            r = b - a_mat @ x
            z = inv_diag * r
            rho_next = r @ z
            p = z.copy()
            rho = rho_next
            continue
        beta = rho_next / rho
        rho = rho_next
        p = z + beta * p
    else:
        raise SolverError(
            f"CG did not converge within {cap} iterations "
            f"(relative residual {history[-1] / norm_b:.3e})"
        )

    full[system.free_indices] = x
    return SolveResult(DiscreteFunction(system.dofmap, full), iterations,
                       float(history[-1]), np.asarray(history))
