"""Conjugate gradient solvers and the Lanczos condition estimate.

``flexible_cg`` is the workhorse: the search direction update uses the
Polak-Ribiere-style coefficient built from successive preconditioned
residual differences, so preconditioners that are themselves iterative
(inner Krylov solves) remain admissible.  ``pcg`` is the textbook method
kept as an independent oracle: with a fixed SPD preconditioner both must
produce the same iterates.

Both solvers start from the zero vector, test convergence on the true
relative residual carried by the recurrence (explicitly refreshed every 50
iterations and at acceptance), and record the α/β coefficients from which
the Lanczos tridiagonal gives the condition number estimate of the
preconditioned operator.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from sgfem.linalg import sym_eig

_REFRESH = 50  # explicit residual recomputation period


@dataclass
class SolveReport:
    """Outcome of one CG solve.

    ``residuals[k]`` is the relative residual after iteration k+1;
    ``kappa`` estimates cond(M⁻¹A) from the Lanczos tridiagonal (1 when
    fewer than 2 iterations ran); ``matvecs`` counts operator
    applications including residual refreshes; ``rho_history`` holds the
    squared M⁻¹-norm of the residual per iteration.
    """

    iterations: int = 0
    residuals: list = field(default_factory=list)
    kappa: float = 1.0
    wall_time: float = 0.0
    matvecs: int = 0
    converged: bool = False
    breakdown: bool = False
    alphas: list = field(default_factory=list)
    betas: list = field(default_factory=list)
    rho_history: list = field(default_factory=list)


def lanczos_condition_estimate(alphas, betas) -> float:
    """κ = λ_max/λ_min of the Lanczos tridiagonal built from CG
    coefficients.

    T[k,k] = 1/α_k + β_{k−1}/α_{k−1} (first term only for k=0) and
    T[k,k+1] = sqrt(β_k)/α_k.  Fewer than 2 iterations give κ = 1.
    """
    m = len(alphas)
    if m < 2:
        return 1.0
    T = np.zeros((m, m))
    for k in range(m):
        T[k, k] = 1.0 / alphas[k]
        if k > 0:
            T[k, k] += betas[k - 1] / alphas[k - 1]
        if k < m - 1:
            off = np.sqrt(max(betas[k], 0.0)) / alphas[k]
            T[k, k + 1] = T[k + 1, k] = off
    vals, _ = sym_eig(T)
    lo = vals[-1]
    if lo <= 0:
        return float("inf")
    return float(vals[0] / lo)


def _run_cg(apply_A, apply_M, b, tol, maxit, flexible):
    t0 = time.perf_counter()
    b = np.asarray(b, dtype=float)
    report = SolveReport()
    x = np.zeros_like(b)
    norm_b = np.linalg.norm(b)
    if norm_b == 0.0:
        report.converged = True
        report.wall_time = time.perf_counter() - t0
        return x, report

    r = b.copy()
    z = apply_M(r)
    p = z.copy()
    rho = float(r @ z)
    for k in range(maxit):
        q = apply_A(p)
        report.matvecs += 1
        pAp = float(p @ q)
        if pAp <= 0.0:
            report.breakdown = True
            break
        alpha = rho / pAp
        x += alpha * p
        r_old = r.copy() if flexible else None
        r = r - alpha * q
        if (k + 1) % _REFRESH == 0:
            r = b - apply_A(x)
            report.matvecs += 1
        relres = float(np.linalg.norm(r) / norm_b)
        report.iterations = k + 1
        report.alphas.append(alpha)
        report.residuals.append(relres)
        report.rho_history.append(rho)
        if relres <= tol:
            # accept only a verified true residual
            r_true = b - apply_A(x)
            report.matvecs += 1
            relres = float(np.linalg.norm(r_true) / norm_b)
            report.residuals[-1] = relres
            if relres <= tol:
                report.converged = True
                break
            r = r_true
        z = apply_M(r)
        if flexible:
            beta = float(z @ (r - r_old)) / rho
            rho = float(r @ z)
        else:
            rho_new = float(r @ z)
            beta = rho_new / rho
            rho = rho_new
        report.betas.append(beta)
        p = z + beta * p

    report.kappa = lanczos_condition_estimate(report.alphas, report.betas)
    report.wall_time = time.perf_counter() - t0
    return x, report


def flexible_cg(apply_A, apply_M, b, tol: float = 1e-8, maxit: int = 1000
                ) -> tuple[np.ndarray, SolveReport]:
    """Flexible preconditioned CG from a zero initial guess.

    Converges when ‖b − Ax‖/‖b‖ ≤ tol; a non-converged or broken-down run
    returns the last iterate with the flags set, never raises.
    """
    return _run_cg(apply_A, apply_M, b, tol, maxit, flexible=True)


def pcg(apply_A, apply_M, b, tol: float = 1e-8, maxit: int = 1000
        ) -> tuple[np.ndarray, SolveReport]:
    """Standard preconditioned CG (fixed-preconditioner oracle)."""
    return _run_cg(apply_A, apply_M, b, tol, maxit, flexible=False)


def write_residual_trace(path, report: SolveReport) -> None:
    """Per-iteration residual history as CSV."""
    with open(path, "w") as fh:
        fh.write("iteration,relative_residual\n")
        for k, res in enumerate(report.residuals, start=1):
            fh.write(f"{k},{res:.17g}\n")
