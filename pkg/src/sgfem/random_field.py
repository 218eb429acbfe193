"""Lognormal diffusion coefficient k(x, ξ) = exp[g(x, ξ)].

The Gaussian exponent g is a truncated Karhunen-Loeve expansion
g = g_0 + Σ_d g_d(x) ξ_d with independent standard Gaussian ξ_d and mode
fields g_d already scaled by the square roots of the covariance
eigenvalues.  Its chaos coefficients against the unnormalized Hermite
basis have the closed form

    k_i(x) = [Π_d g_d(x)^{i_d} / i_d!] · exp(g_0 + ½ Σ_d g_d(x)²),

which equals the projection E[exp(g) ψ_i] / E[ψ_i²]; the tests pin this
against a Gauss-Hermite projection oracle, sign included.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from sgfem.chaos import MultiIndexSet
from sgfem.fem import Mesh, assemble_load
from sgfem.linalg import sym_eig


def field_parameters(mu_log: float, cov: float, mode: str = "moment"
                     ) -> tuple[float, float]:
    """Gaussian exponent parameters (g_0, σ_g) for a target lognormal.

    ``mode="moment"`` matches the lognormal mean and coefficient of
    variation exactly: σ_g = sqrt(ln(1+cov²)), g_0 = ln(μ) − σ_g²/2.
    ``mode="gaussian"`` takes cov literally as the Gaussian σ_g (the mean
    stays matched; the realized lognormal CoV is then sqrt(exp(σ_g²)−1)).
    """
    if mu_log <= 0:
        raise ValueError("lognormal mean must be positive")
    if cov < 0:
        raise ValueError("coefficient of variation must be non-negative")
    if mode == "moment":
        sigma_g = math.sqrt(math.log1p(cov * cov))
    elif mode == "gaussian":
        sigma_g = cov
    else:
        raise ValueError(f"unknown mode: {mode}")
    g0 = math.log(mu_log) - 0.5 * sigma_g * sigma_g
    return g0, sigma_g


def lognormal_from_moments(mu_log: float, cov: float) -> tuple[float, float]:
    """(g_0, σ_g) such that exp(g_0 + σ_g ξ) has mean mu_log and CoV cov."""
    return field_parameters(mu_log, cov, mode="moment")


@dataclass(frozen=True)
class ExponentialCovariance:
    """Separable exponential kernel σ² exp(−‖x−y‖₁ / L)."""

    sigma: float
    L: float

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        if self.L <= 0:
            raise ValueError("correlation length must be positive")

    def __call__(self, x, y) -> float:
        d = np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))
        return self.sigma**2 * float(np.exp(-d.sum() / self.L))

    def matrix(self, points: np.ndarray) -> np.ndarray:
        """Covariance matrix over a point set, shape (n, n)."""
        d = np.abs(points[:, None, :] - points[None, :, :]).sum(axis=2)
        return self.sigma**2 * np.exp(-d / self.L)


def covariance(x, y, spec: ExponentialCovariance) -> float:
    return spec(x, y)


def kl_eigenpairs(C: np.ndarray, weights: np.ndarray, n_modes: int
                  ) -> tuple[np.ndarray, np.ndarray, float]:
    """Top eigenpairs of the weighted covariance operator.

    Solves the lumped-mass Galerkin form of the covariance eigenproblem:
    W^{1/2} C W^{1/2} z = λ z with diagonal W, then φ = W^{−1/2} z, so the
    φ are orthonormal in the W-inner product.  Returns (λ descending,
    φ rows, retained energy fraction Σ_retained λ / Σ_all λ).
    """
    w = np.asarray(weights, dtype=float)
    if np.any(w <= 0):
        raise ValueError("lumped mass weights must be positive")
    ws = np.sqrt(w)
    vals, vecs = sym_eig(C * np.outer(ws, ws))
    if n_modes > len(vals):
        raise ValueError("more modes requested than discrete eigenvalues")
    floor = 1e-12 * max(vals[0], 0.0)
    if vals[0] <= 0 or np.any(vals[:n_modes] <= floor):
        raise ValueError(f"only {int(np.sum(vals > floor))} eigenvalues are "
                         f"positive to tolerance, {n_modes} modes requested")
    lam = vals[:n_modes].copy()
    phi = (vecs[:, :n_modes] / ws[:, None]).T
    return lam, phi, float(lam.sum() / vals.sum())


@dataclass(frozen=True)
class KLExpansion:
    """Truncated KL expansion of the Gaussian exponent.

    ``modes`` rows are the nodal fields g_d = sqrt(λ_d) φ_d; ``g0`` is the
    constant mean; ``energy_fraction`` is the retained share of the total
    discrete variance.
    """

    g0: float
    lambdas: np.ndarray
    modes: np.ndarray
    energy_fraction: float

    @property
    def N(self) -> int:
        return len(self.lambdas)


def _sign_fix(v: np.ndarray) -> np.ndarray:
    return -v if v[np.argmax(np.abs(v))] < 0 else v


def _separability(M: np.ndarray) -> float:
    """sigma_2 / sigma_1: zero iff the grid field factors as u(y) v(x)."""
    s = np.linalg.svd(M, compute_uv=False)
    return float(s[1] / s[0]) if s[0] > 0 else 0.0


def _profile_frequency(p: np.ndarray) -> int:
    """Sign changes of a 1D profile, ignoring near-zero entries."""
    q = p[np.abs(p) > 1e-8 * np.abs(p).max()]
    return int(np.count_nonzero(np.signbit(q[1:]) != np.signbit(q[:-1])))


def _separable_rotation(A: np.ndarray, B: np.ndarray) -> float:
    """Angle minimizing sigma_2(cos t A + sin t B) over [0, pi)."""

    def s2(t):
        return np.linalg.svd(np.cos(t) * A + np.sin(t) * B,
                             compute_uv=False)[1]

    grid = np.linspace(0.0, np.pi, 721, endpoint=False)
    t0 = grid[int(np.argmin([s2(t) for t in grid]))]
    a, b = t0 - np.pi / 720, t0 + np.pi / 720
    golden = (np.sqrt(5.0) - 1.0) / 2.0
    c, d = b - golden * (b - a), a + golden * (b - a)
    for _ in range(60):
        if s2(c) < s2(d):
            b, d = d, c
            c = b - golden * (b - a)
        else:
            a, c = c, d
            d = a + golden * (b - a)
    return 0.5 * (a + b)


def _canonical_grid_modes(phi: np.ndarray, lam: np.ndarray,
                          shape: tuple) -> np.ndarray:
    """Deterministic eigenbasis inside degenerate eigenvalue pairs.

    A product kernel sampled on a tensor grid has eigenvectors that
    factor as u(y) v(x), but within an eigenvalue pair the dense solver
    returns an arbitrary rotation of them.  Rotate each pair back to the
    separable representatives, order the two by increasing frequency in
    x (then y) and fix signs.  Pairs with no rank-1 rotation and larger
    groups are left exactly as the solver produced them.
    """
    phi = phi.copy()
    m = len(lam)
    start = 0
    for i in range(1, m + 1):
        if i < m and abs(lam[i] - lam[start]) <= 1e-8 * abs(lam[start]):
            continue
        if i - start == 2:
            A = phi[start].reshape(shape)
            B = phi[i - 1].reshape(shape)
            t = _separable_rotation(A, B)
            Ma = np.cos(t) * A + np.sin(t) * B
            Mb = -np.sin(t) * A + np.cos(t) * B
            if max(_separability(Ma), _separability(Mb)) <= 1e-8:
                keyed = []
                for M in (Ma, Mb):
                    u, _, vt = np.linalg.svd(M)
                    keyed.append((_profile_frequency(vt[0]),
                                  _profile_frequency(u[:, 0]), M.ravel()))
                keyed.sort(key=lambda p: (p[0], p[1]))
                phi[start] = _sign_fix(keyed[0][2])
                phi[i - 1] = _sign_fix(keyed[1][2])
        start = i
    return phi


def discrete_kl(mesh: Mesh, spec: ExponentialCovariance, n_modes: int,
                g0: float = 0.0) -> KLExpansion:
    """KL expansion of the exponent field on a mesh.

    The lumped mass weights are the nodal integrals ∫ φ_l dx (positive on
    a Q1 mesh), and the covariance matrix is sampled node-wise.  Repeated
    eigenvalues (the mixed-direction pairs of a separable kernel on the
    square) get the canonical separable eigenbasis, so the expansion does
    not depend on how the dense eigensolver happens to span them; a pair
    split by the truncation is resolved before it is cut.
    """
    weights = assemble_load(mesh, 1.0)
    C = spec.matrix(mesh.nodes)
    lam, phi, energy = kl_eigenpairs(C, weights, n_modes)
    # pull a few extra eigenpairs so a degeneracy crossing the cut is
    # rotated together with its partner, then truncate
    m_ext = min(len(weights), n_modes + 4)
    if m_ext > n_modes:
        try:
            lam_e, phi_e, _ = kl_eigenpairs(C, weights, m_ext)
        except ValueError:
            lam_e, phi_e = lam, phi
    else:
        lam_e, phi_e = lam, phi
    side = mesh.n + 1
    phi = _canonical_grid_modes(phi_e, lam_e, (side, side))[:n_modes]
    return KLExpansion(g0, lam, np.sqrt(lam)[:, None] * phi, energy)


@dataclass(frozen=True)
class CoefficientFields:
    """Chaos coefficients k_i of the lognormal field at quadrature points.

    ``values[i]`` has shape (n_elements, 4); ``basis`` is the multi-index
    set the i axis runs over.  k_0 is strictly positive.
    """

    basis: MultiIndexSet
    values: np.ndarray


def gpc_coefficients(kl: KLExpansion, basis: MultiIndexSet, mesh: Mesh
                     ) -> CoefficientFields:
    """Evaluate every k_i at the mesh quadrature points (closed form)."""
    if basis.N != kl.N:
        raise ValueError(f"basis dimension {basis.N} does not match "
                         f"{kl.N} KL modes")
    # g_d at quadrature points via bilinear interpolation, (N, n_e, 4)
    G = np.array([mesh.interpolate(m) for m in kl.modes])
    base = np.exp(kl.g0 + 0.5 * np.sum(G * G, axis=0))
    maxdeg = basis.degree
    powers = G[None] ** np.arange(maxdeg + 1)[:, None, None, None]
    values = np.empty((len(basis),) + base.shape)
    for pos, idx in enumerate(basis.indices):
        prod = base.copy()
        for d, p in enumerate(idx):
            if p:
                prod *= powers[p, d] / math.factorial(p)
        values[pos] = prod
    return CoefficientFields(basis, values)


def sample_field(kl: KLExpansion, xi) -> np.ndarray:
    """Nodal values of exp(g(x, ξ)) for one realization ξ."""
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (kl.N,):
        raise ValueError(f"xi must have length {kl.N}")
    return np.exp(kl.g0 + xi @ kl.modes)


def write_kl_csv(path, mesh: Mesh, kl: KLExpansion) -> None:
    """KL mode fields as CSV: node, x, y, g_1..g_N."""
    with open(path, "w") as fh:
        header = ",".join(f"g{d + 1}" for d in range(kl.N))
        fh.write(f"node,x,y,{header}\n")
        for i, (x, y) in enumerate(mesh.nodes):
            gs = ",".join(f"{kl.modes[d, i]:.17g}" for d in range(kl.N))
            fh.write(f"{i},{x:.17g},{y:.17g},{gs}\n")
