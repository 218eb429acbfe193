"""Shared helpers: build small end-to-end problem instances."""

import numpy as np

from sgfem.chaos import build_c_tensor
from sgfem.fem import (
    apply_dirichlet,
    assemble_load,
    assemble_stiffness_family,
    build_mesh,
)
from sgfem.galerkin import GalerkinOperator
from sgfem.random_field import (
    ExponentialCovariance,
    discrete_kl,
    gpc_coefficients,
    lognormal_from_moments,
)


def build_operator(N, P, n, cov=1.0, mu_log=1.0, L=0.5):
    """Full pipeline at small scale: mesh -> KL -> coefficients -> K_i ->
    boundary treatment -> block operator.  Returns (op, b, mesh, kl) with b
    the global right-hand side (unit load in the mean block only)."""
    mesh = build_mesh(n)
    g0, sg = lognormal_from_moments(mu_log, cov)
    kl = discrete_kl(mesh, ExponentialCovariance(sg, L), N, g0=g0)
    tensor = build_c_tensor(N, P, 2 * P)
    fields = gpc_coefficients(kl, tensor.iset, mesh)
    kfam = assemble_stiffness_family(mesh, fields.values)
    f = assemble_load(mesh, 1.0)
    k0, f0 = apply_dirichlet(kfam[0], f, mesh, diagonal=1.0)
    kd = [k0] + [apply_dirichlet(K, f, mesh, diagonal=0.0)[0]
                 for K in kfam[1:]]
    op = GalerkinOperator(tensor, kd)
    b = np.zeros(op.n_global)
    b[:op.n_dof] = f0
    return op, b, mesh, kl
