"""Experiment driver: parameter sweeps, count and norm reports, case export.

Builds the lognormal-diffusion block systems at a given configuration,
solves them with flexible CG under each requested preconditioner and
collects (iterations, condition estimate) rows shaped like the report
tables.  All runs are deterministic; re-running any command reproduces
its output bit for bit.
"""

from __future__ import annotations

import functools
import os
from dataclasses import dataclass, fields, replace

import numpy as np

from .chaos import build_c_tensor, write_c_tensor
from .fem import (
    apply_dirichlet,
    assemble_load,
    assemble_stiffness_family,
    build_mesh,
)
from .galerkin import (
    GalerkinOperator,
    adaptive_truncation,
    standard_truncation,
)
from .krylov import flexible_cg
from .linalg import as_csr, write_matrix_market
from .preconditioners import KINDS, make_preconditioner
from .random_field import (
    ExponentialCovariance,
    discrete_kl,
    field_parameters,
    gpc_coefficients,
)

TABLE_KINDS = ("logN", "logP", "logCoV", "logh", "trunc-std", "trunc-adapt")

# column labels used in report headers, keyed by preconditioner kind
LABELS = {"mb": "mb", "kron": "K", "hs": "hS", "ahs": "ahS", "gs": "GS",
          "ahgs": "ahGS"}

# preconditioners compared in the truncation tables
TRUNC_KINDS = ("hs", "ahs", "gs", "ahgs")

# fixed CoV (percent) for the sweeps that do not vary it
DEFAULT_COV = 100.0


@dataclass(frozen=True)
class ExperimentConfig:
    """Knobs for the sweeps.  The expansion degree of the coefficient is
    always twice the solution degree.  CoV values are percentages;
    ``cov_list`` drives the CoV-iterating tables while the fixed-CoV
    sweeps run at 100%."""

    N: int = 4
    P: int = 4
    n: int = 10
    cov_list: tuple = (25.0, 50.0, 75.0, 100.0, 125.0, 150.0)
    mu_log: float = 1.0
    L: float = 0.5
    preconds: tuple = ("mb", "kron", "hs", "ahs", "gs", "ahgs")
    lt_list: tuple = (0, 1, 2, 3, 4, 8)
    tau_list: tuple = (100.0, 10.0, 1.0, 0.1, 0.0)
    mesh_list: tuple = (5, 10, 15, 20)
    tol: float = 1e-8
    maxit: int = 1000
    sigma_mode: str = "moment"
    norm: str = "frob"

    def __post_init__(self):
        if self.sigma_mode not in ("moment", "gaussian"):
            raise ValueError(f"unknown sigma mode {self.sigma_mode!r}")
        if self.norm not in ("frob", "two"):
            raise ValueError(f"unknown norm {self.norm!r}")
        for kind in self.preconds:
            if kind not in KINDS:
                raise ValueError(f"unknown preconditioner {kind!r}")

    @property
    def pprime(self) -> int:
        return 2 * self.P


# ReportRow: a dict mapping column name -> cell value (int, float or str).


@dataclass(frozen=True)
class Report:
    """A named table: ordered column names plus one dict per row."""

    name: str
    columns: tuple
    rows: tuple

    def column(self, name):
        return [row[name] for row in self.rows]


_INT_KEYS = ("N", "P", "ndof", "lt", "n_mats", "nnz")


def _format_cell(key, value):
    if value is None or value == "":
        return ""
    if key.endswith("kappa"):
        return f"{value:.2f}" if np.isfinite(value) else "inf"
    if key.endswith("_it") or key in _INT_KEYS:
        return str(int(value))
    if isinstance(value, float):
        return f"{value:g}"
    return str(value)


def report_csv(report: Report) -> str:
    lines = [",".join(report.columns)]
    for row in report.rows:
        lines.append(",".join(_format_cell(c, row.get(c, ""))
                              for c in report.columns))
    return "\n".join(lines) + "\n"


def report_markdown(report: Report) -> str:
    head = "| " + " | ".join(report.columns) + " |"
    sep = "|" + "|".join(" --- " for _ in report.columns) + "|"
    lines = [head, sep]
    for row in report.rows:
        cells = [_format_cell(c, row.get(c, "")) for c in report.columns]
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


@functools.lru_cache(maxsize=8)
def _cached_tensor(N, P, pprime):
    return build_c_tensor(N, P, pprime)


@functools.lru_cache(maxsize=8)
def _cached_mesh(n):
    return build_mesh(n)


def build_problem(N, P, n, cov_pct, mu_log=1.0, L=0.5,
                  sigma_mode="moment"):
    """Assemble the block operator and right-hand side for one setup.

    Returns (op, b).  The right-hand side carries the unit load in the
    mean block; boundary rows are constrained to zero.
    """
    mesh = _cached_mesh(n)
    g0, sg = field_parameters(mu_log, cov_pct / 100.0, sigma_mode)
    kl = discrete_kl(mesh, ExponentialCovariance(sg, L), N, g0=g0)
    tensor = _cached_tensor(N, P, 2 * P)
    coeffs = gpc_coefficients(kl, tensor.iset, mesh)
    kfam = assemble_stiffness_family(mesh, coeffs.values)
    f = assemble_load(mesh, 1.0)
    k0, f0 = apply_dirichlet(kfam[0], f, mesh, diagonal=1.0)
    kd = [k0] + [apply_dirichlet(K, f, mesh, diagonal=0.0)[0]
                 for K in kfam[1:]]
    op = GalerkinOperator(tensor, kd)
    b = np.zeros(op.n_global)
    b[:op.n_dof] = f0
    return op, b


def matrix_norm(K, which="frob"):
    """Frobenius norm, or the two-norm estimated by power iteration with
    a fixed starting vector.  The iteration runs on K'K so indefinite
    matrices with near-tied extreme eigenvalues still converge."""
    if which == "frob":
        return float(np.linalg.norm(K.data))
    if which != "two":
        raise ValueError(f"unknown norm {which!r}")
    m = K.shape[0]
    v = 1.0 + np.arange(m) / m  # deterministic, not an eigenvector
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(1000):
        w = K.T @ (K @ v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        lam_new = float(v @ (K.T @ (K @ v)))
        if abs(lam_new - lam) <= 1e-14 * max(abs(lam_new), 1.0):
            lam = lam_new
            break
        lam = lam_new
    return float(np.sqrt(abs(lam)))


def stiffness_norms(op: GalerkinOperator, which="frob") -> np.ndarray:
    return np.array([matrix_norm(K, which) for K in op.k_mats])


def solve_case(op, b, kind, trunc=None, tol=1e-8, maxit=1000):
    """One preconditioned flexible-CG solve.  Returns a cell dict with
    the iteration count, the Lanczos condition estimate from the same
    run, and the convergence flag."""
    pre = make_preconditioner(op, kind, trunc)
    _, rep = flexible_cg(op.matvec, pre.apply, b, tol=tol, maxit=maxit)
    return {"it": rep.iterations, "kappa": rep.kappa,
            "converged": rep.converged}


def count_pattern(tensor, indices):
    """(nnz of the union (j,k) pattern, total retained tensor entries)
    over the retained coefficient indices."""
    keep = np.isin(tensor.i, np.asarray(indices))
    m1 = len(tensor.jkset)
    pairs = np.unique(tensor.j[keep] * m1 + tensor.k[keep])
    return int(pairs.size), int(np.count_nonzero(keep))


def emit_c_pattern(N, P, lt):
    """Counts for a standard truncation of the coefficient tensor."""
    tensor = _cached_tensor(N, P, 2 * P)
    trunc = standard_truncation(N, lt)
    return count_pattern(tensor, trunc.indices)


def _solve_row(op, b, kinds, config, trunc=None):
    """Cells for one table row; non-convergence is recorded, not raised."""
    cells = {}
    failed = []
    for kind in kinds:
        res = solve_case(op, b, kind, trunc, config.tol, config.maxit)
        label = LABELS[kind]
        cells[f"{label}_it"] = res["it"]
        cells[f"{label}_kappa"] = res["kappa"]
        if not res["converged"]:
            failed.append(label)
    cells["nonconverged"] = ";".join(failed)
    return cells


def _pair_columns(kinds):
    cols = []
    for kind in kinds:
        cols += [f"{LABELS[kind]}_it", f"{LABELS[kind]}_kappa"]
    return cols


def run_table(config: ExperimentConfig, which: str) -> Report:
    """Sweep one variable, holding the rest at the defaults, and solve
    each system once per preconditioner."""
    if which == "logN":
        return _table_logN(config)
    if which == "logP":
        return _table_logP(config)
    if which == "logCoV":
        return _table_logCoV(config)
    if which == "logh":
        return _table_logh(config)
    if which == "trunc-std":
        return _table_trunc_std(config)
    if which == "trunc-adapt":
        return _table_trunc_adapt(config)
    raise ValueError(f"unknown table {which!r}; expected one of "
                     f"{TABLE_KINDS}")


def _table_logN(config):
    rows = []
    for N in range(1, config.N + 1):
        op, b = build_problem(N, config.P, config.n, DEFAULT_COV,
                              config.mu_log, config.L, config.sigma_mode)
        row = {"N": N, "ndof": op.n_global}
        row.update(_solve_row(op, b, config.preconds, config))
        rows.append(row)
    cols = ["N", "ndof"] + _pair_columns(config.preconds) + ["nonconverged"]
    return Report("logN", tuple(cols), tuple(rows))


def _table_logP(config):
    rows = []
    for P in range(1, config.P + 1):
        op, b = build_problem(config.N, P, config.n, DEFAULT_COV,
                              config.mu_log, config.L, config.sigma_mode)
        row = {"P": P, "ndof": op.n_global}
        row.update(_solve_row(op, b, config.preconds, config))
        rows.append(row)
    cols = ["P", "ndof"] + _pair_columns(config.preconds) + ["nonconverged"]
    return Report("logP", tuple(cols), tuple(rows))


def _table_logCoV(config):
    rows = []
    for cov in config.cov_list:
        op, b = build_problem(config.N, config.P, config.n, cov,
                              config.mu_log, config.L, config.sigma_mode)
        row = {"cov": cov}
        row.update(_solve_row(op, b, config.preconds, config))
        rows.append(row)
    cols = ["cov"] + _pair_columns(config.preconds) + ["nonconverged"]
    return Report("logCoV", tuple(cols), tuple(rows))


def _table_logh(config):
    rows = []
    for n in config.mesh_list:
        op, b = build_problem(config.N, config.P, n, DEFAULT_COV,
                              config.mu_log, config.L, config.sigma_mode)
        row = {"h": f"1/{n}", "ndof": op.n_global}
        row.update(_solve_row(op, b, config.preconds, config))
        rows.append(row)
    cols = ["h", "ndof"] + _pair_columns(config.preconds) + ["nonconverged"]
    return Report("logh", tuple(cols), tuple(rows))


def _table_trunc_std(config):
    rows = []
    kinds = tuple(k for k in TRUNC_KINDS if k in config.preconds) or \
        TRUNC_KINDS
    for cov in config.cov_list:
        op, b = build_problem(config.N, config.P, config.n, cov,
                              config.mu_log, config.L, config.sigma_mode)
        for lt in config.lt_list:
            trunc = standard_truncation(config.N, lt)
            nnz, n_mv = count_pattern(op.tensor, trunc.indices)
            row = {"cov": cov, "lt": lt, "n_mats": len(trunc), "nnz": n_mv}
            row.update(_solve_row(op, b, kinds, config, trunc))
            rows.append(row)
    cols = (["cov", "lt", "n_mats", "nnz"] + _pair_columns(kinds)
            + ["nonconverged"])
    return Report("trunc-std", tuple(cols), tuple(rows))


def _table_trunc_adapt(config):
    rows = []
    kinds = tuple(k for k in TRUNC_KINDS if k in config.preconds) or \
        TRUNC_KINDS
    for cov in config.cov_list:
        op, b = build_problem(config.N, config.P, config.n, cov,
                              config.mu_log, config.L, config.sigma_mode)
        norms = stiffness_norms(op, config.norm)
        for tau in config.tau_list:
            trunc = adaptive_truncation(tau, norms, op.tensor)
            nnz, n_mv = count_pattern(op.tensor, trunc.indices)
            row = {"cov": cov, "tau": tau, "n_mats": len(trunc),
                   "nnz": n_mv}
            row.update(_solve_row(op, b, kinds, config, trunc))
            rows.append(row)
    cols = (["cov", "tau", "n_mats", "nnz"] + _pair_columns(kinds)
            + ["nonconverged"])
    return Report("trunc-adapt", tuple(cols), tuple(rows))


def emit_norm_decay(config: ExperimentConfig):
    """Data behind the norm-decay plots: per-matrix norms and the
    weighted coefficient matrix log10 Σ_i c_ijk ‖K_i‖.

    Returns (norms_report, weighted_report).
    """
    op, _ = build_problem(config.N, config.P, config.n,
                          config.cov_list[0], config.mu_log, config.L,
                          config.sigma_mode)
    norms = stiffness_norms(op, config.norm)
    norm_rows = tuple({"i": i, "norm": float(v)}
                      for i, v in enumerate(norms))
    t = op.tensor
    m1 = len(t.jkset)
    W = np.zeros((m1, m1))
    np.add.at(W, (t.j, t.k), t.val * norms[t.i])
    jj, kk = np.nonzero(W)
    weighted_rows = tuple(
        {"j": int(j), "k": int(k), "log10_weight": float(np.log10(W[j, k]))}
        for j, k in zip(jj, kk))
    return (Report("norms", ("i", "norm"), norm_rows),
            Report("weighted", ("j", "k", "log10_weight"), weighted_rows))


def export_case(config: ExperimentConfig, path, cov=DEFAULT_COV,
                cap=5000):
    """Write one problem instance to ``path``: the stiffness matrices in
    Matrix Market form, the coefficient tensor as text triples, the load
    vector, and the dense global matrix when its size is under ``cap``.

    Returns a manifest dict mapping artifact names to file paths (the
    "global" entry holds a refusal message when the cap is exceeded).
    """
    op, b = build_problem(config.N, config.P, config.n, cov,
                          config.mu_log, config.L, config.sigma_mode)
    manifest = {}
    try:
        os.makedirs(path, exist_ok=True)
        for i, K in enumerate(op.k_mats):
            fname = os.path.join(path, f"k_{i:04d}.mtx")
            write_matrix_market(fname, K)
            manifest[f"k_{i:04d}"] = fname
        fname = os.path.join(path, "c_tensor.txt")
        write_c_tensor(fname, op.tensor)
        manifest["c_tensor"] = fname
        fname = os.path.join(path, "load.mtx")
        write_matrix_market(fname, as_csr(b.reshape(-1, 1)))
        manifest["load"] = fname
        if op.n_global <= cap:
            A = op.assemble_global_dense(cap=cap)
            fname = os.path.join(path, "global.mtx")
            write_matrix_market(fname, as_csr(A))
            manifest["global"] = fname
        else:
            manifest["global"] = (f"refused: size {op.n_global} exceeds "
                                  f"cap {cap}; rerun with cap >= "
                                  f"{op.n_global}")
    except OSError as exc:
        raise OSError(f"export to {path!s} failed: {exc}") from exc
    return manifest


_LIST_FIELDS = {"cov_list": float, "lt_list": int, "tau_list": float,
                "mesh_list": int, "preconds": str}
_SCALAR_FIELDS = {"N": int, "P": int, "n": int, "mu_log": float,
                  "L": float, "tol": float, "maxit": int,
                  "sigma_mode": str, "norm": str}


def parse_config_text(text: str) -> dict:
    """Flat key=value lines into typed config fields.  '#' starts a
    comment; blank lines are skipped."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got "
                             f"{raw.strip()!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key in _LIST_FIELDS:
            conv = _LIST_FIELDS[key]
            out[key] = tuple(conv(v.strip())
                             for v in value.split(",") if v.strip())
        elif key in _SCALAR_FIELDS:
            out[key] = _SCALAR_FIELDS[key](value)
        else:
            raise ValueError(f"line {lineno}: unknown config key {key!r}")
    return out


def load_config(path=None, **overrides) -> ExperimentConfig:
    """Config file first, then explicit overrides (CLI flags) on top."""
    values = {}
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            values.update(parse_config_text(fh.read()))
    values.update({k: v for k, v in overrides.items() if v is not None})
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(values) - known
    if unknown:
        raise ValueError(f"unknown config fields {sorted(unknown)}")
    return ExperimentConfig(**values)


def with_overrides(config: ExperimentConfig, **overrides):
    changes = {k: v for k, v in overrides.items() if v is not None}
    return replace(config, **changes) if changes else config
