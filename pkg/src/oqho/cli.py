"""Command-line front end.

Usage::

    oqho spectrum   --config run.toml --out results/
    oqho covariance --config run.toml --out results/
    oqho qef        --config run.toml --theta 0.05:0.5:10
    oqho sweep      --config run.toml --theta 0.1,0.2 --n 20
    oqho verify     --config run.toml

Exit codes: 0 success (including partial QEF sweeps with flagged rows),
2 configuration error, 3 numerical failure, 4 verification failure.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from .config import RunConfig, load_config, parse_theta_spec
from .covariance import (CovarianceSet, admissibility_margin, assemble_P_N, controllability_gramian,
                         covariance_set, cross_covariance_blocks, lyapunov_residual, solve_lyapunov)
from .eigenbasis import SpectralBasis, gram_matrix, solve_roots
from .errors import ConfigError, ModelError, NumericalError, OqhoError, RadiusExceeded
from .oracle import NYSTROM_EIG_TOL, NYSTROM_FN_TOL, OracleReport, nystrom_spectrum, taylor_match, wick_moments
from .output import commit_files, csv_text, json_text, matrix_text
from .qef import admissibility_radius, critical_theta, mean_square, qef_series, qef_truncated
from .system import CanonicalModel, OqhoModel, canonicalize, pr_residual

log = logging.getLogger("oqho")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VERIFY = 0, 2, 3, 4

SPECTRUM_COLUMNS = ["k", "u_k", "omega_k", "lambda_k", "gamma_k", "residual_pik", "residual_trans"]
QEF_COLUMNS = ["theta", "N", "r_N", "log_Xi_N", "converged", "status"]


@dataclass
class CommandResult:
    files: dict
    messages: list = field(default_factory=list)
    exit_code: int = EXIT_OK


@dataclass
class Pipeline:
    config: RunConfig
    model: OqhoModel
    canonical: CanonicalModel
    basis: SpectralBasis
    _cov: CovarianceSet | None = None

    @classmethod
    def from_config(cls, config: RunConfig) -> "Pipeline":
        model = config.build_model()
        canonical = canonicalize(model)
        basis = solve_roots(model.mu, config.T, config.N)
        return cls(config, model, canonical, basis)

    @property
    def covariance(self) -> CovarianceSet:
        if self._cov is None:
            self._cov = covariance_set(self.basis, self.canonical, quad=self.config.quad)
        return self._cov


def spectrum_rows(basis: SpectralBasis):
    rp, rt = basis.residual_pik, basis.residual_trans
    return [(k + 1, basis.u[k], basis.omegas[k], basis.lambdas[k], basis.gammas[k], rp[k], rt[k])
            for k in range(basis.count)]


def cmd_spectrum(config: RunConfig) -> CommandResult:
    pipe = Pipeline.from_config(config)
    b = pipe.basis
    msg = [f"N = {b.count}, r = mu T = {b.r:.17g}",
           f"trace deficit T - sum(lambda_k) = {b.trace_deficit:.17g}"]
    return CommandResult({"spectrum.csv": csv_text(SPECTRUM_COLUMNS, spectrum_rows(b))}, msg)


def cmd_covariance(config: RunConfig) -> CommandResult:
    pipe = Pipeline.from_config(config)
    cov = pipe.covariance
    N = cov.N
    rows = []
    for j in range(N):
        for k in range(N):
            blk = cov.blocks[j, k]
            rows.append((j + 1, k + 1, np.linalg.norm(blk), np.abs(blk).max()))
    files = {
        "covariance_P.txt": matrix_text(cov.P, "P"),
        "covariance_PN.txt": matrix_text(cov.P_N, "P_N"),
        "block_norms.csv": csv_text(["j", "k", "frobenius", "max_abs"], rows),
    }
    msg = [f"P = {cov.P.tolist()}", f"smallest eigenvalue of K_N = {cov.min_eig:.17g}"]
    return CommandResult(files, msg)


def _default_thetas(theta_star: float) -> tuple:
    return tuple(float(theta_star * f) for f in np.linspace(0.1, 0.9, 9))


def cmd_qef(config: RunConfig) -> CommandResult:
    pipe = Pipeline.from_config(config)
    lam, P_N = pipe.basis.lambdas, pipe.covariance.P_N
    theta_star = critical_theta(lam, P_N)
    thetas = config.thetas or _default_thetas(theta_star)
    rows, last_ok = [], None
    for th in thetas:
        try:
            ev = qef_truncated(th, lam, P_N)
            series = qef_series(th, lam, P_N, tol=config.series_tol)
            rows.append((th, pipe.basis.count, ev.r_N, ev.log_Xi_N, series.converged, "ok"))
            if last_ok is None or th >= last_ok[0]:
                last_ok = (th, series)
        except RadiusExceeded as exc:
            rows.append((th, pipe.basis.count, exc.radius, math.nan, False, "RadiusExceeded"))
    report = {
        "N": pipe.basis.count,
        "T": config.T,
        "mu": pipe.model.mu,
        "nu": pipe.model.nu,
        "theta_star": theta_star,
        "rows": [dict(zip(QEF_COLUMNS, r)) for r in rows],
    }
    if last_ok is not None:
        th, s = last_ok
        report["increments"] = {"theta": th, "log_det_gamma1": s.log_det_gamma1,
                                "schur_log_dets": s.increments, "partial_log_Xi": s.partial_sums,
                                "converged": s.converged}
    flagged = sum(r[-1] != "ok" for r in rows)
    msg = [f"theta* = {theta_star:.17g}", f"{len(rows) - flagged} admissible rows, {flagged} flagged"]
    return CommandResult({"qef.csv": csv_text(QEF_COLUMNS, rows), "qef.json": json_text(report)}, msg)


def cmd_sweep(config: RunConfig) -> CommandResult:
    """Truncation sweep: one row per (theta, n) for n = 1..N."""
    pipe = Pipeline.from_config(config)
    lam, P_N = pipe.basis.lambdas, pipe.covariance.P_N
    theta_star = critical_theta(lam, P_N)
    thetas = config.thetas or _default_thetas(theta_star)
    rows = []
    for th in thetas:
        radii = [admissibility_radius(th, lam[:n], P_N[:2 * n, :2 * n]) for n in range(1, pipe.basis.count + 1)]
        n_ok = sum(r < 1.0 - 1e-12 for r in radii)
        partial, incs = [], []
        if n_ok:
            s = qef_series(th, lam, P_N, tol=0.0, N_max=n_ok)
            partial, incs = s.partial_sums, s.increments
        for n in range(1, pipe.basis.count + 1):
            if n <= n_ok:
                recent = [abs(0.5 * x) for x in incs[max(0, n - 4):n - 1]]
                settled = len(recent) == 3 and max(recent) < config.series_tol
                rows.append((th, n, radii[n - 1], partial[n - 1], settled, "ok"))
            else:
                rows.append((th, n, radii[n - 1], math.nan, False, "RadiusExceeded"))
    return CommandResult({"sweep.csv": csv_text(QEF_COLUMNS, rows)}, [f"theta* = {theta_star:.17g}"])


def run_verification(config: RunConfig) -> OracleReport:
    pipe = Pipeline.from_config(config)
    basis, quad = pipe.basis, config.quad
    rep = OracleReport()

    rep.upper("pr_residual", np.abs(pr_residual(pipe.model)).max(), 1e-12)
    # covariance is rebuilt here so that an inadmissible P_N is reported, not raised
    P = solve_lyapunov(pipe.canonical)
    rep.upper("lyapunov_residual", np.abs(lyapunov_residual(pipe.canonical, P)).max(), 1e-12)
    G = controllability_gramian(pipe.canonical.A_tilde, pipe.canonical.B_tilde)
    rep.upper("gramian_crosscheck", np.abs(G - P).max(), 1e-8)
    rep.upper("root_residual_pik", np.abs(basis.residual_pik).max(), 1e-12)

    gram = gram_matrix(basis, quad)
    rep.upper("gram_orthonormality", np.abs(gram - np.eye(basis.count)).max(), 1e-10)
    ident = cross_covariance_blocks(basis, np.eye(2), pipe.model.nu, quad)
    delta = np.zeros_like(ident)
    delta[np.arange(basis.count), np.arange(basis.count)] = np.eye(2)
    rep.upper("identity_blocks", np.abs(ident - delta).max(), 1e-7)

    n_nys = min(basis.count, 10, config.nystrom_n // 50)
    if n_nys >= 1:
        nys = nystrom_spectrum(pipe.model.mu, config.T, config.nystrom_n, n_nys, reference=basis,
                               n_functions=config.nystrom_functions)
        rep.upper("nystrom_eigenvalues", nys.eig_rel_errors.max(), NYSTROM_EIG_TOL,
                  f"n={config.nystrom_n}, k<={n_nys}, max relative error")
        rep.upper("nystrom_eigenfunctions", nys.fn_l2_distances.max(), NYSTROM_FN_TOL,
                  f"k<={nys.fn_l2_distances.size}, sign-aligned L2 distance")

    blocks = cross_covariance_blocks(basis, P, pipe.model.nu, quad)
    P_N = assemble_P_N(blocks)
    margin = admissibility_margin(P_N)
    rep.add("admissibility_min_eig", margin, -1e-9, 1e-9, margin >= -1e-9)

    lam = basis.lambdas
    mom = wick_moments(lam, P_N)
    ms = mean_square(lam, P_N)
    rep.add("wick_mean_vs_mean_square", mom.m1, ms, 1e-13, abs(mom.m1 - ms) <= 1e-13 * abs(ms))
    h = 1e-6
    slope = qef_truncated(h, lam, P_N).log_Xi_N / h
    rep.add("log_xi_slope_at_zero", slope, ms, 1e-5, abs(slope - ms) <= 1e-5 * abs(ms))
    theta = 1e-3 / lam[0]
    tay = taylor_match(theta, lam, P_N, lambda th: qef_truncated(th, lam, P_N).log_Xi_N)
    rep.upper("taylor_relative_residual", tay.relative_residual, 1e-5, f"theta={theta:.17g}")
    if tay.at_rounding_level:
        rep.add("taylor_cubic_ratio", tay.ratio, 8.0, 2.0, True,
                "remainder at rounding level (no fluctuations beyond second order); scaling not testable")
    else:
        rep.add("taylor_cubic_ratio", tay.ratio, 8.0, 2.0, 6.0 <= tay.ratio <= 10.0)
    return rep


def cmd_verify(config: RunConfig) -> CommandResult:
    rep = run_verification(config)
    msg = [f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.computed:.6g} (tol {c.tolerance:g})"
           for c in rep.checks]
    return CommandResult({"verify.json": json_text(rep.to_dict())}, msg,
                         EXIT_OK if rep.passed else EXIT_VERIFY)


COMMANDS = {
    "spectrum": cmd_spectrum,
    "covariance": cmd_covariance,
    "qef": cmd_qef,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="oqho", description=__doc__.split("\n")[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="TOML run configuration")
    p.add_argument("--out", default=".", help="output directory (default: current)")
    p.add_argument("--theta", help="theta list a,b,c or range start:stop:count[:log]")
    p.add_argument("--n", type=int, help="truncation order N")
    p.add_argument("--verbose", "-v", action="store_true")
    return p


def resolve_config(args) -> RunConfig:
    config = load_config(args.config) if args.config else RunConfig()
    over = {}
    if args.n is not None:
        over["N"] = args.n
    if args.theta is not None:
        over["thetas"] = parse_theta_spec(args.theta)
    return config.with_overrides(**over) if over else config


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = resolve_config(args)
        result = COMMANDS[args.command](config)
    except (ConfigError, ModelError) as exc:
        print(f"oqho: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"oqho: numerical failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OqhoError as exc:
        print(f"oqho: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    written = commit_files(args.out, result.files)
    for line in result.messages:
        print(line)
    for path in written:
        log.info("wrote %s", path)
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
