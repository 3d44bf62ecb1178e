import logging
from argparse import Namespace
from typing import Any, Dict, Optional

import numpy as np
from pydantic import ValidationError

from ..models.domain import DomainSpec
from ..models.options import SolveOptions, SyntheticSpec
from ..models.reports import CommandReport, SolveReport
from ..services import field_io
from ..services.dirichlet_solver import BOUNDARY_EXACT, boundary_sensitivity, solve
from ..services.fields import BoundaryData, MatrixField, MetricField, boundary_array, boundary_values, min_eigenvalue, sup_norm
from ..services.gauge_factorization import factorize_annulus, reconstruct, relative_curvature
from ..services.grid_domain import Grid, build_grid, parse_grid_size
from ..services.linear_elliptic import LinearizedContext, c0_certificate, solve_dirichlet_L
from ..services.operator_calculus import connection, flatness_residual, holomorphy_defect
from ..services.verification import max_principle_check, random_psd_field, scalar_oracle, synthetic_flat
from ..utils.config import settings
from ..utils.errors import (
    BranchAmbiguityError,
    FhmError,
    InputError,
    LinearSolverError,
    MonodromyError,
    NonConvergenceError,
    VerificationError,
)

logger = logging.getLogger(__name__)


def _matrix(M: np.ndarray) -> Dict[str, Any]:
    M = np.asarray(M, dtype=np.complex128)
    return {"re": M.real.tolist(), "im": M.imag.tolist()}


def _validation_message(error: ValidationError) -> str:
    first = error.errors()[0]
    where = ".".join(str(part) for part in first["loc"])
    return f"invalid {where or 'input'}: {first['msg']}"


class CommandHandler:
    """Runs one CLI command, prints the summary and writes the report"""

    def __init__(self):
        self.results: Dict[str, Any] = {}
        self.solve_report: Optional[SolveReport] = None

    def run(self, command: str, args: Namespace) -> int:
        """Dispatch a parsed command; returns the process exit code"""
        self.results, self.solve_report = {}, None
        handler = getattr(self, f"handle_{command.replace('-', '_')}")
        try:
            summary = handler(args)
            report = CommandReport(command=command, results=self.results, solve=self.solve_report)
            print(f"✓ {command}: {summary}")
        except ValidationError as e:
            report = self._failure(command, InputError(_validation_message(e)))
        except FhmError as e:
            report = self._failure(command, e)
        if getattr(args, "report", None):
            field_io.write_report(args.report, report)
        return report.exit_code

    def _failure(self, command: str, error: FhmError) -> CommandReport:
        self.results.update(self._error_details(error))
        if isinstance(error, NonConvergenceError) and isinstance(error.report, SolveReport):
            self.solve_report = error.report
        logger.debug("%s failed with %s", command, type(error).__name__)
        print(f"✗ {command}: {error.message}")
        return CommandReport(
            command=command,
            status="error",
            exit_code=error.exit_code,
            message=error.message,
            results=self.results,
            solve=self.solve_report,
        )

    def _error_details(self, error: FhmError) -> Dict[str, Any]:
        details: Dict[str, Any] = {"error": type(error).__name__}
        if isinstance(error, MonodromyError):
            details["monodromy_unitarity_defect"] = error.defect
        if isinstance(error, BranchAmbiguityError):
            details["eigenphases"] = error.phases
        if isinstance(error, LinearSolverError):
            details["residual_history"] = error.residual_history
        return details

    # Inputs

    def _grid(self, args: Namespace, domain: DomainSpec, n_ang: Optional[int] = None) -> Grid:
        if not args.grid:
            raise InputError("--grid RxA is required")
        n_rad, grid_n_ang = parse_grid_size(args.grid)
        if n_ang is not None and grid_n_ang != n_ang:
            raise InputError(f"--grid has {grid_n_ang} angular nodes but the boundary data has {n_ang} samples")
        return build_grid(domain, n_rad, grid_n_ang)

    def _boundary(self, path: Optional[str]) -> BoundaryData:
        if not path:
            raise InputError("--boundary is required")
        data = field_io.read_field(path)
        if not isinstance(data, BoundaryData):
            raise InputError(f"{path} holds a field, not boundary data")
        return data

    def _metric(self, path: Optional[str]) -> MetricField:
        if not path:
            raise InputError("--metric is required")
        field = field_io.read_field(path)
        if not isinstance(field, MatrixField):
            raise InputError(f"{path} holds boundary data, not a metric field")
        if isinstance(field, MetricField):
            return field
        return MetricField(grid=field.grid, values=field.values)

    def _options(self, args: Namespace) -> SolveOptions:
        return SolveOptions.from_settings(
            tol_newton=args.tol,
            t_step_init=args.t_step,
            max_newton=args.max_newton,
        )

    # Commands

    def handle_solve(self, args: Namespace) -> str:
        """Flat metric with the given boundary values"""
        F = self._boundary(args.boundary)
        grid = self._grid(args, F.domain, F.n_ang)
        P, report = solve(F, grid, self._options(args))
        self.solve_report = report
        self.results.update(
            grid=grid.describe(),
            dim=F.dim,
            flatness_residual=report.flatness_residual,
            boundary_mismatch=report.boundary_mismatch,
            min_eigenvalue=report.min_eigenvalue,
            stages=len(report.accepted_stages),
            newton_iterations=report.newton_iterations,
        )
        if args.sensitivity is not None:
            stability = boundary_sensitivity(F, grid, self._options(args), rel=args.sensitivity)
            self.results["sensitivity"] = stability.model_dump()
        if args.out:
            field_io.write_field(args.out, P)
        return (
            f"{len(report.accepted_stages)} stages, {report.newton_iterations} Newton steps, "
            f"residual {report.flatness_residual:.3e}"
        )

    def handle_factor(self, args: Namespace) -> str:
        """Annulus factorization P = K* exp(a log|w|^2) K"""
        P = self._metric(args.metric)
        fact = factorize_annulus(
            P,
            base_sigma=args.base_sigma,
            base_theta_index=args.base_theta,
            tol_unitary=args.tol_unitary,
        )
        self.results.update(
            exponents=fact.exponents.tolist(),
            a=_matrix(fact.a),
            monodromy=_matrix(fact.monodromy),
            monodromy_unitarity_defect=fact.monodromy_unitarity_defect,
            periodicity_defect=fact.periodicity_defect,
            holomorphy_defect=fact.holomorphy_defect,
            base_node=fact.base_node,
        )
        curvature = relative_curvature(P)
        self.results["relative_curvature"] = curvature
        if curvature > settings.TOL_FLAT_INPUT:
            raise VerificationError(
                f"metric is not flat: relative curvature {curvature:.3e} exceeds {settings.TOL_FLAT_INPUT:.1e}"
            )
        if args.out:
            field_io.write_factorization(args.out, fact)
        if args.tol is not None and fact.holomorphy_defect > args.tol:
            raise VerificationError(f"K holomorphy defect {fact.holomorphy_defect:.3e} exceeds {args.tol:.1e}")
        return (
            f"exponents {np.array2string(fact.exponents, precision=6)}, "
            f"monodromy defect {fact.monodromy_unitarity_defect:.3e}"
        )

    def handle_reconstruct(self, args: Namespace) -> str:
        """K* exp(a log|w|^2) K, compared with --metric when given"""
        if not args.factorization:
            raise InputError("--factorization is required")
        fact = field_io.read_factorization(args.factorization)
        P = reconstruct(fact, fact.grid)
        if args.out:
            field_io.write_field(args.out, P)
        if not args.metric:
            return f"reconstructed on {fact.grid.describe()}"
        reference = self._metric(args.metric)
        reference.check_compatible(P)
        error = sup_norm(P.values - reference.values) / sup_norm(reference)
        self.results["relative_error"] = error
        tol = settings.TOL_FACT if args.tol is None else args.tol
        if error > tol:
            raise VerificationError(f"reconstruction relative error {error:.3e} exceeds {tol:.1e}")
        return f"relative error {error:.3e}"

    def handle_verify(self, args: Namespace) -> str:
        """Flatness, positivity and (with --boundary) boundary agreement of a metric"""
        P = self._metric(args.metric)
        tol = settings.TOL_NEWTON if args.tol is None else args.tol
        residual = flatness_residual(P)
        self.results.update(
            flatness_residual=residual,
            holomorphy_defect=holomorphy_defect(connection(P)),
            min_eigenvalue=min_eigenvalue(P),
        )
        failures = []
        if residual > tol:
            failures.append(f"flatness residual {residual:.3e} exceeds {tol:.1e}")
        if args.boundary:
            F = self._boundary(args.boundary)
            target = boundary_array(P.grid, F)
            mismatch = sup_norm(boundary_values(P) - target)
            self.results["boundary_mismatch"] = mismatch
            if mismatch > BOUNDARY_EXACT * (1.0 + sup_norm(target)):
                failures.append(f"boundary mismatch {mismatch:.3e}")
        if failures:
            raise VerificationError("; ".join(failures))
        return f"flat to {residual:.3e}"

    def handle_generate(self, args: Namespace) -> str:
        """Synthetic flat metric G* exp(a log|w|^2) G and its boundary data"""
        if not (args.out or args.boundary):
            raise InputError("generate needs --out and/or --boundary")
        domain = DomainSpec.parse(args.domain)
        grid = self._grid(args, domain)
        if args.exponents:
            try:
                exponents = [float(part) for part in args.exponents.split(",")]
            except ValueError:
                raise InputError(f"invalid --exponents '{args.exponents}', expected comma-separated numbers")
        else:
            exponents = [0.0] * (args.dim or 1)
        spec = SyntheticSpec(
            dim=args.dim or len(exponents),
            degree=args.degree,
            scale=args.scale,
            exponents=exponents,
            seed=args.seed,
        )
        P, F, truth = synthetic_flat(spec, grid)
        self.results.update(
            exponents=sorted(spec.exponents),
            a_true=_matrix(truth.a_true),
            seed=spec.seed,
            flatness_residual=flatness_residual(P),
        )
        if args.out:
            field_io.write_field(args.out, P)
        if args.boundary:
            field_io.write_field(args.boundary, F)
        return f"n={spec.dim} degree {spec.degree} on {grid.describe()}"

    def handle_oracle_scalar(self, args: Namespace) -> str:
        """Independent scalar solve exp(u), compared with --metric when given"""
        F = self._boundary(args.boundary)
        grid = self._grid(args, F.domain, F.n_ang)
        P = scalar_oracle(F, grid)
        if args.out:
            field_io.write_field(args.out, P)
        if not args.metric:
            return f"scalar oracle on {grid.describe()}"
        solved = self._metric(args.metric)
        solved.check_compatible(P)
        gap = sup_norm(solved.values - P.values)
        self.results["oracle_gap"] = gap
        return f"sup gap to {args.metric}: {gap:.3e}"

    def handle_certify(self, args: Namespace) -> str:
        """Max principle and C0 certificate for a seeded psd right-hand side on a metric"""
        P = self._metric(args.metric)
        ctx = LinearizedContext(P)
        f1 = random_psd_field(P.grid, P.dim, np.random.default_rng(args.seed), zero_boundary=True)
        h = solve_dirichlet_L(ctx, f1)
        principle = max_principle_check(P, h, ctx)
        certificate = c0_certificate(ctx, h)
        self.results.update(max_principle=principle.model_dump(), certificate=certificate.model_dump())
        if not (principle.passes and certificate.passes):
            raise VerificationError(
                f"max principle gap {principle.gap:.3e}, certificate margin {certificate.worst_margin:.3e}"
            )
        return f"interior S max {principle.interior_max:.3e}, certificate margin {certificate.worst_margin:.3e}"
