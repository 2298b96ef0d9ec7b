"""
Property suite behind ``crossflux verify``.

Each check returns a ``CheckResult`` with the measured value and its
tolerance; a run passes when every selected check passes.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .config import ExperimentConfig
from .continuation import StepControls, Termination, kernel_alignment, trace_mode_branch
from .enums import BranchSide, CheckGroup, Regime
from .errors import CrossfluxError, DomainError, NumericalError
from .mesh import assemble_jacobian, assemble_residual, grid_for
from .model import (
    ModelParams,
    constant_state,
    harnack_ratios,
    l2_bounds,
    nonexistence_check,
    potential_bound,
    reaction,
    semilinear_potentials,
)
from .report.base import Report
from .report.tables import branch_rows, read_branch_csv, read_state_csv, stored_branches
from .spectral import (
    critical_d2,
    discrete_critical_d2,
    kernel_ratios,
    limit_coefficients,
    mode_block,
    ray_critical_values,
    region_membership,
)
from .types import Gamma, Grid, StateVector

logger = logging.getLogger(__name__)

KERNEL_TOL = 1e-10
DET_TOL = 1e-12
ALIGNMENT_TOL = 0.999
MIN_ORDER = 1.8
KERNEL_GRID = 101
BOX_SLACK = 1e-9


@dataclass(frozen=True)
class CheckResult:
    name: str
    group: CheckGroup
    passed: bool
    value: float
    tolerance: float
    detail: str = ""


@dataclass
class VerificationReport(Report):
    """Pass/fail table of a verification run."""
    results: List[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def failures(self) -> List[CheckResult]:
        return [r for r in self.results if not r.passed]

    def _render_content(self, **kwargs: Any) -> str:
        width = max([len(r.name) for r in self.results] + [5])
        lines = [f"{'check':<{width}}  {'value':>12}  {'tolerance':>12}  result"]
        for r in self.results:
            verdict = "PASS" if r.passed else "FAIL"
            line = f"{r.name:<{width}}  {r.value:>12.4e}  {r.tolerance:>12.4e}  {verdict}"
            if r.detail:
                line += f"  {r.detail}"
            lines.append(line)
        return "\n".join(lines)

    def get_suffix(self) -> str:
        failed = len(self.failures())
        return f"{len(self.results) - failed} passed, {failed} failed"


# --- jacobian ---


def _finite_difference_jacobian(state: StateVector, d2: float, params: ModelParams, grid: Grid) -> np.ndarray:
    w = state.pack()
    size = w.size
    jacobian = np.empty((size, size))
    for k in range(size):
        step = 1e-6 * max(1.0, abs(w[k]))
        plus, minus = w.copy(), w.copy()
        plus[k] += step
        minus[k] -= step
        jacobian[:, k] = (assemble_residual(StateVector.from_packed(plus), d2, params, grid)
                          - assemble_residual(StateVector.from_packed(minus), d2, params, grid)) / (2.0 * step)
    return jacobian


def check_jacobian(params: ModelParams, grid: Grid, samples: int = 100, tol: float = 1e-6,
                   seed: int = 0) -> CheckResult:
    """Analytic Jacobian against central differences on random positive states."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        state = StateVector(rng.uniform(0.05, 2.0, grid.n), rng.uniform(0.05, 2.0, grid.n))
        d2 = float(rng.uniform(0.001, 0.1))
        exact = assemble_jacobian(state, d2, params, grid).to_dense()
        approx = _finite_difference_jacobian(state, d2, params, grid)
        worst = max(worst, float(np.max(np.abs(exact - approx)) / np.max(np.abs(exact))))
    return CheckResult("jacobian_vs_fd", CheckGroup.JACOBIAN, worst <= tol, worst, tol,
                       f"{samples} states, n={grid.n}")


# --- spectral ---


def check_determinant_signs(params: ModelParams, j_count: int = 20, d2_count: int = 20) -> CheckResult:
    """
    Sign of det A_j(d2) on a (j, d2) sample grid against the onset d_*^(j).

    Negative below the onset, positive above; positive everywhere outside R_j
    and for j = 0. The roots are real of opposite sign when det < 0 and have
    positive real parts when det > 0.
    """
    violations = 0
    d2_values = np.geomspace(1e-4, 1.0, d2_count)
    for j in range(0, j_count + 1):
        d_star = critical_d2(j, params) if j >= 1 else None
        for d2 in d2_values:
            data = mode_block(j, float(d2), params)
            if d_star is not None and abs(d2 - d_star) <= 1e-9 * d_star:
                continue
            expect_negative = d_star is not None and d2 < d_star
            if (data.det < 0.0) != expect_negative or data.det == 0.0 or not data.trace > 0.0:
                violations += 1
            elif data.det < 0.0:
                if abs(data.mu_minus.imag) > 0.0 or not data.mu_minus.real < 0.0 < data.mu_plus.real:
                    violations += 1
            elif not (data.mu_minus.real > 0.0 and data.mu_plus.real > 0.0):
                violations += 1
    return CheckResult(f"det_signs(alpha={params.alpha:g},beta={params.beta:g})", CheckGroup.DETERMINANT_SIGNS,
                       violations == 0, float(violations), 0.0, f"{j_count + 1}x{d2_count} samples")


def check_kernels(params: ModelParams, j_values: Sequence[int], grid: Optional[Grid] = None) -> List[CheckResult]:
    """
    Kernel and adjoint-kernel residuals at d_*^(j) and det A_j(d_*^(j)) = 0.

    With a grid, also the discrete kernel alignment and the observed order of
    the onset gap and of the smallest eigenvalue under one halving of h.
    """
    results = []
    for j in j_values:
        if not region_membership(j, params):
            continue
        d_star = critical_d2(j, params)
        data = mode_block(j, d_star, params)
        kappa, kappa_star = kernel_ratios(j, params)
        scale = float(np.max(np.abs(data.matrix)))
        residual = max(float(np.max(np.abs(data.matrix @ np.array([1.0, kappa])))),
                       float(np.max(np.abs(data.matrix.T @ np.array([1.0, kappa_star]))))) / scale
        results.append(CheckResult(f"kernel_residual_j{j}", CheckGroup.KERNELS, residual <= KERNEL_TOL,
                                   residual, KERNEL_TOL))
        m = data.matrix
        det_scale = abs(m[0, 0] * m[1, 1]) + abs(m[0, 1] * m[1, 0])
        relative_det = abs(data.det) / det_scale
        results.append(CheckResult(f"det_at_onset_j{j}", CheckGroup.KERNELS, relative_det <= DET_TOL,
                                   relative_det, DET_TOL))
        if grid is not None:
            check = kernel_alignment(j, params, grid)
            results.append(CheckResult(f"kernel_alignment_j{j}", CheckGroup.KERNELS,
                                       check.alignment > ALIGNMENT_TOL, check.alignment, ALIGNMENT_TOL,
                                       f"smallest eigenvalue {check.eigenvalue:.3e}"))
            results.extend(_refinement_orders(j, params, grid, d_star, check.eigenvalue))
    return results


def _refinement_orders(j: int, params: ModelParams, grid: Grid, d_star: float,
                       eigenvalue: float) -> List[CheckResult]:
    fine_grid = grid.refined()
    detail = f"n = {grid.n} -> {fine_grid.n}"
    gap = abs(discrete_critical_d2(j, params, grid) - d_star)
    fine_gap = abs(discrete_critical_d2(j, params, fine_grid) - d_star)
    fine_eigenvalue = kernel_alignment(j, params, fine_grid).eigenvalue
    results = []
    for name, coarse, fine in (("onset_gap", gap, fine_gap), ("kernel_eigenvalue", eigenvalue, fine_eigenvalue)):
        order = math.log2(coarse / fine) if coarse > 0.0 and fine > 0.0 else 0.0
        results.append(CheckResult(f"{name}_order_j{j}", CheckGroup.KERNELS, order >= MIN_ORDER,
                                   order, MIN_ORDER, detail))
    return results


def check_potentials(params: ModelParams, samples: int = 1000, seed: int = 0) -> List[CheckResult]:
    """Equilibrium of the reaction terms and the pointwise bound on the semilinear potentials."""
    cs = constant_state(params)
    f, g = reaction(cs.u_star, cs.v_star, params)
    equilibrium = max(abs(f), abs(g))
    rng = np.random.default_rng(seed)
    u = rng.uniform(0.0, 3.0, samples)
    v = rng.uniform(0.0, 3.0, samples)
    v1, v2 = semilinear_potentials(u, v, params)
    bound = potential_bound(u, v, params)
    excess = float(np.max(np.maximum(np.abs(v1), np.abs(v2)) / bound - 1.0))
    return [
        CheckResult("reaction_at_constant", CheckGroup.POTENTIALS, equilibrium <= 1e-14, equilibrium, 1e-14),
        CheckResult("potential_bound", CheckGroup.POTENTIALS, excess <= 1e-12, max(excess, 0.0), 1e-12,
                    f"{samples} samples"),
    ]


def check_limit_ray(params: ModelParams, ray: Tuple[float, float], scales: Sequence[float]) -> CheckResult:
    """Onset gaps |d_*^(1)(s ray) - d_{*,inf}^(1)| decrease strictly along the ray."""
    alpha0, beta0 = ray
    gamma = Gamma.from_flux(alpha0, beta0)
    if limit_coefficients(params, gamma).regime is not Regime.SCALAR_FIELD:
        return CheckResult("limit_ray_gaps", CheckGroup.LIMIT_RAY, True, 0.0, 0.0, "ray outside regime (ii)")
    gaps = [p.gap for p in ray_critical_values(params, ray, sorted(scales))]
    if any(gap is None for gap in gaps):
        return CheckResult("limit_ray_gaps", CheckGroup.LIMIT_RAY, False, float("nan"), 0.0,
                           "onset undefined along the ray")
    increases = sum(1 for a, b in zip(gaps, gaps[1:]) if not b < a)
    return CheckResult("limit_ray_gaps", CheckGroup.LIMIT_RAY, increases == 0, float(gaps[-1]), 0.0,
                       f"{increases} non-decreasing steps")


# --- stored branches ---


def audit_rows(rows: Sequence[Dict[str, Any]], params: ModelParams) -> Tuple[int, int]:
    """
    Count (box violations, nonexistence violations) over branch rows.

    Every row must satisfy the L2 bounds; every row of a system branch must
    pass the nonexistence check with its own sup-norm.
    """
    bound_u, bound_v = l2_bounds(params)
    box = 0
    nonexistence = 0
    for row in rows:
        if row["l2_u"] > bound_u * (1.0 + BOX_SLACK) or row["l2_v"] > bound_v * (1.0 + BOX_SLACK):
            box += 1
        if row["j_origin"] == "trivial" or str(row["j_origin"]).startswith("limit"):
            continue
        m_emp = max(row["sup_u"], row["sup_v"])
        if not nonexistence_check(params, m_emp, d2=row["d2"]):
            nonexistence += 1
    return box, nonexistence


def _flux_for(path: Path, params: ModelParams) -> ModelParams:
    """Parameters of a stored branch; a flux.json next to it overrides alpha and beta."""
    flux_file = path.parent / "flux.json"
    if flux_file.is_file():
        flux = json.loads(flux_file.read_text(encoding="utf-8"))
        return params.with_flux(float(flux["alpha"]), float(flux["beta"]))
    return params


def _harnack_defects(states: Sequence[StateVector]) -> int:
    """Number of states whose Harnack ratios are undefined or not finite."""
    defects = 0
    for state in states:
        try:
            ratios = harnack_ratios(state)
        except DomainError:
            defects += 1
            continue
        if not all(np.isfinite(ratios)):
            defects += 1
    return defects


def _stored_states(path: Path) -> List[StateVector]:
    """State snapshots written next to a branch CSV (``<stem>/state-*.csv``)."""
    directory = path.with_suffix("")
    if not directory.is_dir():
        return []
    return [read_state_csv(p)[0] for p in sorted(directory.glob("state-*.csv"))]


def check_branch_audit(config: ExperimentConfig, directory: Optional[Path] = None) -> List[CheckResult]:
    """
    L2-box, nonexistence and Harnack audits of stored branches below ``directory``.

    Box and nonexistence checks run on the branch CSV rows; Harnack ratios on
    the stored state snapshots. Without stored branches a short Gamma_1 branch
    is traced and audited.
    """
    params = config.params()
    audited: List[Tuple[str, List[Dict[str, Any]], ModelParams]] = []
    states: List[StateVector] = []
    if directory is not None and Path(directory).is_dir():
        for path in stored_branches(directory):
            try:
                audited.append((str(path), read_branch_csv(path), _flux_for(path, params)))
                states.extend(_stored_states(path))
            except CrossfluxError as e:
                return [CheckResult("branch_audit_read", CheckGroup.BRANCH_AUDIT, False, 1.0, 0.0, str(e))]
    if not audited:
        grid = grid_for(params, KERNEL_GRID)
        try:
            branch = trace_mode_branch(1, BranchSide.UPPER, params, grid,
                                       StepControls(compute_stability=False), Termination(max_points=15))
            audited.append(("traced gamma1", branch_rows(branch), params))
            states.extend(p.state for p in branch.points)
        except NumericalError as e:
            return [CheckResult("branch_audit_trace", CheckGroup.BRANCH_AUDIT, False, 1.0, 0.0, str(e))]
    box_total = 0
    nonexistence_total = 0
    rows_total = 0
    for _, rows, branch_params in audited:
        box, nonexistence = audit_rows(rows, branch_params)
        box_total += box
        nonexistence_total += nonexistence
        rows_total += len(rows)
    detail = f"{len(audited)} branches, {rows_total} points"
    harnack_total = _harnack_defects(states)
    return [
        CheckResult("l2_box", CheckGroup.BRANCH_AUDIT, box_total == 0, float(box_total), 0.0, detail),
        CheckResult("nonexistence_contrapositive", CheckGroup.BRANCH_AUDIT, nonexistence_total == 0,
                    float(nonexistence_total), 0.0, detail),
        CheckResult("harnack_finite", CheckGroup.BRANCH_AUDIT, harnack_total == 0, float(harnack_total), 0.0,
                    f"{len(states)} states"),
    ]


def run_verification(config: ExperimentConfig, groups: CheckGroup = CheckGroup.ALL,
                     directory: Optional[Path] = None) -> VerificationReport:
    """Run the selected check groups on the configured parameters."""
    params = config.params()
    v = config.verify
    report = VerificationReport()
    if CheckGroup.JACOBIAN in groups:
        report.results.append(check_jacobian(params, grid_for(params, v.n), v.random_states, v.jacobian_tol, v.seed))
    ray = (config.sweep.ray[0], config.sweep.ray[1])
    if CheckGroup.DETERMINANT_SIGNS in groups:
        flux_pairs = [(params.alpha, params.beta), (0.0, 0.0)] + [(s * ray[0], s * ray[1]) for s in config.sweep.scales]
        for alpha, beta in dict.fromkeys(flux_pairs):
            report.results.append(check_determinant_signs(params.with_flux(alpha, beta), v.sign_samples,
                                                          v.sign_samples))
    if CheckGroup.KERNELS in groups:
        report.results.extend(check_kernels(params, config.continuation.j_list, grid_for(params, KERNEL_GRID)))
    if CheckGroup.POTENTIALS in groups:
        report.results.extend(check_potentials(params, seed=v.seed))
    if CheckGroup.LIMIT_RAY in groups:
        report.results.append(check_limit_ray(params, ray, config.sweep.scales))
    if CheckGroup.BRANCH_AUDIT in groups:
        report.results.extend(check_branch_audit(config, directory))
    for r in report.failures():
        logger.warning("Check %s failed: value %.4e, tolerance %.4e %s", r.name, r.value, r.tolerance, r.detail)
    return report
