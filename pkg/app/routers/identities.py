import logging
from typing import Dict, Optional, Tuple

import numpy as np

from ..dependencies import RealizationContext
from ..errors import GapClosureError
from ..model.lattice import (
    assemble_element,
    build_hamiltonian,
    covariance_defect,
    nilpotent_invertible_table,
    random_hopping_table,
)
from ..model.spectral import TraceRule, diagonalize, ito_inverse_rule_defect, ito_product_rule_defect, ito_trace_rule
from ..model.torus import (
    DIRECTIONS,
    AlgebraElement,
    cyclicity_defect,
    derivation_commutator_defect,
    element_norm,
    flux_step,
    inverse_derivative_defect,
    leibniz_defect,
    partial_integration_defect,
    positivity_margin,
    star_derivation_defect,
    trace_derivative_defect,
)
from ..routing import TaskResult, TaskRouter
from ..schemas import IdentityReport

logger = logging.getLogger(__name__)

router = TaskRouter()

# finite-volume checks and the Tolerances field each one is compared against
APPROXIMATE = {"ito_product_rule": "ito_blocks", "ito_inverse_rule": "ito_blocks", "ito_trace_rule": "ito_trace"}
NUMERICAL = ("spectral_unitarity", "spectral_reconstruction")


def _normalized(f: AlgebraElement) -> AlgebraElement:
    return f * (1.0 / element_norm(f))


def _random_element(ctx: RealizationContext, rng: np.random.Generator) -> AlgebraElement:
    cfg = ctx.config.identities
    table = random_hopping_table(ctx.geometry.orbitals, cfg.hopping_range, rng, hermitian=False)
    return _normalized(assemble_element(ctx.geometry, table, ctx.flux))


def _dense_element(ctx: RealizationContext, rng: np.random.Generator) -> AlgebraElement:
    n = ctx.geometry.dimension
    matrix = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return _normalized(AlgebraElement(ctx.geometry, ctx.flux, matrix))


def calculus_defects(ctx: RealizationContext) -> Dict[str, float]:
    """Largest defect of every calculus rule over all directions, on random short-range elements."""
    rng = ctx.rng()
    kind = ctx.config.identities.norm
    f, g = _random_element(ctx, rng), _random_element(ctx, rng)
    invertible = assemble_element(ctx.geometry, nilpotent_invertible_table(ctx.geometry.orbitals, rng), ctx.flux)
    dense_f, dense_g = _dense_element(ctx, rng), _dense_element(ctx, rng)

    defects = {
        "trace_derivative": max(trace_derivative_defect(f, j) for j in DIRECTIONS),
        "partial_integration": max(partial_integration_defect(f, g, j) for j in DIRECTIONS),
        "partial_integration_dense": max(partial_integration_defect(dense_f, dense_g, j) for j in DIRECTIONS),
        "leibniz": max(leibniz_defect(f, g, j, kind) for j in DIRECTIONS),
        "star_derivation": max(star_derivation_defect(f, j, kind) for j in DIRECTIONS),
        "derivations_commute": max(derivation_commutator_defect(f, j, k, kind) for j in DIRECTIONS for k in DIRECTIONS if j < k),
        "inverse_derivative": max(inverse_derivative_defect(invertible, j, kind) for j in DIRECTIONS),
        "cyclicity": cyclicity_defect(f, g),
        "positivity": max(0.0, -positivity_margin(f)),
    }
    return defects


def _trace_rule(ctx: RealizationContext, h: AlgebraElement) -> Optional[TraceRule]:
    """Trace rule along B3 over one admissible flux step, when that step is a genuine field."""
    step = flux_step(ctx.geometry, 3)
    if step >= 1:
        logger.info("no fractional admissible B3 on %s; skipping the trace rule", ctx.geometry.extents)
        return None
    h_field = build_hamiltonian(ctx.geometry, ctx.table_at(0.0), ctx.flux.with_component(3, step), ctx.field)
    try:
        return ito_trace_rule(h, h_field, ctx.config.fermi_level, 3)
    except GapClosureError as e:
        logger.warning("skipping the trace rule: %s", e.detail)
        return None


def model_defects(ctx: RealizationContext) -> Tuple[Dict[str, float], float, Optional[TraceRule]]:
    """Covariance, diagonalization and (at zero flux, in a gap) the Ito rules on the configured model."""
    h = ctx.hamiltonian()
    table = ctx.table_at(0.0)
    defects = {"covariance": max(covariance_defect(h, table, ctx.field, a) for a in ((1, 0, 0), (0, 1, 0), (0, 0, 1)))}
    data = diagonalize(h, ctx.config.fermi_level)
    defects.update({f"spectral_{k}": v for k, v in data.check(h).items()})
    trace = None
    if ctx.flux.is_zero and np.isfinite(data.gap) and data.gap > ctx.tolerances.gap_floor:
        fermi_level = ctx.config.fermi_level
        defects["ito_product_rule"] = max(ito_product_rule_defect(h, fermi_level, j) for j in DIRECTIONS)
        defects["ito_inverse_rule"] = max(ito_inverse_rule_defect(h, fermi_level, j) for j in DIRECTIONS)
        trace = _trace_rule(ctx, h)
        if trace is not None:
            defects["ito_trace_rule"] = trace.defect
    else:
        logger.info("skipping the Ito rules: flux %s, gap %.3g", ctx.flux.components, data.gap)
    return defects, data.gap, trace


@router.task("identities")
def identities(ctx: RealizationContext) -> TaskResult:
    checks, gap, trace = model_defects(ctx)
    defects = {**calculus_defects(ctx), **checks}
    tol = ctx.tolerances
    exact = {k: v for k, v in defects.items() if k not in APPROXIMATE and k not in NUMERICAL}
    if not ctx.geometry.odd_extents:
        exact.pop("partial_integration_dense")
    max_defect = max(exact.values())
    passed = (
        max_defect <= tol.identity
        and all(defects[k] <= getattr(tol, field) for k, field in APPROXIMATE.items() if k in defects)
        and all(defects[k] <= tol.residue for k in NUMERICAL)
    )
    if not passed:
        worst = max(exact, key=exact.get)
        logger.warning("identity checks failed; largest exact defect %s = %.3e", worst, exact[worst])
    observables = {**defects, "max_defect": max_defect}
    if trace is not None:
        observables.update(trace_finite_difference=trace.finite_difference, trace_ito=trace.ito_trace)
    report = IdentityReport(
        defects=defects,
        max_defect=max_defect,
        passed=passed,
        trace_rule=trace._asdict() if trace is not None else None,
    )
    return TaskResult(report=report, observables=observables, gap_min=gap)
