from ..dependencies import RealizationContext
from ..model.response import z2_from_inversion_pair, z2_from_trs_pair
from ..routing import TaskResult, TaskRouter

router = TaskRouter()


@router.task("z2")
def z2(ctx: RealizationContext) -> TaskResult:
    cfg = ctx.config
    pair = z2_from_trs_pair if cfg.z2_symmetry == "time_reversal" else z2_from_inversion_pair
    ctx.path.solve(ctx.workers)
    report = pair(ctx.path, ctx.symmetry, cfg.path.quadrature, ctx.tolerances, ctx.workers)
    observables = {
        "delta_alpha": report.delta_alpha,
        "chern2": report.chern2,
        "twice_alpha_distance": report.twice_alpha_distance,
        "half_integer": float(report.classification == "half-integer"),
        "proof_identity_max": report.proof_identity_max,
    }
    return TaskResult(report=report, observables=observables, gap_min=min(report.gap_profile))
