import logging

from ..dependencies import RealizationContext
from ..model.kspace import berry_phase_polarization, second_chern_4d
from ..model.response import calibrate_kappa, delta_alpha, polarization_report, second_chern_report
from ..routing import TaskResult, TaskRouter

logger = logging.getLogger(__name__)

router = TaskRouter()

# finite-volume C2 is only expected near the oracle integer
CALIBRATION_TOL = 0.05


def _oracle_available(ctx: RealizationContext) -> bool:
    if not ctx.config.oracle.enabled:
        return False
    if not ctx.flux.is_zero:
        logger.warning("the momentum-space oracle is defined at zero flux only; skipping it")
        return False
    return True


@router.task("polarization")
def polarization(ctx: RealizationContext) -> TaskResult:
    cfg = ctx.config
    path = ctx.path
    path.solve(ctx.workers)
    report = polarization_report(path, cfg.polarization_axes, cfg.path.quadrature, ctx.tolerances, ctx.workers)
    observables = {f"delta_P_{j}": v for j, v in zip(report.axes, report.delta_P)}
    if _oracle_available(ctx):
        axis = report.axes[0]
        report.oracle = berry_phase_polarization(
            ctx.table_at, axis=axis, fermi_level=cfg.fermi_level, nk=cfg.oracle.nk, times=path.times
        )
        observables[f"oracle_delta_P_{axis}"] = report.oracle
    return TaskResult(report=report, observables=observables, gap_min=min(report.gap_profile))


@router.task("delta_alpha")
def magnetoelectric(ctx: RealizationContext) -> TaskResult:
    path = ctx.path
    path.solve(ctx.workers)
    report = delta_alpha(path, ctx.config.path.quadrature, ctx.tolerances, ctx.workers)
    observables = {
        "delta_alpha": report.delta_alpha,
        "topological": report.delta_alpha_topological,
        "boundary": report.delta_alpha_boundary,
        **{f"delta_P_{j}": v for j, v in zip((1, 2, 3), report.delta_P)},
        "proof_identity_max": report.proof_identity_max,
    }
    return TaskResult(report=report, observables=observables, gap_min=min(report.gap_profile))


@router.task("chern2")
def chern2(ctx: RealizationContext) -> TaskResult:
    cfg = ctx.config
    loop = ctx.path
    loop.check_closed()
    loop.solve(ctx.workers)
    report = second_chern_report(loop, cfg.path.quadrature, ctx.tolerances, ctx.workers)
    observables = {
        "chern2": report.chern2,
        "deviation": report.deviation,
        "proof_identity_max": report.proof_identity_max,
    }
    if _oracle_available(ctx):
        report.oracle = second_chern_4d(ctx.table_at, cfg.fermi_level, tuple(cfg.oracle.grid))
        observables["oracle_chern2"] = report.oracle
        if ctx.field is None and round(report.oracle) != 0:
            fit = calibrate_kappa(report.chern2_raw, round(report.oracle), tol=CALIBRATION_TOL)
            observables["kappa_ratio"] = fit.ratio
        if round(report.oracle) != report.nearest_integer:
            logger.warning("real-space C2 rounds to %d, oracle gives %.4f", report.nearest_integer, report.oracle)
    return TaskResult(report=report, observables=observables, gap_min=min(report.gap_profile))
