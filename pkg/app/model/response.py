"""
Adiabatic-path observables.

Polarization change, the isotropic magneto-electric response and its
topological and boundary parts, real-space first and second Chern numbers,
and the Z2 workflow built on time reversal or inversion.

Normalization: both Chern numbers carry the constant 1/(2 pi) relative to the
raw trace-per-volume expressions; reported values are raw / kappa.
"""

import logging
import warnings
from typing import Callable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from scipy.integrate import simpson, trapezoid

from ..config import Tolerances, settings
from ..errors import ConfigError, ResidueError
from ..schemas import (
    Chern2Report,
    ConvergenceReport,
    PolarizationReport,
    Quadrature,
    ResponseReport,
    Z2Report,
)
from .lattice import SymmetrySpec, inversion, time_reversal
from .path import AdiabaticPath, derivative_weights, loop_difference
from .spectral import ito_projector_offdiag
from .torus import (
    DIRECTIONS,
    AlgebraElement,
    commutator,
    cyclic,
    derive,
    element_norm,
    identity,
    trace_of_product,
)

logger = logging.getLogger(__name__)

KAPPA = 1.0 / (2.0 * np.pi)
KAPPA_FIRST = 1.0 / (2.0 * np.pi)

# (a, b, c, d) with a < b, c < d, and the sign of the permutation (a, b, c, d)
_PAIRINGS = (
    ((0, 1), (2, 3), 1),
    ((0, 2), (1, 3), -1),
    ((0, 3), (1, 2), 1),
    ((1, 2), (0, 3), 1),
    ((1, 3), (0, 2), -1),
    ((2, 3), (0, 1), 1),
)


def _tolerances(tolerances: Optional[Tolerances]) -> Tolerances:
    return tolerances if tolerances is not None else settings.tolerances()


def _check_residue(value: complex, what: str, tol: float) -> float:
    if abs(value.imag) > tol:
        raise ResidueError(f"{what}: imaginary residue {abs(value.imag):.3e} exceeds {tol:.1e}", abs(value.imag), tol)
    return float(value.real)


def integrate(values: Sequence[float], times: np.ndarray, rule: str = "trapezoid") -> float:
    if rule == "simpson":
        return float(simpson(np.asarray(values), x=times))
    return float(trapezoid(np.asarray(values), x=times))


def _complex_integral(values: np.ndarray, times: np.ndarray, rule: str) -> complex:
    return complex(integrate(values.real, times, rule), integrate(values.imag, times, rule))


def time_derivative_projector(path: AdiabaticPath, k: int) -> AlgebraElement:
    """Finite-difference d p / dt at sample k, second order in the step."""
    if not path.closed and k in (0, len(path.times) - 1) and not path.stationary:
        logger.warning("%s: one-sided derivative at a non-stationary endpoint", path.label)
    idx, weights = derivative_weights(path.times, k, path.closed)
    out = None
    for i, w in zip(idx, weights):
        if w == 0.0:
            continue
        term = w * path.projector(path.times[i])
        out = term if out is None else out + term
    return out


def _polarization_terms(p: AlgebraElement, dtp: AlgebraElement, dps: Sequence[AlgebraElement]) -> List[complex]:
    pdt = p @ dtp
    return [1j * (trace_of_product(pdt, dp) - trace_of_product(p @ dp, dtp)) for dp in dps]


def _map_samples(path: AdiabaticPath, fn: Callable[[int], object], workers: int) -> list:
    indices = range(len(path.times))
    if workers > 1:
        return Parallel(n_jobs=workers, prefer="threads")(delayed(fn)(k) for k in indices)
    return [fn(k) for k in indices]


def polarization_change(
    path: AdiabaticPath,
    j: int,
    rule: str = "trapezoid",
    tolerances: Optional[Tolerances] = None,
    workers: int = 1,
) -> float:
    """i * int dt T(p [d_t p, d_j p])."""
    return polarization_report(path, (j,), rule, tolerances, workers).delta_P[0]


def polarization_report(
    path: AdiabaticPath,
    axes: Sequence[int] = DIRECTIONS,
    rule: str = "trapezoid",
    tolerances: Optional[Tolerances] = None,
    workers: int = 1,
) -> PolarizationReport:
    tol = _tolerances(tolerances)
    gaps = path.gap_profile(tol.gap_floor)

    def sample(k):
        p = path.projector(path.times[k])
        return _polarization_terms(p, time_derivative_projector(path, k), [derive(p, j) for j in axes])

    values = np.array(_map_samples(path, sample, workers))
    integrals = [_complex_integral(values[:, a], path.times, rule) for a in range(len(axes))]
    residue = max(abs(v.imag) for v in integrals)
    delta_P = [_check_residue(v, f"polarization along x{j}", tol.residue) for v, j in zip(integrals, axes)]
    return PolarizationReport(
        delta_P=delta_P,
        axes=list(axes),
        imaginary_residue=residue,
        gap_profile=gaps,
        quadrature=Quadrature(rule=rule, n_samples=len(path.times)),
    )


def _derivation_commutators(p: AlgebraElement, dtp: AlgebraElement, dps: Optional[Sequence[AlgebraElement]] = None):
    D = [dtp] + list(dps if dps is not None else (derive(p, j) for j in DIRECTIONS))
    return {(a, b): commutator(D[a], D[b]) for a in range(4) for b in range(a + 1, 4)}


def _chern2_raw(p: AlgebraElement, C) -> complex:
    total = 0.0j
    for ab, cd, sign in _PAIRINGS:
        total += sign * trace_of_product(p @ C[ab], C[cd])
    return total


def chern2_integrand(
    p: AlgebraElement,
    dtp: AlgebraElement,
    tolerances: Optional[Tolerances] = None,
    dps: Optional[Sequence[AlgebraElement]] = None,
) -> float:
    """eps_{abcd} T(p d_a p d_b p d_c p d_d p) over (t, x1, x2, x3).

    Pairing antisymmetric slots reduces the 24 words to six traces
    T(p [D_a, D_b] [D_c, D_d]).
    """
    value = _chern2_raw(p, _derivation_commutators(p, dtp, dps))
    return _check_residue(value, "second Chern integrand", _tolerances(tolerances).residue)


def _proof_identity(C) -> float:
    total = trace_of_product(C[(0, 1)], C[(2, 3)]) - trace_of_product(C[(0, 2)], C[(1, 3)]) + trace_of_product(C[(0, 3)], C[(1, 2)])
    return abs(total)


def proof_identity_defect(p: AlgebraElement, dtp: AlgebraElement) -> float:
    """|sum_j T([d_t p, d_j p] [d_{j+1} p, d_{j+2} p])|; vanishes by trace cyclicity."""
    return _proof_identity(_derivation_commutators(p, dtp))


def second_derivative_cancellation(p: AlgebraElement, dtp: AlgebraElement) -> float:
    """Norm of sum_j p([d_{j+1} d_t p, d_{j+2} d_j p] - [d_{j+2} d_t p, d_{j+1} d_j p])."""
    total = None
    for j in DIRECTIONS:
        j1, j2 = cyclic(j, 1), cyclic(j, 2)
        dj = derive(p, j)
        term = commutator(derive(dtp, j1), derive(dj, j2)) - commutator(derive(dtp, j2), derive(dj, j1))
        total = term if total is None else total + term
    return element_norm(p @ total)


def _chern2_profile(path: AdiabaticPath, workers: int) -> Tuple[np.ndarray, float]:
    """Raw integrand at every sample and the largest proof-identity defect seen."""

    def sample(k):
        p = path.projector(path.times[k])
        C = _derivation_commutators(p, time_derivative_projector(path, k))
        return _chern2_raw(p, C), _proof_identity(C)

    values, defects = zip(*_map_samples(path, sample, workers))
    return np.array(values), max(defects)


def _half_integral(values: np.ndarray, path: AdiabaticPath, rule: str, what: str, tol: Tolerances) -> Tuple[float, float]:
    total = 0.5 * _complex_integral(values, path.times, rule)
    return _check_residue(total, what, tol.residue), abs(total.imag)


def boundary_term(h: AlgebraElement, p: AlgebraElement, fermi_level: float, tol: Tolerances) -> complex:
    """(i/3) sum_j T(chi(h - e_F) d_j p delta_j p)."""
    chi = identity(p.geometry, p.flux) - 2.0 * p
    total = 0.0j
    for j in DIRECTIONS:
        dp = ito_projector_offdiag(h, fermi_level, j, window=tol.gap_window)
        total += trace_of_product(chi @ derive(p, j), dp)
    return 1j * total / 3.0


def delta_alpha(
    path: AdiabaticPath,
    rule: str = "trapezoid",
    tolerances: Optional[Tolerances] = None,
    workers: int = 1,
) -> ResponseReport:
    tol = _tolerances(tolerances)
    if path.closed:
        raise ConfigError(f"{path.label}: delta_alpha needs an open path")
    if not path.stationary:
        raise ConfigError(f"{path.label}: the Hamiltonian must be stationary at both ends")
    gaps = path.gap_profile(tol.gap_floor)

    def sample(k):
        p = path.projector(path.times[k])
        dtp = time_derivative_projector(path, k)
        dps = [derive(p, j) for j in DIRECTIONS]
        C = _derivation_commutators(p, dtp, dps)
        return [_chern2_raw(p, C), _proof_identity(C)] + _polarization_terms(p, dtp, dps)

    values = np.array(_map_samples(path, sample, workers))
    proof_max = float(values[:, 1].real.max())
    topological, residue = _half_integral(values[:, 0], path, rule, "topological part", tol)
    delta_P = []
    for a in range(3):
        v = _complex_integral(values[:, a + 2], path.times, rule)
        delta_P.append(_check_residue(v, f"polarization along x{a + 1}", tol.residue))

    ends = []
    for t in (1.0, 0.0):
        ends.append(boundary_term(path.hamiltonian(t), path.projector(t), path.fermi_level, tol))
    boundary = _check_residue(ends[0] - ends[1], "boundary part", tol.residue)

    raw = topological + boundary
    logger.debug("%s: topological %.6g boundary %.6g (raw)", path.label, topological, boundary)
    return ResponseReport(
        delta_P=delta_P,
        delta_alpha=raw / KAPPA,
        delta_alpha_topological=topological / KAPPA,
        delta_alpha_boundary=boundary / KAPPA,
        delta_alpha_raw=raw,
        chern2=2.0 * topological / KAPPA,
        gap_profile=gaps,
        quadrature=Quadrature(rule=rule, n_samples=len(path.times)),
        imaginary_residue=max(residue, abs((ends[0] - ends[1]).imag)),
        proof_identity_max=proof_max,
    )


def second_chern_report(
    loop: AdiabaticPath,
    rule: str = "trapezoid",
    tolerances: Optional[Tolerances] = None,
    workers: int = 1,
) -> Chern2Report:
    tol = _tolerances(tolerances)
    if not loop.closed:
        raise ConfigError(f"{loop.label}: the second Chern number needs a closed loop")
    gaps = loop.gap_profile(tol.gap_floor)
    profile, proof_max = _chern2_profile(loop, workers)
    raw, residue = _half_integral(profile, loop, rule, "second Chern number", tol)
    value = raw / KAPPA
    nearest = int(np.rint(value))
    return Chern2Report(
        chern2=value,
        chern2_raw=raw,
        nearest_integer=nearest,
        deviation=abs(value - nearest),
        gap_profile=gaps,
        quadrature=Quadrature(rule=rule, n_samples=len(loop.times)),
        imaginary_residue=residue,
        proof_identity_max=proof_max,
    )


def second_chern(loop: AdiabaticPath, rule: str = "trapezoid", tolerances: Optional[Tolerances] = None, workers: int = 1) -> float:
    return second_chern_report(loop, rule, tolerances, workers).chern2


def first_chern(p: AlgebraElement, j: int, k: int, tolerances: Optional[Tolerances] = None) -> float:
    """-i T(p [d_j p, d_k p]) / kappa_1."""
    value = -1j * (trace_of_product(p @ derive(p, j), derive(p, k)) - trace_of_product(p @ derive(p, k), derive(p, j)))
    return _check_residue(value, "first Chern number", _tolerances(tolerances).residue) / KAPPA_FIRST


def _z2(
    path: AdiabaticPath,
    image: AdiabaticPath,
    symmetry_map: Callable[[AlgebraElement], AlgebraElement],
    kind: str,
    rule: str,
    tol: Tolerances,
    workers: int,
    endpoint_tol: float,
) -> Z2Report:
    defects = []
    for t in (0.0, 1.0):
        h = path.hamiltonian(t)
        defects.append(element_norm(symmetry_map(h) - h))
    if max(defects) > endpoint_tol:
        raise ConfigError(f"{path.label}: endpoints are not symmetric, defects {defects}")
    loop = loop_difference(path, image)
    report = second_chern_report(loop, rule, tol, workers)
    alpha = 0.5 * report.chern2
    twice = 2.0 * alpha
    nearest = int(np.rint(twice))
    return Z2Report(
        symmetry=kind,
        delta_alpha=alpha,
        chern2=report.chern2,
        classification="half-integer" if nearest % 2 else "integer",
        twice_alpha_distance=abs(twice - nearest),
        endpoint_defects=defects,
        gap_profile=report.gap_profile,
        proof_identity_max=report.proof_identity_max,
    )


def z2_from_trs_pair(
    path: AdiabaticPath,
    sym: SymmetrySpec,
    rule: str = "trapezoid",
    tolerances: Optional[Tolerances] = None,
    workers: int = 1,
    endpoint_tol: float = 1e-10,
) -> Z2Report:
    """Delta alpha = C2[path - T(path)] / 2 and its integer / half-integer class."""
    if not path.hamiltonian(0.0).flux.is_zero:
        raise ConfigError("time reversal is defined at zero flux only")
    return _z2(
        path,
        path.time_reversed(sym),
        lambda f: time_reversal(f, sym),
        "time_reversal",
        rule,
        _tolerances(tolerances),
        workers,
        endpoint_tol,
    )


def z2_from_inversion_pair(
    path: AdiabaticPath,
    sym: SymmetrySpec,
    rule: str = "trapezoid",
    tolerances: Optional[Tolerances] = None,
    workers: int = 1,
    endpoint_tol: float = 1e-10,
) -> Z2Report:
    return _z2(
        path,
        path.inverted(sym),
        lambda f: inversion(f, sym),
        "inversion",
        rule,
        _tolerances(tolerances),
        workers,
        endpoint_tol,
    )


def convergence_report(path: AdiabaticPath, observable: Callable[[AdiabaticPath], float]) -> ConvergenceReport:
    """Observable at N, N/2 and (when possible) N/4 intervals, plus the Richardson ratio."""
    n = len(path.times) - 1
    levels = [path]
    for stride in (2, 4):
        if n % stride == 0 and n // stride >= 2:
            levels.append(path.subsampled(stride))
    values = [observable(level) for level in levels]
    ratio = None
    if len(values) == 3 and values[0] != values[1]:
        ratio = (values[2] - values[1]) / (values[1] - values[0])
    return ConvergenceReport(n_samples=[len(level.times) for level in levels], values=values, richardson_ratio=ratio)


class Calibration(NamedTuple):
    fitted: float
    frozen: float
    ratio: float


def calibrate_kappa(real_raw: float, oracle_value: float, frozen: float = KAPPA, tol: float = 1e-10) -> Calibration:
    """Fit kappa = raw / oracle and compare it with the frozen constant."""
    if oracle_value == 0:
        raise ConfigError("cannot calibrate against a vanishing oracle value")
    fitted = real_raw / oracle_value
    ratio = fitted / frozen
    if abs(ratio - 1.0) > tol:
        logger.warning("fitted normalization %.12g differs from %.12g by ratio %.6g", fitted, frozen, ratio)
        warnings.warn(f"fitted normalization differs from the frozen constant by ratio {ratio:.6g}", RuntimeWarning, stacklevel=2)
    return Calibration(fitted, frozen, ratio)
