"""
Spectral functions of assembled Hamiltonians.

Everything here starts from one full Hermitian diagonalization. The Fermi
projector, the sign function and the Ito derivative of the projector are then
assembled in the eigenbasis and transformed back.
"""

import logging
from dataclasses import dataclass
from typing import Dict, NamedTuple, Optional, Tuple

import numpy as np

from ..config import settings
from ..errors import ConfigError, GapClosureError, ResidueError
from .torus import (
    AlgebraElement,
    NormKind,
    commutator,
    cyclic,
    derive,
    element_norm,
    identity,
    trace_per_volume,
)

logger = logging.getLogger(__name__)

DEGENERACY_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class SpectralData:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    fermi_level: float

    @property
    def occupied(self) -> np.ndarray:
        return self.eigenvalues < self.fermi_level

    @property
    def n_occupied(self) -> int:
        return int(np.count_nonzero(self.occupied))

    @property
    def gap(self) -> float:
        below = self.eigenvalues[self.eigenvalues < self.fermi_level]
        above = self.eigenvalues[self.eigenvalues > self.fermi_level]
        if len(below) + len(above) < len(self.eigenvalues):
            return 0.0
        if len(below) == 0 or len(above) == 0:
            return float("inf")
        return float(above.min() - below.max())

    def check(self, h: AlgebraElement) -> Dict[str, float]:
        """Unitarity and reconstruction defects of the decomposition."""
        V, E = self.eigenvectors, self.eigenvalues
        unitarity = float(np.linalg.norm(V.conj().T @ V - np.eye(len(E)), 2))
        scale = max(float(np.linalg.norm(h.matrix, 2)), 1.0)
        reconstruction = float(np.linalg.norm(h.matrix - (V * E) @ V.conj().T, 2)) / scale
        return {"unitarity": unitarity, "reconstruction": reconstruction}

    def require_gap(self, window: float) -> None:
        distance = np.abs(self.eigenvalues - self.fermi_level)
        k = int(np.argmin(distance))
        if distance[k] < window:
            raise GapClosureError(
                f"eigenvalue {self.eigenvalues[k]:.3e} lies within {window:.1e} of the Fermi level {self.fermi_level}",
                eigenvalue=float(self.eigenvalues[k]),
                gap=0.0,
            )


def _canonical_phases(V: np.ndarray) -> np.ndarray:
    """Make the largest-modulus entry of every column real and positive."""
    pivots = np.argmax(np.abs(V), axis=0)
    phases = V[pivots, np.arange(V.shape[1])]
    return V * (np.abs(phases) / phases)[None, :]


def _order_degenerate(E: np.ndarray, V: np.ndarray) -> np.ndarray:
    order = np.arange(len(E))
    start = 0
    while start < len(E):
        stop = start + 1
        while stop < len(E) and E[stop] - E[start] < DEGENERACY_TOL:
            stop += 1
        if stop - start > 1:
            block = V[:, start:stop]
            keys = np.round(np.concatenate([block.real, block.imag]), 12)
            local = sorted(range(stop - start), key=lambda c: tuple(keys[:, c]))
            order[start:stop] = start + np.asarray(local)
        start = stop
    return order


def diagonalize(h: AlgebraElement, fermi_level: float = 0.0) -> SpectralData:
    E, V = np.linalg.eigh(h.matrix)
    V = _canonical_phases(V)
    V = V[:, _order_degenerate(E, V)]
    E.setflags(write=False)
    V.setflags(write=False)
    return SpectralData(E, V, float(fermi_level))


def _solve(h: AlgebraElement, fermi_level: float, spectral: Optional[SpectralData], window: Optional[float]) -> SpectralData:
    data = spectral if spectral is not None else diagonalize(h, fermi_level)
    data.require_gap(settings.tolerances().gap_window if window is None else window)
    return data


def projector_from_spectrum(h: AlgebraElement, data: SpectralData) -> AlgebraElement:
    Vo = data.eigenvectors[:, data.occupied]
    return h._like(Vo @ Vo.conj().T)


def fermi_projector(
    h: AlgebraElement,
    fermi_level: float = 0.0,
    *,
    spectral: Optional[SpectralData] = None,
    window: Optional[float] = None,
) -> AlgebraElement:
    """p = (1 - sign(h - e_F)) / 2."""
    return projector_from_spectrum(h, _solve(h, fermi_level, spectral, window))


def sign_function(
    h: AlgebraElement,
    fermi_level: float = 0.0,
    *,
    spectral: Optional[SpectralData] = None,
    window: Optional[float] = None,
) -> AlgebraElement:
    p = fermi_projector(h, fermi_level, spectral=spectral, window=window)
    return identity(h.geometry, h.flux) - 2.0 * p


def spectral_gap(h: AlgebraElement, fermi_level: float = 0.0, window: Optional[float] = None) -> float:
    E = np.linalg.eigvalsh(h.matrix)
    window = settings.tolerances().gap_window if window is None else window
    if np.any(np.abs(E - fermi_level) < window):
        return 0.0
    below, above = E[E < fermi_level], E[E > fermi_level]
    if len(below) == 0 or len(above) == 0:
        return float("inf")
    return float(above.min() - below.max())


def _in_eigenbasis(X: np.ndarray, V: np.ndarray) -> np.ndarray:
    return V.conj().T @ X @ V


def _residue_product(X: np.ndarray, Y: np.ndarray, occ: np.ndarray, E: np.ndarray) -> np.ndarray:
    """sum_b X_ab Y_bc I(a, b, c), with I the contour residue over the occupied spectrum.

    I vanishes unless exactly one of a, b, c sits on the other side of the gap,
    so every denominator is a cross-gap energy difference.
    """
    o, u = np.flatnonzero(occ), np.flatnonzero(~occ)
    G = 1.0 / (E[u][None, :] - E[o][:, None])
    Gt = G.T
    X_oo, X_ou, X_uo, X_uu = X[np.ix_(o, o)], X[np.ix_(o, u)], X[np.ix_(u, o)], X[np.ix_(u, u)]
    Y_oo, Y_ou, Y_uo, Y_uu = Y[np.ix_(o, o)], Y[np.ix_(o, u)], Y[np.ix_(u, o)], Y[np.ix_(u, u)]

    K = np.zeros_like(X)
    K[np.ix_(o, o)] = -(X_ou * G) @ (Y_uo * Gt)
    K[np.ix_(u, u)] = (X_uo * Gt) @ (Y_ou * G)
    K[np.ix_(o, u)] = G * (-X_oo @ (Y_ou * G) + (X_ou * G) @ Y_uu)
    K[np.ix_(u, o)] = Gt * (-(X_uo * Gt) @ Y_oo + X_uu @ (Y_uo * Gt))
    return K


def ito_projector_offdiag(
    h: AlgebraElement,
    fermi_level: float,
    j: int,
    *,
    dh: Optional[AlgebraElement] = None,
    spectral: Optional[SpectralData] = None,
    window: Optional[float] = None,
) -> AlgebraElement:
    """Ito derivative of the Fermi projector along B_j by residue calculus.

    Only the commutator term of the resolvent expansion contributes when the
    hoppings carry no explicit field dependence. ``dh`` adds the explicit
    first-order term for field-dependent hoppings.
    """
    data = _solve(h, fermi_level, spectral, window)
    V, E, occ = data.eigenvectors, data.eigenvalues, data.occupied
    if occ.all() or not occ.any():
        return h._like(np.zeros_like(h.matrix))

    A = _in_eigenbasis(derive(h, cyclic(j, 1)).matrix, V)
    B = _in_eigenbasis(derive(h, cyclic(j, 2)).matrix, V)
    dp = 0.5j * (_residue_product(A, B, occ, E) - _residue_product(B, A, occ, E))

    if dh is not None:
        o, u = np.flatnonzero(occ), np.flatnonzero(~occ)
        D = _in_eigenbasis(dh.matrix, V)
        denom = E[o][:, None] - E[u][None, :]
        dp[np.ix_(o, u)] += D[np.ix_(o, u)] / denom
        dp[np.ix_(u, o)] += D[np.ix_(u, o)] / denom.T

    return h._like(V @ dp @ V.conj().T)


def ito_projector_diag(p: AlgebraElement, j: int, tol: Optional[float] = None) -> Tuple[AlgebraElement, AlgebraElement]:
    """Diagonal blocks p(dp)p and (1-p)(dp)(1-p) of the Ito derivative, from p alone."""
    tol = settings.tolerances().idempotency if tol is None else tol
    residue = element_norm(p @ p - p)
    if residue > tol:
        raise ResidueError(f"input is not idempotent: |p*p - p| = {residue:.2e}", residue=residue, tolerance=tol)
    q = identity(p.geometry, p.flux) - p
    c = commutator(derive(p, cyclic(j, 1)), derive(p, cyclic(j, 2)))
    return -0.5j * (p @ c @ p), 0.5j * (q @ c @ q)


def _relative(defect: float, scale: float) -> float:
    return defect / scale if scale > settings.tolerances().residue else defect


def ito_inverse_rule_defect(h: AlgebraElement, fermi_level: float, j: int, kind: NormKind = "frobenius") -> float:
    """Relative defect of the inverse rule applied to the self-inverse sign function."""
    data = _solve(h, fermi_level, None, None)
    p = projector_from_spectrum(h, data)
    chi = identity(h.geometry, h.flux) - 2.0 * p
    dchi = -2.0 * ito_projector_offdiag(h, fermi_level, j, spectral=data)
    a = derive(chi, cyclic(j, 1)) @ chi
    b = derive(chi, cyclic(j, 2)) @ chi
    rhs = -(chi @ dchi @ chi) + 0.5j * (chi @ commutator(a, b))
    scale = element_norm(dchi, kind)
    return _relative(element_norm(dchi - rhs, kind), scale)


class TraceRule(NamedTuple):
    finite_difference: float
    ito_trace: float
    defect: float


def ito_trace_rule(h: AlgebraElement, h_field: AlgebraElement, fermi_level: float, j: int) -> TraceRule:
    """T(delta_j p) at the field of ``h`` against the flux finite difference of T(p).

    ``h_field`` is the same model with B_j raised by one admissible step. With
    B counted in flux quanta per plaquette the Ito derivative realizes
    (2 pi)^-1 d/dB_j, so the finite difference carries that factor.
    """
    step = float(h_field.flux.components[j - 1] - h.flux.components[j - 1])
    if step == 0.0:
        raise ConfigError(f"the two Hamiltonians share B{j}; the trace rule needs a flux step")
    data = _solve(h, fermi_level, None, None)
    shifted = _solve(h_field, fermi_level, None, None)
    density = (shifted.n_occupied - data.n_occupied) / h.geometry.volume
    finite = density / step / (2.0 * np.pi)
    ito = trace_per_volume(ito_projector_offdiag(h, fermi_level, j, spectral=data)).real
    defect = _relative(abs(finite - ito), max(abs(finite), abs(ito)))
    logger.debug("trace rule along B%d: finite difference %.6g, T(delta p) %.6g", j, finite, ito)
    return TraceRule(finite, ito, defect)


def ito_block_defect(h: AlgebraElement, fermi_level: float, j: int, kind: NormKind = "frobenius") -> Tuple[float, float]:
    """Relative defects of the resolvent diagonal blocks against the projector-only expressions."""
    data = _solve(h, fermi_level, None, None)
    p = projector_from_spectrum(h, data)
    q = identity(h.geometry, h.flux) - p
    dp = ito_projector_offdiag(h, fermi_level, j, spectral=data)
    top, bottom = ito_projector_diag(p, j)
    defects = []
    for block, expected in ((p @ dp @ p, top), (q @ dp @ q, bottom)):
        scale = element_norm(expected, kind)
        defect = element_norm(block - expected, kind)
        defects.append(_relative(defect, scale))
    return defects[0], defects[1]


def ito_product_rule_defect(h: AlgebraElement, fermi_level: float, j: int, kind: NormKind = "frobenius") -> float:
    """Relative defect of the product rule applied to p = p*p with the resolvent derivative."""
    data = _solve(h, fermi_level, None, None)
    p = projector_from_spectrum(h, data)
    dp = ito_projector_offdiag(h, fermi_level, j, spectral=data)
    c = commutator(derive(p, cyclic(j, 1)), derive(p, cyclic(j, 2)))
    rhs = dp @ p + p @ dp + 0.5j * c
    scale = element_norm(dp, kind)
    return _relative(element_norm(dp - rhs, kind), scale)
