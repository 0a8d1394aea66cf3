"""
Clean-limit momentum-space oracle.

The same ``HoppingTable`` that feeds the real-space builder is Fourier
transformed with h(k) = sum_d t_d exp(i k.d). The oracle values here fix the
sign and normalization of every real-space invariant.
"""

import itertools
import logging
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from ..errors import GapClosureError
from .lattice import HoppingTable

logger = logging.getLogger(__name__)

ModelPath = Callable[[float], HoppingTable]


@dataclass(frozen=True, eq=False)
class BlochModel:
    hops: HoppingTable
    grid: Tuple[int, int, int] = (8, 8, 8)

    @property
    def orbitals(self) -> int:
        return self.hops.orbitals


ModelLike = Union[BlochModel, HoppingTable]


def _table(model: ModelLike) -> HoppingTable:
    return model.hops if isinstance(model, BlochModel) else model


def _arrays(hops: HoppingTable) -> Tuple[np.ndarray, np.ndarray]:
    keys = sorted(hops.entries)
    return np.array(keys, dtype=float), np.stack([hops.entries[d] for d in keys])


def bloch_matrices(model: ModelLike, ks: np.ndarray) -> np.ndarray:
    """h(k) for an array of momenta of shape (..., 3); returns (..., D, D)."""
    ds, ts = _arrays(_table(model))
    phases = np.exp(1j * np.asarray(ks) @ ds.T)
    return np.einsum("...d,dab->...ab", phases, ts)


def bloch_gradient(model: ModelLike, ks: np.ndarray, j: int) -> np.ndarray:
    """d h(k) / d k_j."""
    ds, ts = _arrays(_table(model))
    phases = 1j * ds[:, j - 1] * np.exp(1j * np.asarray(ks) @ ds.T)
    return np.einsum("...d,dab->...ab", phases, ts)


def bloch_hamiltonian(model: ModelLike, k: Sequence[float]) -> np.ndarray:
    return bloch_matrices(model, np.asarray(k, dtype=float))


def momentum_grid(sizes: Sequence[int]) -> np.ndarray:
    """Momenta 2 pi m / n on a uniform grid; shape (n1, n2, n3, 3)."""
    axes = [2 * np.pi * np.arange(n) / n for n in sizes]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)


def bloch_spectrum(model: ModelLike, extents: Sequence[int]) -> np.ndarray:
    """Sorted eigenvalues of h(k) over the momenta commensurate with the torus."""
    H = bloch_matrices(model, momentum_grid(extents).reshape(-1, 3))
    return np.sort(np.linalg.eigvalsh(H).ravel())


def _occupied_frames(H: np.ndarray, fermi_level: float) -> Tuple[np.ndarray, np.ndarray, int]:
    E, V = np.linalg.eigh(H)
    counts = np.count_nonzero(E < fermi_level, axis=-1)
    n_occ = int(counts.flat[0])
    if np.any(counts != n_occ) or np.any(np.abs(E - fermi_level) < 1e-10):
        k = np.unravel_index(np.argmin(np.abs(E - fermi_level)), E.shape)
        raise GapClosureError(
            f"band touches the Fermi level {fermi_level} on the momentum grid", eigenvalue=float(E[k]), gap=0.0
        )
    return E, V, n_occ


def band_projector(model: ModelLike, k: Sequence[float], fermi_level: float = 0.0) -> np.ndarray:
    E, V = np.linalg.eigh(bloch_hamiltonian(model, k))
    Vo = V[:, E < fermi_level]
    return Vo @ Vo.conj().T


def band_gap(model: ModelLike, fermi_level: float = 0.0, grid: Optional[Sequence[int]] = None) -> float:
    grid = grid or (model.grid if isinstance(model, BlochModel) else (16, 16, 16))
    E = np.linalg.eigvalsh(bloch_matrices(model, momentum_grid(grid).reshape(-1, 3)))
    below, above = E[E < fermi_level], E[E > fermi_level]
    if len(below) == 0 or len(above) == 0:
        return float("inf")
    return float(above.min() - below.max())


def _link(Va: np.ndarray, Vb: np.ndarray) -> np.ndarray:
    overlap = np.linalg.det(np.swapaxes(Va.conj(), -1, -2) @ Vb)
    return overlap / np.abs(overlap)


def first_chern_fhs(
    model: ModelLike,
    plane: Tuple[int, int] = (1, 2),
    fermi_level: float = 0.0,
    n: int = 16,
    k_perp: float = 0.0,
) -> int:
    """Plaquette Chern number of the occupied bands in the (k_a, k_b) plane."""
    a, b = plane
    (c,) = {1, 2, 3} - {a, b}
    axis = 2 * np.pi * np.arange(n) / n
    ka, kb = np.meshgrid(axis, axis, indexing="ij")
    ks = np.zeros((n, n, 3))
    ks[..., a - 1], ks[..., b - 1], ks[..., c - 1] = ka, kb, k_perp
    _, V, n_occ = _occupied_frames(bloch_matrices(model, ks), fermi_level)
    Vo = V[..., :n_occ]
    Ua = _link(Vo, np.roll(Vo, -1, axis=0))
    Ub = _link(Vo, np.roll(Vo, -1, axis=1))
    F = np.angle(Ua * np.roll(Ub, -1, axis=0) * np.roll(Ua, -1, axis=1).conj() * Ub.conj())
    chern = F.sum() / (2 * np.pi)
    logger.debug("plaquette Chern sum %.12f on %dx%d grid", chern, n, n)
    return int(np.rint(chern))


def _projector_derivative(E: np.ndarray, V: np.ndarray, n_occ: int, dH: np.ndarray) -> np.ndarray:
    Vh = np.swapaxes(V.conj(), -1, -2)
    X = Vh @ dH @ V
    Eo, Eu = E[..., :n_occ], E[..., n_occ:]
    denom = Eo[..., :, None] - Eu[..., None, :]
    out = np.zeros_like(X)
    out[..., :n_occ, n_occ:] = X[..., :n_occ, n_occ:] / denom
    out[..., n_occ:, :n_occ] = X[..., n_occ:, :n_occ] / np.swapaxes(denom, -1, -2)
    return V @ out @ Vh


def _permutation_sign(perm: Tuple[int, ...]) -> int:
    sign = 1
    perm = list(perm)
    for i in range(len(perm)):
        while perm[i] != i:
            j = perm[i]
            perm[i], perm[j] = perm[j], perm[i]
            sign = -sign
    return sign


def second_chern_4d(
    model_path: ModelPath,
    fermi_level: float = 0.0,
    grid: Tuple[int, int] = (12, 12),
    step: float = 1e-5,
) -> float:
    """C2 = -(1/8 pi^2) int dt d^3k eps tr(P dP dP dP dP) over the (t, k1, k2, k3) torus.

    ``model_path`` must be periodic in t with period 1.
    """
    nt, nk = grid
    ks = momentum_grid((nk, nk, nk)).reshape(-1, 3)
    perms = [(p, _permutation_sign(p)) for p in itertools.permutations(range(4))]
    total = 0.0 + 0.0j
    for t in np.arange(nt) / nt:
        hops = model_path(t)
        H = bloch_matrices(hops, ks)
        E, V, n_occ = _occupied_frames(H, fermi_level)
        Vo = V[..., :n_occ]
        P = Vo @ np.swapaxes(Vo.conj(), -1, -2)
        dt_H = (bloch_matrices(model_path(t + step), ks) - bloch_matrices(model_path(t - step), ks)) / (2 * step)
        dH = [dt_H] + [bloch_gradient(hops, ks, j) for j in (1, 2, 3)]
        dP = [_projector_derivative(E, V, n_occ, X) for X in dH]
        for (i0, i1, i2, i3), sign in perms:
            total += sign * np.trace(P @ dP[i0] @ dP[i1] @ dP[i2] @ dP[i3], axis1=-2, axis2=-1).sum()
    integral = total / (nt * len(ks)) * (2 * np.pi) ** 3
    if abs(integral.imag) > 1e-8 * max(1.0, abs(integral.real)):
        logger.warning("4D oracle integrand has imaginary part %.3e", integral.imag)
    return float(-integral.real / (8 * np.pi**2))


def berry_phase_polarization(
    model_path: ModelPath,
    axis: int = 1,
    fermi_level: float = 0.0,
    nk: int = 64,
    times: Optional[Iterable[float]] = None,
    n_perp: int = 1,
) -> float:
    """Charge pumped along ``axis`` from Wilson-loop phases, summing wrapped increments over t."""
    times = np.linspace(0.0, 1.0, 41) if times is None else np.asarray(list(times), dtype=float)
    others = [j for j in (1, 2, 3) if j != axis]
    kline = 2 * np.pi * np.arange(nk) / nk
    perp = 2 * np.pi * np.arange(n_perp) / n_perp
    p1, p2 = np.meshgrid(perp, perp, indexing="ij")
    ks = np.zeros((n_perp, n_perp, nk, 3))
    ks[..., axis - 1] = kline
    ks[..., others[0] - 1] = p1[..., None]
    ks[..., others[1] - 1] = p2[..., None]

    previous = None
    pumped = np.zeros((n_perp, n_perp))
    for t in times:
        _, V, n_occ = _occupied_frames(bloch_matrices(model_path(t), ks), fermi_level)
        Vo = V[..., :n_occ]
        phase = np.angle(np.prod(_link(Vo, np.roll(Vo, -1, axis=2)), axis=2)) / (2 * np.pi)
        if previous is not None:
            step = phase - previous
            pumped += step - np.rint(step)
        previous = phase
    return float(pumped.mean())
