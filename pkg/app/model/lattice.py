"""
Disordered, magnetically twisted lattice Hamiltonians on the finite torus.

A ``HoppingTable`` maps displacement vectors to D x D hopping matrices. The
Hamiltonian is assembled from the canonical half of the table (d = 0 and the
lexicographically positive displacements); every partner entry is filled in as
the exact conjugate transpose, so the output is Hermitian bit for bit.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from ..errors import ConfigError, RangeError
from .torus import AlgebraElement, FluxTensor, NormKind, TorusGeometry, element_norm

logger = logging.getLogger(__name__)

Displacement = Tuple[int, int, int]

HERMITICITY_TOL = 1e-14


def is_canonical(d: Sequence[int]) -> bool:
    """True for d = 0 and for displacements whose first nonzero component is positive."""
    for x in d:
        if x != 0:
            return x > 0
    return True


def _neg(d: Displacement) -> Displacement:
    return (-d[0], -d[1], -d[2])


@dataclass(frozen=True, eq=False)
class HoppingTable:
    entries: Mapping[Displacement, np.ndarray]
    hermitian: bool = True

    def __post_init__(self):
        normalized: Dict[Displacement, np.ndarray] = {}
        orbitals = None
        for d, t in self.entries.items():
            key = tuple(int(x) for x in d)
            if len(key) != 3:
                raise ConfigError(f"displacement {d} is not a 3-vector")
            m = np.array(t, dtype=np.complex128)
            if m.ndim == 0:
                m = m.reshape(1, 1)
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise ConfigError(f"hopping matrix at {key} is not square: shape {m.shape}")
            if orbitals is None:
                orbitals = m.shape[0]
            elif m.shape[0] != orbitals:
                raise ConfigError(f"hopping matrix at {key} has {m.shape[0]} orbitals, expected {orbitals}")
            m.setflags(write=False)
            normalized[key] = normalized[key] + m if key in normalized else m
        if orbitals is None:
            raise ConfigError("hopping table is empty; use atomic_table for a pure on-site model")
        object.__setattr__(self, "entries", normalized)
        if self.hermitian:
            for d, t in normalized.items():
                partner = normalized.get(_neg(d))
                if partner is None:
                    raise ConfigError(f"hopping table lacks the partner of displacement {d}")
                if not np.allclose(partner, t.conj().T, rtol=0.0, atol=HERMITICITY_TOL):
                    raise ConfigError(f"t{_neg(d)} is not the adjoint of t{d}")

    @classmethod
    def from_half(cls, half: Mapping[Displacement, np.ndarray]) -> "HoppingTable":
        """Complete a table from one entry per +/- pair; d = 0 is symmetrized."""
        full: Dict[Displacement, np.ndarray] = {}
        for d, t in half.items():
            d = tuple(int(x) for x in d)
            t = np.atleast_2d(np.asarray(t, dtype=np.complex128))
            if d == (0, 0, 0):
                full[d] = 0.5 * (t + t.conj().T)
                continue
            if d in full or _neg(d) in full:
                raise ConfigError(f"displacement {d} given twice in a half table")
            full[d] = t
            full[_neg(d)] = t.conj().T
        return cls(full)

    @property
    def orbitals(self) -> int:
        return next(iter(self.entries.values())).shape[0]

    @property
    def range(self) -> int:
        return max(max(abs(x) for x in d) for d in self.entries)

    def canonical_displacements(self) -> Tuple[Displacement, ...]:
        return tuple(sorted(d for d in self.entries if is_canonical(d)))

    def check_range(self, geometry: TorusGeometry) -> None:
        for d in self.entries:
            for j, (x, L) in enumerate(zip(d, geometry.extents), start=1):
                if 2 * abs(x) >= L:
                    raise RangeError(
                        f"displacement {d} reaches |d_{j}| = {abs(x)} >= L_{j}/2 = {L / 2} on torus {geometry.extents}"
                    )
        if self.orbitals != geometry.orbitals:
            raise ConfigError(f"hopping table has {self.orbitals} orbitals, geometry expects {geometry.orbitals}")

    def scaled(self, factor: complex) -> "HoppingTable":
        return HoppingTable({d: factor * t for d, t in self.entries.items()}, hermitian=self.hermitian)

    def is_atomic(self) -> bool:
        return all(d == (0, 0, 0) or not np.any(t) for d, t in self.entries.items())


def atomic_table(onsite: np.ndarray) -> HoppingTable:
    return HoppingTable.from_half({(0, 0, 0): onsite})


@dataclass(frozen=True, eq=False)
class DisorderSpec:
    """Uniform bond disorder on [-1/2, 1/2], scaled by ``strength``."""

    strength: float = 0.0
    master_seed: int = 0
    realization_index: int = 0
    orbital_matrix: Optional[np.ndarray] = None
    onsite: bool = True

    def __post_init__(self):
        if self.strength < 0:
            raise ConfigError(f"disorder strength must be non-negative, got {self.strength}")
        if self.realization_index < 0:
            raise ConfigError(f"realization index must be non-negative, got {self.realization_index}")
        if self.orbital_matrix is not None:
            m = np.atleast_2d(np.asarray(self.orbital_matrix, dtype=np.complex128))
            if not np.allclose(m, m.conj().T, rtol=0.0, atol=HERMITICITY_TOL):
                raise ConfigError("disorder orbital matrix must be Hermitian")
            m.setflags(write=False)
            object.__setattr__(self, "orbital_matrix", m)

    def pattern(self, orbitals: int) -> np.ndarray:
        if self.orbital_matrix is None:
            return np.ones((orbitals, orbitals), dtype=np.complex128)
        if self.orbital_matrix.shape != (orbitals, orbitals):
            raise ConfigError(f"disorder orbital matrix shape {self.orbital_matrix.shape} does not match D={orbitals}")
        return self.orbital_matrix

    def generator(self) -> np.random.Generator:
        key = np.array([self.master_seed & 0xFFFFFFFFFFFFFFFF, self.realization_index], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def with_realization(self, index: int) -> "DisorderSpec":
        return DisorderSpec(self.strength, self.master_seed, index, self.orbital_matrix, self.onsite)


@dataclass(frozen=True, eq=False)
class DisorderField:
    """One realized configuration: values[s, k] sits on the bond from site s along displacements[k]."""

    geometry: TorusGeometry
    displacements: Tuple[Displacement, ...]
    values: np.ndarray
    strength: float
    orbital_matrix: np.ndarray

    def translated(self, a: Sequence[int]) -> "DisorderField":
        shifted = self.geometry.site_indices(self.geometry.coordinates + np.asarray(a, dtype=int))
        values = self.values[shifted]
        values.setflags(write=False)
        return DisorderField(self.geometry, self.displacements, values, self.strength, self.orbital_matrix)

    def value(self, site: int, d: Displacement) -> float:
        return float(self.values[site, self.displacements.index(d)])


def _disorder_displacements(hops: HoppingTable, dis: DisorderSpec) -> Tuple[Displacement, ...]:
    displacements = set(hops.canonical_displacements())
    if dis.onsite:
        displacements.add((0, 0, 0))
    else:
        displacements.discard((0, 0, 0))
    return tuple(sorted(displacements))


def realize_disorder(geometry: TorusGeometry, hops: HoppingTable, dis: DisorderSpec) -> DisorderField:
    """Draw one value per canonical bond; bond id = site * n_displacements + k."""
    displacements = _disorder_displacements(hops, dis)
    values = dis.generator().uniform(-0.5, 0.5, size=(geometry.volume, len(displacements)))
    values.setflags(write=False)
    return DisorderField(geometry, displacements, values, float(dis.strength), dis.pattern(hops.orbitals))


def peierls_phase(n: np.ndarray, m: np.ndarray, flux: FluxTensor) -> np.ndarray:
    """exp(i pi (n, B m)) for rows of unwrapped coordinates n and m.

    A hop from m to n carries peierls_phase(m, n).
    """
    if flux.is_zero:
        return np.ones(len(m), dtype=np.complex128)
    Bhat = flux.tensor()
    return np.exp(1j * np.pi * np.einsum("si,ij,sj->s", n, Bhat, m))


def _check_model(geometry: TorusGeometry, hops: HoppingTable, flux: FluxTensor, enforce_admissibility: bool) -> None:
    hops.check_range(geometry)
    if enforce_admissibility:
        flux.check_admissible(geometry)
    elif not flux.is_admissible(geometry):
        logger.debug("assembling with inadmissible flux %s on %s", flux.components, geometry.extents)


def build_hamiltonian(
    geometry: TorusGeometry,
    hops: HoppingTable,
    flux: FluxTensor = FluxTensor(),
    dis: Union[DisorderSpec, DisorderField, None] = None,
    *,
    enforce_admissibility: bool = True,
) -> AlgebraElement:
    if not hops.hermitian:
        raise ConfigError("build_hamiltonian needs a Hermitian hopping table; use assemble_element")
    _check_model(geometry, hops, flux, enforce_admissibility)

    field_ = dis if isinstance(dis, DisorderField) else None
    if isinstance(dis, DisorderSpec) and dis.strength > 0:
        field_ = realize_disorder(geometry, hops, dis)

    N, D = geometry.volume, geometry.orbitals
    coords = geometry.coordinates
    H = np.zeros((N, D, N, D), dtype=np.complex128)

    displacements = set(hops.canonical_displacements())
    if field_ is not None:
        displacements |= set(field_.displacements)

    for d in sorted(displacements):
        t = hops.entries.get(d, np.zeros((D, D), dtype=np.complex128))
        blocks = np.broadcast_to(t, (N, D, D)).copy()
        if field_ is not None and d in field_.displacements:
            k = field_.displacements.index(d)
            blocks += field_.strength * field_.values[:, k, None, None] * field_.orbital_matrix[None]
        if d == (0, 0, 0):
            blocks = 0.5 * (blocks + blocks.conj().transpose(0, 2, 1))
            sites = np.arange(N)
            H[sites, :, sites, :] += blocks
            continue
        targets = coords + np.asarray(d)
        rows = geometry.site_indices(targets)
        blocks *= peierls_phase(coords, targets, flux)[:, None, None]
        H[rows, :, np.arange(N), :] += blocks
        H[np.arange(N), :, rows, :] += blocks.conj().transpose(0, 2, 1)

    return AlgebraElement(geometry, flux, H.reshape(N * D, N * D))


def assemble_element(
    geometry: TorusGeometry,
    table: HoppingTable,
    flux: FluxTensor = FluxTensor(),
    *,
    enforce_admissibility: bool = True,
) -> AlgebraElement:
    """Twisted-convolution element sum_d t_d |m+d><m| e^{i pi (m, B (m+d))}; no Hermiticity imposed."""
    _check_model(geometry, table, flux, enforce_admissibility)
    N, D = geometry.volume, geometry.orbitals
    coords = geometry.coordinates
    F = np.zeros((N, D, N, D), dtype=np.complex128)
    for d, t in sorted(table.entries.items()):
        targets = coords + np.asarray(d)
        rows = geometry.site_indices(targets)
        F[rows, :, np.arange(N), :] += peierls_phase(coords, targets, flux)[:, None, None] * t[None]
    return AlgebraElement(geometry, flux, F.reshape(N * D, N * D))


def magnetic_translation(geometry: TorusGeometry, flux: FluxTensor, a: Sequence[int]) -> AlgebraElement:
    """U_a |n, alpha> = e^{i pi (n, B a)} |n - a, alpha>."""
    a = np.asarray(a, dtype=int)
    N, D = geometry.volume, geometry.orbitals
    coords = geometry.coordinates
    rows = geometry.site_indices(coords - a)
    phase = peierls_phase(coords, np.broadcast_to(a, coords.shape), flux)
    U = np.zeros((N, D, N, D), dtype=np.complex128)
    eye = np.eye(D)
    U[rows, :, np.arange(N), :] = phase[:, None, None] * eye[None]
    return AlgebraElement(geometry, flux, U.reshape(N * D, N * D))


def covariance_defect(
    h: AlgebraElement,
    hops: HoppingTable,
    dis: Union[DisorderSpec, DisorderField, None],
    a: Sequence[int],
    kind: NormKind = "frobenius",
) -> float:
    """Norm of U_a h(omega) U_a^* - h(t_a omega)."""
    geometry, flux = h.geometry, h.flux
    if isinstance(dis, DisorderSpec):
        dis = realize_disorder(geometry, hops, dis) if dis.strength > 0 else None
    shifted = dis.translated(a) if dis is not None else None
    expected = build_hamiltonian(geometry, hops, flux, shifted, enforce_admissibility=False)
    U = magnetic_translation(geometry, flux, a)
    return element_norm(U @ h @ U.H - expected, kind)


@dataclass(frozen=True, eq=False)
class SymmetrySpec:
    spin_rotation: np.ndarray
    inversion_orbital_action: np.ndarray
    # Sign of Theta^2 on single-particle states; Theta^2 on elements is always the identity.
    theta_squared: int = -1

    def __post_init__(self):
        for name in ("spin_rotation", "inversion_orbital_action"):
            m = np.atleast_2d(np.asarray(getattr(self, name), dtype=np.complex128))
            if not np.allclose(m @ m.conj().T, np.eye(m.shape[0]), atol=1e-12):
                raise ConfigError(f"{name} is not unitary")
            m.setflags(write=False)
            object.__setattr__(self, name, m)
        if self.spin_rotation.shape != self.inversion_orbital_action.shape:
            raise ConfigError("spin rotation and inversion action act on different orbital counts")
        if self.theta_squared not in (-1, 1):
            raise ConfigError(f"theta_squared must be +1 or -1, got {self.theta_squared}")
        product = self.spin_rotation @ self.spin_rotation.conj()
        if not np.allclose(product, self.theta_squared * np.eye(product.shape[0]), atol=1e-12):
            logger.warning("spin rotation squares to %s, not the recorded sign %+d", np.diag(product), self.theta_squared)

    @classmethod
    def trivial(cls, orbitals: int) -> "SymmetrySpec":
        return cls(np.eye(orbitals), np.eye(orbitals), theta_squared=1)

    @property
    def orbitals(self) -> int:
        return self.spin_rotation.shape[0]


def _conjugate_blocks(F: np.ndarray, N: int, D: int, U: np.ndarray) -> np.ndarray:
    F4 = F.reshape(N, D, N, D)
    return np.einsum("ab,ibjc,dc->iajd", U, F4, U.conj(), optimize=True).reshape(N * D, N * D)


def time_reversal(f: AlgebraElement, sym: SymmetrySpec) -> AlgebraElement:
    """Theta f = (1 x U) conj(f) (1 x U^*) with U = e^{i pi s_y}; defined at zero flux only."""
    if not f.flux.is_zero:
        raise ConfigError(f"time reversal is defined at zero flux only, got B = {f.flux.components}")
    N, D = f.geometry.volume, f.geometry.orbitals
    if sym.orbitals != D:
        raise ConfigError(f"symmetry data acts on {sym.orbitals} orbitals, element has {D}")
    return f._like(_conjugate_blocks(f.matrix.conj(), N, D, sym.spin_rotation))


def inversion(f: AlgebraElement, sym: SymmetrySpec) -> AlgebraElement:
    """(I f)[n, m] = P f[-n, -m] P^*."""
    geometry = f.geometry
    N, D = geometry.volume, geometry.orbitals
    if sym.orbitals != D:
        raise ConfigError(f"symmetry data acts on {sym.orbitals} orbitals, element has {D}")
    perm = geometry.site_indices(-geometry.coordinates)
    F4 = f.matrix.reshape(N, D, N, D)[perm][:, :, perm]
    return f._like(_conjugate_blocks(F4.reshape(N * D, N * D), N, D, sym.inversion_orbital_action))


def symmetry_defect(h: AlgebraElement, image: AlgebraElement, kind: NormKind = "frobenius") -> float:
    return element_norm(h - image, kind)


def random_hopping_table(
    orbitals: int,
    range_: int,
    rng: np.random.Generator,
    scale: float = 1.0,
    hermitian: bool = True,
) -> HoppingTable:
    """Random complex hoppings on every displacement of the cube [-range_, range_]^3."""
    span = range(-range_, range_ + 1)
    displacements = [(x, y, z) for x in span for y in span for z in span]

    def draw():
        return scale * (rng.standard_normal((orbitals, orbitals)) + 1j * rng.standard_normal((orbitals, orbitals)))

    if hermitian:
        return HoppingTable.from_half({d: draw() for d in displacements if is_canonical(d)})
    return HoppingTable({d: draw() for d in displacements}, hermitian=False)


def nilpotent_invertible_table(orbitals: int, rng: np.random.Generator, direction: int = 1) -> HoppingTable:
    """On-site diagonal plus an orbital-lowering hop; the inverse has range orbitals - 1."""
    d = [0, 0, 0]
    d[direction - 1] = 1
    onsite = np.diag(rng.uniform(1.0, 2.0, orbitals) * np.exp(2j * np.pi * rng.uniform(size=orbitals)))
    lowering = np.tril(rng.standard_normal((orbitals, orbitals)) + 1j * rng.standard_normal((orbitals, orbitals)), k=-1)
    return HoppingTable({(0, 0, 0): onsite, tuple(d): lowering}, hermitian=False)
