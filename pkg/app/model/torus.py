"""
Finite-volume realization of the non-commutative Brillouin torus.

Elements are represented in the operator picture: one dense complex matrix over
the Hilbert space of a finite 3-torus with D orbitals per site, tagged with the
geometry and the magnetic flux it was built for. The product of the algebra is
the matrix product, the adjoint is the conjugate transpose, the trace is the
trace per unit volume, and the derivations are -i[x_j, .] with positions
measured by the periodic distance on the torus.
"""

import logging
import warnings
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import List, Literal, Sequence, Tuple, Union

import numpy as np

from ..errors import AlgebraMismatchError, ConfigError, EvenExtentWarning, InadmissibleFluxError

logger = logging.getLogger(__name__)

NormKind = Literal["frobenius", "spectral"]
Rational = Union[int, str, Fraction]

DIRECTIONS = (1, 2, 3)


def cyclic(j: int, shift: int) -> int:
    """Direction j+shift taken mod 3 in the 1..3 labelling."""
    return (j - 1 + shift) % 3 + 1


@dataclass(frozen=True)
class TorusGeometry:
    extents: Tuple[int, int, int]
    orbitals: int = 1

    def __post_init__(self):
        extents = tuple(int(L) for L in self.extents)
        if len(extents) != 3:
            raise ConfigError(f"torus needs three extents, got {self.extents}")
        if any(L < 3 for L in extents):
            raise ConfigError(f"every torus extent must be at least 3, got {extents}")
        if int(self.orbitals) < 1:
            raise ConfigError(f"orbital count must be positive, got {self.orbitals}")
        object.__setattr__(self, "extents", extents)
        object.__setattr__(self, "orbitals", int(self.orbitals))
        if not self.odd_extents:
            logger.warning("even torus extents %s: partial integration is not exact", extents)
            warnings.warn(
                f"torus extents {extents} are not all odd; derivations lose exact antisymmetry",
                EvenExtentWarning,
                stacklevel=2,
            )

    @property
    def volume(self) -> int:
        L1, L2, L3 = self.extents
        return L1 * L2 * L3

    @property
    def dimension(self) -> int:
        return self.volume * self.orbitals

    @property
    def odd_extents(self) -> bool:
        return all(L % 2 == 1 for L in self.extents)

    @property
    def coordinates(self) -> np.ndarray:
        """(volume, 3) integer site coordinates in [0, L_j), row-major site order."""
        return _site_coordinates(self.extents)

    def site_index(self, n: Sequence[int]) -> int:
        L1, L2, L3 = self.extents
        n1, n2, n3 = (int(n[0]) % L1, int(n[1]) % L2, int(n[2]) % L3)
        return (n1 * L2 + n2) * L3 + n3

    def site_indices(self, coords: np.ndarray) -> np.ndarray:
        L = np.asarray(self.extents)
        c = np.mod(coords, L)
        return (c[..., 0] * L[1] + c[..., 1]) * L[2] + c[..., 2]


@lru_cache(maxsize=16)
def _site_coordinates(extents: Tuple[int, int, int]) -> np.ndarray:
    grid = np.indices(extents).reshape(3, -1).T
    grid.setflags(write=False)
    return grid


def periodic_distance(x: np.ndarray, L: int) -> np.ndarray:
    """Representative of x mod L in (-L/2, L/2]."""
    r = np.mod(x, L)
    return np.where(r > L / 2, r - L, r)


@lru_cache(maxsize=8)
def _site_weights(extents: Tuple[int, int, int], j: int) -> np.ndarray:
    x = _site_coordinates(extents)[:, j - 1]
    w = periodic_distance(x[None, :] - x[:, None], extents[j - 1]).astype(float)
    w.setflags(write=False)
    return w


@lru_cache(maxsize=6)
def _weights(extents: Tuple[int, int, int], orbitals: int, j: int) -> np.ndarray:
    w = _site_weights(extents, j)
    if orbitals > 1:
        w = np.kron(w, np.ones((orbitals, orbitals)))
    w.setflags(write=False)
    return w


def periodic_weights(geometry: TorusGeometry, j: int) -> np.ndarray:
    """Matrix of w_{L_j}(x_b - x_a) over (site, orbital) indices (a, b)."""
    if j not in DIRECTIONS:
        raise ValueError(f"direction must be 1, 2 or 3, got {j}")
    return _weights(geometry.extents, geometry.orbitals, j)


def _as_fraction(x: Rational) -> Fraction:
    if isinstance(x, float):
        return Fraction(x).limit_denominator(10**9)
    return Fraction(x)


@dataclass(frozen=True)
class FluxTensor:
    """Uniform magnetic field (B1, B2, B3) in flux quanta per plaquette."""

    components: Tuple[Fraction, Fraction, Fraction] = (Fraction(0), Fraction(0), Fraction(0))

    def __post_init__(self):
        comps = tuple(_as_fraction(b) for b in self.components)
        if len(comps) != 3:
            raise ConfigError(f"flux needs three components, got {self.components}")
        object.__setattr__(self, "components", comps)

    @classmethod
    def zero(cls) -> "FluxTensor":
        return cls()

    @classmethod
    def from_numerators(cls, numerators: Sequence[int], denominator: int = 1) -> "FluxTensor":
        if denominator == 0:
            raise ConfigError("flux denominator must be nonzero")
        return cls(tuple(Fraction(int(n), int(denominator)) for n in numerators))

    @property
    def is_zero(self) -> bool:
        return all(b == 0 for b in self.components)

    def tensor(self) -> np.ndarray:
        """The antisymmetric matrix B-hat entering the Peierls phase."""
        B1, B2, B3 = (float(b) for b in self.components)
        return np.array(
            [
                [0.0, B3, -B2],
                [-B3, 0.0, B1],
                [B2, -B1, 0.0],
            ]
        )

    def admissibility_violations(self, geometry: TorusGeometry) -> List[str]:
        violations = []
        for k, Bk in enumerate(self.components, start=1):
            for i, Li in enumerate(geometry.extents, start=1):
                if i == k:
                    continue
                product = Bk * Li
                if product.denominator != 1 or product.numerator % 2 != 0:
                    violations.append(f"B{k}*L{i} = {product} is not an even integer")
        return violations

    def check_admissible(self, geometry: TorusGeometry) -> None:
        violations = self.admissibility_violations(geometry)
        if violations:
            raise InadmissibleFluxError("inadmissible flux on torus " f"{geometry.extents}: " + "; ".join(violations))

    def is_admissible(self, geometry: TorusGeometry) -> bool:
        return not self.admissibility_violations(geometry)

    def with_component(self, k: int, value: Rational) -> "FluxTensor":
        comps = list(self.components)
        comps[k - 1] = _as_fraction(value)
        return FluxTensor(tuple(comps))


def flux_step(geometry: TorusGeometry, k: int) -> Fraction:
    """Smallest positive admissible value of B_k on this torus."""
    others = [L for i, L in enumerate(geometry.extents, start=1) if i != k]
    return Fraction(2, int(np.gcd(others[0], others[1])))


@dataclass(frozen=True, eq=False)
class AlgebraElement:
    geometry: TorusGeometry
    flux: FluxTensor
    matrix: np.ndarray

    # numpy scalar * element dispatches to __rmul__
    __array_ufunc__ = None

    def __post_init__(self):
        m = self.matrix
        if not (isinstance(m, np.ndarray) and m.dtype == np.complex128 and not m.flags.writeable):
            m = np.array(m, dtype=np.complex128)
            m.setflags(write=False)
        n = self.geometry.dimension
        if m.shape != (n, n):
            raise AlgebraMismatchError(f"matrix shape {m.shape} does not match Hilbert dimension {n}")
        object.__setattr__(self, "matrix", m)

    def _like(self, matrix: np.ndarray) -> "AlgebraElement":
        matrix = np.asarray(matrix, dtype=np.complex128)
        matrix.setflags(write=False)
        return AlgebraElement(self.geometry, self.flux, matrix)

    def _check_tags(self, other: "AlgebraElement") -> None:
        if self.geometry != other.geometry:
            raise AlgebraMismatchError(f"geometry mismatch: {self.geometry} vs {other.geometry}")
        if self.flux != other.flux:
            raise AlgebraMismatchError(f"flux mismatch: {self.flux} vs {other.flux}")

    def __add__(self, other):
        if isinstance(other, AlgebraElement):
            self._check_tags(other)
            return self._like(self.matrix + other.matrix)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, AlgebraElement):
            self._check_tags(other)
            return self._like(self.matrix - other.matrix)
        return NotImplemented

    def __neg__(self):
        return self._like(-self.matrix)

    def __mul__(self, scalar):
        if isinstance(scalar, AlgebraElement):
            return NotImplemented
        return self._like(complex(scalar) * self.matrix)

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, AlgebraElement):
            return multiply(self, other)
        return NotImplemented

    @property
    def H(self) -> "AlgebraElement":
        return adjoint(self)


def identity(geometry: TorusGeometry, flux: FluxTensor = FluxTensor()) -> AlgebraElement:
    return AlgebraElement(geometry, flux, np.eye(geometry.dimension, dtype=np.complex128))


def zeros_like(f: AlgebraElement) -> AlgebraElement:
    return f._like(np.zeros_like(f.matrix))


def multiply(f: AlgebraElement, g: AlgebraElement) -> AlgebraElement:
    f._check_tags(g)
    return f._like(f.matrix @ g.matrix)


def adjoint(f: AlgebraElement) -> AlgebraElement:
    return f._like(f.matrix.conj().T)


def inverse(f: AlgebraElement) -> AlgebraElement:
    return f._like(np.linalg.inv(f.matrix))


def trace_per_volume(f: AlgebraElement) -> complex:
    return complex(np.trace(f.matrix)) / f.geometry.volume


def trace_of_product(f: AlgebraElement, g: AlgebraElement) -> complex:
    """T(f*g) without forming the product."""
    f._check_tags(g)
    return complex(np.einsum("ij,ji->", f.matrix, g.matrix)) / f.geometry.volume


def derive(f: AlgebraElement, j: int) -> AlgebraElement:
    return f._like(1j * periodic_weights(f.geometry, j) * f.matrix)


def commutator(f: AlgebraElement, g: AlgebraElement) -> AlgebraElement:
    f._check_tags(g)
    return f._like(f.matrix @ g.matrix - g.matrix @ f.matrix)


def anticommutator(f: AlgebraElement, g: AlgebraElement) -> AlgebraElement:
    f._check_tags(g)
    return f._like(f.matrix @ g.matrix + g.matrix @ f.matrix)


def element_norm(f: AlgebraElement, kind: NormKind = "frobenius") -> float:
    """Frobenius norm over sqrt(dimension), or the largest singular value."""
    if kind == "spectral":
        return float(np.linalg.norm(f.matrix, 2))
    return float(np.linalg.norm(f.matrix) / np.sqrt(f.geometry.dimension))


def leibniz_defect(f: AlgebraElement, g: AlgebraElement, j: int, kind: NormKind = "frobenius") -> float:
    fg = multiply(f, g)
    defect = derive(fg, j) - derive(f, j) @ g - f @ derive(g, j)
    return element_norm(defect, kind)


# Calculus-rule diagnostics. Each returns a non-negative defect.


def trace_derivative_defect(f: AlgebraElement, j: int) -> float:
    return abs(trace_per_volume(derive(f, j)))


def partial_integration_defect(f: AlgebraElement, g: AlgebraElement, j: int) -> float:
    return abs(trace_of_product(derive(f, j), g) + trace_of_product(f, derive(g, j)))


def star_derivation_defect(f: AlgebraElement, j: int, kind: NormKind = "frobenius") -> float:
    return element_norm(adjoint(derive(f, j)) - derive(adjoint(f), j), kind)


def derivation_commutator_defect(f: AlgebraElement, j: int, k: int, kind: NormKind = "frobenius") -> float:
    return element_norm(derive(derive(f, j), k) - derive(derive(f, k), j), kind)


def inverse_derivative_defect(f: AlgebraElement, j: int, kind: NormKind = "frobenius") -> float:
    """Relative defect of d(f^-1) = -f^-1 (d f) f^-1."""
    finv = inverse(f)
    expected = -(finv @ derive(f, j) @ finv)
    scale = element_norm(expected, kind)
    defect = element_norm(derive(finv, j) - expected, kind)
    return defect / scale if scale > 0 else defect


def cyclicity_defect(f: AlgebraElement, g: AlgebraElement) -> float:
    return abs(trace_of_product(f, g) - trace_of_product(g, f))


def positivity_margin(f: AlgebraElement) -> float:
    """T(f*f^*); non-negative for every f."""
    return trace_of_product(f, adjoint(f)).real
