"""
Named reference models. Each fixture turns a parameter dict into a hopping table
and carries the symmetry data the time-reversal and inversion workflows need.
All models follow h(k) = sum_d t_d exp(i k.d).
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from ..errors import ConfigError
from .lattice import HoppingTable, SymmetrySpec, atomic_table

S0 = np.eye(2, dtype=np.complex128)
SX = np.array([[0, 1], [1, 0]], dtype=np.complex128)
SY = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
SZ = np.array([[1, 0], [0, -1]], dtype=np.complex128)
S_MINUS = np.array([[0, 0], [1, 0]], dtype=np.complex128)

# Dirac matrices of the four-band model; G4 is odd under both time reversal and inversion.
G0 = np.kron(SZ, S0)
G1, G2, G3 = (np.kron(SX, s) for s in (SX, SY, SZ))
G4 = np.kron(SY, S0)

E = ((1, 0, 0), (0, 1, 0), (0, 0, 1))


def cubic(hopping: float = 1.0, onsite: float = 0.0) -> HoppingTable:
    half = {(0, 0, 0): [[onsite]]}
    half.update({e: [[hopping]] for e in E})
    return HoppingTable.from_half(half)


def atomic(splitting: float = 1.0) -> HoppingTable:
    return atomic_table(splitting * SZ)


def stacked_chern(mass: float = 1.0) -> HoppingTable:
    """Two-band Chern insulator in the (x1, x2) plane, decoupled layers along x3.

    Topological for 0 < |mass| < 2.
    """
    return HoppingTable.from_half(
        {
            (0, 0, 0): mass * SZ,
            E[0]: SX / 2j + SZ / 2,
            E[1]: SY / 2j + SZ / 2,
        }
    )


def qhz(mass: float = -2.0, b: float = 0.0, c: float = 1.0) -> HoppingTable:
    """Four-band lattice Dirac model.

    h(k) = c sum_j sin(k_j) G_j + (mass + c sum_j cos(k_j)) G0 + b G4.
    Gapless at b = 0 for mass in {-3, -1, 1, 3}; topological for 1 < |mass| < 3.
    """
    half = {(0, 0, 0): mass * G0 + b * G4}
    for e, G in zip(E, (G1, G2, G3)):
        half[e] = c * G / 2j + c * G0 / 2
    return HoppingTable.from_half(half)


def qhz_loop(theta: float = 0.0, center: float = -3.0, radius: float = 1.0) -> HoppingTable:
    """Circle in the (mass, b) plane around a gap-closing point; carries a second Chern number."""
    return qhz(mass=center + radius * np.cos(theta), b=radius * np.sin(theta))


def rice_mele(theta: float = 0.0, dimerization: float = 0.5, staggering: float = 1.0) -> HoppingTable:
    """Rice-Mele pump chains along x1, decoupled along x2 and x3."""
    v = 1.0 + dimerization * np.cos(theta)
    w = 1.0 - dimerization * np.cos(theta)
    return HoppingTable.from_half(
        {
            (0, 0, 0): v * SX + staggering * np.sin(theta) * SZ,
            E[0]: w * S_MINUS,
        }
    )


def _spinful() -> SymmetrySpec:
    return SymmetrySpec(np.kron(S0, 1j * SY), np.kron(SZ, S0), theta_squared=-1)


@dataclass(frozen=True)
class ModelFixture:
    name: str
    builder: Callable[..., HoppingTable]
    orbitals: int
    defaults: Dict[str, float]
    extents: Tuple[int, int, int]
    description: str
    symmetry: Optional[Callable[[], SymmetrySpec]] = None
    # parameters that change sign under time reversal
    trs_odd: Tuple[str, ...] = field(default_factory=tuple)

    def table(self, **params) -> HoppingTable:
        unknown = set(params) - set(self.defaults)
        if unknown:
            raise ConfigError(f"model {self.name!r} has no parameters {sorted(unknown)}")
        return self.builder(**{**self.defaults, **params})

    def symmetry_spec(self) -> SymmetrySpec:
        if self.symmetry is None:
            return SymmetrySpec.trivial(self.orbitals)
        return self.symmetry()

    def describe(self) -> dict:
        return {
            "name": self.name,
            "orbitals": self.orbitals,
            "defaults": dict(self.defaults),
            "extents": list(self.extents),
            "trs_odd": list(self.trs_odd),
            "description": self.description,
        }


_CATALOG = {
    fixture.name: fixture
    for fixture in (
        ModelFixture(
            "cubic",
            cubic,
            1,
            {"hopping": 1.0, "onsite": 0.0},
            (5, 5, 5),
            "single-orbital nearest-neighbour cubic lattice",
            symmetry=lambda: SymmetrySpec(np.eye(1), np.eye(1), theta_squared=1),
        ),
        ModelFixture(
            "atomic",
            atomic,
            2,
            {"splitting": 1.0},
            (5, 5, 5),
            "two orbitals split by 2*splitting, no hopping",
            symmetry=lambda: SymmetrySpec.trivial(2),
        ),
        ModelFixture(
            "stacked_chern",
            stacked_chern,
            2,
            {"mass": 1.0},
            (9, 9, 3),
            "two-band Chern insulator stacked along x3; topological for 0 < |mass| < 2",
            symmetry=lambda: SymmetrySpec(S0, SZ, theta_squared=1),
        ),
        ModelFixture(
            "qhz",
            qhz,
            4,
            {"mass": -2.0, "b": 0.0, "c": 1.0},
            (7, 7, 7),
            "four-band lattice Dirac model; time-reversal symmetric at b = 0",
            symmetry=_spinful,
            trs_odd=("b",),
        ),
        ModelFixture(
            "qhz_loop",
            qhz_loop,
            4,
            {"theta": 0.0, "center": -3.0, "radius": 1.0},
            (7, 7, 7),
            "closed loop of the four-band model around the gap closing at mass = center",
            symmetry=_spinful,
        ),
        ModelFixture(
            "rice_mele",
            rice_mele,
            2,
            {"theta": 0.0, "dimerization": 0.5, "staggering": 1.0},
            (9, 3, 3),
            "Rice-Mele charge pump along x1",
            symmetry=lambda: SymmetrySpec(S0, SX, theta_squared=1),
        ),
    )
}


def reference_models() -> Dict[str, ModelFixture]:
    return dict(_CATALOG)


def get_model(name: str) -> ModelFixture:
    try:
        return _CATALOG[name]
    except KeyError:
        raise ConfigError(f"unknown model {name!r}; known models: {sorted(_CATALOG)}") from None
