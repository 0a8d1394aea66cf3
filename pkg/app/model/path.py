"""
Adiabatic paths of Hamiltonians.

A path is a sampled family t -> h(t) on [0, 1]. Projectors are computed lazily
and cached on the path that owns the Hamiltonian builder; reversed,
concatenated and symmetry-mapped paths draw on their parents' caches.
"""

import logging
import threading
from dataclasses import dataclass
from typing import Callable, Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from ..errors import ConfigError, GapClosureError
from .lattice import SymmetrySpec, inversion, time_reversal
from .spectral import diagonalize, projector_from_spectrum
from .torus import AlgebraElement, element_norm

logger = logging.getLogger(__name__)

Builder = Callable[[float], AlgebraElement]
Interpolation = Literal["smoothstep", "linear"]

COINCIDENCE_TOL = 1e-12


def _key(t: float) -> float:
    return round(float(t), 12)


@dataclass(frozen=True)
class KnotProfile:
    """Piecewise interpolation of named parameters between knots.

    The smoothstep profile s(u) = (1 - cos(pi u)) / 2 has zero slope at every
    knot, so the Hamiltonian is stationary at both ends of the path.
    """

    times: Tuple[float, ...]
    values: Tuple[Dict[str, float], ...]
    interpolation: Interpolation = "smoothstep"
    periodic: bool = False

    def __post_init__(self):
        if len(self.times) != len(self.values) or len(self.times) < 2:
            raise ConfigError("a profile needs at least two knots with one value set each")
        if self.times[0] != 0.0 or self.times[-1] != 1.0:
            raise ConfigError("profile knots must span [0, 1]")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ConfigError("profile knot times must be strictly increasing")

    def _segment(self, t: float) -> Tuple[int, float, float]:
        t = t % 1.0 if self.periodic and not 0.0 <= t <= 1.0 else min(max(t, 0.0), 1.0)
        i = int(np.searchsorted(self.times, t, side="right")) - 1
        i = min(max(i, 0), len(self.times) - 2)
        width = self.times[i + 1] - self.times[i]
        return i, (t - self.times[i]) / width, width

    def value(self, t: float) -> Dict[str, float]:
        i, u, _ = self._segment(t)
        s = 0.5 * (1.0 - np.cos(np.pi * u)) if self.interpolation == "smoothstep" else u
        a, b = self.values[i], self.values[i + 1]
        return {name: a[name] + (b[name] - a[name]) * s for name in a}

    def derivative(self, t: float) -> Dict[str, float]:
        i, u, width = self._segment(t)
        ds = 0.5 * np.pi * np.sin(np.pi * u) / width if self.interpolation == "smoothstep" else 1.0 / width
        a, b = self.values[i], self.values[i + 1]
        return {name: (b[name] - a[name]) * ds for name in a}

    def stationary_endpoints(self, tol: float = 1e-10) -> bool:
        return all(abs(v) < tol for t in (0.0, 1.0) for v in self.derivative(t).values())


class AdiabaticPath:
    def __init__(
        self,
        times: Sequence[float],
        builder: Builder,
        *,
        fermi_level: float = 0.0,
        closed: bool = False,
        stationary: bool = False,
        label: str = "path",
        projector: Optional[Callable[[float], AlgebraElement]] = None,
        gap: Optional[Callable[[float], float]] = None,
    ):
        times = np.asarray(times, dtype=float)
        if len(times) < 2 or times[0] != 0.0 or times[-1] != 1.0:
            raise ConfigError(f"{label}: sample times must start at 0 and end at 1")
        if np.any(np.diff(times) <= 0):
            raise ConfigError(f"{label}: sample times must be strictly increasing")
        times.setflags(write=False)
        self.times = times
        self.builder = builder
        self.fermi_level = float(fermi_level)
        self.closed = closed
        self.stationary = stationary
        self.label = label
        self._projector_fn = projector
        self._gap_fn = gap
        self._cache: Dict[float, Tuple[AlgebraElement, float]] = {}
        self._lock = threading.Lock()

    @classmethod
    def uniform(cls, samples: int, builder: Builder, **kwargs) -> "AdiabaticPath":
        return cls(np.linspace(0.0, 1.0, samples + 1), builder, **kwargs)

    def __len__(self) -> int:
        return len(self.times)

    def hamiltonian(self, t: float) -> AlgebraElement:
        return self.builder(t)

    def _solve(self, t: float) -> Tuple[AlgebraElement, float]:
        key = _key(t)
        cached = self._cache.get(key)
        if cached is None:
            h = self.builder(t)
            data = diagonalize(h, self.fermi_level)
            cached = (projector_from_spectrum(h, data), data.gap)
            logger.debug("%s: t=%.6f gap=%.6g", self.label, t, data.gap)
            with self._lock:
                self._cache[key] = cached
        return cached

    def projector(self, t: float) -> AlgebraElement:
        if self._projector_fn is not None:
            return self._projector_fn(t)
        return self._solve(t)[0]

    def gap(self, t: float) -> float:
        if self._gap_fn is not None:
            return self._gap_fn(t)
        return self._solve(t)[1]

    def solve(self, workers: int = 1) -> None:
        """Diagonalize every sample; threads only, results land in the cache."""
        if workers > 1:
            Parallel(n_jobs=workers, prefer="threads")(delayed(self.gap)(t) for t in self.times)
        else:
            for t in self.times:
                self.gap(t)

    def gap_profile(self, floor: float = 0.0) -> List[float]:
        gaps = [self.gap(t) for t in self.times]
        k = int(np.argmin(gaps))
        if gaps[k] <= floor:
            raise GapClosureError(
                f"{self.label}: spectral gap {gaps[k]:.3e} at t={self.times[k]:.4f} is below the floor {floor:.1e}",
                gap=float(gaps[k]),
            )
        return gaps

    def check_closed(self) -> float:
        defect = element_norm(self.builder(0.0) - self.builder(1.0))
        if defect > COINCIDENCE_TOL:
            raise ConfigError(f"{self.label}: closed path endpoints differ by {defect:.3e}")
        return defect

    def subsampled(self, stride: int) -> "AdiabaticPath":
        n = len(self.times) - 1
        if stride < 1 or n % stride:
            raise ConfigError(f"cannot take every {stride}-th of {n} intervals")
        return AdiabaticPath(
            self.times[::stride],
            self.builder,
            fermi_level=self.fermi_level,
            closed=self.closed,
            stationary=self.stationary,
            label=f"{self.label}/{stride}",
            projector=self.projector,
            gap=self.gap,
        )

    def reverse(self) -> "AdiabaticPath":
        return AdiabaticPath(
            1.0 - self.times[::-1],
            lambda t: self.builder(1.0 - t),
            fermi_level=self.fermi_level,
            closed=self.closed,
            stationary=self.stationary,
            label=f"-{self.label}",
            projector=lambda t: self.projector(1.0 - t),
            gap=lambda t: self.gap(1.0 - t),
        )

    def concatenate(self, other: "AdiabaticPath") -> "AdiabaticPath":
        """self on [0, 1/2] followed by other on [1/2, 1]."""
        if self.fermi_level != other.fermi_level:
            raise ConfigError("concatenated paths must share the Fermi level")
        junction = element_norm(self.builder(1.0) - other.builder(0.0))
        if junction > COINCIDENCE_TOL:
            raise ConfigError(f"paths {self.label} and {other.label} do not meet: junction defect {junction:.3e}")
        times = np.concatenate([0.5 * self.times, 0.5 + 0.5 * other.times[1:]])

        def pick(first, second):
            return lambda t: first(2.0 * t) if t <= 0.5 else second(2.0 * t - 1.0)

        closed = element_norm(self.builder(0.0) - other.builder(1.0)) <= COINCIDENCE_TOL
        return AdiabaticPath(
            times,
            pick(self.builder, other.builder),
            fermi_level=self.fermi_level,
            closed=closed,
            stationary=self.stationary and other.stationary,
            label=f"{self.label}+{other.label}",
            projector=pick(self.projector, other.projector),
            gap=pick(self.gap, other.gap),
        )

    def mapped(self, element_map: Callable[[AlgebraElement], AlgebraElement], label: str) -> "AdiabaticPath":
        """Image under a map that commutes with the spectral calculus."""
        return AdiabaticPath(
            self.times,
            lambda t: element_map(self.builder(t)),
            fermi_level=self.fermi_level,
            closed=self.closed,
            stationary=self.stationary,
            label=label,
            projector=lambda t: element_map(self.projector(t)),
            gap=self.gap,
        )

    def time_reversed(self, sym: SymmetrySpec) -> "AdiabaticPath":
        return self.mapped(lambda f: time_reversal(f, sym), f"T({self.label})")

    def inverted(self, sym: SymmetrySpec) -> "AdiabaticPath":
        return self.mapped(lambda f: inversion(f, sym), f"I({self.label})")


def loop_difference(path: AdiabaticPath, other: AdiabaticPath) -> AdiabaticPath:
    """The closed loop path - other, i.e. path followed by other traversed backwards."""
    loop = path.concatenate(other.reverse())
    if not loop.closed:
        raise ConfigError(f"{path.label} and {other.label} do not share endpoints")
    return loop


def derivative_weights(times: np.ndarray, k: int, closed: bool) -> Tuple[Tuple[int, ...], Tuple[float, ...]]:
    """Second-order finite-difference stencil for d/dt at sample k.

    Interior samples use the three-point formula on their neighbours; open
    endpoints use the one-sided three-point formula; closed paths wrap.
    """
    n = len(times) - 1
    if closed and k in (0, n):
        h1 = times[n] - times[n - 1]
        h2 = times[1] - times[0]
        idx = (n - 1, 0, 1)
    elif 0 < k < n:
        h1 = times[k] - times[k - 1]
        h2 = times[k + 1] - times[k]
        idx = (k - 1, k, k + 1)
    else:
        if n < 2:
            raise ConfigError("endpoint derivatives need at least three samples")
        if k == 0:
            h1, h2 = times[1] - times[0], times[2] - times[1]
            w = (-(2 * h1 + h2) / (h1 * (h1 + h2)), (h1 + h2) / (h1 * h2), -h1 / (h2 * (h1 + h2)))
            return (0, 1, 2), w
        h1, h2 = times[n] - times[n - 1], times[n - 1] - times[n - 2]
        w = ((2 * h1 + h2) / (h1 * (h1 + h2)), -(h1 + h2) / (h1 * h2), h1 / (h2 * (h1 + h2)))
        return (n, n - 1, n - 2), w
    w = (-h2 / (h1 * (h1 + h2)), (h2 - h1) / (h1 * h2), h1 / (h2 * (h1 + h2)))
    return idx, w
