import logging
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Iterator, Optional

import numpy as np

from . import schemas
from .config import Tolerances, settings
from .errors import ConfigError
from .model.catalog import ModelFixture, get_model
from .model.lattice import (
    DisorderField,
    DisorderSpec,
    HoppingTable,
    SymmetrySpec,
    build_hamiltonian,
    realize_disorder,
)
from .model.path import AdiabaticPath, KnotProfile
from .model.torus import AlgebraElement, FluxTensor, TorusGeometry

logger = logging.getLogger(__name__)

# dense matrices alive at once besides the cached path projectors
WORKSPACE_MATRICES = 16


@dataclass
class RealizationContext:
    """Everything one realization of a run needs, built from the validated config."""

    config: schemas.RunConfig
    index: int
    geometry: TorusGeometry
    flux: FluxTensor
    tolerances: Tolerances
    symmetry: SymmetrySpec
    disorder: DisorderSpec
    field: Optional[DisorderField]
    table_at: Callable[[float], HoppingTable]
    profile: Optional[KnotProfile]
    path: Optional[AdiabaticPath]
    workers: int = 1

    @property
    def seed(self) -> int:
        return self.disorder.master_seed

    def hamiltonian(self, t: float = 0.0) -> AlgebraElement:
        return build_hamiltonian(self.geometry, self.table_at(t), self.flux, self.field)

    def rng(self) -> np.random.Generator:
        return self.disorder.generator()

    def release(self) -> None:
        if self.path is not None:
            self.path._cache.clear()


def _fixture(config: schemas.RunConfig) -> Optional[ModelFixture]:
    if isinstance(config.model, schemas.ModelReference):
        return get_model(config.model.name)
    return None


def model_orbitals(config: schemas.RunConfig) -> int:
    fixture = _fixture(config)
    return fixture.orbitals if fixture is not None else config.model.orbitals


def dense_bytes(config: schemas.RunConfig) -> int:
    dim = int(np.prod(config.geometry.extents)) * model_orbitals(config)
    resident = WORKSPACE_MATRICES
    if config.path is not None:
        resident += config.path.samples + 1
    return dim * dim * 16 * resident


def check_feasible(config: schemas.RunConfig, limit: Optional[int] = None) -> None:
    limit = settings.max_dense_bytes if limit is None else limit
    need = dense_bytes(config)
    if need > limit:
        raise ConfigError(f"dense working set of {need / 2**30:.2f} GiB exceeds the limit of {limit / 2**30:.2f} GiB")


def _inline_table(definition: schemas.ModelDefinition) -> HoppingTable:
    entries = {tuple(h.displacement): h.matrix.to_array() for h in definition.hoppings}
    table = HoppingTable.from_half(entries) if definition.complete_partners else HoppingTable(entries)
    if table.orbitals != definition.orbitals:
        raise ConfigError(f"inline model declares {definition.orbitals} orbitals, its matrices have {table.orbitals}")
    return table


def _profile(path: Optional[schemas.PathConfig]) -> Optional[KnotProfile]:
    if path is None or not path.knots[0].params:
        return None
    return KnotProfile(
        tuple(k.t for k in path.knots),
        tuple(dict(k.params) for k in path.knots),
        interpolation=path.interpolation,
        periodic=path.closed,
    )


def table_builder(config: schemas.RunConfig) -> Callable[[float], HoppingTable]:
    """t -> hopping table along the configured path (constant without knots)."""
    profile = _profile(config.path)
    fixture = _fixture(config)
    if fixture is None:
        if profile is not None:
            raise ConfigError("path knots can only vary parameters of a catalog model")
        table = _inline_table(config.model)
        return lambda t: table

    params = dict(config.model.params)
    if profile is None:
        table = fixture.table(**params)
        return lambda t: table
    return lambda t: fixture.table(**{**params, **profile.value(t)})


def symmetry_spec(config: schemas.RunConfig, orbitals: int) -> SymmetrySpec:
    fixture = _fixture(config)
    base = fixture.symmetry_spec() if fixture is not None else SymmetrySpec.trivial(orbitals)
    sym = config.symmetry
    if sym is None:
        return base
    return SymmetrySpec(
        sym.spin_rotation.to_array() if sym.spin_rotation is not None else base.spin_rotation,
        sym.inversion_orbital_action.to_array() if sym.inversion_orbital_action is not None else base.inversion_orbital_action,
        theta_squared=sym.theta_squared,
    )


def disorder_spec(config: schemas.RunConfig, orbitals: int, index: int) -> DisorderSpec:
    ens = config.ensemble
    pattern = np.eye(orbitals) if ens.orbital_pattern == "identity" else None
    return DisorderSpec(ens.strength, ens.master_seed, index, pattern, ens.onsite)


def get_context(
    config: schemas.RunConfig, index: int, workers: int = 1, profile_name: Optional[str] = None
) -> RealizationContext:
    orbitals = model_orbitals(config)
    geometry = TorusGeometry(tuple(config.geometry.extents), orbitals)
    flux = FluxTensor.from_numerators(config.flux.numerators, config.flux.denominator)
    flux.check_admissible(geometry)

    table_at = table_builder(config)
    dis = disorder_spec(config, orbitals, index)
    field = realize_disorder(geometry, table_at(0.0), dis) if dis.strength > 0 else None
    profile = _profile(config.path)
    tolerances = settings.tolerances(profile_name, config.tolerances.model_dump())

    def builder(t: float) -> AlgebraElement:
        return build_hamiltonian(geometry, table_at(t), flux, field)

    path = None
    if config.path is not None:
        path = AdiabaticPath.uniform(
            config.path.samples,
            builder,
            fermi_level=config.fermi_level,
            closed=config.path.closed,
            stationary=profile.stationary_endpoints() if profile is not None else True,
            label=f"{config.task}#{index}",
        )
    logger.debug("realization %d on %s, flux %s", index, geometry.extents, flux.components)
    return RealizationContext(
        config=config,
        index=index,
        geometry=geometry,
        flux=flux,
        tolerances=tolerances,
        symmetry=symmetry_spec(config, orbitals),
        disorder=dis,
        field=field,
        table_at=table_at,
        profile=profile,
        path=path,
        workers=workers,
    )


@contextmanager
def realization(
    config: schemas.RunConfig, index: int, workers: int = 1, profile_name: Optional[str] = None
) -> Iterator[RealizationContext]:
    ctx = get_context(config, index, workers, profile_name)
    try:
        yield ctx
    finally:
        ctx.release()
