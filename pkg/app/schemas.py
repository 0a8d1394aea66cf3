from typing import Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

SCHEMA_VERSION = "nctorus/1"

Task = Literal["polarization", "delta_alpha", "chern2", "z2", "identities"]
PATH_TASKS = ("polarization", "delta_alpha", "chern2", "z2")


class ComplexMatrix(BaseModel):
    real: List[List[float]]
    imag: Optional[List[List[float]]] = None

    @model_validator(mode="after")
    def check_shape(self):
        shape = np.shape(self.real)
        if len(shape) != 2 or shape[0] != shape[1]:
            raise ValueError(f"matrix must be square, got shape {shape}")
        if self.imag is not None and np.shape(self.imag) != shape:
            raise ValueError("real and imag parts differ in shape")
        return self

    def to_array(self) -> np.ndarray:
        m = np.array(self.real, dtype=np.complex128)
        if self.imag is not None:
            m += 1j * np.array(self.imag, dtype=float)
        return m


class HoppingEntry(BaseModel):
    displacement: Tuple[int, int, int]
    matrix: ComplexMatrix


class ModelDefinition(BaseModel):
    """Inline model: one entry per +/- displacement pair unless ``complete_partners`` is off."""

    orbitals: int = Field(ge=1)
    hoppings: List[HoppingEntry]
    complete_partners: bool = True


class ModelReference(BaseModel):
    name: str
    params: Dict[str, float] = {}


class SymmetryConfig(BaseModel):
    spin_rotation: Optional[ComplexMatrix] = None
    inversion_orbital_action: Optional[ComplexMatrix] = None
    theta_squared: Literal[-1, 1] = -1


class GeometryConfig(BaseModel):
    extents: Tuple[int, int, int]

    @field_validator("extents")
    @classmethod
    def at_least_three(cls, v):
        if any(L < 3 for L in v):
            raise ValueError(f"every extent must be at least 3, got {v}")
        return v


class FluxConfig(BaseModel):
    numerators: Tuple[int, int, int] = (0, 0, 0)
    denominator: int = 1

    @field_validator("denominator")
    @classmethod
    def nonzero(cls, v):
        if v == 0:
            raise ValueError("flux denominator must be nonzero")
        return v


class PathKnot(BaseModel):
    t: float = Field(ge=0.0, le=1.0)
    params: Dict[str, float] = {}


class PathConfig(BaseModel):
    knots: List[PathKnot]
    samples: int = Field(default=24, ge=2)
    interpolation: Literal["smoothstep", "linear"] = "smoothstep"
    closed: bool = False
    quadrature: Literal["trapezoid", "simpson"] = "trapezoid"

    @model_validator(mode="after")
    def check_knots(self):
        ts = [k.t for k in self.knots]
        if len(ts) < 2 or ts[0] != 0.0 or ts[-1] != 1.0:
            raise ValueError("path knots must start at t=0 and end at t=1")
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("path knot times must be strictly increasing")
        names = set(self.knots[0].params)
        if any(set(k.params) != names for k in self.knots):
            raise ValueError("every knot must set the same parameters")
        return self


class EnsembleConfig(BaseModel):
    realizations: int = Field(default=1, ge=1)
    master_seed: int = Field(default=0, ge=0, lt=2**64)
    strength: float = Field(default=0.0, ge=0.0)
    orbital_pattern: Literal["ones", "identity"] = "ones"
    onsite: bool = True


class OracleConfig(BaseModel):
    enabled: bool = False
    grid: Tuple[int, int] = (12, 12)
    nk: int = 64


class IdentitiesConfig(BaseModel):
    hopping_range: int = Field(default=1, ge=0)
    norm: Literal["frobenius", "spectral"] = "frobenius"


class TolerancesOverride(BaseModel):
    gap_window: Optional[float] = None
    gap_floor: Optional[float] = None
    residue: Optional[float] = None
    idempotency: Optional[float] = None
    identity: Optional[float] = None
    ito_blocks: Optional[float] = None
    ito_trace: Optional[float] = None


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    schema_version: Literal["nctorus/1"]
    task: Task
    model: Union[ModelReference, ModelDefinition]
    geometry: GeometryConfig
    flux: FluxConfig = FluxConfig()
    fermi_level: float = 0.0
    path: Optional[PathConfig] = None
    ensemble: EnsembleConfig = EnsembleConfig()
    symmetry: Optional[SymmetryConfig] = None
    z2_symmetry: Literal["time_reversal", "inversion"] = "time_reversal"
    polarization_axes: List[Literal[1, 2, 3]] = [1, 2, 3]
    oracle: OracleConfig = OracleConfig()
    identities: IdentitiesConfig = IdentitiesConfig()
    b_dependent_hoppings: bool = False
    output_dir: Optional[str] = None
    tolerances: TolerancesOverride = TolerancesOverride()

    @model_validator(mode="after")
    def check_task(self):
        if self.task in PATH_TASKS and self.path is None:
            raise ValueError(f"task {self.task!r} needs a path definition")
        if self.task == "chern2" and not self.path.closed:
            raise ValueError("task 'chern2' needs a closed path")
        if self.task in ("delta_alpha", "z2") and self.path.closed:
            raise ValueError(f"task {self.task!r} needs an open path")
        if self.task == "z2" and self.z2_symmetry == "time_reversal" and any(self.flux.numerators):
            raise ValueError("time reversal is defined at zero flux only")
        if self.b_dependent_hoppings and self.task in ("delta_alpha", "z2"):
            raise ValueError("field-dependent hoppings need an explicit field derivative, which configs cannot carry")
        return self


class Quadrature(BaseModel):
    rule: Literal["trapezoid", "simpson"] = "trapezoid"
    n_samples: int


class PolarizationReport(BaseModel):
    delta_P: List[float]
    axes: List[int]
    imaginary_residue: float
    gap_profile: List[float]
    quadrature: Quadrature
    oracle: Optional[float] = None


class ResponseReport(BaseModel):
    delta_P: List[float]
    delta_alpha: float
    delta_alpha_topological: float
    delta_alpha_boundary: float
    delta_alpha_raw: float
    chern2: float
    gap_profile: List[float]
    quadrature: Quadrature
    imaginary_residue: float
    proof_identity_max: float = 0.0


class Chern2Report(BaseModel):
    chern2: float
    chern2_raw: float
    nearest_integer: int
    deviation: float
    gap_profile: List[float]
    quadrature: Quadrature
    imaginary_residue: float
    proof_identity_max: float = 0.0
    oracle: Optional[float] = None


class Z2Report(BaseModel):
    symmetry: Literal["time_reversal", "inversion"]
    delta_alpha: float
    chern2: float
    classification: Literal["integer", "half-integer"]
    twice_alpha_distance: float
    endpoint_defects: List[float]
    gap_profile: List[float]
    proof_identity_max: float = 0.0


class IdentityReport(BaseModel):
    defects: Dict[str, float]
    max_defect: float
    passed: bool
    trace_rule: Optional[Dict[str, float]] = None


class ConvergenceReport(BaseModel):
    n_samples: List[int]
    values: List[float]
    richardson_ratio: Optional[float] = None


class RealizationRecord(BaseModel):
    realization_index: int
    seed: int
    gap_min: float
    observables: Dict[str, float]
    report: dict


class RealizationFailure(BaseModel):
    realization_index: int
    error: str
    detail: str
    exit_code: int


class EnsembleResult(BaseModel):
    task: Task
    records: List[RealizationRecord]
    mean: Dict[str, float]
    stderr: Dict[str, float]
    config_hash: str
    version: str
    wall_time: Optional[float] = None


class RunManifest(BaseModel):
    config_hash: str
    version: str
    task: Task
    complete: bool
    realizations_requested: int
    realizations_completed: List[int]
    failures: List[RealizationFailure]
    wall_time: float


class SweepRow(BaseModel):
    axis: str
    value: float
    observable: str
    mean: float
    stderr: float
    config_hash: str
    version: str
