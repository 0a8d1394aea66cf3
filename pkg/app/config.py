from typing import Literal, Optional

from pydantic import BaseModel
from pydantic_settings import BaseSettings, SettingsConfigDict


class Tolerances(BaseModel):
    gap_window: float = 1e-10
    gap_floor: float = 1e-3
    residue: float = 1e-10
    idempotency: float = 1e-10
    identity: float = 1e-12
    ito_blocks: float = 1e-4
    ito_trace: float = 0.05


TOLERANCE_PROFILES = {
    "default": Tolerances(),
    "strict": Tolerances(residue=1e-12, gap_floor=1e-2),
}


class Settings(BaseSettings):
    workers: int = 1
    blas_threads: int = 1
    allow_nondeterministic_blas: bool = False
    parallel_backend: Literal["loky", "threading"] = "loky"
    tolerance_profile: Literal["default", "strict"] = "default"
    output_dir: str = "results"
    log_level: str = "INFO"
    max_dense_bytes: int = 8 * 1024**3

    model_config = SettingsConfigDict(env_file=".env", env_prefix="NCTORUS_", extra="ignore")

    def tolerances(self, profile: Optional[str] = None, overrides: Optional[dict] = None) -> Tolerances:
        base = TOLERANCE_PROFILES[profile or self.tolerance_profile]
        if overrides:
            return base.model_copy(update={k: v for k, v in overrides.items() if v is not None})
        return base


settings = Settings()
