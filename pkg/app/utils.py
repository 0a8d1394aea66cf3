import hashlib
import json
from typing import Dict, List, Tuple

import numpy as np
import pandas as pd

from . import schemas


def canonical_json(config: schemas.RunConfig) -> str:
    payload = config.model_dump(mode="json", exclude={"output_dir"})
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def config_hash(config: schemas.RunConfig) -> str:
    return hashlib.sha256(canonical_json(config).encode("utf-8")).hexdigest()


def records_frame(records: List[schemas.RealizationRecord], config_hash: str, version: str) -> pd.DataFrame:
    """One row per realization, observables as columns, ordered by realization index."""
    rows = [
        {
            "realization_index": r.realization_index,
            "seed": r.seed,
            "gap_min": r.gap_min,
            **r.observables,
        }
        for r in sorted(records, key=lambda r: r.realization_index)
    ]
    frame = pd.DataFrame(rows)
    frame["config_hash"] = config_hash
    frame["version"] = version
    return frame


def aggregate(records: List[schemas.RealizationRecord]) -> Tuple[Dict[str, float], Dict[str, float]]:
    """Mean and standard error of every observable, in realization order."""
    if not records:
        return {}, {}
    frame = pd.DataFrame([r.observables for r in sorted(records, key=lambda r: r.realization_index)])
    mean = frame.mean(axis=0)
    count = frame.count(axis=0)
    stderr = frame.std(axis=0, ddof=1) / np.sqrt(count)
    stderr = stderr.where(count > 1, 0.0)
    return {k: float(v) for k, v in mean.items()}, {k: float(v) for k, v in stderr.items()}
