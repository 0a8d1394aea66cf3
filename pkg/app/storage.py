import json
import logging
import threading
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator

import pandas as pd
from pydantic import BaseModel

from .errors import OutputError

logger = logging.getLogger(__name__)


class ResultWriter:
    """Writes run artifacts under one output directory; appends are serialized."""

    def __init__(self, output_dir):
        self.root = Path(output_dir)
        self._lock = threading.Lock()

    def open(self) -> "ResultWriter":
        try:
            self.root.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise OutputError(f"cannot create output directory {self.root}: {e}") from e
        return self

    def _write_text(self, name: str, text: str) -> Path:
        target = self.root / name
        with self._lock:
            try:
                target.parent.mkdir(parents=True, exist_ok=True)
                target.write_text(text, encoding="utf-8")
            except OSError as e:
                raise OutputError(f"cannot write {target}: {e}") from e
        logger.debug("wrote %s", target)
        return target

    def write_model(self, name: str, model: BaseModel) -> Path:
        payload = model.model_dump(mode="json")
        return self._write_text(name, json.dumps(payload, indent=2, sort_keys=True) + "\n")

    def write_report(self, index: int, model: BaseModel) -> Path:
        return self.write_model(f"realizations/report_{index:04d}.json", model)

    def write_frame(self, name: str, frame: pd.DataFrame) -> Path:
        return self._write_text(name, frame.to_csv(index=False, float_format="%.17g", lineterminator="\n"))


@contextmanager
def open_writer(output_dir) -> Iterator[ResultWriter]:
    writer = ResultWriter(output_dir).open()
    try:
        yield writer
    finally:
        logger.info("results in %s", writer.root)
