from dataclasses import dataclass
from typing import Callable, Dict

from .errors import ConfigError

Handler = Callable[..., "TaskResult"]


@dataclass
class TaskResult:
    report: object
    observables: Dict[str, float]
    gap_min: float


class TaskRouter:
    """Collects the task handlers of one module."""

    def __init__(self):
        self.handlers: Dict[str, Handler] = {}

    def task(self, name: str):
        def decorator(fn: Handler) -> Handler:
            self.handlers[name] = fn
            return fn

        return decorator


class TaskRegistry:
    def __init__(self):
        self.handlers: Dict[str, Handler] = {}

    def include_router(self, router: TaskRouter) -> None:
        for name, fn in router.handlers.items():
            if name in self.handlers:
                raise ValueError(f"task {name!r} registered twice")
            self.handlers[name] = fn

    def handler(self, name: str) -> Handler:
        try:
            return self.handlers[name]
        except KeyError:
            raise ConfigError(f"no handler for task {name!r}") from None
