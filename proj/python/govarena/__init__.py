"""Declarative governance topologies for multi-agent task pipelines."""

from ._core import (
    LoadError,
    PlanError,
    TaskLoadError,
    __version__,
    catalog,
    generate_topology,
    load_spec,
    run_sweep,
    run_task,
    summarize,
    tally,
    validate,
)

__all__ = [
    "LoadError",
    "PlanError",
    "TaskLoadError",
    "__version__",
    "catalog",
    "generate_topology",
    "load_spec",
    "run_sweep",
    "run_task",
    "summarize",
    "tally",
    "validate",
]
