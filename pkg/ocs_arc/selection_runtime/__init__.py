# ocs_arc/selection_runtime/__init__.py
from __future__ import annotations

"""
Selection runtime (lazy import).

Submodules are loaded on first attribute access (PEP 562) so that
`import ocs_arc.selection_runtime` stays cheap in worker processes and
in the CLI's `validate` path, which never touches the models.
"""

from importlib import import_module
from typing import Any

__all__ = [
    "utils",
    "atomic_store",
    "scores",
    "pvalues",
    "procedures",
    "multivariate",
    "models",
    "datagen",
    "metrics",
    "pipeline",
]

_LAZY_MAP = {name: f"ocs_arc.selection_runtime.{name}" for name in __all__}


def __getattr__(name: str) -> Any:
    mod_path = _LAZY_MAP.get(name)
    if not mod_path:
        raise AttributeError(name)
    return import_module(mod_path)


def __dir__() -> list[str]:
    return sorted(set(globals().keys()) | set(_LAZY_MAP.keys()))
