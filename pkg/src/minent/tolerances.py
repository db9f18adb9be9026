"""Numerical tolerances with scoped overrides.

All comparisons in the package read the active :class:`Tolerances` through
:func:`get_tolerances`.  Overrides are scoped with :func:`use_tolerances`,
which is backed by a context variable and therefore safe across threads.
"""

from __future__ import annotations

import contextlib
import contextvars
import dataclasses
from dataclasses import dataclass
from typing import Iterator, Mapping


@dataclass(frozen=True)
class Tolerances:
    tol_herm: float = 1e-9
    tol_psd: float = 1e-9
    tol_tr: float = 1e-9
    tol_eq: float = 1e-10
    tol_major: float = 1e-9
    eps_floor: float = 1e-6
    # eigenvalues below zero_rel * dim count as zero
    zero_rel: float = 1e-12

    def __post_init__(self) -> None:
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if not value > 0:
                raise ValueError(f"tolerance {f.name} must be positive, got {value!r}")

    def zero_threshold(self, dim: int) -> float:
        return self.zero_rel * max(int(dim), 1)

    def replace(self, **overrides: float) -> "Tolerances":
        unknown = set(overrides) - {f.name for f in dataclasses.fields(self)}
        if unknown:
            raise ValueError(f"unknown tolerance name(s): {', '.join(sorted(unknown))}")
        return dataclasses.replace(self, **{k: float(v) for k, v in overrides.items()})

    def as_dict(self) -> dict[str, float]:
        return dataclasses.asdict(self)


DEFAULT_TOLERANCES = Tolerances()
_ACTIVE: contextvars.ContextVar[Tolerances] = contextvars.ContextVar(
    "minent_tolerances", default=DEFAULT_TOLERANCES
)


def get_tolerances() -> Tolerances:
    return _ACTIVE.get()


@contextlib.contextmanager
def use_tolerances(tol: Tolerances | None = None, **overrides: float) -> Iterator[Tolerances]:
    """Temporarily replace the active tolerances.

    >>> with use_tolerances(tol_eq=1e-8):
    ...     get_tolerances().tol_eq
    1e-08
    """
    base = tol if tol is not None else get_tolerances()
    new = base.replace(**overrides) if overrides else base
    token = _ACTIVE.set(new)
    try:
        yield new
    finally:
        _ACTIVE.reset(token)


def parse_overrides(text: str) -> dict[str, float]:
    """Parse ``"tol_eq=1e-8,tol_tr=1e-9"`` into a mapping."""
    out: dict[str, float] = {}
    for chunk in text.replace(";", ",").split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        if "=" not in chunk:
            raise ValueError(f"tolerance override {chunk!r} is not of the form name=value")
        name, value = chunk.split("=", 1)
        out[name.strip()] = float(value)
    return out


def merged(base: Tolerances, *layers: Mapping[str, float]) -> Tolerances:
    """Apply override mappings in order; later layers win."""
    combined: dict[str, float] = {}
    for layer in layers:
        combined.update(layer)
    return base.replace(**combined) if combined else base
