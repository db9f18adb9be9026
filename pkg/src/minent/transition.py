"""State transitions by unitary, catalytic dephasing, unitary.

A source with spectrum ``lambda`` can be turned into any target whose
spectrum ``mu`` is majorized by ``lambda``.  A Schur-Horn rotation gives the
rotated source diagonal ``mu``; dephasing then leaves ``diag(mu)``, and the
target eigenbasis finishes the job.  Dephasing a D-level system is done
catalytically on ``d^2 >= D`` levels with ``d = ceil(sqrt(D))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .dephasing import DephasingPlan, dephase_in_joint, plan_catalytic_dephasing
from .entropy import majorizes, min_entropy, schur_horn_unitary
from .errors import InfeasibleSOR, InsufficientCatalyst, InvalidState, NotMajorized
from .qstate import DensityMatrix, dephase, matrix_to_json, partial_trace, sorted_eigh, trace_distance

__all__ = [
    "TransitionPlan",
    "TransitionRun",
    "transition_feasible",
    "plan_transition",
    "execute_transition",
    "catalyst_requirement",
    "catalyst_bounds",
    "dephasing_dimension",
]


def dephasing_dimension(D: int) -> int:
    """Smallest ``d`` with ``d^2 >= D``."""
    D = int(D)
    if D < 1:
        raise ValueError("D must be positive")
    return math.isqrt(D - 1) + 1


def catalyst_requirement(D: int) -> float:
    """Catalyst min-entropy in bits sufficient to dephase D levels: ``log2 ceil(sqrt D)``."""
    if int(D) < 2:
        raise ValueError("D must be at least 2")
    return math.log2(dephasing_dimension(D))


def catalyst_bounds(D: int) -> dict:
    """Sufficient and necessary catalyst min-entropy (bits) for D-level dephasing.

    The two coincide when D is a perfect square.
    """
    d = dephasing_dimension(D)
    return {
        "D": int(D),
        "d": d,
        "sufficient_bits": catalyst_requirement(D),
        "necessary_bits": math.log2(D) / 2,
        "perfect_square": d * d == int(D),
    }


def _check_pair(source: DensityMatrix, target: DensityMatrix) -> None:
    if source.dim != target.dim:
        raise InvalidState(f"source has dimension {source.dim}, target has dimension {target.dim}")


def transition_feasible(source: DensityMatrix, target: DensityMatrix) -> bool:
    """True iff the target spectrum is majorized by the source spectrum."""
    _check_pair(source, target)
    return majorizes(source.eigenvalues(), target.eigenvalues())


@dataclass(frozen=True, eq=False)
class TransitionPlan:
    """``source -> target`` as ``U2 . Deph . U1``.

    ``embedding_levels`` is ``d^2 - D``, the number of never-populated levels
    added so the dephasing runs on a square dimension.
    """

    source: DensityMatrix
    target: DensityMatrix
    U1: np.ndarray
    U2: np.ndarray
    dephasing_dimension: int
    catalyst_requirement: float
    dephasing: DephasingPlan

    @property
    def dim(self) -> int:
        return self.source.dim

    @property
    def embedding_levels(self) -> int:
        return self.dephasing_dimension ** 2 - self.dim

    def to_dict(self) -> dict:
        b = catalyst_bounds(self.dim)
        return {
            "source": self.source.to_json(),
            "target": self.target.to_json(),
            "U1": matrix_to_json(self.U1),
            "U2": matrix_to_json(self.U2),
            "dephasing_dimension": self.dephasing_dimension,
            "embedding_levels": self.embedding_levels,
            "catalyst_requirement_bits": self.catalyst_requirement,
            "catalyst_necessary_bits": b["necessary_bits"],
            "catalyst_min_entropy_bits": min_entropy(self.dephasing.precatalyst),
            "dephasing_plan": self.dephasing.to_dict(),
        }


def plan_transition(source: DensityMatrix, target: DensityMatrix, sigma: DensityMatrix) -> TransitionPlan:
    """Synthesize the unitary-dephase-unitary pipeline driven by catalyst ``sigma``.

    Raises
    ------
    NotMajorized
        The target spectrum is not majorized by the source spectrum.
    InsufficientCatalyst
        ``S_min(sigma) < log2 ceil(sqrt D)``.
    """
    _check_pair(source, target)
    D = source.dim
    if D < 2:
        raise InvalidState("transitions need dimension at least 2")
    lam, Ws = sorted_eigh(source.data)
    mu, Wt = sorted_eigh(target.data)
    if not majorizes(lam, mu):
        raise NotMajorized(
            "target spectrum is not majorized by the source spectrum: "
            f"source {np.round(lam, 6).tolist()}, target {np.round(mu, 6).tolist()}"
        )
    d = dephasing_dimension(D)
    need = catalyst_requirement(D)
    try:
        deph = plan_catalytic_dephasing(sigma, d)
    except InfeasibleSOR as exc:
        raise InsufficientCatalyst(
            f"catalyst min-entropy {min_entropy(sigma):.6g} bits is below the required "
            f"{need:.6g} bits (log2 {d}) for {D}-level dephasing",
            lambda_max=exc.lambda_max, d=d,
        ) from exc
    O = schur_horn_unitary(np.clip(lam, 0.0, None), np.clip(mu, 0.0, None))
    U1 = O @ Ws.conj().T
    return TransitionPlan(
        source=source, target=target, U1=U1, U2=Wt,
        dephasing_dimension=d, catalyst_requirement=need, dephasing=deph,
    )


class TransitionRun(NamedTuple):
    output: DensityMatrix
    catalyst_out: DensityMatrix
    distance: float


def execute_transition(plan: TransitionPlan, state: DensityMatrix | None = None) -> TransitionRun:
    """Run the plan on ``state`` (default: the planned source)."""
    state = plan.source if state is None else state
    if state.dim != plan.dim:
        raise InvalidState(f"state has dimension {state.dim}, plan acts on {plan.dim}")
    D, S = plan.dim, plan.dephasing_dimension ** 2
    rotated = plan.U1 @ state.data @ plan.U1.conj().T
    emb = np.zeros((S, S), dtype=complex)
    emb[:D, :D] = rotated
    out, dims = dephase_in_joint(plan.dephasing, emb, [S], 0)
    joint = DensityMatrix(out, dims, check=False)
    diag = partial_trace(joint, [0]).data[:D, :D]
    cat = partial_trace(joint, [1, 2])
    cat = DensityMatrix(dephase(cat.data, cat.dims, 1), cat.dims, check=False)
    final = DensityMatrix(plan.U2 @ diag @ plan.U2.conj().T, check=False)
    return TransitionRun(final, cat, trace_distance(final, plan.target))
