"""Catalytic dephasing of d^2-level systems with a possibly non-uniform source.

A precatalyst ``sigma`` with ``S_min(sigma) >= log2 d`` is first pushed
through the isometry ``J = sum_i |i>_{A'} |i>_{B'} K_i`` built from the
instrument of a purification of ``sigma``.  Its catalyst register then holds
the rank-d uniform state, which drives the d^2-on-d dephasing unitary
``U|i, j, k> = w^{jk} |i, j, k + i>``.

Joint states keep the two outcome copies A' and B' as one register ``I``:
``J sigma J^dagger`` is supported on ``span{|i>|i>}`` so this is an
isometric relabelling.  Tracing out either copy equals dephasing ``I``; use
:func:`expand_outcome_pair` to materialise both copies explicitly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .entropy import min_entropy, mutual_information
from .errors import CapacityExceeded, InfeasiblePad, InfeasibleSOR, InvalidState
from .instrument import NielsenInstrument, build_instrument
from .qstate import (
    BipartitePureState,
    DensityMatrix,
    apply_operator,
    dephase,
    matrix_to_json,
    max_abs,
    partial_trace,
    random_state,
    trace_distance,
)
from .report import VerificationReport
from .tolerances import get_tolerances

__all__ = [
    "DephasingPlan",
    "DephasingRun",
    "CollapseOutcome",
    "CollapseReport",
    "optimal_dephasing_unitary",
    "naive_dephasing_unitary",
    "induced_channel",
    "complementary_channel",
    "plan_catalytic_dephasing",
    "run_dephasing",
    "dephase_in_joint",
    "check_min_entropy_nondecrease",
    "recover_catalyst",
    "collapse_to_standard",
    "verify_dephasing",
    "expand_outcome_pair",
    "MAX_JOINT_DIM",
]

MAX_JOINT_DIM = 4096


def optimal_dephasing_unitary(d: int) -> np.ndarray:
    """``U|i, j, k> = exp(2 pi i jk/d) |i, j, (k + i) mod d>`` on (d^2 system) x (d catalyst)."""
    d = int(d)
    if d < 2:
        raise ValueError("d must be at least 2")
    n = d ** 3
    U = np.zeros((n, n), dtype=complex)
    w = np.exp(2j * np.pi / d)
    for i in range(d):
        for j in range(d):
            for k in range(d):
                U[(i * d + j) * d + (k + i) % d, (i * d + j) * d + k] = w ** ((j * k) % d)
    return U


def naive_dephasing_unitary(D: int) -> np.ndarray:
    """Controlled phase ``|j, k> -> w^{jk} |j, k>`` needing a D-level catalyst for D levels."""
    D = int(D)
    if D < 2:
        raise ValueError("D must be at least 2")
    j, k = np.meshgrid(np.arange(D), np.arange(D), indexing="ij")
    return np.diag(np.exp(2j * np.pi * ((j * k) % D) / D).ravel())


def _catalyst_dims(U: np.ndarray, cat_dim: int) -> int:
    n = U.shape[0]
    if n % cat_dim:
        raise InvalidState("unitary size is not a multiple of the catalyst dimension")
    return n // cat_dim


def induced_channel(U: np.ndarray, rho, cat_dim: int, catalyst=None) -> np.ndarray:
    """System output ``Tr_cat[U (rho (x) c) U^dagger]`` (``c`` defaults to I/cat_dim)."""
    r = np.asarray(rho, dtype=complex)
    sys_dim = _catalyst_dims(U, cat_dim)
    c = np.eye(cat_dim) / cat_dim if catalyst is None else np.asarray(catalyst)
    out = U @ np.kron(r, c) @ U.conj().T
    return out.reshape(sys_dim, cat_dim, sys_dim, cat_dim).trace(axis1=1, axis2=3)


def complementary_channel(U: np.ndarray, rho, cat_dim: int, catalyst=None) -> np.ndarray:
    """Catalyst output ``Tr_sys[U (rho (x) c) U^dagger]``."""
    r = np.asarray(rho, dtype=complex)
    sys_dim = _catalyst_dims(U, cat_dim)
    c = np.eye(cat_dim) / cat_dim if catalyst is None else np.asarray(catalyst)
    out = U @ np.kron(r, c) @ U.conj().T
    return out.reshape(sys_dim, cat_dim, sys_dim, cat_dim).trace(axis1=0, axis2=2)


# --------------------------------------------------------------------------
# plan
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DephasingPlan:
    """Everything needed to dephase d^2-level states with ``precatalyst``.

    Attributes
    ----------
    instrument : NielsenInstrument
        Built on a purification of the precatalyst; its Kraus operators act
        on the catalyst register B.
    embed_isometry : ndarray
        ``J = sum_i |i>_{A'} |i>_{B'} K_i`` from B into A' (x) B' (x) B.
    dephase_unitary : ndarray
        Optimal unitary lifted to (d^2 system) x (catalyst register B): it acts
        as the d^3 construction on the target subspace of B and as the
        identity on its complement.
    catalyst_corrections : tuple of ndarray
        ``V_i`` on B with ``sum_i p_i V_i^dagger Phi_B V_i = sigma``.
    """

    d: int
    precatalyst: DensityMatrix
    instrument: NielsenInstrument
    embed_isometry: np.ndarray
    dephase_unitary: np.ndarray
    catalyst_basis: np.ndarray
    catalyst_corrections: tuple[np.ndarray, ...]
    register_map: dict = field(default_factory=dict)

    @property
    def system_dim(self) -> int:
        return self.d * self.d

    @property
    def catalyst_dim(self) -> int:
        return self.precatalyst.dim

    @property
    def num_outcomes(self) -> int:
        return self.instrument.num_outcomes

    def uniform_catalyst(self) -> np.ndarray:
        """``Phi_B``: rank-d uniform state on the target subspace of B."""
        return self.instrument.target_state_a()

    def leftover(self) -> np.ndarray:
        """``kappa = sum_i Tr[K_i sigma K_i^dagger] |i><i|``."""
        s = self.precatalyst.data
        return np.diag([float(np.real(np.trace(K @ s @ K.conj().T))) for K in self.instrument.all_kraus()]).astype(complex)

    def prepared_source(self) -> np.ndarray:
        """``J_c sigma J_c^dagger`` on (B, I) with the outcome copies merged."""
        ks = self.instrument.all_kraus()
        n, m = self.catalyst_dim, len(ks)
        s = self.precatalyst.data
        omega = np.zeros((n, m, n, m), dtype=complex)
        for i, Ki in enumerate(ks):
            left = Ki @ s
            for j, Kj in enumerate(ks):
                omega[:, i, :, j] = left @ Kj.conj().T
        return omega.reshape(n * m, n * m)

    def catalyst_state(self) -> np.ndarray:
        """State of (B, B') after the isometry: ``Tr_{A'}[J sigma J^dagger]``."""
        return dephase(self.prepared_source(), [self.catalyst_dim, self.num_outcomes], 1)

    def to_dict(self) -> dict:
        inst = self.instrument
        return {
            "d": self.d,
            "precatalyst": self.precatalyst.to_json(),
            "instrument": inst.to_dict(),
            "leftover_weights": [float(p) for p in inst.all_probs()],
            "dephase_unitary": matrix_to_json(self.dephase_unitary, [self.system_dim, self.catalyst_dim]),
            "register_map": self.register_map,
        }


def _lift_dephasing_unitary(d: int, basis: np.ndarray) -> np.ndarray:
    n = basis.shape[0]
    S = d * d
    core = optimal_dephasing_unitary(d).reshape(S, d, S, d)
    lifted = np.zeros((S, n, S, n), dtype=complex)
    lifted[:, :d, :, :d] = core
    for k in range(d, n):
        lifted[:, k, :, k] = np.eye(S)
    lifted = lifted.reshape(S * n, S * n)
    T = np.kron(np.eye(S), basis)
    return T @ lifted @ T.conj().T


def plan_catalytic_dephasing(sigma: DensityMatrix, d: int) -> DephasingPlan:
    """Build the catalytic dephasing plan for d^2-level systems.

    Raises
    ------
    InfeasibleSOR
        If ``S_min(sigma) < log2 d`` beyond ``tol_major``.
    """
    d = int(d)
    if d < 2:
        raise ValueError("d must be at least 2")
    pad = BipartitePureState.purification(sigma)
    try:
        inst = build_instrument(pad, d)
    except InfeasiblePad as exc:
        smin = min_entropy(sigma)
        raise InfeasibleSOR(
            f"S_min(sigma) = {smin:.6g} bits < log2 {d} = {math.log2(d):.6g} bits "
            f"(lambda_max = {exc.lambda_max:.6g} > 1/{d}); sigma cannot dephase {d * d}-level states",
            lambda_max=exc.lambda_max, d=d,
        ) from exc
    ks = inst.all_kraus()
    m = len(ks)
    n = sigma.dim
    J = np.zeros((m, m, n, n), dtype=complex)
    for i, K in enumerate(ks):
        J[i, i] = K
    J = J.reshape(m * m * n, n)
    basis = np.asarray(pad.basis_a)
    corrections = []
    for perm in inst.permutations:
        P = np.zeros((n, n), dtype=complex)
        P[perm, np.arange(n)] = 1.0
        corrections.append(basis @ P @ basis.conj().T)
    if inst.kernel_projector is not None:
        corrections.append(np.eye(n, dtype=complex))
    for a in [J, *corrections]:
        a.setflags(write=False)
    U = _lift_dephasing_unitary(d, basis)
    U.setflags(write=False)
    return DephasingPlan(
        d=d,
        precatalyst=sigma,
        instrument=inst,
        embed_isometry=J,
        dephase_unitary=U,
        catalyst_basis=basis,
        catalyst_corrections=tuple(corrections),
        register_map={
            "joint_order": ["system", "catalyst", "outcome"],
            "system": {"dim": d * d, "basis": "|i, j> = |i * d + j>"},
            "catalyst": {"dim": n, "role": "B"},
            "outcome": {"dim": m, "role": "merged copies A' (leftover, with system) and B' (with catalyst)"},
            "embed_isometry_order": ["A'", "B'", "B"],
        },
    )


# --------------------------------------------------------------------------
# running
# --------------------------------------------------------------------------


def dephase_in_joint(plan: DephasingPlan, rho: np.ndarray, dims: list[int], system: int = 0):
    """Dephase factor ``system`` of a joint state using a fresh copy of the precatalyst.

    Appends (catalyst, outcome) factors at the end and returns ``(rho, dims)``.
    """
    dims = list(dims)
    if dims[system] != plan.system_dim:
        raise InvalidState(f"factor {system} has dimension {dims[system]}, plan dephases {plan.system_dim}")
    n, m = plan.catalyst_dim, plan.num_outcomes
    total = int(np.prod(dims)) * n * m
    if total > MAX_JOINT_DIM:
        raise CapacityExceeded(f"joint dimension {total} exceeds {MAX_JOINT_DIM}")
    joint = np.kron(np.asarray(rho), plan.prepared_source())
    dims = dims + [n, m]
    return apply_operator(plan.dephase_unitary, joint, dims, [system, len(dims) - 2])


@dataclass(frozen=True, eq=False)
class DephasingRun:
    """Outputs of one dephasing run.

    ``joint`` has factors (system, catalyst B, outcome I).  ``catalyst_out``
    is the (B, B') state, which is also the complementary output;
    ``leftover_out`` is kappa on A'; ``system_with_leftover`` is the (S, A') state.
    """

    system_out: DensityMatrix
    catalyst_out: DensityMatrix
    leftover_out: DensityMatrix
    system_with_leftover: DensityMatrix
    joint: DensityMatrix

    @property
    def complementary_out(self) -> DensityMatrix:
        return self.catalyst_out


def run_dephasing(plan: DephasingPlan, rho: DensityMatrix) -> DephasingRun:
    if rho.dim != plan.system_dim:
        raise InvalidState(f"input has dimension {rho.dim}, plan dephases {plan.system_dim}")
    out, dims = dephase_in_joint(plan, rho.data, [rho.dim], 0)
    joint = DensityMatrix(out, dims, check=False)
    system = partial_trace(joint, [0])
    cat = partial_trace(joint, [1, 2])
    cat = DensityMatrix(dephase(cat.data, cat.dims, 1), cat.dims, check=False)
    sys_left = partial_trace(joint, [0, 2])
    sys_left = DensityMatrix(dephase(sys_left.data, sys_left.dims, 1), sys_left.dims, check=False)
    left = partial_trace(sys_left, [1])
    return DephasingRun(system, cat, left, sys_left, joint)


def expand_outcome_pair(joint: DensityMatrix, outcome: int = 2) -> DensityMatrix:
    """Replace the merged outcome factor by explicit copies A' (x) B' (appended in that order)."""
    dims = list(joint.dims)
    m = dims[outcome]
    iso = np.zeros((m * m, m), dtype=complex)
    iso[np.arange(m) * m + np.arange(m), np.arange(m)] = 1.0
    out, new_dims = apply_operator(iso, joint.data, dims, [outcome], [m * m])
    new_dims = dims[:outcome] + [m, m] + dims[outcome + 1:]
    return DensityMatrix(out, new_dims, check=False)


# --------------------------------------------------------------------------
# diagnostics
# --------------------------------------------------------------------------


def check_min_entropy_nondecrease(plan: DephasingPlan) -> VerificationReport:
    """Compare ``lambda_max(Phi_B (x) kappa)``, ``max_i Tr[K_i sigma K_i^dagger]/d`` and ``lambda_max(sigma)``."""
    cat = plan.catalyst_state()
    lhs = float(np.max(np.linalg.eigvalsh(cat)))
    s = plan.precatalyst.data
    mid = max(float(np.real(np.trace(K @ s @ K.conj().T))) / plan.d for K in plan.instrument.all_kraus())
    rhs = float(np.max(np.linalg.eigvalsh(s)))
    rep = VerificationReport("min_entropy_nondecrease")
    rep.add("|lambda_max(catalyst) - max_i p_i/d|", abs(lhs - mid), 1e-10)
    rep.add("max_i p_i/d - lambda_max(sigma)", mid - rhs, 1e-10)
    rep.extras.update({
        "lambda_max_catalyst": lhs,
        "max_branch_weight_over_d": mid,
        "lambda_max_sigma": rhs,
        "smin_catalyst_bits": -math.log2(lhs),
        "smin_sigma_bits": -math.log2(rhs),
    })
    return rep


def _fourier(m: int) -> np.ndarray:
    k = np.arange(m)
    return np.exp(2j * np.pi * np.outer(k, k) / m) / np.sqrt(m)


def recover_catalyst(plan: DephasingPlan, catalyst=None, omit: int | None = None,
                     return_leftover: bool = False):
    """Turn ``Phi_B (x) kappa_{B'}`` back into the precatalyst.

    Applies ``sum_i V_i^dagger (x) |i><i|``, dephases B' in the Fourier basis
    of its eigenbasis and discards it.  ``omit`` replaces one ``V_i`` with the
    identity (used to show every correction matters).
    """
    n, m = plan.catalyst_dim, plan.num_outcomes
    state = plan.catalyst_state() if catalyst is None else np.asarray(catalyst)
    ctrl = np.zeros((n * m, n * m), dtype=complex)
    for i, V in enumerate(plan.catalyst_corrections):
        Vi = np.eye(n) if i == omit else V
        proj = np.zeros((m, m))
        proj[i, i] = 1.0
        ctrl += np.kron(Vi.conj().T, proj)
    out = ctrl @ state @ ctrl.conj().T
    F = _fourier(m)
    out, dims = apply_operator(F.conj().T, out, [n, m], [1])
    out = dephase(out, dims, 1)
    out, dims = apply_operator(F, out, dims, [1])
    joint = DensityMatrix(out, dims, check=False)
    recovered = partial_trace(joint, [0])
    if return_leftover:
        return recovered, partial_trace(joint, [1])
    return recovered


@dataclass(frozen=True, eq=False)
class CollapseOutcome:
    index: int
    probability: float
    system_state: DensityMatrix
    catalyst_state: DensityMatrix


@dataclass
class CollapseReport:
    outcomes: list[CollapseOutcome]
    skipped: list[int]
    catalyst_deviation: float
    system_spread: float
    mutual_information: float

    @property
    def passed(self) -> bool:
        tol = get_tolerances()
        return (self.catalyst_deviation <= tol.tol_eq and self.system_spread <= tol.tol_eq
                and self.mutual_information <= 1e-8)


def collapse_to_standard(plan: DephasingPlan, joint: DensityMatrix, basis: np.ndarray | None = None) -> CollapseReport:
    """Measure the Bob-side outcome copy B' and condition on each result.

    ``basis`` holds the measurement vectors as columns (default: computational).
    Outcomes with probability below ``tol_eq`` are skipped and listed.
    """
    dims = list(joint.dims)
    if len(dims) != 3 or dims[0] != plan.system_dim or dims[1] != plan.catalyst_dim:
        raise InvalidState(f"joint dims {dims} do not come from this plan")
    m = dims[2]
    E = np.eye(m, dtype=complex) if basis is None else np.asarray(basis, dtype=complex)
    tol = get_tolerances()
    phi_b = plan.uniform_catalyst()
    outcomes, skipped = [], []
    for e in range(E.shape[1]):
        # <e|_{B'} on the merged register acts as diag(conj(e)) on I, leaving A'
        op = np.diag(E[:, e].conj())
        post, _ = apply_operator(op, joint.data, dims, [2])
        p = float(np.real(np.trace(post)))
        if p < tol.tol_eq:
            skipped.append(e)
            continue
        st = DensityMatrix(post / p, dims, check=False)
        outcomes.append(CollapseOutcome(e, p, partial_trace(st, [0]), partial_trace(st, [1])))
    cat_dev = max((max_abs(o.catalyst_state.data - phi_b) for o in outcomes), default=0.0)
    ref = outcomes[0].system_state.data if outcomes else None
    spread = max((max_abs(o.system_state.data - ref) for o in outcomes), default=0.0)
    # classical outcome register correlated with the system record
    S = plan.system_dim
    k = len(outcomes)
    cq = np.zeros((k, S, k, S), dtype=complex)
    for a, o in enumerate(outcomes):
        cq[a, :, a, :] = o.probability * dephase(o.system_state.data, [S], 0)
    cq = cq.reshape(k * S, k * S)
    cq = cq / np.real(np.trace(cq)) if k else cq
    mi = mutual_information(DensityMatrix(cq, (k, S), check=False), [0], [1]) if k else 0.0
    return CollapseReport(outcomes, skipped, cat_dev, spread, max(mi, 0.0))


def verify_dephasing(plan: DephasingPlan, n_inputs: int = 20, seed: int = 0) -> VerificationReport:
    """Run the plan on seeded random inputs and collect every catalyst check."""
    S = plan.system_dim
    phi_kappa = np.kron(plan.uniform_catalyst(), plan.leftover())
    off, cat_dev, spread = 0.0, 0.0, 0.0
    first = None
    for k in range(n_inputs):
        rho = random_state("ginibre_mixed", S, seed=seed + k)
        run = run_dephasing(plan, rho)
        out = run.system_out.data
        off = max(off, max_abs(out - np.diag(np.diag(out))), max_abs(np.diag(out) - np.diag(rho.data)))
        cat_dev = max(cat_dev, max_abs(run.catalyst_out.data - phi_kappa))
        if first is None:
            first = run
        else:
            spread = max(spread, max_abs(run.complementary_out.data - first.complementary_out.data))
    rep = VerificationReport("catalytic_dephasing")
    rep.add("system_not_dephased", off, get_tolerances().tol_eq)
    rep.add("catalyst_deviation", cat_dev, get_tolerances().tol_eq)
    rep.add("complementary_spread", spread, get_tolerances().tol_eq)
    mono = check_min_entropy_nondecrease(plan)
    rep.checks.extend(mono.checks)
    rec = trace_distance(recover_catalyst(plan), plan.precatalyst)
    rep.add("recovery_distance", rec, get_tolerances().tol_eq)
    col = collapse_to_standard(plan, first.joint) if first is not None else None
    if col is not None:
        rep.add("collapse_catalyst_deviation", col.catalyst_deviation, get_tolerances().tol_eq)
        rep.add("collapse_mutual_information", col.mutual_information, 1e-8)
    rep.extras.update({
        "d": plan.d,
        "n_inputs": n_inputs,
        "leftover_weights": [float(p) for p in plan.instrument.all_probs()],
        **{k: v for k, v in mono.extras.items()},
    })
    return rep
