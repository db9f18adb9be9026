"""One-way LOCC instrument that turns a pure pad into a maximally entangled one.

Given a pad with Schmidt spectrum ``lambda`` satisfying ``max(lambda) <= 1/d``,
the spectrum is split into uniform distributions over ``d``-element subsets
``S_m`` with weights ``p_m``.  Branch ``m`` keeps only the Schmidt vectors in
``S_m``, rescales them to equal weight, and relabels them onto the first ``d``
Schmidt vectors on both sides.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .entropy import uniform_subset_decompose
from .errors import InfeasiblePad, InfeasibleSpectrum, InvalidState
from .qstate import BipartitePureState, DensityMatrix, matrix_to_json, max_abs
from .report import VerificationReport
from .tolerances import get_tolerances

log = logging.getLogger(__name__)

__all__ = ["NielsenInstrument", "build_instrument", "apply_instrument", "verify_instrument",
           "kernel_weight", "branch_permutation"]

KERNEL_LABEL = "⊥"


@dataclass(frozen=True, eq=False)
class NielsenInstrument:
    """Kraus operators on A with matching correction unitaries on B.

    ``kraus``, ``corrections``, ``probs`` and ``subsets`` describe the regular
    branches.  When the pad marginal is not full rank, ``kernel_projector``
    is a further branch (label ``"⊥"``) that never fires on the pad itself.
    ``permutations[m]`` is the index map ``k -> pi_m(k)`` used to build
    ``corrections[m]`` in the pad's Schmidt basis of B.
    """

    d: int
    kraus: tuple[np.ndarray, ...]
    corrections: tuple[np.ndarray, ...]
    probs: np.ndarray
    subsets: tuple[tuple[int, ...], ...]
    permutations: tuple[np.ndarray, ...]
    target_basis_a: np.ndarray
    target_basis_b: np.ndarray
    kernel_projector: np.ndarray | None = None

    @property
    def dim_a(self) -> int:
        return self.target_basis_a.shape[0]

    @property
    def dim_b(self) -> int:
        return self.target_basis_b.shape[0]

    @property
    def num_outcomes(self) -> int:
        return len(self.kraus) + (0 if self.kernel_projector is None else 1)

    @property
    def outcome_labels(self) -> list[str]:
        labels = [str(i) for i in range(len(self.kraus))]
        if self.kernel_projector is not None:
            labels.append(KERNEL_LABEL)
        return labels

    def all_kraus(self) -> list[np.ndarray]:
        ks = list(self.kraus)
        if self.kernel_projector is not None:
            ks.append(self.kernel_projector)
        return ks

    def all_corrections(self) -> list[np.ndarray]:
        us = list(self.corrections)
        if self.kernel_projector is not None:
            us.append(np.eye(self.dim_b, dtype=complex))
        return us

    def all_probs(self) -> np.ndarray:
        if self.kernel_projector is None:
            return np.asarray(self.probs)
        return np.append(self.probs, 0.0)

    def target_state_a(self) -> np.ndarray:
        """Uniform rank-d state on the target subspace of A."""
        e = self.target_basis_a
        return e @ e.conj().T / self.d

    def target_pad(self) -> np.ndarray:
        """Canonical maximally entangled vector ``sum_r |a_r>|b_r> / sqrt(d)``."""
        return np.einsum("ir,jr->ij", self.target_basis_a, self.target_basis_b).ravel() / np.sqrt(self.d)

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "kraus": [matrix_to_json(k) for k in self.all_kraus()],
            "corrections": [matrix_to_json(u) for u in self.all_corrections()],
            "probs": [float(p) for p in self.all_probs()],
            "labels": self.outcome_labels,
            "subsets": [list(s) for s in self.subsets],
        }


def branch_permutation(subset, d: int, n: int) -> np.ndarray:
    """Index map sending ``sorted(subset)[r] -> r`` and the rest, in order, to ``d..n-1``."""
    s = sorted(int(k) for k in subset)
    perm = np.empty(n, dtype=int)
    perm[s] = np.arange(d)
    rest_src = [k for k in range(n) if k not in set(s)]
    perm[rest_src] = np.arange(d, n)
    return perm


def _permutation_matrix(perm: np.ndarray) -> np.ndarray:
    n = perm.size
    P = np.zeros((n, n), dtype=complex)
    P[perm, np.arange(n)] = 1.0
    return P


def build_instrument(pad: BipartitePureState, d: int) -> NielsenInstrument:
    """Synthesize the instrument converting ``pad`` into a rank-``d`` maximally entangled state.

    Raises
    ------
    InfeasiblePad
        If the largest Schmidt coefficient exceeds ``1/d + tol_major``.
    """
    d = int(d)
    if d < 1:
        raise ValueError("d must be a positive integer")
    tol = get_tolerances()
    lam = np.asarray(pad.coefficients, dtype=float)
    thr = tol.zero_threshold(pad.dim_a)
    n = int(np.count_nonzero(lam >= thr))
    lmax = float(lam[0])
    if lmax > 1.0 / d + tol.tol_major or n < d:
        raise InfeasiblePad(
            f"lambda_max = {lmax:.6g} > 1/{d} = {1.0 / d:.6g}: the pad's marginal min-entropy "
            f"{-np.log2(lmax):.6g} bits is below log2 {d} = {np.log2(d):.6g}",
            lambda_max=lmax, d=d,
        )
    support = lam[:n] / lam[:n].sum()
    try:
        dec = uniform_subset_decompose(support, d)
    except InfeasibleSpectrum as exc:
        raise InfeasiblePad(str(exc), lambda_max=lmax, d=d) from exc
    # normalising by the reconstructed weights makes completeness exact
    lam_hat = dec.reconstruct()

    A = np.asarray(pad.basis_a)
    B = np.asarray(pad.basis_b)
    ta, tb = A[:, :d], B[:, :d]
    kraus, corrections, perms = [], [], []
    for p_m, s_m in dec.terms:
        K = np.zeros((pad.dim_a, pad.dim_a), dtype=complex)
        for r, k in enumerate(s_m):
            K += np.sqrt(p_m / (d * lam_hat[k])) * np.outer(A[:, r], A[:, k].conj())
        perm = branch_permutation(s_m, d, pad.dim_b)
        U = B @ _permutation_matrix(perm) @ B.conj().T
        kraus.append(K)
        corrections.append(U)
        perms.append(perm)
    kernel = None
    if n < pad.dim_a:
        rest = A[:, n:]
        kernel = rest @ rest.conj().T

    def freeze(m):
        m = np.array(m)
        m.setflags(write=False)
        return m

    return NielsenInstrument(
        d=d,
        kraus=tuple(freeze(k) for k in kraus),
        corrections=tuple(freeze(u) for u in corrections),
        probs=freeze(dec.weights),
        subsets=dec.subsets,
        permutations=tuple(freeze(p) for p in perms),
        target_basis_a=freeze(ta),
        target_basis_b=freeze(tb),
        kernel_projector=None if kernel is None else freeze(kernel),
    )


def kernel_weight(inst: NielsenInstrument, state: DensityMatrix) -> float:
    """Probability of the ``"⊥"`` branch for ``state``."""
    if inst.kernel_projector is None:
        return 0.0
    return float(np.real(np.trace(inst.kernel_projector @ state.data)))


def apply_instrument(inst: NielsenInstrument, state: DensityMatrix) -> DensityMatrix:
    """``sum_i K_i w K_i^dagger (x) |i><i|`` on A (x) C."""
    if state.dim != inst.dim_a:
        raise InvalidState(f"state dimension {state.dim} does not match instrument input {inst.dim_a}")
    w = state.data
    ks = inst.all_kraus()
    m = len(ks)
    out = np.zeros((inst.dim_a, m, inst.dim_a, m), dtype=complex)
    for i, K in enumerate(ks):
        out[:, i, :, i] = K @ w @ K.conj().T
    kw = kernel_weight(inst, state)
    if kw > get_tolerances().tol_eq:
        log.warning("input has weight %.3e outside the pad support (outcome %s)", kw, KERNEL_LABEL)
    n = inst.dim_a * m
    return DensityMatrix(out.reshape(n, n), (inst.dim_a, m), check=False)


def verify_instrument(inst: NielsenInstrument, pad: BipartitePureState) -> VerificationReport:
    """Check completeness, branch states, Kraus ranks and pad conversion."""
    tol = get_tolerances()
    rep = VerificationReport("nielsen_instrument")
    if pad.dim_a != inst.dim_a or pad.dim_b != inst.dim_b:
        rep.add("dimensions", 1.0, 0.0)
        return rep
    ks, us, ps = inst.all_kraus(), inst.all_corrections(), inst.all_probs()
    eye_a = np.eye(inst.dim_a)
    rep.add("completeness", max_abs(sum(K.conj().T @ K for K in ks) - eye_a), tol.tol_eq)
    rep.add("probs_sum", abs(float(np.sum(ps)) - 1.0), tol.tol_eq)
    psi_a = pad.marginal_a().data
    phi_a = inst.target_state_a()
    rep.add("branch_states",
            max(max_abs(K @ psi_a @ K.conj().T - p * phi_a) for K, p in zip(inst.kraus, inst.probs)),
            tol.tol_eq)
    ranks = [int(np.linalg.matrix_rank(K, tol=1e-8)) for K in inst.kraus]
    rep.add("kraus_rank", max(abs(r - inst.d) for r in ranks), 0.0)
    rep.add("corrections_unitary",
            max(max_abs(U @ U.conj().T - np.eye(inst.dim_b)) for U in us), tol.tol_eq)
    M = pad.matrix
    rho = np.zeros((M.size, M.size), dtype=complex)
    for K, U in zip(ks, us):
        v = (K @ M @ U.T).ravel()
        rho += np.outer(v, v.conj())
    target = inst.target_pad()
    rep.add("pad_conversion", max_abs(rho - np.outer(target, target.conj())), tol.tol_eq)
    rep.extras["num_outcomes"] = inst.num_outcomes
    rep.extras["probs"] = [float(p) for p in ps]
    return rep
