"""Renyi entropies, majorization, and the constructions that hang off them."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InfeasibleSpectrum, InvalidState, NotMajorized
from .qstate import BipartitePureState, DensityMatrix, Spectrum, as_spectrum, partial_trace
from .tolerances import get_tolerances

__all__ = [
    "renyi_entropy",
    "von_neumann_entropy",
    "min_entropy",
    "max_entropy",
    "mutual_information",
    "majorizes",
    "UniformSubsetDecomposition",
    "uniform_subset_decompose",
    "cap_spectrum",
    "schur_horn_unitary",
    "masking_power",
    "pst_power",
    "feasibility",
    "entropy_profile",
    "profile_columns",
    "TASKS",
]


def renyi_entropy(state, alpha: float) -> float:
    """Renyi entropy in bits.

    ``alpha = 0`` gives log2 of the rank (zero threshold applied), ``alpha = 1``
    the von Neumann entropy and ``alpha = inf`` the min-entropy.
    """
    alpha = float(alpha)
    if math.isnan(alpha) or alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    p = np.asarray(as_spectrum(state), dtype=float)
    nz = p[p > 0]
    if alpha == 0:
        return math.log2(nz.size)
    if alpha == 1:
        return float(-np.sum(nz * np.log2(nz))) + 0.0
    if math.isinf(alpha):
        return -math.log2(float(p[0])) + 0.0
    return float(math.log2(float(np.sum(nz ** alpha))) / (1.0 - alpha)) + 0.0


def von_neumann_entropy(state) -> float:
    return renyi_entropy(state, 1.0)


def min_entropy(state) -> float:
    return renyi_entropy(state, math.inf)


def max_entropy(state) -> float:
    return renyi_entropy(state, 0.0)


def mutual_information(state: DensityMatrix, a: Sequence[int], b: Sequence[int]) -> float:
    """``I(a:b) = S(a) + S(b) - S(ab)`` for disjoint groups of factors."""
    a, b = sorted(set(a)), sorted(set(b))
    if set(a) & set(b):
        raise InvalidState("factor groups must be disjoint")
    s_a = von_neumann_entropy(partial_trace(state, a))
    s_b = von_neumann_entropy(partial_trace(state, b))
    s_ab = von_neumann_entropy(partial_trace(state, a + b))
    return s_a + s_b - s_ab


def majorizes(x, y, tol: float | None = None) -> bool:
    """True iff ``y`` is majorized by ``x``.

    Both vectors are sorted descending and the shorter one is zero-padded.
    Every partial sum of ``y`` must be at most the matching partial sum of
    ``x`` plus ``tol`` (default ``tol_major``), and the totals must agree.
    """
    tol = get_tolerances().tol_major if tol is None else tol
    xv = np.sort(np.asarray(x, dtype=float).ravel())[::-1]
    yv = np.sort(np.asarray(y, dtype=float).ravel())[::-1]
    n = max(xv.size, yv.size)
    xv = np.pad(xv, (0, n - xv.size))
    yv = np.pad(yv, (0, n - yv.size))
    cx, cy = np.cumsum(xv), np.cumsum(yv)
    if abs(cx[-1] - cy[-1]) > tol:
        return False
    return bool(np.all(cy <= cx + tol))


# --------------------------------------------------------------------------
# uniform-subset decomposition
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class UniformSubsetDecomposition:
    """Convex decomposition ``lambda = sum_m p_m * uniform(S_m)`` with ``|S_m| = d``."""

    d: int
    length: int
    terms: tuple[tuple[float, tuple[int, ...]], ...]

    @property
    def weights(self) -> np.ndarray:
        return np.array([p for p, _ in self.terms])

    @property
    def subsets(self) -> tuple[tuple[int, ...], ...]:
        return tuple(s for _, s in self.terms)

    def reconstruct(self) -> np.ndarray:
        out = np.zeros(self.length)
        for p, s in self.terms:
            out[list(s)] += p / self.d
        return out

    def to_dict(self) -> dict:
        return {"d": self.d, "terms": [{"p": p, "subset": list(s)} for p, s in self.terms]}


def cap_spectrum(lam: np.ndarray, cap: float) -> np.ndarray:
    """Water-fill ``lam`` so no entry exceeds ``cap``, preserving the total.

    Excess mass is moved onto the uncapped entries in proportion to their
    size.  Used only to absorb violations within ``tol_major``.
    """
    p = np.array(lam, dtype=float)
    for _ in range(p.size):
        over = p > cap
        if not np.any(over):
            break
        excess = float(np.sum(p[over] - cap))
        p[over] = cap
        free = (p < cap) & (p > 0)
        if not np.any(free):
            break
        room = p[free]
        p[free] = room + excess * room / room.sum()
    return p


def uniform_subset_decompose(lam, d: int) -> UniformSubsetDecomposition:
    """Decompose a spectrum into rank-``d`` uniform distributions.

    Greedy rule: take the ``d`` largest residual entries (ties by index) and
    remove weight ``p = min(d*r_d, t - d*r_{d+1}, t)`` spread evenly over
    them, where ``r_d`` is the smallest selected residual, ``r_{d+1}`` the
    largest unselected one and ``t`` the remaining mass.  This keeps
    ``max residual <= t/d`` and ends after at most ``n(n+1)/2`` steps.

    Raises
    ------
    InfeasibleSpectrum
        If ``max(lam) > 1/d + tol_major``.
    """
    d = int(d)
    if d < 1:
        raise ValueError("d must be a positive integer")
    tol = get_tolerances()
    p = np.asarray(as_spectrum(lam), dtype=float)
    n = p.size
    lmax = float(p[0])
    if lmax > 1.0 / d + tol.tol_major:
        raise InfeasibleSpectrum(
            f"lambda_max = {lmax:.6g} > 1/{d} = {1.0 / d:.6g}", lambda_max=lmax, d=d
        )
    if lmax > 1.0 / d:
        p = cap_spectrum(p, 1.0 / d)
    r = p.copy()
    t = float(r.sum())
    terms: list[tuple[float, tuple[int, ...]]] = []
    # exact arithmetic needs n(n+1)/2 steps; the slack absorbs rounding ties
    limit = n * (n + 1) // 2 + n
    snap = 4 * np.finfo(float).eps
    while t > snap and len(terms) < limit:
        order = np.argsort(-r, kind="stable")
        sel = order[:d]
        r_d = float(r[sel[-1]])
        if r_d <= 0:
            break
        cands = [d * r_d, t]
        if n > d:
            cands.append(t - d * float(r[order[d]]))
        w = min(cands)
        if w <= 0:
            break
        r[sel] -= w / d
        r[np.abs(r) <= snap] = 0.0
        r = np.clip(r, 0.0, None)
        t = float(r.sum())
        terms.append((w, tuple(sorted(int(i) for i in sel))))
    return UniformSubsetDecomposition(d=d, length=n, terms=tuple(terms))


# --------------------------------------------------------------------------
# Schur-Horn
# --------------------------------------------------------------------------


def schur_horn_unitary(spectrum, target_diagonal) -> np.ndarray:
    """Real orthogonal ``U`` with ``diag(U diag(spectrum) U^T) = target_diagonal``.

    Built from at most ``n - 1`` plane rotations: the largest outstanding
    target value ``x`` is placed between adjacent active diagonal entries
    ``a_j >= x >= a_{j+1}`` with ``cos^2 = (x - a_{j+1}) / (a_j - a_{j+1})``,
    the rotated slot is frozen, and its partner takes ``a_j + a_{j+1} - x``.

    Raises
    ------
    NotMajorized
        If ``target_diagonal`` is not majorized by ``spectrum``.
    """
    lam = np.asarray(spectrum, dtype=float).ravel()
    x = np.asarray(target_diagonal, dtype=float).ravel()
    n = lam.size
    if x.size != n:
        raise InvalidState(f"spectrum has {n} entries but target has {x.size}")
    if not majorizes(lam, x):
        raise NotMajorized("target diagonal is not majorized by the spectrum")

    # work on a sorted copy; slot k of the working space holds lam_sorted[k]
    src_order = np.argsort(-lam, kind="stable")
    a = lam[src_order].copy()
    tgt_order = np.argsort(-x, kind="stable")
    xs = x[tgt_order]

    snap = 4 * np.finfo(float).eps
    G = np.eye(n)
    active = list(range(n))  # slots, kept sorted by current value (descending)
    placed = np.empty(n, dtype=int)  # placed[k] = slot carrying xs[k]
    for k in range(n - 1):
        xv = xs[k]
        vals = a[active]
        # first position j with a_j >= x >= a_{j+1}
        j = 0
        while j < len(active) - 2 and vals[j + 1] >= xv:
            j += 1
        p, q = active[j], active[j + 1]
        ap, aq = a[p], a[q]
        # rotations moving the diagonal by less than rounding are skipped,
        # otherwise sqrt would blow a 1e-16 residue up to a 1e-8 angle
        gap = ap - aq
        if gap > 0 and (ap - xv) > snap:
            c2 = min(max((xv - aq) / gap, 0.0), 1.0)
            s2 = min(max((ap - xv) / gap, 0.0), 1.0)
            c, s = math.sqrt(c2), math.sqrt(s2)
            nrm = math.hypot(c, s)
            c, s = c / nrm, s / nrm
            R = np.eye(n)
            R[p, p], R[p, q], R[q, p], R[q, q] = c, s, -s, c
            G = R @ G
            a[p], a[q] = xv, ap + aq - xv
        else:
            a[p] = xv
        placed[k] = p
        active.pop(j)
        # the partner value lies in [a_{j+2}, a_{j}] so sortedness is preserved
    placed[n - 1] = active[0]

    # slot placed[k] must end at output index tgt_order[k]
    P = np.zeros((n, n))
    P[tgt_order, placed] = 1.0
    Q = np.zeros((n, n))
    Q[np.arange(n), src_order] = 1.0  # Q diag(lam) Q^T = diag(a_sorted)
    return P @ G @ Q


# --------------------------------------------------------------------------
# powers
# --------------------------------------------------------------------------


def masking_power(sigma) -> int:
    """Largest ``d`` with ``S_min(sigma) >= log2 d``, i.e. ``floor(2**S_min)``."""
    eps = get_tolerances().eps_floor
    return int(math.floor(2.0 ** min_entropy(sigma) * (1.0 + eps)))


def pst_power(pad) -> float:
    """Qubits privately transferable with a pure pad: ``log2 floor(2**S_min(Psi_A))``."""
    if isinstance(pad, BipartitePureState):
        spec = pad.spectrum
    else:
        spec = as_spectrum(pad)
    return math.log2(masking_power(spec))


# --------------------------------------------------------------------------
# feasibility summaries
# --------------------------------------------------------------------------

TASKS = ("pst", "mask", "dephase")


def feasibility(state, d: int, task: str = "mask") -> dict:
    """Min-entropy verdict for using ``state`` as the resource of ``task`` at size ``d``.

    Every task has the same criterion ``lambda_max <= 1/d`` (up to
    ``tol_major``): pad marginal for ``"pst"``, safe state for ``"mask"``
    and catalyst for ``"dephase"`` (which then handles ``d^2`` levels).
    """
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}; expected one of {TASKS}")
    d = int(d)
    if d < 1:
        raise ValueError("d must be a positive integer")
    lmax = float(as_spectrum(state).max)
    ok = lmax <= 1.0 / d + get_tolerances().tol_major
    rel = "<=" if ok else ">"
    return {
        "task": task,
        "d": d,
        "feasible": bool(ok),
        "lambda_max": lmax,
        "min_entropy_bits": -math.log2(lmax),
        "required_bits": math.log2(d),
        "message": f"λ_max = {lmax:.3f} {rel} 1/{d}",
    }


PROFILE_COLUMNS = ("dim", "S0", "S1", "S2", "Smin", "lambda_max", "masking_power", "pst_power_bits")


def profile_columns(ds: Sequence[int] = (2,)) -> list[str]:
    """Keys of :func:`entropy_profile` in order."""
    return list(PROFILE_COLUMNS) + [f"{task}_d{d}" for d in ds for task in TASKS]


def entropy_profile(state, ds: Sequence[int] = (2,)) -> dict:
    """Renyi entropies (alpha = 0, 1, 2, inf), powers and per-task verdicts."""
    spec = as_spectrum(state)
    row = {
        "dim": len(spec),
        "S0": renyi_entropy(spec, 0.0),
        "S1": renyi_entropy(spec, 1.0),
        "S2": renyi_entropy(spec, 2.0),
        "Smin": renyi_entropy(spec, math.inf),
        "lambda_max": float(spec.max),
        "masking_power": masking_power(spec),
        "pst_power_bits": pst_power(spec),
    }
    for d in ds:
        ok = feasibility(spec, d)["feasible"]
        for task in TASKS:
            row[f"{task}_d{d}"] = "yes" if ok else "no"
    return row
