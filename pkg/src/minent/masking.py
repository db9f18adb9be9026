"""Randomized universal maskers built from pairs of orthogonal Latin squares.

A pair ``(g, h)`` of orthogonal Latin squares of order ``d`` gives the
permutation ``V|s>|m> = |g(s,m)>|h(s,m)>``.  Feeding a secret ``s`` and a
maximally mixed ``m`` through ``V`` leaves both output halves maximally
mixed, while ``V^dagger`` (or, with a purified key, the decoder ``W``)
restores the secret.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .entropy import min_entropy, mutual_information
from .errors import InvalidState, UnsupportedOrder
from .qstate import (
    DensityMatrix,
    apply_channel,
    apply_operator,
    dephase,
    fidelity,
    haar_vector,
    matrix_to_json,
    max_abs,
    partial_trace,
    tomographic_states,
    trace_distance,
)
from .report import VerificationReport
from .tolerances import get_tolerances

__all__ = [
    "MolsPair",
    "MaskingScheme",
    "build_mols",
    "build_scheme",
    "is_supported_order",
    "next_supported_order",
    "mask_state",
    "unmask_state",
    "secret_encoder",
    "apply_secret_encoder",
    "pst_decoder",
    "masking_diagnostics",
    "marginal_deviation",
    "verify_masking",
    "decode_with_key",
    "canonical_pad",
    "eavesdropper_spread",
    "mask_via_double_dephasing",
    "DoubleDephasingResult",
    "gf2_irreducible",
    "gf2_tables",
]


# --------------------------------------------------------------------------
# finite fields of characteristic 2
# --------------------------------------------------------------------------


def _gf2_polymulmod(a: int, b: int, poly: int, k: int) -> int:
    out = 0
    while b:
        if b & 1:
            out ^= a
        b >>= 1
        a <<= 1
        if a >> k & 1:
            a ^= poly
    return out


def _gf2_polymod(a: int, b: int) -> int:
    db = b.bit_length()
    while a.bit_length() >= db:
        a ^= b << (a.bit_length() - db)
    return a


@lru_cache(maxsize=None)
def gf2_irreducible(k: int) -> int:
    """Lexicographically smallest irreducible binary polynomial of degree ``k``."""
    for poly in range(1 << k, 1 << (k + 1)):
        if not poly & 1:
            continue
        if all(_gf2_polymod(poly, q) for q in range(2, 1 << (k // 2 + 1))):
            return poly
    raise ValueError(f"no irreducible polynomial of degree {k}")  # unreachable


@lru_cache(maxsize=None)
def gf2_tables(k: int) -> tuple[np.ndarray, np.ndarray, int]:
    """Addition and multiplication tables of GF(2^k) plus its smallest primitive element."""
    q = 1 << k
    poly = gf2_irreducible(k)
    add = np.bitwise_xor.outer(np.arange(q), np.arange(q))
    mul = np.array([[_gf2_polymulmod(a, b, poly, k) for b in range(q)] for a in range(q)])
    prim = None
    for g in range(2, q):
        x, order = g, 1
        while x != 1:
            x = int(mul[x, g])
            order += 1
        if order == q - 1:
            prim = g
            break
    if prim is None:
        raise ValueError(f"GF(2^{k}) has no primitive element")  # unreachable for k >= 2
    return add, mul, prim


# --------------------------------------------------------------------------
# Latin squares
# --------------------------------------------------------------------------


def is_supported_order(d: int) -> bool:
    return d >= 3 and d % 4 != 2


def next_supported_order(d: int) -> int:
    e = max(int(d) + 1, 3)
    while not is_supported_order(e):
        e += 1
    return e


@dataclass(frozen=True, eq=False)
class MolsPair:
    d: int
    g: np.ndarray
    h: np.ndarray

    def validate(self) -> list[str]:
        """Return a list of violated properties (empty when valid)."""
        d, problems = self.d, []
        full = set(range(d))
        for name, t in (("g", self.g), ("h", self.h)):
            if t.shape != (d, d):
                problems.append(f"{name} has shape {t.shape}")
                continue
            if any(set(row.tolist()) != full for row in t):
                problems.append(f"{name} is not Latin in its second argument")
            if any(set(col.tolist()) != full for col in t.T):
                problems.append(f"{name} is not Latin in its first argument")
        pairs = set(zip(self.g.ravel().tolist(), self.h.ravel().tolist()))
        if len(pairs) != d * d:
            problems.append("(g, h) is not a bijection on [d] x [d]")
        return problems

    def to_dict(self) -> dict:
        return {"d": self.d, "g": self.g.tolist(), "h": self.h.tolist()}

    @classmethod
    def from_dict(cls, obj: dict) -> "MolsPair":
        pair = cls(int(obj["d"]), np.asarray(obj["g"], dtype=int), np.asarray(obj["h"], dtype=int))
        problems = pair.validate()
        if problems:
            raise InvalidState("; ".join(problems))
        return pair


def _odd_mols(d: int) -> tuple[np.ndarray, np.ndarray]:
    s = np.arange(d)[:, None]
    m = np.arange(d)[None, :]
    return (m + s) % d, (m + 2 * s) % d


def _field_mols(k: int) -> tuple[np.ndarray, np.ndarray]:
    add, mul, alpha = gf2_tables(k)
    q = 1 << k
    s = np.arange(q)[:, None]
    m = np.arange(q)[None, :]
    return add[m, s], add[m, mul[alpha, s]]


def _product(p1: tuple[np.ndarray, np.ndarray], p2: tuple[np.ndarray, np.ndarray]):
    d1, d2 = p1[0].shape[0], p2[0].shape[0]
    out = []
    for t1, t2 in zip(p1, p2):
        # index s = s1*d2 + s2, m = m1*d2 + m2
        t = t1[:, None, :, None] * d2 + t2[None, :, None, :]
        out.append(t.reshape(d1 * d2, d1 * d2))
    return tuple(out)


def build_mols(d: int) -> MolsPair:
    """Orthogonal Latin squares of order ``d``.

    Odd ``d`` uses ``g = s + m``, ``h = 2s + m`` (mod d); a power of two uses
    GF(2^k) with ``g = m + s``, ``h = m + alpha s``; ``2^k * odd`` with
    ``k >= 2`` is the direct product of the two.

    Raises
    ------
    UnsupportedOrder
        For ``d < 3`` or ``d = 2 mod 4``.
    """
    d = int(d)
    if not is_supported_order(d):
        nxt = next_supported_order(d)
        raise UnsupportedOrder(d, nxt, math.log2(nxt) - (math.log2(d) if d > 0 else 0.0))
    k = (d & -d).bit_length() - 1
    odd = d >> k
    parts = []
    if k >= 2:
        parts.append(_field_mols(k))
    if odd > 1:
        parts.append(_odd_mols(odd))
    g, h = parts[0]
    for p in parts[1:]:
        g, h = _product((g, h), p)
    pair = MolsPair(d, np.asarray(g, dtype=int), np.asarray(h, dtype=int))
    problems = pair.validate()
    if problems:  # construction bug, not user error
        raise AssertionError("; ".join(problems))
    return pair


# --------------------------------------------------------------------------
# masking scheme
# --------------------------------------------------------------------------


def _perm_unitary(src_to_dst: np.ndarray) -> np.ndarray:
    n = src_to_dst.size
    V = np.zeros((n, n), dtype=complex)
    V[src_to_dst, np.arange(n)] = 1.0
    return V


@dataclass(frozen=True, eq=False)
class MaskingScheme:
    """Masker ``T(psi) = V (psi (x) I/d) V^dagger`` with its decoders."""

    d: int
    mols: MolsPair
    V: np.ndarray
    decoder: np.ndarray
    safe_state: DensityMatrix

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "mols": self.mols.to_dict(),
            "V": matrix_to_json(self.V, [self.d, self.d]),
            "decoder": matrix_to_json(self.decoder, [self.d, self.d]),
            "safe_state": self.safe_state.to_json(),
        }


def build_scheme(d: int) -> MaskingScheme:
    mols = build_mols(d)
    s, m = np.meshgrid(np.arange(d), np.arange(d), indexing="ij")
    dst = (mols.g[s, m] * d + mols.h[s, m]).ravel()
    V = _perm_unitary(dst)
    V.setflags(write=False)
    dec = V.conj().T.copy()
    dec.setflags(write=False)
    return MaskingScheme(d=d, mols=mols, V=V, decoder=dec, safe_state=DensityMatrix.maximally_mixed(d))


def _check_secret(scheme: MaskingScheme, psi: DensityMatrix) -> None:
    if psi.dim != scheme.d:
        raise InvalidState(f"secret has dimension {psi.dim}, scheme masks dimension {scheme.d}")


def mask_state(scheme: MaskingScheme, psi: DensityMatrix) -> DensityMatrix:
    """``V (psi (x) I/d) V^dagger`` on dims ``[d, d]``."""
    _check_secret(scheme, psi)
    joint = np.kron(psi.data, scheme.safe_state.data)
    out = scheme.V @ joint @ scheme.V.conj().T
    return DensityMatrix(out, (scheme.d, scheme.d), check=False)


def unmask_state(scheme: MaskingScheme, masked: DensityMatrix) -> DensityMatrix:
    """Apply the inverse permutation; returns ``psi (x) I/d`` for masked inputs."""
    out = scheme.decoder @ masked.data @ scheme.decoder.conj().T
    return DensityMatrix(out, (scheme.d, scheme.d), check=False)


def secret_encoder(scheme: MaskingScheme, psi: DensityMatrix) -> list[np.ndarray]:
    """Kraus operators of ``sigma -> Tr_1[V (psi (x) sigma) V^dagger]``.

    One operator ``sqrt(q_k) (<g| (x) I) V (|psi_k> (x) I)`` per output label
    ``g`` and eigenbranch ``(q_k, psi_k)`` of ``psi``, ordered by descending
    ``q_k`` then ``g``.  Eigenbranches below the zero threshold are skipped.
    """
    _check_secret(scheme, psi)
    d = scheme.d
    w, v = np.linalg.eigh(psi.data)
    order = np.argsort(-w, kind="stable")
    thr = get_tolerances().zero_threshold(d)
    Vt = scheme.V.reshape(d, d, d, d)  # (g, h, s, m)
    kraus = []
    for k in order:
        q = float(w[k])
        if q < thr:
            continue
        # (h, m) block for each g: sum_s V[g, h, s, m] psi_k[s]
        blocks = np.einsum("ghsm,s->ghm", Vt, v[:, k])
        for g in range(d):
            kraus.append(np.sqrt(q) * blocks[g])
    return kraus


def apply_secret_encoder(kraus: list[np.ndarray], state: DensityMatrix, target: int = 0) -> DensityMatrix:
    """Apply an encoder to factor ``target`` of ``state``."""
    out, dims = apply_channel(kraus, state.data, state.dims, [target])
    return DensityMatrix(out, dims, check=False)


def pst_decoder(scheme: MaskingScheme) -> np.ndarray:
    """Permutation ``W|h, m> = |s, g(s, m)>`` where ``s`` solves ``h(s, m) = h``.

    Applied to the transmitted half and the key partner of a canonical
    maximally entangled key, it leaves the secret on the first factor and a
    maximally mixed junk state on the second.
    """
    d = scheme.d
    g, h = scheme.mols.g, scheme.mols.h
    s_of = np.empty((d, d), dtype=int)  # s_of[h, m]
    for s in range(d):
        for m in range(d):
            s_of[h[s, m], m] = s
    hh, mm = np.meshgrid(np.arange(d), np.arange(d), indexing="ij")
    ss = s_of[hh, mm]
    dst = (ss * d + g[ss, mm]).ravel()
    W = _perm_unitary(dst)
    W.setflags(write=False)
    return W


def canonical_pad(d: int) -> np.ndarray:
    """``sum_m |m>|m> / sqrt(d)``."""
    return np.eye(d, dtype=complex).ravel() / np.sqrt(d)


def decode_with_key(scheme: MaskingScheme, psi: DensityMatrix, decoder: np.ndarray | None = None,
                    keep_junk: bool = False) -> DensityMatrix:
    """Encode ``psi`` on half of a canonical key, then run the decoder on (sent, partner)."""
    W = pst_decoder(scheme) if decoder is None else decoder
    d = scheme.d
    key = canonical_pad(d)
    enc = apply_secret_encoder(secret_encoder(scheme, psi), DensityMatrix(np.outer(key, key.conj()), (d, d), check=False))
    out = W @ enc.data @ W.conj().T
    joint = DensityMatrix(out, (d, d), check=False)
    return joint if keep_junk else partial_trace(joint, [0])


def masking_diagnostics(scheme: MaskingScheme) -> VerificationReport:
    """Mutual information between a reference R and the masked halves.

    R starts maximally entangled with the secret input, so a perfect masker
    gives ``I(R:A) = I(R:B) = 0`` and ``I(R:AB) = 2 log2 d``.
    """
    d = scheme.d
    ref = canonical_pad(d)
    rho_rs = np.outer(ref, ref.conj())
    joint = np.kron(rho_rs, scheme.safe_state.data)  # R, S, key
    out, dims = apply_operator(scheme.V, joint, [d, d, d], [1, 2])
    state = DensityMatrix(out, dims, check=False)
    i_ra = mutual_information(state, [0], [1])
    i_rb = mutual_information(state, [0], [2])
    i_rab = mutual_information(state, [0], [1, 2])
    rep = VerificationReport("masking_diagnostics")
    rep.add("I(R:A)", abs(i_ra), 1e-8)
    rep.add("I(R:B)", abs(i_rb), 1e-8)
    rep.add("|I(R:AB) - 2 log2 d|", abs(i_rab - 2 * math.log2(d)), 1e-8)
    rep.add("|S_min(safe) - log2 d|", abs(min_entropy(scheme.safe_state) - math.log2(d)), 1e-9)
    rep.extras.update({"d": d, "I_RA": i_ra, "I_RB": i_rb, "I_RAB": i_rab})
    return rep


def marginal_deviation(scheme: MaskingScheme, psi: DensityMatrix) -> float:
    """Largest entry deviation of either masked marginal from ``I/d``."""
    out = mask_state(scheme, psi)
    mixed = np.eye(scheme.d) / scheme.d
    return max(max_abs(partial_trace(out, [0]).data - mixed), max_abs(partial_trace(out, [1]).data - mixed))


def verify_masking(scheme: MaskingScheme, n_secrets: int = 100, seed: int = 0) -> VerificationReport:
    """Marginal secrecy over a tomographically complete set and decoding of Haar secrets."""
    dev = max(marginal_deviation(scheme, psi) for psi in tomographic_states(scheme.d))
    rng = np.random.default_rng(seed)
    fids = []
    for _ in range(n_secrets):
        psi = DensityMatrix.from_vector(haar_vector(scheme.d, rng))
        fids.append(fidelity(decode_with_key(scheme, psi), psi))
        fids.append(fidelity(partial_trace(unmask_state(scheme, mask_state(scheme, psi)), [0]), psi))
    diag = masking_diagnostics(scheme)
    rep = VerificationReport("masking")
    rep.add("marginal_deviation", dev, 1e-10)
    rep.add("min_decoder_fidelity", min(fids, default=1.0), 1 - 1e-10, kind="ge")
    rep.checks.extend(diag.checks)
    rep.extras.update({"d": scheme.d, "n_secrets": n_secrets, "mutual_information": {
        "I_RA": diag.extras["I_RA"], "I_RB": diag.extras["I_RB"], "I_RAB": diag.extras["I_RAB"]}})
    return rep


# --------------------------------------------------------------------------
# masking from two catalytic dephasings
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DoubleDephasingResult:
    """``system_out`` is the d^2-level output; ``sor_out`` the two catalyst
    registers with their Bob-side outcome copies, ordered (B1, B1', B2, B2')."""

    system_out: DensityMatrix
    sor_out: DensityMatrix
    joint: DensityMatrix


def dft_matrix(n: int) -> np.ndarray:
    k = np.arange(n)
    return np.exp(2j * np.pi * np.outer(k, k) / n) / np.sqrt(n)


def mask_via_double_dephasing(sigma: DensityMatrix, d: int, psi: DensityMatrix) -> DoubleDephasingResult:
    """Mask ``psi`` by dephasing, a d^2-point Fourier transform, and dephasing again.

    Each dephasing consumes a fresh copy of ``sigma``.

    Raises
    ------
    InfeasibleSOR
        If ``sigma`` cannot catalytically dephase d^2-dimensional states.
    """
    from .dephasing import dephase_in_joint, plan_catalytic_dephasing

    plan = plan_catalytic_dephasing(sigma, d)
    D = d * d
    if psi.dim != D:
        raise InvalidState(f"input has dimension {psi.dim}, expected {D}")
    rho, dims = psi.data, [D]
    rho, dims = dephase_in_joint(plan, rho, dims, system=0)
    rho, dims = apply_operator(dft_matrix(D), rho, dims, [0])
    rho, dims = dephase_in_joint(plan, rho, dims, system=0)
    joint = DensityMatrix(rho, dims, check=False)
    system_out = partial_trace(joint, [0])
    regs = partial_trace(joint, [1, 2, 3, 4]).data
    # tracing the Alice-side copies dephases the outcome registers
    regs = dephase(regs, dims[1:], 1)
    regs = dephase(regs, dims[1:], 3)
    return DoubleDephasingResult(system_out, DensityMatrix(regs, dims[1:], check=False), joint)


def eavesdropper_spread(states: list[DensityMatrix]) -> float:
    """Largest pairwise trace distance in a list of states."""
    worst = 0.0
    for i in range(len(states)):
        for j in range(i + 1, len(states)):
            worst = max(worst, trace_distance(states[i], states[j]))
    return worst
