"""One-shot private state transfer over a pure pad.

Alice runs the Nielsen instrument on her half of the pad, keeps the outcome
in a classical register C, and feeds the now uniform half into the masking
encoder of a MOLS scheme.  She sends the encoder output T together with C.
Bob applies the correction ``U_i`` selected by C to his half, rotates it into
the canonical key basis and runs the decoder ``W`` on (T, B).

Joint states are ordered (T, C, B).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .entropy import pst_power
from .errors import CapacityExceeded, InfeasiblePad, InvalidState
from .instrument import NielsenInstrument, build_instrument, verify_instrument
from .masking import MaskingScheme, build_scheme, pst_decoder, secret_encoder
from .qstate import (
    BipartitePureState,
    DensityMatrix,
    fidelity,
    haar_vector,
    matrix_to_json,
    trace_distance,
)
from .report import VerificationReport
from .tolerances import get_tolerances

__all__ = [
    "PstProtocol",
    "PstEncoding",
    "plan_pst",
    "pst_encode",
    "pst_recover",
    "verify_pst",
    "MAX_PAD_RANK",
    "MAX_SECRET_DIM",
]

MAX_PAD_RANK = 32
MAX_SECRET_DIM = 9


@dataclass(frozen=True, eq=False)
class PstProtocol:
    """Assembled transfer protocol.

    ``decoder`` defaults to the scheme's :func:`pst_decoder`; it is a field so a
    corrupted decoder can be substituted with :func:`dataclasses.replace`.
    """

    pad: BipartitePureState
    d: int
    instrument: NielsenInstrument
    scheme: MaskingScheme
    decoder: np.ndarray
    recovery: tuple[str, ...] = (
        "apply U_i to B conditioned on C",
        "discard C",
        "rotate B into the canonical key basis",
        "apply decoder W to (T, B)",
        "trace out B (junk, maximally mixed)",
    )

    @property
    def num_outcomes(self) -> int:
        return self.instrument.num_outcomes

    def compression(self) -> np.ndarray:
        """``sum_r |r><a_r|``: Alice's target subspace onto the key register."""
        return self.instrument.target_basis_a.conj().T

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "pad": self.pad.to_json(),
            "pad_schmidt_coefficients": [float(x) for x in self.pad.coefficients],
            "pst_power_bits": pst_power(self.pad),
            "classical_register_size": self.num_outcomes,
            "instrument": self.instrument.to_dict(),
            "mols": self.scheme.mols.to_dict(),
            "decoder": matrix_to_json(self.decoder, [self.d, self.d]),
            "recovery": list(self.recovery),
        }


def plan_pst(pad: BipartitePureState, d: int) -> PstProtocol:
    """Assemble a protocol sending ``d``-level secrets with ``pad``.

    Raises
    ------
    InfeasiblePad
        ``S_min`` of the pad marginal is below ``log2 d``.
    UnsupportedOrder
        No MOLS pair of order ``d`` is available.
    CapacityExceeded
        Pad Schmidt rank above 32 or ``d`` above 9.
    """
    d = int(d)
    if d > MAX_SECRET_DIM:
        raise CapacityExceeded(f"secret dimension {d} exceeds {MAX_SECRET_DIM}")
    if pad.rank > MAX_PAD_RANK:
        raise CapacityExceeded(f"pad Schmidt rank {pad.rank} exceeds {MAX_PAD_RANK}")
    scheme = build_scheme(d)
    inst = build_instrument(pad, d)
    return PstProtocol(pad=pad, d=d, instrument=inst, scheme=scheme, decoder=pst_decoder(scheme))


def _encoder_kraus_on_a(proto: PstProtocol, psi: DensityMatrix) -> list[np.ndarray]:
    # masking encoder on the target subspace, trash map to |0> on its complement
    C = proto.compression()
    ks = [A @ C for A in secret_encoder(proto.scheme, psi)]
    basis = np.asarray(proto.pad.basis_a)
    d = proto.d
    for j in range(d, basis.shape[0]):
        T = np.zeros((d, basis.shape[0]), dtype=complex)
        T[0] = basis[:, j].conj()
        ks.append(T)
    return ks


class PstEncoding(NamedTuple):
    """``transmitted`` on (T, C); ``residual_b`` on B; ``blocks[i]`` is the
    (T, B) block of the joint state for outcome ``i``."""

    transmitted: DensityMatrix
    residual_b: DensityMatrix
    blocks: tuple[np.ndarray, ...]
    dims: tuple[int, int, int]

    @property
    def joint(self) -> DensityMatrix:
        t, m, b = self.dims
        out = np.zeros((t, m, b, t, m, b), dtype=complex)
        for i, blk in enumerate(self.blocks):
            out[:, i, :, :, i, :] = blk.reshape(t, b, t, b)
        n = t * m * b
        return DensityMatrix(out.reshape(n, n), self.dims, check=False)


def pst_encode(proto: PstProtocol, psi: DensityMatrix) -> PstEncoding:
    if psi.dim != proto.d:
        raise InvalidState(f"secret has dimension {psi.dim}, protocol sends dimension {proto.d}")
    d, pad = proto.d, proto.pad
    M = pad.matrix
    enc = _encoder_kraus_on_a(proto, psi)
    ks = proto.instrument.all_kraus()
    m = len(ks)
    blocks, sent = [], np.zeros((d, m, d, m), dtype=complex)
    residual = np.zeros((pad.dim_b, pad.dim_b), dtype=complex)
    for i, K in enumerate(ks):
        X = K @ M
        blk = np.zeros((d * pad.dim_b, d * pad.dim_b), dtype=complex)
        for E in enc:
            Y = E @ X
            y = Y.ravel()
            blk += np.outer(y, y.conj())
            sent[:, i, :, i] += Y @ Y.conj().T
            residual += Y.T @ Y.conj()
        blocks.append(blk)
    transmitted = DensityMatrix(sent.reshape(d * m, d * m), (d, m), check=False)
    return PstEncoding(transmitted, DensityMatrix(residual, check=False), tuple(blocks), (d, m, pad.dim_b))


def _recover_blocks(proto: PstProtocol, blocks, keep_junk: bool = False) -> DensityMatrix:
    d, nb = proto.d, proto.pad.dim_b
    us = proto.instrument.all_corrections()
    if len(blocks) != len(us):
        raise InvalidState(f"joint has {len(blocks)} outcomes, protocol expects {len(us)}")
    rho = np.zeros((d * nb, d * nb), dtype=complex)
    for U, blk in zip(us, blocks):
        L = np.kron(np.eye(d), U)
        rho += L @ blk @ L.conj().T
    # rotate B so the key vectors b_r become |r>, then decode on the first d levels
    R = np.kron(np.eye(d), np.asarray(proto.pad.basis_b).conj().T)
    W = np.eye(d * nb, dtype=complex).reshape(d, nb, d, nb)
    W[:, :d, :, :d] = np.asarray(proto.decoder).reshape(d, d, d, d)
    W = W.reshape(d * nb, d * nb) @ R
    rho = W @ rho @ W.conj().T
    t = rho.reshape(d, nb, d, nb)
    if keep_junk:
        return DensityMatrix(rho, (d, nb), check=False)
    return DensityMatrix(np.einsum("ajbj->ab", t), check=False)


def pst_recover(proto: PstProtocol, joint: DensityMatrix, keep_junk: bool = False) -> DensityMatrix:
    """Bob's recovery from the (T, C, B) joint state.

    Only the C-diagonal blocks matter: the correction is controlled by C and
    C is discarded afterwards.
    """
    d, m, nb = proto.d, proto.num_outcomes, proto.pad.dim_b
    if tuple(joint.dims) != (d, m, nb):
        raise InvalidState(f"joint dims {joint.dims} do not match protocol (T, C, B) = {(d, m, nb)}")
    t = joint.data.reshape(d, m, nb, d, m, nb)
    blocks = [t[:, i, :, :, i, :].reshape(d * nb, d * nb) for i in range(m)]
    return _recover_blocks(proto, blocks, keep_junk)


def recover_encoding(proto: PstProtocol, enc: PstEncoding, keep_junk: bool = False) -> DensityMatrix:
    """Blockwise equivalent of ``pst_recover(proto, enc.joint)``."""
    return _recover_blocks(proto, enc.blocks, keep_junk)


def verify_pst(proto: PstProtocol, n_secrets: int, seed: int = 0,
               secrets: list[DensityMatrix] | None = None) -> VerificationReport:
    """Encode and recover ``n_secrets`` Haar-random pure secrets.

    Passes iff the largest pairwise trace distance between transmitted states
    is at most 1e-9 and every recovery fidelity is at least 1 - 1e-9.
    """
    if secrets is None:
        if n_secrets < 2:
            raise ValueError("n_secrets must be at least 2")
        rng = np.random.default_rng(seed)
        secrets = [DensityMatrix.from_vector(haar_vector(proto.d, rng)) for _ in range(n_secrets)]
    sent, fids = [], []
    for psi in secrets:
        enc = pst_encode(proto, psi)
        sent.append(enc.transmitted)
        fids.append(fidelity(recover_encoding(proto, enc), psi))
    dist = max((trace_distance(a, b) for a, b in itertools.combinations(sent, 2)), default=0.0)
    rep = VerificationReport("pst")
    rep.add("max_eaves_distance", dist, 1e-9)
    rep.add("min_fidelity", min(fids), 1 - 1e-9, kind="ge")
    inst_rep = verify_instrument(proto.instrument, proto.pad)
    rep.extras.update({
        "max_eaves_distance": dist,
        "min_fidelity": min(fids),
        "pst_power_bits": pst_power(proto.pad),
        "n_secrets": len(secrets),
        "classical_register_size": proto.num_outcomes,
        "instrument_pass": inst_rep.passed,
    })
    return rep
