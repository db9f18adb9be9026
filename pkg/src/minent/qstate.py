"""Dense state bookkeeping: density matrices, bipartite pure states, spectra.

Multipartite matrices use big-endian factor ordering: for ``dims = (d0, d1)``
the basis vector ``|i, j>`` sits at row ``i * d1 + j``.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import prod
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidState
from .tolerances import get_tolerances

__all__ = [
    "Spectrum",
    "DensityMatrix",
    "BipartitePureState",
    "as_spectrum",
    "partial_trace",
    "schmidt_decompose",
    "sorted_eigh",
    "random_state",
    "tomographic_states",
    "haar_unitary",
    "haar_vector",
    "trace_distance",
    "fidelity",
    "apply_operator",
    "apply_channel",
    "dephase",
    "max_abs",
    "matrix_to_json",
    "matrix_from_json",
    "vector_to_json",
    "vector_from_json",
]


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


def max_abs(a: np.ndarray) -> float:
    """Largest absolute entry; 0.0 for empty input."""
    a = np.asarray(a)
    return float(np.max(np.abs(a))) if a.size else 0.0


# --------------------------------------------------------------------------
# Spectrum
# --------------------------------------------------------------------------


class Spectrum:
    """Descending probability vector.

    Entries in ``[-tol_psd, 0)`` are clipped to zero, as are entries below the
    zero threshold ``zero_rel * len``; if anything was clipped the vector is
    renormalized.  Anything more negative, or a total outside ``1 +- tol_tr``,
    raises :class:`InvalidState`.
    """

    __slots__ = ("_p",)

    def __init__(self, values: Iterable[float]):
        tol = get_tolerances()
        p = np.asarray(list(values) if not isinstance(values, np.ndarray) else values, dtype=float).ravel()
        if p.size == 0:
            raise InvalidState("a spectrum needs at least one entry")
        if not np.all(np.isfinite(p)):
            raise InvalidState("spectrum entries must be finite")
        if np.min(p) < -tol.tol_psd:
            raise InvalidState(f"spectrum has a negative entry {np.min(p):.3e} beyond tol_psd")
        total = float(np.sum(p))
        if abs(total - 1.0) > tol.tol_tr:
            raise InvalidState(f"spectrum sums to {total!r}, not 1 within tol_tr")
        clip = p < tol.zero_threshold(p.size)
        if np.any(clip & (p != 0.0)):
            p = np.where(clip, 0.0, p)
            p = p / np.sum(p)
        self._p = _frozen(-np.sort(-p, kind="stable"))

    @property
    def probabilities(self) -> np.ndarray:
        return self._p

    def __len__(self) -> int:
        return int(self._p.size)

    def __iter__(self):
        return iter(self._p.tolist())

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self._p, dtype=dtype)

    def __repr__(self) -> str:
        return f"Spectrum({np.array2string(self._p, precision=6, separator=', ')})"

    @property
    def max(self) -> float:
        return float(self._p[0])

    @property
    def rank(self) -> int:
        return int(np.count_nonzero(self._p > get_tolerances().zero_threshold(self._p.size)))

    def padded(self, n: int) -> np.ndarray:
        out = np.zeros(max(n, self._p.size))
        out[: self._p.size] = self._p
        return out

    def tensor(self, other: "Spectrum") -> "Spectrum":
        return Spectrum(np.outer(self._p, np.asarray(other)).ravel())

    @classmethod
    def uniform(cls, d: int, length: int | None = None) -> "Spectrum":
        length = d if length is None else length
        p = np.zeros(length)
        p[:d] = 1.0 / d
        return cls(p)


def as_spectrum(obj) -> Spectrum:
    """Coerce a Spectrum, DensityMatrix, BipartitePureState or sequence."""
    if isinstance(obj, Spectrum):
        return obj
    if isinstance(obj, DensityMatrix):
        return obj.spectrum()
    if isinstance(obj, BipartitePureState):
        return obj.spectrum
    return Spectrum(obj)


# --------------------------------------------------------------------------
# DensityMatrix
# --------------------------------------------------------------------------


class DensityMatrix:
    """Hermitian, positive semidefinite, unit-trace matrix with factor dims.

    Parameters
    ----------
    data : array_like
        Square complex matrix.
    dims : sequence of int, optional
        Tensor factor dimensions; defaults to a single factor.
    check : bool
        Run the eigenvalue-based validity checks.  Internal constructions of
        large states pass ``False`` after establishing validity structurally.
    """

    __slots__ = ("_data", "_dims")

    def __init__(self, data, dims: Sequence[int] | None = None, *, check: bool = True):
        a = np.asarray(data, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise InvalidState(f"density matrix must be square, got shape {a.shape}")
        n = a.shape[0]
        dims = (n,) if dims is None else tuple(int(x) for x in dims)
        if any(x <= 0 for x in dims) or prod(dims) != n:
            raise InvalidState(f"dims {dims} do not multiply to matrix side {n}")
        if check:
            tol = get_tolerances()
            herm_err = max_abs(a - a.conj().T)
            if herm_err > tol.tol_herm:
                raise InvalidState(f"matrix is not Hermitian (deviation {herm_err:.3e})")
            tr = complex(np.trace(a))
            if abs(tr - 1.0) > tol.tol_tr:
                raise InvalidState(f"trace {tr.real:.12g} differs from 1 beyond tol_tr")
            lo = float(np.min(np.linalg.eigvalsh((a + a.conj().T) / 2)))
            if lo < -tol.tol_psd:
                raise InvalidState(f"matrix has negative eigenvalue {lo:.3e}")
        self._data = _frozen(a)
        self._dims = dims

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def dims(self) -> tuple[int, ...]:
        return self._dims

    @property
    def dim(self) -> int:
        return self._data.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self._data, dtype=dtype)

    def __repr__(self) -> str:
        return f"DensityMatrix(dims={self._dims})"

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh((self._data + self._data.conj().T) / 2)

    def spectrum(self) -> Spectrum:
        return Spectrum(self.eigenvalues())

    def trace(self) -> float:
        return float(np.trace(self._data).real)

    def ptrace(self, keep: Iterable[int]) -> "DensityMatrix":
        return partial_trace(self, keep)

    def tensor(self, other: "DensityMatrix") -> "DensityMatrix":
        return DensityMatrix(np.kron(self._data, other.data), self._dims + other.dims, check=False)

    def with_dims(self, dims: Sequence[int]) -> "DensityMatrix":
        return DensityMatrix(self._data, dims, check=False)

    def is_pure(self) -> bool:
        return abs(float(np.real(np.trace(self._data @ self._data))) - 1.0) <= get_tolerances().tol_tr

    @classmethod
    def from_vector(cls, vec, dims: Sequence[int] | None = None) -> "DensityMatrix":
        v = np.asarray(vec, dtype=complex).ravel()
        nrm = np.linalg.norm(v)
        if abs(nrm - 1.0) > get_tolerances().tol_tr:
            raise InvalidState(f"state vector has norm {nrm:.12g}")
        return cls(np.outer(v, v.conj()), dims, check=False)

    @classmethod
    def maximally_mixed(cls, d: int, rank: int | None = None) -> "DensityMatrix":
        rank = d if rank is None else rank
        diag = np.zeros(d)
        diag[:rank] = 1.0 / rank
        return cls(np.diag(diag).astype(complex), check=False)

    @classmethod
    def basis(cls, d: int, k: int) -> "DensityMatrix":
        m = np.zeros((d, d), dtype=complex)
        m[k, k] = 1.0
        return cls(m, check=False)

    @classmethod
    def diagonal(cls, probs: Sequence[float]) -> "DensityMatrix":
        return cls(np.diag(np.asarray(probs, dtype=float)).astype(complex))

    def to_json(self) -> dict:
        return matrix_to_json(self._data, self._dims)

    @classmethod
    def from_json(cls, obj: dict) -> "DensityMatrix":
        data, dims = matrix_from_json(obj)
        return cls(data, dims)


def _as_array(state) -> np.ndarray:
    return state.data if isinstance(state, DensityMatrix) else np.asarray(state, dtype=complex)


# --------------------------------------------------------------------------
# partial trace and local maps
# --------------------------------------------------------------------------


def _ptrace_array(a: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    n = len(dims)
    t = a.reshape(tuple(dims) + tuple(dims))
    rows = list(range(n))
    cols = [i + n if i in keep else i for i in range(n)]
    out = list(keep) + [i + n for i in keep]
    kd = prod(dims[i] for i in keep)
    return np.einsum(t, rows + cols, out).reshape(kd, kd)


def partial_trace(state: DensityMatrix, keep: Iterable[int]) -> DensityMatrix:
    """Trace out every factor not listed in ``keep``.

    The kept factors appear in ascending index order.
    """
    keep = sorted(set(int(k) for k in keep))
    dims = state.dims
    if not keep:
        raise InvalidState("keep must name at least one factor")
    if keep[0] < 0 or keep[-1] >= len(dims):
        raise InvalidState(f"factor index out of range for dims {dims}")
    if len(keep) == len(dims):
        return state
    reduced = _ptrace_array(state.data, dims, keep)
    return DensityMatrix(reduced, [dims[i] for i in keep], check=False)


def _left_apply(op: np.ndarray, mat: np.ndarray, dims: Sequence[int], targets: Sequence[int],
                out_dims: Sequence[int]) -> tuple[np.ndarray, list[int]]:
    # op acts on the row factors listed in targets; returns new matrix and row dims
    n = len(dims)
    ncols = mat.shape[1]
    t = mat.reshape(tuple(dims) + (ncols,))
    t = np.moveaxis(t, list(targets), list(range(len(targets))))
    rest = t.shape[len(targets):]
    t = t.reshape(prod(dims[i] for i in targets), -1)
    t = op @ t
    t = t.reshape(tuple(out_dims) + rest)
    t = np.moveaxis(t, list(range(len(targets))), list(targets))
    new_dims = list(dims)
    for i, k in enumerate(targets):
        new_dims[k] = out_dims[i]
    return t.reshape(prod(new_dims), ncols), new_dims


def apply_operator(op: np.ndarray, rho: np.ndarray, dims: Sequence[int], targets: Sequence[int],
                   out_dims: Sequence[int] | None = None) -> tuple[np.ndarray, list[int]]:
    """Return ``(op rho op^dagger, new_dims)`` with ``op`` acting on ``targets``.

    ``op`` maps the joint space of the target factors (in the listed order) to
    a space with factor dims ``out_dims`` (defaults to the input dims).
    """
    targets = list(targets)
    if out_dims is None:
        out_dims = [dims[k] for k in targets]
    op = np.asarray(op)
    if op.shape != (prod(out_dims), prod(dims[k] for k in targets)):
        raise InvalidState(f"operator shape {op.shape} does not fit targets {targets} of dims {list(dims)}")
    half, new_dims = _left_apply(op, np.asarray(rho), dims, targets, out_dims)
    full, _ = _left_apply(op, half.conj().T, dims, targets, out_dims)
    return full.conj().T, new_dims


def apply_channel(kraus: Sequence[np.ndarray], rho: np.ndarray, dims: Sequence[int],
                  targets: Sequence[int], out_dims: Sequence[int] | None = None) -> tuple[np.ndarray, list[int]]:
    """Sum of :func:`apply_operator` over a Kraus list."""
    total = None
    new_dims: list[int] = list(dims)
    for k in kraus:
        term, new_dims = apply_operator(k, rho, dims, targets, out_dims)
        total = term if total is None else total + term
    if total is None:
        raise InvalidState("empty Kraus list")
    return total, new_dims


def dephase(rho: np.ndarray, dims: Sequence[int], target: int) -> np.ndarray:
    """Delete coherences of factor ``target`` in its computational basis."""
    dims = list(dims)
    n = len(dims)
    t = np.array(np.asarray(rho).reshape(tuple(dims) * 2), copy=True)
    d = dims[target]
    mask = np.eye(d, dtype=bool)
    shape = [1] * (2 * n)
    shape[target] = d
    shape[target + n] = d
    t = t * mask.reshape(shape)
    return t.reshape(prod(dims), prod(dims))


# --------------------------------------------------------------------------
# Bipartite pure states
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BipartitePureState:
    """Pure state on A (x) B with its Schmidt data.

    ``basis_a`` and ``basis_b`` are complete unitary matrices whose first
    ``len(coefficients)`` columns are the Schmidt vectors; the remaining
    columns complete them to orthonormal bases.
    """

    amplitudes: np.ndarray
    dim_a: int
    dim_b: int
    coefficients: np.ndarray
    basis_a: np.ndarray
    basis_b: np.ndarray

    @property
    def spectrum(self) -> Spectrum:
        return Spectrum(self.coefficients)

    @property
    def rank(self) -> int:
        thr = get_tolerances().zero_threshold(self.dim_a)
        return int(np.count_nonzero(self.coefficients >= thr))

    @property
    def matrix(self) -> np.ndarray:
        return self.amplitudes.reshape(self.dim_a, self.dim_b)

    def density(self) -> DensityMatrix:
        return DensityMatrix.from_vector(self.amplitudes, (self.dim_a, self.dim_b))

    def marginal_a(self) -> DensityMatrix:
        m = self.matrix
        return DensityMatrix(m @ m.conj().T, check=False)

    def marginal_b(self) -> DensityMatrix:
        m = self.matrix
        return DensityMatrix(m.T @ m.conj(), check=False)

    def reconstruct(self) -> np.ndarray:
        r = self.coefficients.size
        a = self.basis_a[:, :r]
        b = self.basis_b[:, :r]
        return np.einsum("k,ik,jk->ij", np.sqrt(self.coefficients), a, b).ravel()

    def tensor(self, other: "BipartitePureState") -> "BipartitePureState":
        """Pad for (A1 A2)(B1 B2) built from two pads."""
        t = np.einsum("ab,cd->acbd", self.matrix, other.matrix)
        da, db = self.dim_a * other.dim_a, self.dim_b * other.dim_b
        return schmidt_decompose(t.reshape(-1), da, db)

    @classmethod
    def from_spectrum(cls, spectrum, dim: int | None = None) -> "BipartitePureState":
        """Canonical pad ``sum_k sqrt(lambda_k) |k>|k>``."""
        p = np.asarray(as_spectrum(spectrum), dtype=float)
        n = p.size if dim is None else dim
        if n < p.size:
            raise InvalidState("dimension smaller than spectrum length")
        m = np.zeros((n, n), dtype=complex)
        m[np.arange(p.size), np.arange(p.size)] = np.sqrt(p)
        return schmidt_decompose(m.ravel(), n, n)

    @classmethod
    def purification(cls, sigma: DensityMatrix) -> "BipartitePureState":
        """``sum_k sqrt(lambda_k) |e_k>|k>`` for ``sigma = sum_k lambda_k |e_k><e_k|``."""
        w, v = np.linalg.eigh(sigma.data)
        w = np.clip(w, 0.0, None)
        order = np.argsort(-w, kind="stable")
        w, v = w[order], v[:, order]
        w = w / w.sum()
        n = sigma.dim
        m = v * np.sqrt(w)[None, :]
        return schmidt_decompose(m.ravel(), n, n)

    def to_json(self) -> dict:
        return vector_to_json(self.amplitudes, (self.dim_a, self.dim_b))


def _phase_fix(col: np.ndarray) -> complex:
    # unit phase making the leading non-negligible entry real positive
    idx = int(np.argmax(np.abs(col) > 1e-12 * max(1.0, float(np.max(np.abs(col))))))
    z = col[idx]
    return z / abs(z) if abs(z) > 0 else 1.0


def sorted_eigh(mat) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending) and eigenvectors of a Hermitian matrix.

    Uses the same phase convention as :func:`schmidt_decompose`: the leading
    non-negligible entry of every eigenvector is real positive.
    """
    m = np.asarray(mat, dtype=complex)
    w, v = np.linalg.eigh((m + m.conj().T) / 2)
    order = np.argsort(-w, kind="stable")
    w, v = w[order], v[:, order].copy()
    for k in range(v.shape[1]):
        v[:, k] = v[:, k] / _phase_fix(v[:, k])
    return w, v


def schmidt_decompose(vec, dim_a: int, dim_b: int) -> BipartitePureState:
    """Schmidt decomposition via SVD of the ``dim_a x dim_b`` reshaping.

    Coefficients are the squared singular values, descending.  The leading
    nonzero entry of every column of ``basis_a`` is made real positive and
    the compensating phase moved onto ``basis_b``.
    """
    v = np.asarray(vec, dtype=complex).ravel()
    if v.size != dim_a * dim_b:
        raise InvalidState(f"vector of length {v.size} does not match {dim_a}x{dim_b}")
    nrm = float(np.linalg.norm(v))
    if abs(nrm - 1.0) > get_tolerances().tol_tr:
        raise InvalidState(f"vector norm {nrm:.12g} differs from 1 beyond tol_tr")
    u, s, vh = np.linalg.svd(v.reshape(dim_a, dim_b), full_matrices=True)
    a = u.copy()
    b = vh.T.copy()
    r = s.size
    for k in range(dim_a):
        ph = _phase_fix(a[:, k])
        a[:, k] = a[:, k] / ph
        if k < r:
            b[:, k] = b[:, k] * ph
    for k in range(r, dim_b):
        b[:, k] = b[:, k] / _phase_fix(b[:, k])
    lam = s ** 2
    return BipartitePureState(
        amplitudes=_frozen(v),
        dim_a=int(dim_a),
        dim_b=int(dim_b),
        coefficients=_frozen(lam),
        basis_a=_frozen(a),
        basis_b=_frozen(b),
    )


# --------------------------------------------------------------------------
# random states
# --------------------------------------------------------------------------


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def haar_unitary(dim: int, seed=None) -> np.ndarray:
    """Haar-distributed unitary via phase-corrected QR of a Ginibre matrix."""
    rng = _rng(seed)
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))[None, :]


def haar_vector(dim: int, seed=None) -> np.ndarray:
    rng = _rng(seed)
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def random_state(kind: str, dims: Sequence[int] | int, seed=0, spectrum=None) -> DensityMatrix:
    """Seeded random density matrix.

    Parameters
    ----------
    kind : {"haar_pure", "ginibre_mixed", "spectrum_fixed"}
    dims : int or sequence of int
    seed : int or numpy Generator
    spectrum : sequence of float, required iff ``kind == "spectrum_fixed"``
    """
    dims = (int(dims),) if np.isscalar(dims) else tuple(int(x) for x in dims)
    if not dims or any(x <= 0 for x in dims):
        raise InvalidState(f"invalid dims {dims}")
    n = prod(dims)
    if (spectrum is not None) != (kind == "spectrum_fixed"):
        raise InvalidState("spectrum must be given exactly when kind is 'spectrum_fixed'")
    rng = _rng(seed)
    if kind == "haar_pure":
        v = haar_vector(n, rng)
        return DensityMatrix(np.outer(v, v.conj()), dims, check=False)
    if kind == "ginibre_mixed":
        g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        m = g @ g.conj().T
        m = (m + m.conj().T) / 2
        return DensityMatrix(m / np.trace(m).real, dims)
    if kind == "spectrum_fixed":
        p = np.asarray(spectrum, dtype=float).ravel()
        if p.size > n:
            raise InvalidState("spectrum longer than the state dimension")
        spec = Spectrum(p)
        u = haar_unitary(n, rng)
        m = (u * spec.padded(n)[None, :]) @ u.conj().T
        return DensityMatrix((m + m.conj().T) / 2, dims)
    raise InvalidState(f"unknown random state kind {kind!r}")


def tomographic_states(d: int) -> list[DensityMatrix]:
    """``d^2`` pure states whose projectors span all d x d matrices.

    ``|k>`` for every k, then ``(|j> + |k>)/sqrt 2`` and ``(|j> + i|k>)/sqrt 2`` for ``j < k``.
    """
    eye = np.eye(d, dtype=complex)
    vecs = [eye[k] for k in range(d)]
    for j in range(d):
        for k in range(j + 1, d):
            vecs.append((eye[j] + eye[k]) / np.sqrt(2))
            vecs.append((eye[j] + 1j * eye[k]) / np.sqrt(2))
    return [DensityMatrix.from_vector(v) for v in vecs]


# --------------------------------------------------------------------------
# distances
# --------------------------------------------------------------------------


def _check_same(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise InvalidState(f"dimension mismatch: {a.shape} vs {b.shape}")


def trace_distance(a, b) -> float:
    """Half the trace norm of ``a - b``."""
    x, y = _as_array(a), _as_array(b)
    _check_same(x, y)
    diff = x - y
    w = np.linalg.eigvalsh((diff + diff.conj().T) / 2)
    return float(min(1.0, 0.5 * np.sum(np.abs(w))))


def fidelity(a, b) -> float:
    """Uhlmann fidelity ``(Tr sqrt(sqrt(a) b sqrt(a)))**2``."""
    x, y = _as_array(a), _as_array(b)
    _check_same(x, y)
    w, v = np.linalg.eigh((x + x.conj().T) / 2)
    sq = (v * np.sqrt(np.clip(w, 0, None))[None, :]) @ v.conj().T
    m = sq @ y @ sq
    ev = np.linalg.eigvalsh((m + m.conj().T) / 2)
    f = float(np.sum(np.sqrt(np.clip(ev, 0, None)))) ** 2
    return min(max(f, 0.0), 1.0)


# --------------------------------------------------------------------------
# JSON formats
# --------------------------------------------------------------------------


def matrix_to_json(mat, dims: Sequence[int] | None = None) -> dict:
    a = np.asarray(mat, dtype=complex)
    dims = [a.shape[0]] if dims is None else [int(x) for x in dims]
    return {"dims": dims, "re": a.real.tolist(), "im": a.imag.tolist()}


def matrix_from_json(obj: dict) -> tuple[np.ndarray, tuple[int, ...]]:
    try:
        re = np.asarray(obj["re"], dtype=float)
        im = np.asarray(obj["im"], dtype=float) if "im" in obj else np.zeros_like(re)
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidState(f"malformed matrix JSON: {exc}") from exc
    if re.shape != im.shape or re.ndim != 2:
        raise InvalidState("matrix JSON 're'/'im' must be equal-shape 2D arrays")
    dims = tuple(int(x) for x in obj.get("dims", [re.shape[0]]))
    return re + 1j * im, dims


def vector_to_json(vec, dims: Sequence[int] | None = None) -> dict:
    v = np.asarray(vec, dtype=complex).ravel()
    dims = [v.size] if dims is None else [int(x) for x in dims]
    return {"dims": dims, "amp_re": v.real.tolist(), "amp_im": v.imag.tolist()}


def vector_from_json(obj: dict) -> tuple[np.ndarray, tuple[int, ...]]:
    try:
        re = np.asarray(obj["amp_re"], dtype=float).ravel()
        im = np.asarray(obj.get("amp_im", np.zeros_like(re)), dtype=float).ravel()
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidState(f"malformed vector JSON: {exc}") from exc
    if re.shape != im.shape:
        raise InvalidState("vector JSON 'amp_re'/'amp_im' lengths differ")
    dims = tuple(int(x) for x in obj.get("dims", [re.size]))
    if prod(dims) != re.size:
        raise InvalidState(f"vector dims {dims} do not match length {re.size}")
    return re + 1j * im, dims
