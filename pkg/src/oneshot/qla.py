"""Dense complex linear algebra for finite-dimensional quantum operators.

Operators are plain complex ndarrays.  The constructors below symmetrize
and validate role-specific invariants (unit trace, PSD, idempotence, ...)
and raise ValueError on violation instead of silently repairing.  All
functions are pure; nothing here holds mutable state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Iterable, Sequence

import numpy as np

HERM_TOL = 1e-12
TRACE_TOL = 1e-10
PSD_TOL = 1e-10
PROJ_TOL = 1e-10
RANK_TRACE_TOL = 1e-8
ISOMETRY_TOL = 1e-10


def hermitian_part(a: np.ndarray) -> np.ndarray:
    """(A + A†)/2."""
    a = np.asarray(a, dtype=complex)
    return (a + a.conj().T) / 2.0


def hermitian(entries: np.ndarray) -> np.ndarray:
    """Validated Hermitian operator: finite entries, symmetrized on construction."""
    a = np.asarray(entries, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a.view(float))):
        raise ValueError("non-finite entries")
    dev = np.max(np.abs(a - a.conj().T)) if a.size else 0.0
    if dev > 1e-8:
        raise ValueError(f"matrix is not Hermitian (max deviation {dev:.3e})")
    return hermitian_part(a)


def density_matrix(entries: np.ndarray) -> np.ndarray:
    """Validated density matrix: Hermitian, trace 1 within 1e-10, eigmin >= -1e-10.

    Raises on negative eigenvalues instead of clipping; use repair_density for
    Monte-Carlo-accumulated states that need explicit cleanup.
    """
    a = hermitian(entries)
    tr = float(np.trace(a).real)
    if abs(tr - 1.0) > TRACE_TOL:
        raise ValueError(f"trace {tr} is not 1 within {TRACE_TOL}")
    wmin = float(np.linalg.eigvalsh(a)[0])
    if wmin < -PSD_TOL:
        raise ValueError(f"minimum eigenvalue {wmin:.3e} below -{PSD_TOL}")
    return a


def repair_density(entries: np.ndarray) -> np.ndarray:
    """Clip negative eigenvalues to 0 and renormalize the trace to 1."""
    a = hermitian_part(np.asarray(entries, dtype=complex))
    w, v = np.linalg.eigh(a)
    w = np.maximum(w, 0.0)
    tr = float(np.sum(w))
    if tr <= 0:
        raise ValueError("non-positive trace after clipping")
    return hermitian_part((v * (w / tr)) @ v.conj().T)


def povm_element(entries: np.ndarray) -> np.ndarray:
    """Validated POVM element: Hermitian with spectrum in [-1e-10, 1+1e-10]."""
    a = hermitian(entries)
    w = np.linalg.eigvalsh(a)
    if w[0] < -PSD_TOL or w[-1] > 1.0 + PSD_TOL:
        raise ValueError(f"eigenvalues [{w[0]:.3e}, {w[-1]:.3e}] outside [0, 1]")
    return a


def projector(entries: np.ndarray) -> np.ndarray:
    """Validated orthogonal projector: POVM element with ||P^2 - P||_inf <= 1e-10."""
    a = povm_element(entries)
    resid = float(np.max(np.abs(a @ a - a))) if a.size else 0.0
    if resid > PROJ_TOL:
        raise ValueError(f"idempotence residual {resid:.3e} above {PROJ_TOL}")
    rank = projector_rank(a)
    tr = float(np.trace(a).real)
    if abs(tr - rank) > RANK_TRACE_TOL:
        raise ValueError(f"trace {tr} is not within {RANK_TRACE_TOL} of rank {rank}")
    return a


def projector_rank(p: np.ndarray) -> int:
    return int(round(float(np.trace(np.asarray(p)).real)))


def isometry(entries: np.ndarray) -> np.ndarray:
    """Validated isometry V (rows >= cols, V†V = I within 1e-10)."""
    v = np.asarray(entries, dtype=complex)
    if v.ndim != 2 or v.shape[0] < v.shape[1]:
        raise ValueError(f"expected rows >= cols, got shape {v.shape}")
    resid = float(np.max(np.abs(v.conj().T @ v - np.eye(v.shape[1]))))
    if resid > ISOMETRY_TOL:
        raise ValueError(f"V†V deviates from identity by {resid:.3e}")
    return v


@dataclass(frozen=True)
class SpaceLayout:
    """Hilbert space assembled from orthogonal direct-sum summands of tensor factors.

    Summands are concatenated in declaration order; within a summand the
    coordinates run row-major over the factors (left factor is the slow index).
    This single fixed convention makes every embedding bit-reproducible.
    """

    summands: tuple[tuple[Hashable, tuple[int, ...]], ...]
    total_dim: int = field(init=False)

    def __post_init__(self):
        labels = [lab for lab, _ in self.summands]
        if len(set(labels)) != len(labels):
            raise ValueError("duplicate summand labels")
        for lab, dims in self.summands:
            if not dims or any(d <= 0 for d in dims):
                raise ValueError(f"summand {lab!r} has invalid factor dims {dims}")
        object.__setattr__(
            self, "total_dim", sum(int(np.prod(dims)) for _, dims in self.summands)
        )

    @classmethod
    def tensor(cls, dims: Sequence[int], label: Hashable = 0) -> "SpaceLayout":
        return cls(((label, tuple(int(d) for d in dims)),))

    @classmethod
    def direct_sum(cls, parts: Iterable[tuple[Hashable, Sequence[int]]]) -> "SpaceLayout":
        return cls(tuple((lab, tuple(int(d) for d in dims)) for lab, dims in parts))

    def summand_dim(self, label: Hashable) -> int:
        return int(np.prod(dict(self.summands)[label]))

    def offset(self, label: Hashable) -> int:
        off = 0
        for lab, dims in self.summands:
            if lab == label:
                return off
            off += int(np.prod(dims))
        raise KeyError(label)

    def slice_of(self, label: Hashable) -> slice:
        off = self.offset(label)
        return slice(off, off + self.summand_dim(label))

    def coord(self, label: Hashable, multi_index: Sequence[int]) -> int:
        dims = dict(self.summands)[label]
        if len(multi_index) != len(dims):
            raise ValueError("multi-index length mismatch")
        return self.offset(label) + int(np.ravel_multi_index(tuple(multi_index), dims))

    @property
    def is_pure_tensor(self) -> bool:
        return len(self.summands) == 1

    def factor_dims(self) -> tuple[int, ...]:
        if not self.is_pure_tensor:
            raise ValueError("layout is not a pure tensor product")
        return self.summands[0][1]


def tensor(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product, left factor slow."""
    a, b = np.asarray(a), np.asarray(b)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or b.ndim != 2 or b.shape[0] != b.shape[1]:
        raise ValueError("both operands must be square")
    return np.kron(a, b)


def tensor_all(ops: Sequence[np.ndarray]) -> np.ndarray:
    out = np.asarray(ops[0])
    for op in ops[1:]:
        out = np.kron(out, np.asarray(op))
    return out


def partial_trace(op: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Trace out the tensor factors not listed in keep.

    dims are the factor dimensions of a pure tensor layout; keep holds factor
    slots (0-based) and must be non-empty.  Trace-preserving by construction.
    """
    op = np.asarray(op, dtype=complex)
    dims = tuple(int(d) for d in dims)
    n = len(dims)
    keep = sorted(set(int(s) for s in keep))
    if not keep:
        raise ValueError("keep must be non-empty")
    if any(s < 0 or s >= n for s in keep):
        raise ValueError(f"slot out of range for {n} factors: {keep}")
    if op.shape != (int(np.prod(dims)), int(np.prod(dims))):
        raise ValueError("operator shape does not match dims")
    t = op.reshape(dims + dims)
    # contract each discarded factor: row axis i pairs with column axis n+i
    for slot in sorted(set(range(n)) - set(keep), reverse=True):
        t = np.trace(t, axis1=slot, axis2=t.ndim // 2 + slot)
    d_keep = int(np.prod([dims[s] for s in keep]))
    return t.reshape(d_keep, d_keep)


def embed_summand(op: np.ndarray, layout: SpaceLayout, label: Hashable) -> np.ndarray:
    """Block matrix equal to op on the labeled summand, zero elsewhere."""
    op = np.asarray(op, dtype=complex)
    d = layout.summand_dim(label)
    if op.shape != (d, d):
        raise ValueError(f"operator dim {op.shape} does not match summand dim {d}")
    out = np.zeros((layout.total_dim, layout.total_dim), dtype=complex)
    sl = layout.slice_of(label)
    out[sl, sl] = op
    return out


def summand_block(op: np.ndarray, layout: SpaceLayout, label: Hashable) -> np.ndarray:
    """Diagonal block of op on the labeled summand."""
    sl = layout.slice_of(label)
    return np.asarray(op)[sl, sl]


def eig_herm(op: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and orthonormal eigenvectors of a Hermitian operator.

    Eigenvectors inside a degenerate cluster (gap < 1e-9) are not individually
    stable; downstream code must use only spectral projectors of clusters.
    """
    a = np.asarray(op, dtype=complex)
    if not np.all(np.isfinite(a.view(float))):
        raise ValueError("non-finite entries")
    w, v = np.linalg.eigh(hermitian_part(a))
    return w, v


def schatten_norm(op: np.ndarray, p: float) -> float:
    """Schatten norm: sum of singular values (p=1) or largest (p=inf)."""
    s = np.linalg.svd(np.asarray(op, dtype=complex), compute_uv=False)
    if p == 1:
        return float(np.sum(s))
    if p == np.inf:
        return float(s[0]) if s.size else 0.0
    raise ValueError("only p = 1 and p = inf are supported")


def trace_norm_herm(a: np.ndarray) -> float:
    """||A||_1 for Hermitian A via eigenvalues (cheaper than an SVD)."""
    return float(np.sum(np.abs(np.linalg.eigvalsh(hermitian_part(a)))))


def schmidt_split(
    vec: np.ndarray, dims: tuple[int, int]
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Schmidt decomposition of a unit vector on a bipartite tensor space.

    Returns (coefficients descending, left vectors as columns, right vectors as
    columns) with vec = sum_i c_i left[:,i] (x) right[:,i].
    """
    v = np.asarray(vec, dtype=complex).reshape(-1)
    dl, dr = int(dims[0]), int(dims[1])
    if v.shape[0] != dl * dr:
        raise ValueError("vector length does not match bipartition")
    nrm = float(np.linalg.norm(v))
    if abs(nrm - 1.0) > 1e-10:
        raise ValueError(f"vector norm {nrm} is not 1 within 1e-10")
    u, s, vh = np.linalg.svd(v.reshape(dl, dr), full_matrices=False)
    return s, u, vh.T
