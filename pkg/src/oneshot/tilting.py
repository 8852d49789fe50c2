"""Tilted spans of subspaces and the derived union-projector constructions.

A family of subspaces of H is "tilted" by rotating each toward a private
orthogonal copy of H inside H~ = H (+) H_1 (+) ... (+) H_l.  Tilting
increases the mutual angles, which turns the span into a well-behaved
union with acceptance close to the sum of the individual acceptances.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import qla

SPAN_RANK_TOL = 1e-10


@dataclass(frozen=True)
class TiltedLayout:
    """H~ = H (+) H_1 (+) ... (+) H_l with every summand a copy of H.

    Summand j occupies coordinates [j*base_dim, (j+1)*base_dim), j = 0 being
    the untilted base copy.
    """

    base_dim: int
    directions: int
    total_dim: int = field(init=False)

    def __post_init__(self):
        if self.base_dim <= 0 or self.directions < 0:
            raise ValueError("base_dim must be positive and directions non-negative")
        object.__setattr__(self, "total_dim", (self.directions + 1) * self.base_dim)

    def layout(self) -> qla.SpaceLayout:
        return qla.SpaceLayout.direct_sum(
            (j, (self.base_dim,)) for j in range(self.directions + 1)
        )

    def block(self, j: int) -> slice:
        if not 0 <= j <= self.directions:
            raise ValueError(f"summand index {j} out of range")
        return slice(j * self.base_dim, (j + 1) * self.base_dim)


@dataclass(frozen=True)
class TiltingMatrix:
    """Upper triangular, diagonal dominated, substochastic tilt weights.

    alpha[i, j] is the tilt of subspace j along direction i for i <= j;
    validation enforces alpha[i, j] = 0 below the diagonal,
    alpha[i, i] >= alpha[i, j] for i <= j, and column sums <= 1.
    """

    alpha: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("tilting matrix must be square")
        object.__setattr__(self, "alpha", a)
        if np.any(a < -1e-15) or np.any(a > 1 + 1e-12):
            raise ValueError("entries must lie in [0, 1]")
        if np.any(np.abs(np.tril(a, -1)) > 1e-15):
            raise ValueError("matrix is not upper triangular")
        for i in range(a.shape[0]):
            if np.any(a[i, i + 1 :] > a[i, i] + 1e-12):
                raise ValueError(f"row {i} is not dominated by its diagonal entry")
        if np.any(a.sum(axis=0) > 1 + 1e-12):
            raise ValueError("matrix is not substochastic")

    @property
    def size(self) -> int:
        return self.alpha.shape[0]


def tilt_isometry(j: int, alpha: float, layout: TiltedLayout) -> np.ndarray:
    """Isometry h -> sqrt(1-alpha) h (+) sqrt(alpha) T_j(h) into the tilted space."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if not 1 <= j <= layout.directions:
        raise ValueError(f"direction {j} out of range")
    d = layout.base_dim
    v = np.zeros((layout.total_dim, d), dtype=complex)
    v[layout.block(0), :] = np.sqrt(1.0 - alpha) * np.eye(d)
    v[layout.block(j), :] = np.sqrt(alpha) * np.eye(d)
    return v


def a_tilt_isometry(j: int, a: TiltingMatrix, layout: TiltedLayout) -> np.ndarray:
    """Isometry sqrt(1 - sum_i alpha_ij) 1 + sum_{i<=j} sqrt(alpha_ij) T_i (1-based j)."""
    if not 1 <= j <= layout.directions:
        raise ValueError(f"direction {j} out of range")
    col = a.alpha[:, j - 1]
    rem = 1.0 - float(col[:j].sum())
    d = layout.base_dim
    v = np.zeros((layout.total_dim, d), dtype=complex)
    v[layout.block(0), :] = np.sqrt(max(rem, 0.0)) * np.eye(d)
    for i in range(1, j + 1):
        v[layout.block(i), :] = np.sqrt(col[i - 1]) * np.eye(d)
    return v


def embed_base(layout: TiltedLayout) -> np.ndarray:
    """Identity embedding of H into the base summand of the tilted space."""
    v = np.zeros((layout.total_dim, layout.base_dim), dtype=complex)
    v[layout.block(0), :] = np.eye(layout.base_dim)
    return v


def span_basis(proj: np.ndarray, tol: float = 0.5) -> np.ndarray:
    """Orthonormal basis (columns) of the range of a projector."""
    w, v = np.linalg.eigh(qla.hermitian_part(np.asarray(proj, dtype=complex)))
    return v[:, w > tol]


def orthonormalize(cols: np.ndarray, tol: float = SPAN_RANK_TOL) -> np.ndarray:
    """Rank-revealing orthonormalization of a set of (possibly dependent) columns."""
    cols = np.asarray(cols, dtype=complex)
    if cols.size == 0:
        return cols.reshape(cols.shape[0], 0)
    u, s, _ = np.linalg.svd(cols, full_matrices=False)
    return u[:, s > tol * max(1.0, s[0] if s.size else 1.0)]


def projector_onto(cols: np.ndarray) -> np.ndarray:
    q = orthonormalize(cols)
    return qla.hermitian_part(q @ q.conj().T)


def tilted_span(
    subspaces: list[np.ndarray], alphas: list[float], layout: TiltedLayout | None = None
) -> np.ndarray:
    """Projector onto the (alpha_1, ..., alpha_l)-tilted span of the subspaces.

    Each subspace is passed as a projector on H; its basis is pushed through
    the corresponding tilt isometry and the images are orthonormalized with a
    rank-revealing sweep (tilted images of overlapping subspaces can be nearly
    dependent).
    """
    if len(subspaces) != len(alphas):
        raise ValueError("need one alpha per subspace")
    if layout is None:
        layout = TiltedLayout(int(subspaces[0].shape[0]), len(subspaces))
    images = []
    for j, (w, alpha) in enumerate(zip(subspaces, alphas), start=1):
        basis = span_basis(w)
        if basis.shape[1]:
            images.append(tilt_isometry(j, alpha, layout) @ basis)
    if not images:
        return np.zeros((layout.total_dim, layout.total_dim), dtype=complex)
    return projector_onto(np.hstack(images))


def tilted_span_with_fixed(
    w0: np.ndarray,
    subspaces: list[np.ndarray],
    alpha: float,
    layout: TiltedLayout | None = None,
) -> np.ndarray:
    """Projector onto W_0 + (alpha-tilted span), W_0 kept untilted in the base copy.

    Requires alpha < 1/3; callers wanting larger tilts must use tilted_span.
    """
    if not 0 < alpha < 1.0 / 3.0:
        raise ValueError("alpha must lie in (0, 1/3)")
    if layout is None:
        layout = TiltedLayout(int(w0.shape[0]), len(subspaces))
    images = []
    base = span_basis(w0)
    if base.shape[1]:
        images.append(embed_base(layout) @ base)
    for j, w in enumerate(subspaces, start=1):
        basis = span_basis(w)
        if basis.shape[1]:
            images.append(tilt_isometry(j, alpha, layout) @ basis)
    if not images:
        return np.zeros((layout.total_dim, layout.total_dim), dtype=complex)
    return projector_onto(np.hstack(images))


def a_tilted_span(
    subspaces: list[np.ndarray], a: TiltingMatrix, layout: TiltedLayout | None = None
) -> np.ndarray:
    """Projector onto the A-tilted span: subspace j tilted along directions 1..j."""
    if len(subspaces) != a.size:
        raise ValueError("tilting matrix size must match the number of subspaces")
    if layout is None:
        layout = TiltedLayout(int(subspaces[0].shape[0]), len(subspaces))
    images = []
    for j, w in enumerate(subspaces, start=1):
        basis = span_basis(w)
        if basis.shape[1]:
            images.append(a_tilt_isometry(j, a, layout) @ basis)
    if not images:
        return np.zeros((layout.total_dim, layout.total_dim), dtype=complex)
    return projector_onto(np.hstack(images))


def prop_tilted_bounds(
    overlaps: np.ndarray, alphas: np.ndarray
) -> tuple[float, float]:
    """Lower/upper bounds on the tilted-span overlap of a unit vector.

    overlaps[j] = ||P_{W_j} h||^2.  Returns
    (max_j (1-alpha_j) eps_j, (1-alpha)/alpha * sum_j eps_j) with
    alpha = min_j alpha_j.
    """
    overlaps = np.asarray(overlaps, dtype=float)
    alphas = np.asarray(alphas, dtype=float)
    if overlaps.size == 0:
        return 0.0, 0.0
    amin = float(alphas.min())
    return (
        float(np.max((1.0 - alphas) * overlaps)),
        (1.0 - amin) / amin * float(overlaps.sum()),
    )


def prop_a_tilted_bounds(overlaps: np.ndarray, a: TiltingMatrix) -> tuple[float, float]:
    """Lower/upper bounds on the A-tilted-span overlap of a unit vector.

    Lower: max_j eps_j (1 - sum_i alpha_ij).
    Upper: (sum_j sqrt(eps_j) sum_{k>=j} 2^(k-j) alpha_kk^(-1/2))^2.
    """
    overlaps = np.asarray(overlaps, dtype=float)
    l = a.size
    if overlaps.shape != (l,):
        raise ValueError("need one overlap per subspace")
    lower = 0.0
    for j in range(l):
        lower = max(lower, overlaps[j] * (1.0 - float(a.alpha[: j + 1, j].sum())))
    diag = np.diag(a.alpha)
    coeff = np.array(
        [sum(2.0 ** (k - j) / np.sqrt(diag[k]) for k in range(j, l)) for j in range(l)]
    )
    upper = float(np.dot(np.sqrt(np.maximum(overlaps, 0.0)), coeff)) ** 2
    return lower, upper


def union_projector(
    projectors: list[np.ndarray],
    alpha: float,
    layout: TiltedLayout | None = None,
    states_for_audit: list[np.ndarray] | None = None,
) -> tuple[np.ndarray, TiltedLayout]:
    """Projector on the tilted space acting as a robust union of the inputs.

    If Tr[Pi_i rho_i] >= 1 - eps then the output Pi^ satisfies
    Tr[Pi^ rho_i-embedded] >= 1 - eps - alpha, and for every state sigma
    Tr[Pi^ sigma-embedded] <= (1-alpha)/alpha * sum_i Tr[Pi_i sigma], where
    states embed via the base summand.  states_for_audit, when given, has
    both guarantees re-verified on each state (a violation signals a
    construction bug, not a property of the inputs).
    """
    if not projectors:
        raise ValueError("need at least one projector")
    if layout is None:
        layout = TiltedLayout(int(projectors[0].shape[0]), len(projectors))
    pi = tilted_span(projectors, [alpha] * len(projectors), layout)
    if states_for_audit:
        emb = embed_base(layout)
        for sigma in states_for_audit:
            lifted = emb @ np.asarray(sigma, dtype=complex) @ emb.conj().T
            got = float(np.trace(pi @ lifted).real)
            total = sum(float(np.trace(p @ sigma).real) for p in projectors)
            if got > (1 - alpha) / alpha * total + 1e-9:
                raise ValueError("union acceptance exceeds its tilted-span bound")
            floor = max(
                (1 - alpha) * float(np.trace(p @ sigma).real) for p in projectors
            )
            if got < floor - 1e-9:
                raise ValueError("union acceptance fell below its per-input floor")
    return pi, layout


def gao_slack(projectors: list[np.ndarray], rho: np.ndarray) -> float:
    """Slack in the noncommutative union bound.

    Returns Tr[P_k ... P_1 rho P_1 ... P_k] - (Tr rho - 4 sum_i Tr[rho (1-P_i)]);
    non-negative (within tolerance) for any projectors P_i and PSD rho with
    Tr rho <= 1.
    """
    rho = np.asarray(rho, dtype=complex)
    sandwiched = rho.copy()
    penalty = 0.0
    for p in projectors:
        penalty += float(np.trace(rho @ (np.eye(p.shape[0]) - p)).real)
        sandwiched = p @ sandwiched @ p
    lhs = float(np.trace(sandwiched).real)
    rhs = float(np.trace(rho).real) - 4.0 * penalty
    return lhs - rhs
