"""Augmented-space smoothing construction and its numeric auditor.

A k-partite quantum system (sites 1..k, each a copy of H) together with c
classical coordinates is embedded into per-site augmented spaces

    A''_i = (H x C^2)  (+)  sum over blocks S containing i of (H x C^2) x L^|S|,

after which the state is smoothed by superposing, over every
pseudosubpartition, coordinate-labelled copies of itself.  Partial traces of
the smoothed state then split into a tilted leading term, a small leak term,
and a flat remainder whose operator norm is damped by the ancilla dimension.

Elements of the index set are encoded as ints: quantum sites are 1..k,
classical coordinates are -1..-c.  A block is a sorted tuple of elements, a
pseudosubpartition a sorted tuple of blocks (pairwise disjoint on the
quantum sites, each containing at least one quantum site).
"""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import hyptest, qla, report, tilting

Block = tuple[int, ...]
Psp = tuple[Block, ...]

DEFAULT_SITE_DIM_CAP = 4096
DENSE_CAP = 4200
IDENTITY_TOL = 1e-8


def site_dim_cap() -> int:
    return int(os.environ.get("ONESHOT_DIM_CAP", DEFAULT_SITE_DIM_CAP))


def quantum_sites(k: int) -> tuple[int, ...]:
    return tuple(range(1, k + 1))


def classical_coords(c: int) -> tuple[int, ...]:
    return tuple(range(-c, 0))


def canonical_psp(blocks) -> Psp:
    return tuple(sorted(tuple(sorted(b)) for b in blocks))


def enum_psps(elements) -> tuple[Psp, ...]:
    """All pseudosubpartitions of the element set, empty one included.

    Blocks are subsets of the elements that contain at least one quantum
    site; distinct blocks are disjoint on the quantum sites but may share
    classical coordinates.
    """
    elements = sorted(elements)
    quantum = [e for e in elements if e > 0]
    classical = [e for e in elements if e < 0]
    csubsets = [
        tuple(sorted(cs))
        for r in range(len(classical) + 1)
        for cs in itertools.combinations(classical, r)
    ]

    # enumerate collections of disjoint non-empty subsets of the quantum part
    def qsubpartitions(rest):
        if not rest:
            yield ()
            return
        head, tail = rest[0], rest[1:]
        # head unused
        for sub in qsubpartitions(tail):
            yield sub
        # head starts or joins a block: choose the full block containing head
        for r in range(len(tail) + 1):
            for extra in itertools.combinations(tail, r):
                block = (head,) + extra
                remaining = [e for e in tail if e not in extra]
                for sub in qsubpartitions(remaining):
                    yield (block,) + sub

    out = set()
    for qblocks in qsubpartitions(quantum):
        for attach in itertools.product(csubsets, repeat=len(qblocks)):
            blocks = [tuple(sorted(q + a)) for q, a in zip(qblocks, attach)]
            out.add(canonical_psp(blocks))
    return tuple(sorted(out, key=lambda p: (len(p), p)))


def refines(p: Psp, q: Psp) -> bool:
    """p precedes q when every block of p lies inside some block of q."""
    return all(any(set(s) <= set(t) for t in q) for s in p)


def psp_count_bound(elements) -> int:
    nq = sum(1 for e in elements if e > 0)
    nc = sum(1 for e in elements if e < 0)
    return 2 ** (nq * nc) * (nq + 1) ** nq


@dataclass(frozen=True)
class PsLattice:
    """All pseudosubpartitions of a set with the refinement partial order.

    linear_ext lists the non-empty elements in a deterministic topological
    order of the refinement relation (Kahn's algorithm, lexicographic
    tie-break), which fixes the direction indexing of the tilting matrix.
    """

    elements: tuple[int, ...]
    psps: tuple[Psp, ...]
    refine_matrix: np.ndarray
    linear_ext: tuple[Psp, ...]

    @classmethod
    def build(cls, elements) -> "PsLattice":
        elements = tuple(sorted(elements))
        psps = enum_psps(elements)
        n = len(psps)
        mat = np.zeros((n, n), dtype=bool)
        for i, p in enumerate(psps):
            for j, q in enumerate(psps):
                mat[i, j] = refines(p, q)
        nonempty = [p for p in psps if p]
        order = []
        pending = set(nonempty)
        below = {q: {p for p in nonempty if p != q and refines(p, q)} for q in nonempty}
        while pending:
            ready = sorted(p for p in pending if below[p] <= set(order))
            order.append(ready[0])
            pending.remove(ready[0])
        return cls(elements, psps, mat, tuple(order))

    def index(self, psp: Psp) -> int:
        return self.linear_ext.index(psp)


def enum_pslattice(c: int, k: int, T=None) -> PsLattice:
    """Lattice of pseudosubpartitions of T (default the whole set [c] (+) [k])."""
    if T is None:
        T = classical_coords(c) + quantum_sites(k)
    T = tuple(sorted(T))
    if not any(e > 0 for e in T):
        raise ValueError("T must contain at least one quantum site")
    return PsLattice.build(T)


@lru_cache(maxsize=None)
def _psps_of(elements: tuple[int, ...]) -> tuple[Psp, ...]:
    return enum_psps(elements)


def normalization(S, delta: float) -> float:
    """N(S, delta) = 1 + sum over non-empty pseudosubpartitions of S of delta^(2l).

    Equals 1 when S has no quantum site (only the empty pseudosubpartition).
    """
    S = tuple(sorted(S))
    if not any(e > 0 for e in S):
        return 1.0
    return 1.0 + sum(
        float(delta) ** (2 * len(p)) for p in _psps_of(S) if p
    )


def build_tilting_matrix(lattice: PsLattice, delta: float) -> tilting.TiltingMatrix:
    """Tilt weights between pseudosubpartition directions in linear-extension order.

    Entry (p, q) is delta^(2 l_p) / prod_i N(Q_i, delta) when p refines q.
    Validation failure here signals a lattice-order bug.
    """
    order = lattice.linear_ext
    n = len(order)
    a = np.zeros((n, n))
    for j, q in enumerate(order):
        denom = float(np.prod([normalization(b, delta) for b in q]))
        for i, p in enumerate(order):
            if refines(p, q):
                a[i, j] = float(delta) ** (2 * len(p)) / denom
    return tilting.TiltingMatrix(a)


@dataclass(frozen=True)
class AugmentedSpace:
    """Index bookkeeping for the per-site augmented spaces A''_i.

    Per-site summands are ordered base first, then blocks sorted
    lexicographically; within a summand the coordinates run row-major as
    (H x C^2) slow, ancilla labels fast.
    """

    c: int
    k: int
    dim_h: int
    dim_l: int
    site_labels: dict[int, tuple] = field(init=False, repr=False)

    def __post_init__(self):
        if self.k < 1 or self.c < 0 or self.dim_h < 1 or self.dim_l < 1:
            raise ValueError("invalid space parameters")
        elements = classical_coords(self.c) + quantum_sites(self.k)
        labels = {}
        for i in quantum_sites(self.k):
            blocks = sorted(
                tuple(sorted(s))
                for r in range(1, len(elements) + 1)
                for s in itertools.combinations(elements, r)
                if i in s
            )
            labels[i] = (None,) + tuple(blocks)
        object.__setattr__(self, "site_labels", labels)
        cap = site_dim_cap()
        if self.site_dim(1) > cap:
            raise ValueError(
                f"per-site dimension {self.site_dim(1)} exceeds cap {cap}"
            )

    @property
    def base_dim(self) -> int:
        return 2 * self.dim_h

    def summand_dim(self, label) -> int:
        if label is None:
            return self.base_dim
        return self.base_dim * self.dim_l ** len(label)

    def site_layout(self, i: int) -> qla.SpaceLayout:
        parts = []
        for label in self.site_labels[i]:
            if label is None:
                parts.append(("base", (self.dim_h, 2)))
            else:
                parts.append((label, (self.dim_h, 2) + (self.dim_l,) * len(label)))
        return qla.SpaceLayout.direct_sum(parts)

    def site_dim(self, i: int) -> int:
        return sum(self.summand_dim(lab) for lab in self.site_labels[i])

    def site_offset(self, i: int, label) -> int:
        off = 0
        for lab in self.site_labels[i]:
            if lab == label:
                return off
            off += self.summand_dim(lab)
        raise KeyError(label)

    def total_dim(self, sites=None) -> int:
        sites = quantum_sites(self.k) if sites is None else sorted(sites)
        return int(np.prod([self.site_dim(s) for s in sites]))

    def site_embed(self, i: int, label, l_assign: dict[int, int] | None) -> np.ndarray:
        """Isometry (H x C^2) -> A''_i into the labelled summand.

        For a block label the ancilla registers are filled with the basis
        labels l_assign[e], e in the block; permutation-style matrix.
        """
        m = self.base_dim
        v = np.zeros((self.site_dim(i), m), dtype=complex)
        off = self.site_offset(i, label)
        if label is None:
            v[off : off + m, :] = np.eye(m)
            return v
        idx = 0
        for e in label:
            idx = idx * self.dim_l + int(l_assign[e])
        ls = self.dim_l ** len(label)
        for h in range(m):
            v[off + h * ls + idx, h] = 1.0
        return v

    def sites_base_embed(self, sites) -> np.ndarray:
        mats = [self.site_embed(s, None, None) for s in sorted(sites)]
        return _kron_all(mats)


def _kron_all(mats) -> np.ndarray:
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


def coord_embed(space: AugmentedSpace, S, l_assign: dict[int, int]) -> np.ndarray:
    """Permutation isometry appending the block's labels at each of its sites."""
    S = tuple(sorted(S))
    sites = [e for e in S if e > 0]
    if not sites:
        raise ValueError("block contains no quantum site")
    mats = [space.site_embed(s, S, l_assign) for s in sites]
    return _kron_all(mats)


def psp_embed(
    space: AugmentedSpace, psp: Psp, l_assign: dict[int, int], delta: float, sites=None
) -> np.ndarray:
    """Isometry T_(S_1..S_l),l,delta from (H x C^2)^(x sites) into A''_sites.

    Expands into a sum over all pseudosubpartitions refining the given one:
    the term for (W_1..W_n) embeds each site of W_j into the W_j summand
    carrying the labels l|_{W_j}, uncovered sites into the base summand,
    weighted by delta^n / sqrt(prod_i N(S_i, delta)).
    """
    sites = tuple(sorted(quantum_sites(space.k) if sites is None else sites))
    covered = set().union(*[set(b) for b in psp]) if psp else set()
    if not set(s for s in covered if s > 0) <= set(sites):
        raise ValueError("pseudosubpartition covers sites outside the requested set")
    norm = float(np.prod([normalization(b, delta) for b in psp])) if psp else 1.0

    sub_choices = [[p for p in _psps_of(tuple(sorted(b)))] for b in psp]
    m = space.base_dim
    total = space.total_dim(sites)
    acc = np.zeros((total, m ** len(sites)), dtype=complex)
    for combo in itertools.product(*sub_choices) if psp else [()]:
        blocks = [b for sub in combo for b in sub]
        site_of = {}
        for b in blocks:
            for e in b:
                if e > 0:
                    site_of[e] = b
        mats = []
        for s in sites:
            if s in site_of:
                mats.append(space.site_embed(s, site_of[s], l_assign))
            else:
                mats.append(space.site_embed(s, None, None))
        acc += float(delta) ** len(blocks) * _kron_all(mats)
    return acc / np.sqrt(norm)


def smoothing_embed(
    space: AugmentedSpace, S, l_assign: dict[int, int], delta: float
) -> np.ndarray:
    """Isometry T_{S, l_S, delta} on the sites of S (identity embed at delta = 0)."""
    S = tuple(sorted(S))
    sites = [e for e in S if e > 0]
    return psp_embed(space, (S,), l_assign, delta, sites=sites)


def global_embed(
    space: AugmentedSpace, l_assign: dict[int, int], delta: float
) -> np.ndarray:
    """The full smoothing isometry over all quantum sites and coordinates."""
    full = tuple(sorted(classical_coords(space.c) + quantum_sites(space.k)))
    return smoothing_embed(space, full, l_assign, delta)


def embed_with_ancilla(rho: np.ndarray, n_sites: int, dim_h: int) -> np.ndarray:
    """rho on H^(x n) tensored with |0><0| per site, in per-site (h, b) coordinates."""
    e0 = np.kron(np.eye(dim_h), np.array([[1.0], [0.0]]))
    emb = _kron_all([e0] * n_sites)
    return emb @ np.asarray(rho, dtype=complex) @ emb.conj().T


def ancilla_embed_isometry(n_sites: int, dim_h: int) -> np.ndarray:
    e0 = np.kron(np.eye(dim_h), np.array([[1.0], [0.0]]))
    return _kron_all([e0] * n_sites)


def dilate_to_sites(pi: np.ndarray, n_sites: int, dim_h: int) -> np.ndarray:
    """Gelfand-Naimark dilation of a POVM element on H^(x n) to (H x C^2)^(x n).

    The ancilla qubit of the last site absorbs the rejected weight, so
    Tr[Pi' (A x |00..0><00..0|)] = Tr[pi A] exactly with per-site ancillas.
    """
    pi = np.asarray(pi, dtype=complex)
    w, v = np.linalg.eigh(qla.hermitian_part(pi))
    if w[0] < -qla.PSD_TOL or w[-1] > 1 + qla.PSD_TOL:
        raise ValueError("input is not a POVM element")
    w = np.clip(w, 0.0, 1.0)
    e0 = np.kron(np.eye(dim_h), np.array([[1.0], [0.0]]))
    e1 = np.kron(np.eye(dim_h), np.array([[0.0], [1.0]]))
    emb0 = _kron_all([e0] * n_sites)
    emb1 = _kron_all([e0] * (n_sites - 1) + [e1]) if n_sites > 1 else e1
    basis = emb0 @ (v * np.sqrt(w)) + emb1 @ (v * np.sqrt(1.0 - w))
    return qla.hermitian_part(basis @ basis.conj().T)


@dataclass
class LowRankState:
    """PSD operator factor @ core @ factor† kept in factored form.

    The big augmented spaces are never materialized as dense matrices; traces
    against factored POVM elements reduce to small matrix products.
    """

    factor: np.ndarray
    core: np.ndarray

    def dense(self) -> np.ndarray:
        return qla.hermitian_part(self.factor @ self.core @ self.factor.conj().T)

    def trace(self) -> float:
        return float(np.trace(self.core @ (self.factor.conj().T @ self.factor)).real)

    def core_sqrt_cols(self) -> np.ndarray:
        w, v = np.linalg.eigh(qla.hermitian_part(self.core))
        return self.factor @ (v * np.sqrt(np.maximum(w, 0.0)))

    def eigenvalues(self) -> np.ndarray:
        cols = self.core_sqrt_cols()
        return np.linalg.eigvalsh(cols.conj().T @ cols)


def povm_expectation(b_factor: np.ndarray, state: LowRankState) -> float:
    """Tr[(B B†) rho] for a factored PSD POVM element and a factored state."""
    cols = state.core_sqrt_cols()
    return float(np.linalg.norm(b_factor.conj().T @ cols) ** 2)


def l1_distance_factored(a: LowRankState, b: LowRankState) -> float:
    """Trace distance between two factored operators via their joint column space."""
    cols = np.hstack([a.core_sqrt_cols(), b.core_sqrt_cols()])
    basis = tilting.orthonormalize(cols, tol=1e-12)
    sa = basis.conj().T @ a.factor
    sb = basis.conj().T @ b.factor
    small = sa @ a.core @ sa.conj().T - sb @ b.core @ sb.conj().T
    return qla.trace_norm_herm(small)


@dataclass
class TypicalityInstance:
    """Inputs of one smoothing-and-augmentation construction.

    rhos maps each classical word x (a tuple, () when c = 0) to a state on
    H^(x k); eps_total is split uniformly over the non-empty
    pseudosubpartitions unless eps_table overrides individual entries.
    """

    c: int
    k: int
    dim_h: int
    dim_l: int
    delta: float
    rhos: dict
    p_x: dict
    eps_total: float = 0.1
    eps_table: dict | None = None
    alphabet: int = 1

    def __post_init__(self):
        if self.c == 0:
            self.alphabet = 1
            if set(self.rhos) != {()}:
                raise ValueError("c = 0 instances use the empty classical word ()")
        total = sum(self.p_x.values())
        if abs(total - 1.0) > 1e-10:
            raise ValueError("p_x must sum to 1")
        for x, rho in self.rhos.items():
            if rho.shape != (self.dim_h**self.k,) * 2:
                raise ValueError(f"state for {x} has wrong shape {rho.shape}")

    @property
    def space(self) -> AugmentedSpace:
        return AugmentedSpace(self.c, self.k, self.dim_h, self.dim_l)

    @property
    def lattice(self) -> PsLattice:
        return enum_pslattice(self.c, self.k)

    def eps_for(self, x, psp: Psp) -> float:
        if self.eps_table is not None and (x, psp) in self.eps_table:
            return float(self.eps_table[(x, psp)])
        return self.eps_total / len(self.lattice.linear_ext)

    def words(self):
        return sorted(self.rhos)

    def avg_weights(self, kept_coords, x_kept) -> dict:
        """Distribution over the classical coordinates outside kept_coords.

        Defaults to the conditional of p_x given the kept symbols (equal to
        the plain marginal when c <= 1 or p_x factorizes).
        """
        coords = classical_coords(self.c)
        kept_idx = [i for i, e in enumerate(coords) if e in set(kept_coords)]
        rest_idx = [i for i, e in enumerate(coords) if e not in set(kept_coords)]
        if not rest_idx:
            return {(): 1.0}
        weights = {}
        for x, p in self.p_x.items():
            if tuple(x[i] for i in kept_idx) != tuple(x_kept):
                continue
            key = tuple(x[i] for i in rest_idx)
            weights[key] = weights.get(key, 0.0) + p
        total = sum(weights.values())
        if total <= 0:
            raise ValueError("kept classical word has zero probability")
        return {key: w / total for key, w in weights.items()}

    def merge_word(self, kept_coords, x_kept, x_rest) -> tuple:
        coords = classical_coords(self.c)
        kept = dict(zip(sorted(kept_coords), x_kept))
        rest_coords = [e for e in coords if e not in set(kept_coords)]
        rest = dict(zip(rest_coords, x_rest))
        return tuple(kept.get(e, rest.get(e)) for e in coords)

    def quantum_marginal(self, x, sites) -> np.ndarray:
        sites = sorted(sites)
        return qla.partial_trace(
            self.rhos[x], (self.dim_h,) * self.k, keep=[s - 1 for s in sites]
        )

    def averaged_marginal(self, block: Block, x_kept) -> np.ndarray:
        """Classically averaged quantum marginal for one block of a split."""
        kept_c = tuple(e for e in block if e < 0)
        sites = [e for e in block if e > 0]
        weights = self.avg_weights(kept_c, x_kept)
        out = 0.0
        for x_rest, w in weights.items():
            x_full = self.merge_word(kept_c, x_kept, x_rest)
            out = out + w * self.quantum_marginal(x_full, sites)
        return qla.hermitian_part(out)

    def split_state(self, x, psp: Psp, sigma=None) -> np.ndarray:
        """Product of averaged block marginals (and the fill state) on H^(x k)."""
        covered = [e for b in psp for e in b if e > 0]
        t_sites = [s for s in quantum_sites(self.k) if s not in covered]
        factors = []
        for block in psp:
            x_kept = tuple(x[classical_coords(self.c).index(e)] for e in block if e < 0)
            factors.append(
                (tuple(e for e in block if e > 0), self.averaged_marginal(block, x_kept))
            )
        if t_sites:
            fill = self.quantum_marginal(x, t_sites) if sigma is None else sigma
            factors.append((tuple(t_sites), fill))
        return assemble_on_sites(self.k, self.dim_h, factors)


def assemble_on_sites(k: int, site_dim, factors) -> np.ndarray:
    """Tensor operators on disjoint site groups into the full k-site operator.

    factors is a list of (sites, matrix); the site groups must partition
    1..k.  site_dim is the common per-site dimension or a dict site -> dim.
    """
    dims = {s: site_dim[s] if isinstance(site_dim, dict) else site_dim for s in quantum_sites(k)}
    seen = [s for sites, _ in factors for s in sites]
    if sorted(seen) != sorted(quantum_sites(k)):
        raise ValueError("factor site groups must partition the sites")
    letters = "abcdefghijklmnopqrstuvwx"
    out_rows = [letters[s - 1] for s in quantum_sites(k)]
    out_cols = [letters[12 + s - 1] for s in quantum_sites(k)]
    terms, ops = [], []
    for sites, mat in factors:
        sub_rows = "".join(letters[s - 1] for s in sites)
        sub_cols = "".join(letters[12 + s - 1] for s in sites)
        shape = tuple(dims[s] for s in sites) * 2
        terms.append(sub_rows + sub_cols)
        ops.append(np.asarray(mat, dtype=complex).reshape(shape))
    spec = ",".join(terms) + "->" + "".join(out_rows) + "".join(out_cols)
    full = np.einsum(spec, *ops)
    n = int(np.prod([dims[s] for s in quantum_sites(k)]))
    return full.reshape(n, n)


def apply_site_factors(space: AugmentedSpace, factors, cols: np.ndarray) -> np.ndarray:
    """Apply a tensor product of per-site-group operators to stacked columns."""
    dims = [space.site_dim(s) for s in quantum_sites(space.k)]
    r = cols.shape[1]
    t = cols.reshape(tuple(dims) + (r,))
    for sites, mat in factors:
        sites = sorted(sites)
        axes = [s - 1 for s in sites]
        rest = [ax for ax in range(space.k) if ax not in axes] + [space.k]
        perm = axes + rest
        tp = np.transpose(t, perm)
        merged = tp.reshape(int(np.prod([dims[ax] for ax in axes])), -1)
        merged = np.asarray(mat, dtype=complex) @ merged
        tp = merged.reshape([dims[ax] for ax in axes] + [dims[ax2] for ax2 in rest[:-1]] + [r])
        t = np.transpose(tp, np.argsort(perm))
    return t.reshape(-1, r)


@dataclass
class SplitTest:
    psp: Psp
    eps: float
    dh_bits: float
    reject_mass: float
    test_small: np.ndarray
    projector_sites: np.ndarray
    y_basis: np.ndarray


def optimal_splitting_tests(inst: TypicalityInstance, x) -> dict:
    """Per-pseudosubpartition optimal tests, dilated to site-local projectors.

    For each non-empty pseudosubpartition the optimal test for
    D_H^eps(rho_x || split state) is computed on H^(x k), then dilated to a
    projector on (H x C^2)^(x k); y_basis spans the orthogonal complement of
    its support.
    """
    out = {}
    for psp in inst.lattice.linear_ext:
        eps = inst.eps_for(x, psp)
        target = inst.split_state(x, psp)
        res = hyptest.quantum_optimal_test(inst.rhos[x], target, eps)
        proj = dilate_to_sites(res.test, inst.k, inst.dim_h)
        w, v = np.linalg.eigh(proj)
        y_basis = v[:, w < 0.5]
        out[psp] = SplitTest(
            psp=psp,
            eps=eps,
            dh_bits=res.value_bits,
            reject_mass=res.reject_mass,
            test_small=res.test,
            projector_sites=proj,
            y_basis=y_basis,
        )
    return out


@dataclass
class BlockConstruction:
    """The smoothed state and intersection POVM element for one (x, l) block."""

    inst: TypicalityInstance
    x: tuple
    l_assign: dict
    tests: dict
    v_global: np.ndarray
    rho_hat: np.ndarray
    e_hat: np.ndarray
    q_tilted: np.ndarray
    b_factor: np.ndarray

    @property
    def rho_prime(self) -> LowRankState:
        return LowRankState(self.v_global, self.rho_hat)

    @property
    def embedded_original(self) -> LowRankState:
        return LowRankState(self.e_hat, self.rho_hat)

    def pi_prime_expectation(self, state: LowRankState) -> float:
        return povm_expectation(self.b_factor, state)

    def pi_prime_trace_norm(self) -> float:
        return float(np.trace(self.b_factor.conj().T @ self.b_factor).real)

    def y_projector_expectation(self, state: LowRankState) -> float:
        return povm_expectation(self.q_tilted, state)


def zero_labels(inst: TypicalityInstance) -> dict:
    full = classical_coords(inst.c) + quantum_sites(inst.k)
    return {e: 0 for e in full}


def build_construction(
    inst: TypicalityInstance, x, l_assign: dict | None = None, tests: dict | None = None
) -> BlockConstruction:
    """Assemble rho'_{x,l,delta} and Pi'_{x,l,delta} in factored form."""
    space = inst.space
    if l_assign is None:
        l_assign = zero_labels(inst)
    if tests is None:
        tests = optimal_splitting_tests(inst, x)
    v_global = global_embed(space, l_assign, inst.delta)
    rho_hat = embed_with_ancilla(inst.rhos[x], inst.k, inst.dim_h)
    e_hat = space.sites_base_embed(quantum_sites(inst.k))
    images = []
    for psp in inst.lattice.linear_ext:
        basis = tests[psp].y_basis
        if basis.shape[1]:
            images.append(psp_embed(space, psp, l_assign, inst.delta) @ basis)
    if images:
        q = tilting.orthonormalize(np.hstack(images))
    else:
        q = np.zeros((space.total_dim(), 0), dtype=complex)
    b = e_hat - q @ (q.conj().T @ e_hat)
    return BlockConstruction(
        inst=inst,
        x=x,
        l_assign=dict(l_assign),
        tests=tests,
        v_global=v_global,
        rho_hat=rho_hat,
        e_hat=e_hat,
        q_tilted=q,
        b_factor=b,
    )


def build_rho_prime(inst: TypicalityInstance, x, l_assign: dict | None = None) -> LowRankState:
    """The smoothed state rho'_{x,l,delta} as a factored density matrix."""
    space = inst.space
    if l_assign is None:
        l_assign = zero_labels(inst)
    v = global_embed(space, l_assign, inst.delta)
    return LowRankState(v, embed_with_ancilla(inst.rhos[x], inst.k, inst.dim_h))


def build_pi_prime(
    inst: TypicalityInstance, x, l_assign: dict | None = None
) -> BlockConstruction:
    """The intersection POVM element; returned with its construction handles."""
    return build_construction(inst, x, l_assign)


def factored_partial_trace(
    space: AugmentedSpace, state: LowRankState, keep_sites
) -> np.ndarray:
    """Dense marginal of a factored state on a subset of augmented sites."""
    keep_sites = sorted(keep_sites)
    dims = [space.site_dim(s) for s in quantum_sites(space.k)]
    cols = state.core_sqrt_cols()
    r = cols.shape[1]
    t = cols.reshape(tuple(dims) + (r,))
    letters = "abcdefghijklmnop"
    subs = "".join(letters[s - 1] for s in quantum_sites(space.k)) + "r"
    out_rows = "".join(letters[s - 1] for s in keep_sites)
    conj_subs = "".join(
        letters[s - 1].upper() if s in keep_sites else letters[s - 1]
        for s in quantum_sites(space.k)
    ) + "r"
    out = np.einsum(f"{subs},{conj_subs}->{out_rows}{out_rows.upper()}", t, t.conj())
    d = int(np.prod([dims[s - 1] for s in keep_sites]))
    return qla.hermitian_part(out.reshape(d, d))


def marginal_block_state(
    inst: TypicalityInstance, block: Block, x_kept, l_block: dict
) -> np.ndarray:
    """The averaged marginal (rho')_{x_S, l_S, delta} on A''_{S cap [k]}.

    Classical coordinates outside the block are averaged with the instance
    weights, ancilla labels outside the block uniformly, and the quantum
    sites outside the block are traced out.
    """
    space = inst.space
    full = classical_coords(inst.c) + quantum_sites(inst.k)
    sbar = [e for e in full if e not in set(block)]
    sites = [e for e in block if e > 0]
    kept_c = tuple(e for e in block if e < 0)
    d = int(np.prod([space.site_dim(s) for s in sites]))
    if d > DENSE_CAP:
        raise ValueError(f"dense marginal of dimension {d} exceeds cap {DENSE_CAP}")
    weights = inst.avg_weights(kept_c, x_kept)
    out = np.zeros((d, d), dtype=complex)
    n_l = inst.dim_l ** len(sbar)
    for x_rest, w in weights.items():
        x_full = inst.merge_word(kept_c, x_kept, x_rest)
        for l_rest in itertools.product(range(inst.dim_l), repeat=len(sbar)):
            l_assign = dict(l_block)
            l_assign.update(dict(zip(sbar, l_rest)))
            st = build_rho_prime(inst, x_full, l_assign)
            out += (w / n_l) * factored_partial_trace(space, st, sites)
    return qla.hermitian_part(out)


def _site_noncross_mask(space: AugmentedSpace, site: int, block: Block) -> np.ndarray:
    """Indicator over A''_site coordinates whose summand stays inside the block.

    A summand label crosses the block when its quantum part leaks outside;
    classical-only leaks stay on the non-crossing side (they feed the small
    Hermitian leak term, not the flat remainder).
    """
    inside = set(e for e in block if e > 0)
    mask = np.zeros(space.site_dim(site), dtype=bool)
    off = 0
    for label in space.site_labels[site]:
        d = space.summand_dim(label)
        quantum_part = set() if label is None else set(e for e in label if e > 0)
        if quantum_part <= inside:
            mask[off : off + d] = True
        off += d
    return mask


@dataclass
class SplitFactor:
    block: Block
    sites: tuple
    rho: np.ndarray
    clean: np.ndarray
    crossing: np.ndarray
    coherence_norm: float
    lead_weight: float
    lead: np.ndarray
    leak: np.ndarray


@dataclass
class SplitDecomposition:
    psp: Psp
    alpha: float
    beta: float
    factors: list
    fill_norm: float
    m_norm: float
    n_norm: float
    n_norm_exact: bool
    checks: list


def split_decompose(
    inst: TypicalityInstance,
    x,
    psp: Psp,
    l_assign: dict | None = None,
    sigma=None,
) -> SplitDecomposition:
    """Three-term decomposition of the split state and its Claim-level checks.

    The flat remainder M is isolated by restricting each factor to the
    sectors whose summand labels leak quantum sites out of the factor's
    block (its support is exactly there, orthogonal to the rest); the leak
    term N then comes out by subtracting the tilted leading term.
    """
    space = inst.space
    if l_assign is None:
        l_assign = zero_labels(inst)
    full = set(classical_coords(inst.c) + quantum_sites(inst.k))
    checks: list = []
    params = {"psp": str(psp), "x": str(x)}
    n_full = normalization(tuple(sorted(full)), inst.delta)

    alpha = 1.0
    alpha_beta = 1.0
    for block in psp:
        sbar_with_c = tuple(sorted((full - set(block)) | set(classical_coords(inst.c))))
        s_with_c = tuple(sorted(set(block) | set(classical_coords(inst.c))))
        alpha *= normalization(block, inst.delta) * normalization(sbar_with_c, inst.delta) / n_full
        alpha_beta *= (
            normalization(s_with_c, inst.delta) * normalization(sbar_with_c, inst.delta) / n_full
        )
    beta = alpha_beta - alpha

    covered_q = [e for b in psp for e in b if e > 0]
    t_sites = [s for s in quantum_sites(inst.k) if s not in covered_q]

    if len(psp) == 1 and set(psp[0]) == full:
        # the single full block: the split state is the smoothed state itself
        constr_state = build_rho_prime(inst, x, l_assign)
        lead = LowRankState(
            global_embed(space, l_assign, inst.delta),
            embed_with_ancilla(inst.split_state(x, psp, sigma), inst.k, inst.dim_h),
        )
        resid = l1_distance_factored(constr_state, lead)
        checks.append(report.AuditCheck("split_identity_residual", resid, 0.0, IDENTITY_TOL, params))
        checks.append(report.AuditCheck("claim5_identity", resid, 0.0, IDENTITY_TOL, params))
        checks.append(report.AuditCheck("split_alpha_is_one", abs(alpha - 1.0), 0.0, 1e-12, params))
        checks.append(report.AuditCheck("split_beta_zero", abs(beta), 0.0, 1e-12, params))
        checks.append(report.AuditCheck("claim2_m_norm", 0.0, 1.0 / inst.dim_l, 0.0, params))
        checks.append(report.AuditCheck("claim2_n_norm", 0.0, 3.0 / np.sqrt(inst.dim_l), 0.0, params))
        return SplitDecomposition(psp, alpha, beta, [], 1.0, 0.0, 0.0, True, checks)

    factors = []
    coords = classical_coords(inst.c)
    for block in psp:
        sites = tuple(e for e in block if e > 0)
        x_kept = tuple(x[coords.index(e)] for e in block if e < 0)
        rho_i = marginal_block_state(inst, block, x_kept, {e: l_assign[e] for e in block})
        nc = _kron_all([_site_noncross_mask(space, s, block).astype(float)[:, None] for s in sites]).ravel() > 0.5
        p_nc = nc.astype(float)
        clean = rho_i * np.outer(p_nc, p_nc)
        crossing = rho_i * np.outer(1.0 - p_nc, 1.0 - p_nc)
        coh = float(np.linalg.norm(rho_i - clean - crossing, 2))

        sbar_with_c = tuple(sorted((full - set(block)) | set(coords)))
        a_i = normalization(block, inst.delta) * normalization(sbar_with_c, inst.delta) / n_full
        rho_bar = inst.averaged_marginal(block, x_kept)
        t_embed = smoothing_embed(space, block, {e: l_assign[e] for e in block}, inst.delta)
        lead = t_embed @ embed_with_ancilla(rho_bar, len(sites), inst.dim_h) @ t_embed.conj().T
        leak = clean - a_i * lead
        factors.append(
            SplitFactor(block, sites, rho_i, clean, crossing, coh, a_i, lead, leak)
        )

    fill_norm = 1.0
    if t_sites:
        fill = inst.quantum_marginal(x, t_sites) if sigma is None else sigma
        fill_norm = float(np.linalg.eigvalsh(fill)[-1])

    coh_max = max(f.coherence_norm for f in factors)
    checks.append(report.AuditCheck("split_sector_coherence", coh_max, 0.0, IDENTITY_TOL, params))
    trace_prod = float(np.prod([np.trace(f.clean).real for f in factors]))
    checks.append(
        report.AuditCheck(
            "split_alpha_beta_trace", abs(trace_prod - alpha_beta), 0.0, IDENTITY_TOL, params
        )
    )
    for f in factors:
        checks.append(
            report.AuditCheck(
                "split_factor_unit_trace", abs(np.trace(f.rho).real - 1.0), 0.0, 1e-9, params
            )
        )
    m_min = min(float(np.linalg.eigvalsh(f.crossing)[0]) for f in factors)
    checks.append(report.AuditCheck("split_m_psd", -m_min, 0.0, 1e-10, params))

    # ||M'||_inf is exact: terms indexed by which factors sit in crossing
    # sectors have mutually orthogonal supports
    c_norms = [float(np.linalg.norm(f.clean, 2)) for f in factors]
    m_norms = [float(np.linalg.norm(f.crossing, 2)) for f in factors]
    m_prime_norm = 0.0
    for pick in itertools.product([0, 1], repeat=len(factors)):
        if not any(pick):
            continue
        term = fill_norm
        for sel, cn, mn in zip(pick, c_norms, m_norms):
            term *= mn if sel else cn
        m_prime_norm = max(m_prime_norm, term)
    m_weight = 1.0 - alpha - beta
    m_norm = m_prime_norm / m_weight if m_weight > 1e-12 else 0.0
    m_trace = 1.0 - trace_prod
    checks.append(
        report.AuditCheck("split_m_trace", abs(m_trace - m_weight), 0.0, IDENTITY_TOL, params)
    )
    checks.append(
        report.AuditCheck("claim2_m_norm", m_norm, 1.0 / inst.dim_l, 1e-12, params)
    )

    # N' = sum over non-empty subsets of factors of leak terms tensored with
    # the leading terms; exact norm when at most one factor actually leaks
    leak_norms = [float(np.linalg.norm(f.leak, 2)) for f in factors]
    lead_norms = [f.lead_weight * float(np.linalg.norm(f.lead, 2)) for f in factors]
    leaky = [i for i, ln in enumerate(leak_norms) if ln > 1e-12]
    if len(leaky) <= 1:
        n_norm = 0.0 if not leaky else leak_norms[leaky[0]] * float(
            np.prod([lead_norms[i] for i in range(len(factors)) if i != leaky[0]])
        ) * fill_norm
        n_exact = True
    else:
        n_norm = 0.0
        for pick in itertools.product([0, 1], repeat=len(factors)):
            if not any(pick):
                continue
            term = fill_norm
            for sel, ln, gn in zip(pick, leak_norms, lead_norms):
                term *= ln if sel else gn
            n_norm += term
        n_exact = False
    n_trace = float(
        np.prod([f.lead_weight + np.trace(f.leak).real for f in factors])
    ) - alpha
    checks.append(report.AuditCheck("split_n_trace", abs(n_trace - beta), 0.0, IDENTITY_TOL, params))
    checks.append(
        report.AuditCheck("claim2_n_norm", n_norm, 3.0 / np.sqrt(inst.dim_l), 1e-12, params)
    )
    if inst.c == 0 or any(set(classical_coords(inst.c)) <= set(b) for b in psp):
        checks.append(report.AuditCheck("split_beta_zero", abs(beta), 0.0, 1e-12, params))
        checks.append(
            report.AuditCheck("split_leak_vanishes", max(leak_norms), 0.0, IDENTITY_TOL, params)
        )
    # roll-up of the identity/orthogonality family for the per-claim report
    identity_residual = max(
        c.lhs for c in checks if c.rhs == 0.0 and c.name.startswith("split_")
    )
    checks.append(
        report.AuditCheck("claim5_identity", identity_residual, 0.0, IDENTITY_TOL, params)
    )
    return SplitDecomposition(
        psp, alpha, beta, factors, fill_norm, m_norm, n_norm, n_exact, checks
    )


def claim4_stated_floor(inst: TypicalityInstance, eps_x: float) -> float:
    """The completeness floor with the stated (astronomically weak) constant."""
    k, c = inst.k, inst.c
    return 1.0 - inst.delta ** (-2 * k) * 2.0 ** (2.0 ** (c * k + 4) * (k + 1) ** k) * eps_x


def audit_construction(constr: BlockConstruction, sigma=None) -> list:
    """Numeric audit of the per-block claims of the smoothing construction."""
    inst = constr.inst
    space = inst.space
    k, c = inst.k, inst.c
    m = (2 * inst.dim_h) ** k
    params = {"x": str(constr.x), "delta": inst.delta, "k": k, "c": c, "L": inst.dim_l}
    checks = []

    rho_prime = constr.rho_prime
    emb = constr.embedded_original
    checks.append(
        report.AuditCheck("state_unit_trace", abs(rho_prime.trace() - 1.0), 0.0, 1e-10, params)
    )
    spec_in = np.sort(np.linalg.eigvalsh(constr.rho_hat))
    spec_out = np.sort(rho_prime.eigenvalues())
    pad = np.zeros(len(spec_out) - len(spec_in))
    checks.append(
        report.AuditCheck(
            "state_isometric_spectrum",
            float(np.max(np.abs(spec_out - np.concatenate([pad, spec_in])))),
            0.0,
            1e-9,
            params,
        )
    )
    checks.append(
        report.AuditCheck("claim1_trace_norm", constr.pi_prime_trace_norm(), float(m), 1e-9, params)
    )
    checks.append(
        report.AuditCheck(
            "claim3_l1_distance",
            l1_distance_factored(rho_prime, emb),
            2.0 ** ((k + c) / 2.0 + 1.0) * inst.delta,
            1e-9,
            params,
        )
    )

    # completeness through the noncommutative union bound, plus the tilted
    # overlap against the generalized tilting upper bound
    y_overlap = constr.y_projector_expectation(emb)
    actual = constr.pi_prime_expectation(emb)
    checks.append(
        report.AuditCheck("completeness_gao_chain", 1.0 - 4.0 * y_overlap, actual, 1e-9, params)
    )
    lattice = inst.lattice
    a_matrix = build_tilting_matrix(lattice, inst.delta)
    w, v = np.linalg.eigh(constr.rho_hat)
    bound = 0.0
    for i in range(len(w)):
        if w[i] <= 1e-14:
            continue
        h = v[:, i]
        eps_vec = np.array(
            [
                float(np.linalg.norm(constr.tests[psp].y_basis.conj().T @ h) ** 2)
                for psp in lattice.linear_ext
            ]
        )
        _, hi = tilting.prop_a_tilted_bounds(eps_vec, a_matrix)
        bound += float(w[i]) * hi
    checks.append(report.AuditCheck("claim4_prop6_chain", y_overlap, bound, 1e-9, params))

    eps_x = sum(constr.tests[psp].eps for psp in lattice.linear_ext)
    stated = claim4_stated_floor(inst, eps_x)
    checks.append(
        report.AuditCheck(
            "claim4_stated_floor",
            stated,
            actual,
            1e-9,
            dict(params, eps_x_nonempty=eps_x, eps_x_including_empty=eps_x),
        )
    )

    for psp in lattice.linear_ext:
        test = constr.tests[psp]
        split = inst.split_state(constr.x, psp, sigma)
        g = LowRankState(
            psp_embed(space, psp, constr.l_assign, inst.delta),
            embed_with_ancilla(split, k, inst.dim_h),
        )
        checks.append(
            report.AuditCheck(
                "claim6_soundness",
                constr.pi_prime_expectation(g),
                test.reject_mass,
                1e-9,
                dict(params, psp=str(psp)),
            )
        )
    return checks


@dataclass
class LemmaResult:
    """Block-diagonal assembly of the intersection lemma plus its audit."""

    inst: TypicalityInstance
    constructions: dict
    checks: list
    soundness: dict

    def all_pass(self) -> bool:
        return report.all_pass(self.checks)


def _cq_split_test(inst: TypicalityInstance, psp: Psp, eps: float, q_x: dict):
    """Optimal cq-level test for the lemma's soundness target at one split."""
    words = inst.words()
    dh = inst.dim_h**inst.k
    n = len(words) * dh
    rho = np.zeros((n, n), dtype=complex)
    target = np.zeros((n, n), dtype=complex)
    for i, x in enumerate(words):
        sl = slice(i * dh, (i + 1) * dh)
        rho[sl, sl] = inst.p_x[x] * inst.rhos[x]
        target[sl, sl] = q_x[x] * inst.split_state(x, psp)
    res = hyptest.quantum_optimal_test(rho, target, eps)
    per_x = {}
    for i, x in enumerate(words):
        sl = slice(i * dh, (i + 1) * dh)
        block = res.test[sl, sl]
        accept = float(np.trace(block @ inst.rhos[x]).real)
        per_x[x] = (qla.hermitian_part(block), 1.0 - accept)
    return res, per_x


def intersection_lemma(inst: TypicalityInstance, q_x: dict | None = None) -> LemmaResult:
    """Assemble the lemma's state and POVM element and audit claims 2 - 4.

    All (x, l) blocks with the same x are unitarily equivalent under
    relabelings of the ancilla alphabet, so each claim is evaluated on the
    all-zero label block; the averages over l equal the per-block values.
    """
    if q_x is None:
        q_x = dict(inst.p_x)
    words = inst.words()
    lattice = inst.lattice
    k, c = inst.k, inst.c
    m = (2 * inst.dim_h) ** inst.k

    # split the per-pseudosubpartition budgets across the classical words by
    # slicing the optimal cq-level test into its x-blocks
    eps_table: dict = {}
    cq_levels: dict = {}
    for psp in lattice.linear_ext:
        if c == 0:
            cq_levels[psp] = None
            continue
        eps_psp = inst.eps_total / len(lattice.linear_ext)
        res, per_x = _cq_split_test(inst, psp, eps_psp, q_x)
        cq_levels[psp] = res
        for x, (_, eps_x) in per_x.items():
            eps_table[(x, psp)] = min(max(eps_x, 0.0), 1.0 - 1e-12)
    if eps_table:
        inst = TypicalityInstance(
            c=inst.c,
            k=inst.k,
            dim_h=inst.dim_h,
            dim_l=inst.dim_l,
            delta=inst.delta,
            rhos=inst.rhos,
            p_x=inst.p_x,
            eps_total=inst.eps_total,
            eps_table=eps_table,
            alphabet=inst.alphabet,
        )

    constructions = {x: build_construction(inst, x) for x in words}
    checks = []
    params = {"k": k, "c": c, "H": inst.dim_h, "L": inst.dim_l, "delta": inst.delta}
    for x in words:
        checks.extend(audit_construction(constructions[x]))

    dist = sum(
        inst.p_x[x]
        * l1_distance_factored(
            constructions[x].rho_prime, constructions[x].embedded_original
        )
        for x in words
    )
    checks.append(
        report.AuditCheck(
            "lemma_claim2_distance", dist, 2.0 ** ((c + k) / 2.0 + 1.0) * inst.delta, 1e-9, params
        )
    )
    completeness = sum(
        inst.p_x[x]
        * constructions[x].pi_prime_expectation(constructions[x].rho_prime)
        for x in words
    )
    eps_sums = {
        psp: sum(inst.p_x[x] * inst.eps_for(x, psp) for x in words)
        for psp in lattice.linear_ext
    }
    floor = (
        1.0
        - inst.delta ** (-2 * k)
        * 2.0 ** (2.0 ** (c * k + 4) * (k + 1) ** k)
        * sum(eps_sums.values())
        - 2.0 ** ((c + k) / 2.0 + 1.0) * inst.delta
    )
    checks.append(
        report.AuditCheck("lemma_claim3_completeness", floor, completeness, 1e-9, params)
    )

    soundness = {}
    for psp in lattice.linear_ext:
        lhs = 0.0
        chain_rhs = 0.0
        for x in words:
            constr = constructions[x]
            dec = split_decompose(inst, x, psp, constr.l_assign)
            checks.extend(dec.checks)
            val = _split_expectation(inst, constr, psp, dec)
            lhs += q_x[x] * val
            pi_trace = constr.pi_prime_trace_norm()
            chain_rhs += q_x[x] * (
                dec.alpha * constr.tests[psp].reject_mass
                + pi_trace * dec.n_norm
                + (1.0 - dec.alpha - dec.beta) * pi_trace * dec.m_norm
            )
        if c == 0:
            dh_reject = constructions[words[0]].tests[psp].reject_mass
        else:
            dh_reject = cq_levels[psp].reject_mass
        rhs = max(dh_reject, 3.0 * m / np.sqrt(inst.dim_l))
        soundness[psp] = {"lhs": lhs, "dh_reject": dh_reject, "chain_rhs": chain_rhs}
        checks.append(
            report.AuditCheck(
                "lemma_claim4_soundness", lhs, rhs, 1e-9, dict(params, psp=str(psp))
            )
        )
        checks.append(
            report.AuditCheck(
                "lemma_claim4_chain", lhs, chain_rhs, 1e-9, dict(params, psp=str(psp))
            )
        )
    return LemmaResult(inst, constructions, checks, soundness)


def _split_expectation(
    inst: TypicalityInstance, constr: BlockConstruction, psp: Psp, dec: SplitDecomposition
) -> float:
    """Tr[Pi' rho'_split] for one block, via per-factor application."""
    space = inst.space
    if len(psp) == 1 and set(psp[0]) == set(
        classical_coords(inst.c) + quantum_sites(inst.k)
    ):
        state = LowRankState(
            global_embed(space, constr.l_assign, inst.delta),
            embed_with_ancilla(inst.split_state(constr.x, psp), inst.k, inst.dim_h),
        )
        return constr.pi_prime_expectation(state)
    factors = [(f.sites, f.rho) for f in dec.factors]
    covered = [s for f in dec.factors for s in f.sites]
    t_sites = [s for s in quantum_sites(inst.k) if s not in covered]
    if t_sites:
        fill = inst.quantum_marginal(constr.x, t_sites)
        e_t = space.sites_base_embed(t_sites)
        fill_emb = e_t @ embed_with_ancilla(fill, len(t_sites), inst.dim_h) @ e_t.conj().T
        factors.append((tuple(t_sites), fill_emb))
    applied = apply_site_factors(space, factors, constr.b_factor)
    return float(np.trace(constr.b_factor.conj().T @ applied).real)


@dataclass
class UnionResult:
    """Union-of-intersections POVM over several constructions, with audit."""

    layout: tilting.TiltedLayout
    union_proj: np.ndarray
    dilated: list
    constructions: list
    checks: list

    def all_pass(self) -> bool:
        return report.all_pass(self.checks)


def union_of_intersections(
    instances: list, alpha: float, l_assign: dict | None = None
) -> UnionResult:
    """Tilted-span union of the per-instance intersection POVM elements.

    Each instance's Pi' block is dilated to a projector on A'' x C^2, then
    the projectors are tilted along t private directions; completeness drops
    by at most alpha per instance and acceptance of any embedded state is at
    most (1-alpha)/alpha times the sum of the individual acceptances.
    """
    first = instances[0]
    for inst in instances[1:]:
        if (inst.c, inst.k, inst.dim_h, inst.dim_l) != (
            first.c,
            first.k,
            first.dim_h,
            first.dim_l,
        ):
            raise ValueError("instances must share (c, k, |H|, |L|)")
    if first.c != 0:
        raise ValueError("the union audit covers instances without classical words")
    n = first.space.total_dim()
    if 2 * n * (len(instances) + 1) > DENSE_CAP * 4:
        raise ValueError("union construction exceeds the dense dimension cap")

    constructions = [build_construction(inst, (), l_assign) for inst in instances]
    dilated = []
    for constr in constructions:
        pi_dense = constr.b_factor @ constr.b_factor.conj().T
        dilated.append(hyptest.dilate_povm(pi_dense))
    union_proj, layout = tilting.union_projector(dilated, alpha)
    base = tilting.embed_base(layout)

    def embed_state(state: LowRankState) -> LowRankState:
        # A'' state -> tensor |0><0| ancilla -> base summand of the tilted space
        cols = state.core_sqrt_cols()
        lifted = np.zeros((2 * n, cols.shape[1]), dtype=complex)
        lifted[0::2, :] = cols
        return LowRankState(base @ lifted, np.eye(cols.shape[1], dtype=complex))

    checks = []
    params = {"t": len(instances), "alpha": alpha}
    for i, constr in enumerate(constructions):
        inner = constr.pi_prime_expectation(constr.rho_prime)
        lifted = embed_state(constr.rho_prime)
        outer = povm_expectation(tilting.span_basis(union_proj), lifted)
        checks.append(
            report.AuditCheck(
                "union_completeness_drop", inner - outer, alpha, 1e-9, dict(params, i=i)
            )
        )
        if len(instances) == 1:
            checks.append(
                report.AuditCheck(
                    "union_single_reduces",
                    abs(outer - (1 - alpha) * inner),
                    0.0,
                    1e-9,
                    params,
                )
            )
    for i, inst in enumerate(instances):
        constr = constructions[i]
        for psp in inst.lattice.linear_ext:
            split = LowRankState(
                psp_embed(inst.space, psp, constr.l_assign, inst.delta),
                embed_with_ancilla(inst.split_state((), psp), inst.k, inst.dim_h),
            )
            lifted = embed_state(split)
            lhs = povm_expectation(tilting.span_basis(union_proj), lifted)
            # acceptance of the dilated blocks on the (A'' x C^2)-level state
            cols = split.core_sqrt_cols()
            lifted_cols = np.zeros((2 * n, cols.shape[1]), dtype=complex)
            lifted_cols[0::2, :] = cols
            per_inst = sum(
                float(np.linalg.norm(tilting.span_basis(d).conj().T @ lifted_cols) ** 2)
                for d in dilated
            )
            rhs = (1 - alpha) / alpha * per_inst
            checks.append(
                report.AuditCheck(
                    "union_soundness_prefactor", lhs, rhs, 1e-9, dict(params, i=i, psp=str(psp))
                )
            )
    return UnionResult(layout, union_proj, dilated, constructions, checks)
