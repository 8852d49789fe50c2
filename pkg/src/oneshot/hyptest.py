"""Exact optimal hypothesis tests and one-shot entropic quantities.

All entropies are base-2 (rates in bits).  The classical solver is a greedy
likelihood-ratio test with a fractional boundary outcome; the quantum solver
is the Neyman-Pearson construction with a bisection over the trade-off
parameter and a fractional weight on the zero-crossing eigenvalue cluster.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import qla

ACCEPT_TOL = 1e-9
CLUSTER_GAP = 1e-9
BISECT_WIDTH = 1e-12
BISECT_ITERS = 200


@dataclass(frozen=True)
class HypTestResult:
    """Optimal test for one hypothesis-testing relative entropy instance.

    value_bits is -log2 of the acceptance of the alternate hypothesis
    (math.inf when that mass is exactly zero); test is the optimizer, a
    vector over the sample space classically or a POVM element quantumly.
    """

    value_bits: float
    test: np.ndarray
    accept_prob: float
    reject_mass: float

    def __post_init__(self):
        if self.accept_prob < -1e-12 or self.accept_prob > 1 + 1e-9:
            raise ValueError(f"accept_prob {self.accept_prob} outside [0, 1]")
        if self.reject_mass > 0:
            dev = abs(self.value_bits + np.log2(self.reject_mass))
            if dev > ACCEPT_TOL:
                raise ValueError(f"value_bits inconsistent with reject_mass ({dev:.2e})")


def _result(test: np.ndarray, accept: float, reject: float) -> HypTestResult:
    reject = max(float(reject), 0.0)
    value = float("inf") if reject == 0.0 else float(-np.log2(reject))
    return HypTestResult(value_bits=value, test=test, accept_prob=float(accept), reject_mass=reject)


def dh_classical(p: np.ndarray, q: np.ndarray, eps: float) -> HypTestResult:
    """Exact classical hypothesis testing relative entropy D_H^eps(p || q).

    Outcomes are accepted greedily by likelihood ratio p/q descending (q = 0,
    p > 0 outcomes first); the boundary outcome is accepted fractionally so
    the acceptance of p equals 1 - eps exactly.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape or p.ndim != 1:
        raise ValueError("p and q must be vectors on the same sample space")
    if np.any(p < -1e-12) or np.any(q < -1e-12):
        raise ValueError("negative probabilities")
    if abs(p.sum() - 1.0) > 1e-10 or abs(q.sum() - 1.0) > 1e-10:
        raise ValueError("p and q must each sum to 1")
    if not 0 <= eps < 1:
        raise ValueError("eps must be in [0, 1)")

    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(q > 0, p / np.where(q > 0, q, 1.0), np.where(p > 0, np.inf, 0.0))
    order = np.argsort(-ratio, kind="stable")

    f = np.zeros_like(p)
    target = 1.0 - eps
    cum = 0.0
    for i in order:
        if p[i] <= 0.0:
            continue
        if cum + p[i] < target:
            f[i] = 1.0
            cum += p[i]
        else:
            f[i] = (target - cum) / p[i]
            cum = target
            break
    accept = float(np.dot(f, p))
    reject = float(np.dot(f, q))
    return _result(f, accept, reject)


def _np_split(rho: np.ndarray, sigma: np.ndarray, lam: float):
    """Strictly-positive spectral projector of rho - lam*sigma plus the zero cluster."""
    w, v = np.linalg.eigh(qla.hermitian_part(rho - lam * sigma))
    pos = w > CLUSTER_GAP
    zero = np.abs(w) <= CLUSTER_GAP
    vp = v[:, pos]
    vz = v[:, zero]
    return vp @ vp.conj().T, vz @ vz.conj().T


def quantum_optimal_test(rho: np.ndarray, sigma: np.ndarray, eps: float) -> HypTestResult:
    """Exact quantum D_H^eps(rho || sigma) via the Neyman-Pearson family.

    Pi(lam) is the projector onto the strictly-positive eigenspace of
    rho - lam*sigma plus a fractional multiple of the zero-crossing cluster;
    lam is found by bisection so Tr[Pi rho] = 1 - eps within 1e-9.  Optimal
    among all operators 0 <= Pi <= 1.
    """
    rho = np.asarray(rho, dtype=complex)
    sigma = np.asarray(sigma, dtype=complex)
    if rho.shape != sigma.shape:
        raise ValueError("rho and sigma must have the same dimension")
    if not 0 <= eps < 1:
        raise ValueError("eps must be in [0, 1)")
    target = 1.0 - eps

    sw = np.linalg.eigvalsh(qla.hermitian_part(sigma))
    sig_supp = sw[sw > max(1e-12, 1e-12 * max(sw[-1], 0.0))]
    sig_min = float(sig_supp[0]) if sig_supp.size else 1.0
    rho_inf = float(np.linalg.eigvalsh(qla.hermitian_part(rho))[-1])
    lam_max = rho_inf / sig_min + 1.0

    def accept_strict(lam: float) -> float:
        pos, _ = _np_split(rho, sigma, lam)
        return float(np.trace(pos @ rho).real)

    if accept_strict(lam_max) >= target:
        # sigma-support cannot absorb the constraint (e.g. partly orthogonal
        # supports with eps = 0); the limiting test lives at lam_max
        lam = lam_max
    else:
        lo, hi = 0.0, lam_max
        for _ in range(BISECT_ITERS):
            if hi - lo < BISECT_WIDTH:
                break
            mid = (lo + hi) / 2.0
            if accept_strict(mid) >= target:
                lo = mid
            else:
                hi = mid
        lam = hi

    pos, zero = _np_split(rho, sigma, lam)
    a_pos = float(np.trace(pos @ rho).real)
    a_zero = float(np.trace(zero @ rho).real)
    if a_zero > 1e-15:
        t = min(max((target - a_pos) / a_zero, 0.0), 1.0)
    else:
        t = 0.0
    pi = qla.hermitian_part(pos + t * zero)
    accept = float(np.trace(pi @ rho).real)
    if accept < target - ACCEPT_TOL:
        raise ValueError(f"acceptance {accept} fell short of {target} (degenerate inputs)")
    reject = float(np.trace(pi @ sigma).real)
    return _result(pi, accept, reject)


def ih_mutual(rho_ab: np.ndarray, dims: tuple[int, int], eps: float) -> float:
    """Hypothesis testing mutual information D_H^eps(rho_AB || rho_A x rho_B)."""
    da, db = int(dims[0]), int(dims[1])
    rho_a = qla.partial_trace(rho_ab, (da, db), keep=[0])
    rho_b = qla.partial_trace(rho_ab, (da, db), keep=[1])
    return quantum_optimal_test(rho_ab, np.kron(rho_a, rho_b), eps).value_bits


def ih_mutual_bound(da: int, db: int, eps: float) -> float:
    """Dimension bound on the hypothesis testing mutual information."""
    return (
        2.0 * np.log2(min(da, db))
        + 3.0 * np.log2(1.0 / (1.0 - eps))
        + 6.0 * np.log2(3.0)
        - 4.0
    )


def intersect_tests(fs: list[np.ndarray]) -> np.ndarray:
    """Pointwise minimum of classical tests on a common sample space."""
    fs = [np.asarray(f, dtype=float) for f in fs]
    if len({f.shape for f in fs}) != 1:
        raise ValueError("tests live on different sample spaces")
    return np.minimum.reduce(fs)


def union_tests(fs: list[np.ndarray]) -> np.ndarray:
    """Pointwise maximum of classical tests on a common sample space."""
    fs = [np.asarray(f, dtype=float) for f in fs]
    if len({f.shape for f in fs}) != 1:
        raise ValueError("tests live on different sample spaces")
    return np.maximum.reduce(fs)


def classical_jtl(
    ps: list[np.ndarray], qs: list[np.ndarray], eps: np.ndarray
) -> np.ndarray:
    """Classical joint typicality test: union over i of intersections over j.

    The returned test f satisfies sum_x p_i(x) f(x) >= 1 - sum_j eps[i, j] and
    sum_x q_j(x) f(x) <= sum_i 2^(-D_H^{eps[i,j]}(p_i || q_j)).
    """
    eps = np.asarray(eps, dtype=float)
    if eps.shape != (len(ps), len(qs)):
        raise ValueError("eps must be a t x l matrix")
    rows = []
    for i, p in enumerate(ps):
        tests = [dh_classical(p, q, eps[i, j]).test for j, q in enumerate(qs)]
        rows.append(intersect_tests(tests))
    return union_tests(rows)


def dilate_povm(pi: np.ndarray) -> np.ndarray:
    """Gelfand-Naimark dilation of a POVM element to a projector on H x C^2.

    For each eigenpair (mu, v) of pi the range gains
    sqrt(mu) v|0> + sqrt(1-mu) v|1>, so Tr[Pi' (A x |0><0|)] = Tr[pi A]
    exactly for every operator A.
    """
    pi = np.asarray(pi, dtype=complex)
    w, v = np.linalg.eigh(qla.hermitian_part(pi))
    if w[0] < -qla.PSD_TOL or w[-1] > 1 + qla.PSD_TOL:
        raise ValueError("input is not a POVM element")
    w = np.clip(w, 0.0, 1.0)
    d = pi.shape[0]
    basis = np.zeros((2 * d, d), dtype=complex)
    # coordinates ordered (h, ancilla) row-major: index 2*i is v_i|0>, 2*i+1 is v_i|1>
    basis[0::2, :] = np.sqrt(w)[None, :] * v
    basis[1::2, :] = np.sqrt(1.0 - w)[None, :] * v
    return qla.hermitian_part(basis @ basis.conj().T)
