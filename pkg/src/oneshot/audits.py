"""Randomized audit suites for the inequality guarantees.

Each suite draws seeded instances, evaluates both sides of the target
inequalities exactly, and returns AuditCheck records whose params name the
instance seed, so any failure message alone reproduces the instance.
"""

from __future__ import annotations

import numpy as np

from . import hyptest, mac, report, tilting, typicality
from .rand import (
    random_density,
    random_distribution,
    random_povm_element,
    random_projector,
    random_pure,
    rng_from_seed,
)


def random_tilting_matrix(rng, l: int, diag_min=0.05, diag_max=0.9) -> tilting.TiltingMatrix:
    """Random upper triangular, row-dominated, substochastic tilt weights."""
    d = rng.uniform(diag_min, diag_max, size=l)
    a = np.zeros((l, l))
    for j in range(l):
        a[j, j] = d[j]
        if j > 0:
            off = d[:j] * rng.random(j)
            budget = 1.0 - d[j]
            total = off.sum()
            if total > budget:
                off *= budget / max(total, 1e-12) * rng.random()
            a[:j, j] = off
    return tilting.TiltingMatrix(a)


def audit_tilting(trials: int = 1000, seed: int = 0, dim_max: int = 8, l_max: int = 4) -> list:
    """Tilted-span sandwich on random subspace families and probe vectors."""
    checks = []
    alphas_pool = (0.1, 0.3, 0.5, 0.9)
    for t in range(trials):
        rng = rng_from_seed(seed * 1_000_003 + t)
        d = int(rng.integers(2, dim_max + 1))
        l = int(rng.integers(1, l_max + 1))
        alpha = float(alphas_pool[int(rng.integers(len(alphas_pool)))])
        ws = [random_projector(rng, d, int(rng.integers(1, d + 1))) for _ in range(l)]
        h = random_pure(rng, d)
        lay = tilting.TiltedLayout(d, l)
        span = tilting.tilted_span(ws, [alpha] * l, lay)
        got = float(np.linalg.norm(span @ (tilting.embed_base(lay) @ h)) ** 2)
        eps = np.array([float(np.linalg.norm(w @ h) ** 2) for w in ws])
        lo, hi = tilting.prop_tilted_bounds(eps, np.full(l, alpha))
        params = {"seed": seed, "trial": t, "d": d, "l": l, "alpha": alpha}
        checks.append(report.AuditCheck("tilted_span_lower", lo, got, 1e-9, params))
        checks.append(report.AuditCheck("tilted_span_upper", got, hi, 1e-9, params))
    return checks


def audit_a_tilting(trials: int = 500, seed: int = 0, dim_max: int = 8, l_max: int = 4) -> list:
    """Generalized tilted-span sandwich with random valid tilting matrices."""
    checks = []
    for t in range(trials):
        rng = rng_from_seed(seed * 1_000_033 + t)
        d = int(rng.integers(2, dim_max + 1))
        l = int(rng.integers(1, l_max + 1))
        a = random_tilting_matrix(rng, l)
        ws = [random_projector(rng, d, int(rng.integers(1, d + 1))) for _ in range(l)]
        h = random_pure(rng, d)
        lay = tilting.TiltedLayout(d, l)
        span = tilting.a_tilted_span(ws, a, lay)
        got = float(np.linalg.norm(span @ (tilting.embed_base(lay) @ h)) ** 2)
        eps = np.array([float(np.linalg.norm(w @ h) ** 2) for w in ws])
        lo, hi = tilting.prop_a_tilted_bounds(eps, a)
        params = {"seed": seed, "trial": t, "d": d, "l": l}
        checks.append(report.AuditCheck("a_tilted_span_lower", lo, got, 1e-9, params))
        checks.append(report.AuditCheck("a_tilted_span_upper", got, hi, 1e-9, params))
    return checks


def audit_gao(trials: int = 200, seed: int = 0, dim_max: int = 6, k_max: int = 4) -> list:
    """Noncommutative union bound slack on random projector chains."""
    checks = []
    for t in range(trials):
        rng = rng_from_seed(seed * 1_000_081 + t)
        d = int(rng.integers(2, dim_max + 1))
        k = int(rng.integers(1, k_max + 1))
        projs = [random_projector(rng, d, int(rng.integers(1, d + 1))) for _ in range(k)]
        rho = random_density(rng, d)
        slack = tilting.gao_slack(projs, rho)
        checks.append(
            report.AuditCheck(
                "gao_union_bound",
                0.0,
                slack,
                1e-9,
                {"seed": seed, "trial": t, "d": d, "k": k},
            )
        )
    return checks


def audit_hn(trials: int = 200, seed: int = 0, dim_max: int = 6) -> list:
    """Hayashi-Nagaoka operator inequality slack on random pairs."""
    checks = []
    for t in range(trials):
        rng = rng_from_seed(seed * 1_000_099 + t)
        d = int(rng.integers(2, dim_max + 1))
        s = random_povm_element(rng, d)
        tt = random_density(rng, d) * float(rng.uniform(0.0, 3.0))
        slack = mac.hayashi_nagaoka_slack(s, tt)
        checks.append(
            report.AuditCheck(
                "hayashi_nagaoka", 0.0, slack, 1e-9, {"seed": seed, "trial": t, "d": d}
            )
        )
    return checks


def audit_dh(
    commuting_pairs: int = 200,
    bipartite_states: int = 100,
    optimality_instances: int = 50,
    candidates: int = 2000,
    seed: int = 0,
) -> list:
    """Hypothesis-testing entropy: classical agreement, self-distance, bounds."""
    checks = []
    for t in range(commuting_pairs):
        rng = rng_from_seed(seed * 2_000_003 + t)
        n = int(rng.integers(2, 7))
        p = random_distribution(rng, n)
        q = random_distribution(rng, n)
        eps = float(rng.uniform(0.02, 0.95))
        vq = hyptest.quantum_optimal_test(np.diag(p), np.diag(q), eps).value_bits
        vc = hyptest.dh_classical(p, q, eps).value_bits
        checks.append(
            report.AuditCheck(
                "dh_commuting_agreement",
                abs(vq - vc),
                0.0,
                1e-8,
                {"seed": seed, "trial": t, "n": n, "eps": eps},
            )
        )
    rng = rng_from_seed(seed * 2_000_029)
    rho = random_density(rng, 4)
    for i, eps in enumerate(np.arange(0.1, 0.95, 0.1)):
        v = hyptest.quantum_optimal_test(rho, rho, float(eps)).value_bits
        checks.append(
            report.AuditCheck(
                "dh_self_distance",
                abs(v + np.log2(1 - eps)),
                0.0,
                1e-9,
                {"seed": seed, "eps": round(float(eps), 3)},
            )
        )
    for t in range(bipartite_states):
        rng = rng_from_seed(seed * 2_000_039 + t)
        da = int(rng.integers(2, 4))
        db = int(rng.integers(2, 6))
        rho = random_density(rng, da * db)
        eps = float((0.1, 0.5, 0.9)[t % 3])
        v = hyptest.ih_mutual(rho, (da, db), eps)
        checks.append(
            report.AuditCheck(
                "ih_dimension_bound",
                v,
                hyptest.ih_mutual_bound(da, db, eps),
                1e-9,
                {"seed": seed, "trial": t, "da": da, "db": db, "eps": eps},
            )
        )
    for t in range(optimality_instances):
        rng = rng_from_seed(seed * 2_000_057 + t)
        d = int(rng.integers(2, 5))
        rho = random_density(rng, d)
        sigma = random_density(rng, d)
        eps = float(rng.uniform(0.05, 0.8))
        res = hyptest.quantum_optimal_test(rho, sigma, eps)
        best = np.inf
        for _ in range(candidates):
            cand = random_povm_element(rng, d)
            acc = float(np.trace(cand @ rho).real)
            if acc < 1e-9:
                continue
            if acc < 1 - eps:
                scale = (1 - eps) / acc
                if scale * float(np.linalg.eigvalsh(cand)[-1]) > 1.0:
                    continue
                cand = cand * scale
            best = min(best, float(np.trace(cand @ sigma).real))
        checks.append(
            report.AuditCheck(
                "dh_optimality",
                res.reject_mass,
                best,
                1e-9,
                {"seed": seed, "trial": t, "d": d, "eps": eps},
            )
        )
    return checks


def random_instance(
    seed: int, c: int, k: int, dim_h: int, dim_l: int, delta: float, eps: float
) -> typicality.TypicalityInstance:
    rng = rng_from_seed(seed)
    if c == 0:
        rhos = {(): random_density(rng, dim_h**k)}
        p_x = {(): 1.0}
    else:
        import itertools

        words = list(itertools.product(range(2), repeat=c))
        p = rng.random(len(words)) + 0.2
        p /= p.sum()
        rhos = {w: random_density(rng, dim_h**k) for w in words}
        p_x = {w: float(v) for w, v in zip(words, p)}
    return typicality.TypicalityInstance(
        c=c, k=k, dim_h=dim_h, dim_l=dim_l, delta=delta, rhos=rhos, p_x=p_x,
        eps_total=eps, alphabet=1 if c == 0 else 2,
    )


def audit_typicality(
    n_states: int = 20,
    seed: int = 0,
    c: int = 0,
    k: int = 2,
    dim_h: int = 2,
    dim_l: int = 4,
    deltas=(0.2, 0.4),
    eps: float = 0.2,
) -> list:
    """Full smoothing-construction audit over random states and deltas."""
    checks = []
    for t in range(n_states):
        for delta in deltas:
            inst = random_instance(seed * 3_000_017 + t, c, k, dim_h, dim_l, float(delta), eps)
            res = typicality.intersection_lemma(inst)
            for chk in res.checks:
                checks.append(
                    report.AuditCheck(
                        chk.name,
                        chk.lhs,
                        chk.rhs,
                        chk.tol,
                        dict(chk.params, seed=seed, trial=t, delta=float(delta)),
                    )
                )
    return checks


SUITES = {
    "tilting": lambda trials, seed: audit_tilting(trials, seed)
    + audit_a_tilting(max(1, trials // 2), seed),
    "gao": lambda trials, seed: audit_gao(trials, seed),
    "hn": lambda trials, seed: audit_hn(trials, seed),
    "dh": lambda trials, seed: audit_dh(
        commuting_pairs=trials, bipartite_states=max(1, trials // 2), seed=seed
    ),
}
