import numpy as np
import numpy.testing as npt
import pytest

from oneshot import hyptest, qla
from oneshot.rand import (
    haar_isometry,
    random_density,
    random_distribution,
    random_povm_element,
    rng_from_seed,
)


def lattice_oracle(p, q, eps, steps=1000):
    """Brute-force D_H over all tests with entries on a 1/steps lattice."""
    grid = np.linspace(0.0, 1.0, steps + 1)
    best = -np.inf
    f0, f1 = np.meshgrid(grid, grid, indexing="ij")
    accept = f0 * p[0] + f1 * p[1]
    reject = f0 * q[0] + f1 * q[1]
    ok = accept >= 1 - eps - 1e-12
    vals = np.where(ok & (reject > 0), -np.log2(np.where(reject > 0, reject, 1.0)), -np.inf)
    best = vals.max()
    return best


class TestDhClassical:
    def test_forced_by_eps_zero(self):
        res = hyptest.dh_classical(np.array([1.0, 0.0]), np.array([0.5, 0.5]), 0.0)
        assert res.value_bits == pytest.approx(1.0, abs=1e-12)
        npt.assert_allclose(res.test, [1.0, 0.0])
        assert res.accept_prob == pytest.approx(1.0)

    @pytest.mark.parametrize("eps", [0.1, 0.25, 0.5, 0.9])
    def test_equal_distributions(self, eps):
        p = np.array([0.3, 0.2, 0.5])
        res = hyptest.dh_classical(p, p, eps)
        assert res.value_bits == pytest.approx(-np.log2(1 - eps), abs=1e-12)
        assert res.accept_prob == pytest.approx(1 - eps, abs=1e-12)

    def test_matches_lattice_oracle(self):
        p = np.array([0.7, 0.3])
        q = np.array([0.2, 0.8])
        res = hyptest.dh_classical(p, q, 0.1)
        # greedy: accept outcome 0 fully, outcome 1 with weight 2/3
        assert res.value_bits == pytest.approx(-np.log2(0.2 + (2 / 3) * 0.8), abs=1e-12)
        oracle = lattice_oracle(p, q, 0.1)
        assert abs(res.value_bits - oracle) < 0.01

    def test_monotone_in_eps(self):
        rng = rng_from_seed(21)
        for _ in range(100):
            n = int(rng.integers(2, 6))
            p = random_distribution(rng, n)
            q = random_distribution(rng, n)
            e1, e2 = sorted(rng.random(2) * 0.95)
            v1 = hyptest.dh_classical(p, q, e1).value_bits
            v2 = hyptest.dh_classical(p, q, e2).value_bits
            assert v1 <= v2 + 1e-12

    def test_orthogonal_supports_inf(self):
        res = hyptest.dh_classical(np.array([1.0, 0.0]), np.array([0.0, 1.0]), 0.0)
        assert res.value_bits == np.inf
        assert res.reject_mass == 0.0

    def test_input_validation(self):
        with pytest.raises(ValueError):
            hyptest.dh_classical(np.array([0.5, 0.5]), np.array([0.5, 0.5]), 1.0)
        with pytest.raises(ValueError):
            hyptest.dh_classical(np.array([1.5, -0.5]), np.array([0.5, 0.5]), 0.1)


class TestQuantumOptimalTest:
    def test_equal_states(self):
        rng = rng_from_seed(22)
        rho = random_density(rng, 3)
        res = hyptest.quantum_optimal_test(rho, rho, 0.5)
        assert res.value_bits == pytest.approx(1.0, abs=1e-9)
        assert res.accept_prob == pytest.approx(0.5, abs=1e-9)

    def test_commuting_matches_classical(self):
        rng = rng_from_seed(23)
        for _ in range(25):
            n = int(rng.integers(2, 6))
            p = random_distribution(rng, n)
            q = random_distribution(rng, n)
            eps = float(rng.uniform(0.05, 0.9))
            vq = hyptest.quantum_optimal_test(np.diag(p), np.diag(q), eps).value_bits
            vc = hyptest.dh_classical(p, q, eps).value_bits
            assert vq == pytest.approx(vc, abs=1e-8)

    def test_isometric_invariance(self):
        rng = rng_from_seed(24)
        for _ in range(10):
            rho = random_density(rng, 3)
            sigma = random_density(rng, 3)
            eps = float(rng.uniform(0.1, 0.8))
            v = haar_isometry(rng, 5, 3)
            base = hyptest.quantum_optimal_test(rho, sigma, eps).value_bits
            lifted = hyptest.quantum_optimal_test(
                v @ rho @ v.conj().T, v @ sigma @ v.conj().T, eps
            ).value_bits
            assert lifted == pytest.approx(base, abs=1e-9)

    def test_optimal_among_random_candidates(self):
        rng = rng_from_seed(25)
        for _ in range(10):
            d = int(rng.integers(2, 5))
            rho = random_density(rng, d)
            sigma = random_density(rng, d)
            eps = float(rng.uniform(0.1, 0.7))
            res = hyptest.quantum_optimal_test(rho, sigma, eps)
            for _ in range(300):
                cand = random_povm_element(rng, d)
                acc = float(np.trace(cand @ rho).real)
                if acc < 1e-9:
                    continue
                if acc < 1 - eps:
                    scale = (1 - eps) / acc
                    if scale * float(np.linalg.eigvalsh(cand)[-1]) > 1.0:
                        continue
                    cand = cand * scale
                rej = float(np.trace(cand @ sigma).real)
                assert rej >= res.reject_mass - 1e-9

    def test_result_is_povm(self):
        rng = rng_from_seed(26)
        rho = random_density(rng, 4)
        sigma = random_density(rng, 4)
        res = hyptest.quantum_optimal_test(rho, sigma, 0.3)
        qla.povm_element(res.test)
        assert res.accept_prob >= 1 - 0.3 - 1e-9


class TestIhMutual:
    def test_product_state(self):
        rng = rng_from_seed(27)
        rho = np.kron(random_density(rng, 2), random_density(rng, 3))
        v = hyptest.ih_mutual(rho, (2, 3), 0.3)
        assert v == pytest.approx(-np.log2(0.7), abs=1e-9)

    def test_bell_bound(self):
        bell = np.zeros(4, dtype=complex)
        bell[0] = bell[3] = 1 / np.sqrt(2)
        rho = np.outer(bell, bell.conj())
        v = hyptest.ih_mutual(rho, (2, 2), 0.25)
        bound = 2 * np.log2(2) + 3 * np.log2(4 / 3) + 6 * np.log2(3) - 4
        assert v <= bound
        assert hyptest.ih_mutual_bound(2, 2, 0.25) == pytest.approx(bound, abs=1e-12)

    def test_classical_pair_matches_dh(self):
        rng = rng_from_seed(28)
        pxy = random_distribution(rng, 6).reshape(2, 3)
        rho = np.diag(pxy.ravel()).astype(complex)
        v = hyptest.ih_mutual(rho, (2, 3), 0.2)
        prod = np.outer(pxy.sum(axis=1), pxy.sum(axis=0)).ravel()
        vc = hyptest.dh_classical(pxy.ravel(), prod, 0.2).value_bits
        assert v == pytest.approx(vc, abs=1e-8)

    def test_prop2_bound_random(self):
        rng = rng_from_seed(29)
        for _ in range(20):
            da, db = int(rng.integers(2, 4)), int(rng.integers(2, 6))
            rho = random_density(rng, da * db)
            for eps in (0.1, 0.5, 0.9):
                v = hyptest.ih_mutual(rho, (da, db), eps)
                assert v <= hyptest.ih_mutual_bound(da, db, eps) + 1e-9


class TestCombinators:
    def test_intersect_with_ones(self):
        f = np.array([0.2, 0.7, 1.0])
        npt.assert_allclose(hyptest.intersect_tests([f, np.ones(3)]), f)

    def test_union_with_zeros(self):
        f = np.array([0.2, 0.7, 1.0])
        npt.assert_allclose(hyptest.union_tests([f, np.zeros(3)]), f)

    def test_intersection_acceptance_bound(self):
        rng = rng_from_seed(30)
        for _ in range(50):
            fs = [rng.random(5) for _ in range(3)]
            p = random_distribution(rng, 5)
            inter = hyptest.intersect_tests(fs)
            assert np.dot(inter, p) <= min(np.dot(f, p) for f in fs) + 1e-12

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            hyptest.intersect_tests([np.ones(3), np.ones(4)])


class TestClassicalJtl:
    def test_single_pair_reduces(self):
        rng = rng_from_seed(31)
        p = random_distribution(rng, 4)
        q = random_distribution(rng, 4)
        f = hyptest.classical_jtl([p], [q], np.array([[0.2]]))
        npt.assert_allclose(f, hyptest.dh_classical(p, q, 0.2).test, atol=1e-12)

    def test_one_by_three_guarantees(self):
        rng = rng_from_seed(32)
        p = random_distribution(rng, 4)
        qs = [random_distribution(rng, 4) for _ in range(3)]
        eps = np.array([[0.1, 0.2, 0.15]])
        f = hyptest.classical_jtl([p], qs, eps)
        assert np.dot(f, p) >= 1 - eps.sum() - 1e-12
        for j, q in enumerate(qs):
            bound = 2.0 ** (-hyptest.dh_classical(p, q, eps[0, j]).value_bits)
            assert np.dot(f, q) <= bound + 1e-12

    def test_two_by_two_random(self):
        rng = rng_from_seed(33)
        for _ in range(100):
            n = int(rng.integers(2, 6))
            ps = [random_distribution(rng, n) for _ in range(2)]
            qs = [random_distribution(rng, n) for _ in range(2)]
            eps = rng.uniform(0.05, 0.4, size=(2, 2))
            f = hyptest.classical_jtl(ps, qs, eps)
            for i, p in enumerate(ps):
                assert np.dot(f, p) >= 1 - eps[i].sum() - 1e-12
            for j, q in enumerate(qs):
                bound = sum(
                    2.0 ** (-hyptest.dh_classical(ps[i], q, eps[i, j]).value_bits)
                    for i in range(2)
                )
                assert np.dot(f, q) <= bound + 1e-12


class TestDilatePovm:
    def test_projector_input(self):
        rng = rng_from_seed(34)
        v = haar_isometry(rng, 4, 2)
        p = v @ v.conj().T
        dil = hyptest.dilate_povm(p)
        qla.projector(dil)
        a = random_density(rng, 4)
        lhs = np.trace(dil @ np.kron(a, np.diag([1.0, 0.0]))).real
        npt.assert_allclose(lhs, np.trace(p @ a).real, atol=1e-10)

    def test_half_identity(self):
        rng = rng_from_seed(35)
        dil = hyptest.dilate_povm(0.5 * np.eye(2))
        for _ in range(5):
            rho = random_density(rng, 2)
            val = np.trace(dil @ np.kron(rho, np.diag([1.0, 0.0]))).real
            assert val == pytest.approx(0.5, abs=1e-10)

    def test_random_trace_identity(self):
        rng = rng_from_seed(36)
        pi = random_povm_element(rng, 3)
        dil = hyptest.dilate_povm(pi)
        idem = np.max(np.abs(dil @ dil - dil))
        assert idem <= 1e-10
        for _ in range(50):
            a = qla.hermitian_part(
                (rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3)))
            )
            lhs = np.trace(dil @ np.kron(a, np.diag([1.0, 0.0]))).real
            rhs = np.trace(pi @ a).real
            assert abs(lhs - rhs) <= 1e-10

    def test_rejects_non_povm(self):
        with pytest.raises(ValueError):
            hyptest.dilate_povm(np.diag([2.0, 0.0]))
