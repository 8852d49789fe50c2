import numpy as np
import numpy.testing as npt
import pytest

from oneshot import mac, qla, report
from oneshot.rand import random_density, random_povm_element, rng_from_seed


def random_classical_spec(seed, nx=2, ny=2, nz=2):
    rng = rng_from_seed(seed)
    kernel = rng.random((nx, ny, nz)) + 0.1
    kernel /= kernel.sum(axis=2, keepdims=True)
    px = rng.random(nx) + 0.3
    py = rng.random(ny) + 0.3
    return mac.ClassicalChannelSpec(kernel, px / px.sum(), py / py.sum())


def random_cq_spec(seed, nx=2, ny=2, dz=2):
    rng = rng_from_seed(seed)
    states = np.array(
        [[random_density(rng, dz) for _ in range(ny)] for _ in range(nx)]
    )
    return mac.CqChannelSpec(states, np.full(nx, 1 / nx), np.full(ny, 1 / ny))


class TestCodebook:
    def test_reproducible_and_order_independent(self):
        spec = random_classical_spec(1)
        a = mac.Codebook.sample(7, 4, 3, spec.p_x, spec.p_y, dim_l=8)
        b = mac.Codebook.sample(7, 4, 3, spec.p_x, spec.p_y, dim_l=8)
        npt.assert_array_equal(a.xs, b.xs)
        npt.assert_array_equal(a.lys, b.lys)
        # message m's letter does not depend on how many messages are drawn
        c = mac.Codebook.sample(7, 2, 3, spec.p_x, spec.p_y, dim_l=8)
        npt.assert_array_equal(a.xs[:2], c.xs)

    def test_message_count(self):
        assert mac.message_count(0.0) == 1
        assert mac.message_count(1.0) == 2
        assert mac.message_count(1.5) == 3
        assert mac.message_count(-2.0) == 1


class TestClassicalDecoder:
    def test_noiseless_identity_zero_error(self):
        ident = np.zeros((2, 1, 2))
        ident[0, 0, 0] = ident[1, 0, 1] = 1.0
        spec = mac.ClassicalChannelSpec(ident, np.array([0.5, 0.5]), np.array([1.0]))
        f = np.zeros((2, 1, 2))
        f[0, 0, 0] = f[1, 0, 1] = 1.0
        cb = mac.Codebook(np.array([0, 1]), np.array([0]), None, None, 0)
        assert mac.classical_decoder_error(spec, cb, f) == 0.0

    def test_all_zero_test_errs(self):
        spec = random_classical_spec(2)
        cb = mac.Codebook.sample(0, 2, 2, spec.p_x, spec.p_y)
        assert mac.classical_decoder_error(spec, cb, np.zeros(spec.shape)) == 1.0

    def test_closed_form_matches_simulation(self):
        spec = random_classical_spec(3)
        info = mac.classical_information_quantities(spec, 0.2)
        f = info["decoder_test"]
        cb = mac.Codebook.sample(5, 3, 3, spec.p_x, spec.p_y)
        exact = mac.classical_decoder_error(spec, cb, f)
        shots = 10**6
        sim = mac.classical_decoder_simulation(spec, cb, f, shots=shots, seed=1)
        sigma = np.sqrt(max(exact * (1 - exact), 1e-6) / shots)
        assert abs(exact - sim) <= 3 * sigma


class TestClassicalExperiment:
    def test_single_message_error_below_3eps(self):
        spec = random_classical_spec(4)
        eps = 0.1
        res = mac.classical_mac_experiment(spec, 0.0, 0.0, eps, trials=40, seed=0)
        assert res.mc_mean <= 3 * eps + 3 * res.mc_sem + 1e-12

    def test_degenerate_channel(self):
        # output independent of inputs: all information quantities collapse
        kernel = np.zeros((2, 2, 2))
        kernel[..., 0] = 0.3
        kernel[..., 1] = 0.7
        spec = mac.ClassicalChannelSpec(
            kernel, np.array([0.5, 0.5]), np.array([0.5, 0.5])
        )
        eps = 0.2
        info = mac.classical_information_quantities(spec, eps)
        for key in ("i_x_yz", "i_y_xz", "i_xy_z"):
            assert info[key] == pytest.approx(-np.log2(1 - eps), abs=1e-9)
        res = mac.classical_mac_experiment(spec, 2.0, 2.0, eps, trials=5, seed=0)
        assert res.mc_mean > 0.7

    def test_corner_bound_holds(self):
        spec = random_classical_spec(6)
        eps = 0.05
        info = mac.classical_information_quantities(spec, eps)
        r1, r2 = mac.classical_corner_rates(info, eps)
        res = mac.classical_mac_experiment(spec, r1, r2, eps, trials=100, seed=3)
        assert res.within_bound("total")
        assert res.bounds["total"] <= 6 * eps + 1e-12


class TestPerturbedChannel:
    def test_delta_zero_embeds_exactly(self):
        spec = random_cq_spec(7)
        chan = mac.build_perturbed_channel(spec, 4, 0.0)
        emb = chan.base_embed()
        expected = emb @ chan.rho_hat(0, 1) @ emb.conj().T
        npt.assert_allclose(chan.rho_prime(0, 3, 1, 2), expected, atol=1e-12)

    def test_unit_trace_blocks(self):
        spec = random_cq_spec(8)
        chan = mac.build_perturbed_channel(spec, 4, 0.3)
        for lx, ly in [(0, 0), (1, 3), (2, 2)]:
            tr = np.trace(chan.rho_prime(0, lx, 1, ly)).real
            assert tr == pytest.approx(1.0, abs=1e-12)

    def test_perturbation_first_order_value(self):
        # the exact distance of a tilted block: 2 sqrt(2 d^2 / (1 + 2 d^2))
        spec = random_cq_spec(9)
        delta = 0.3
        chan = mac.build_perturbed_channel(spec, 4, delta)
        got = chan.perturbation_l1(0, 0)
        assert got == pytest.approx(2 * np.sqrt(2 * delta**2 / (1 + 2 * delta**2)), abs=1e-9)
        # the distance is first order in delta: it exceeds the quadratic
        # target 4 delta^2 at any delta < 0.93 but meets 2 sqrt(2) delta
        assert got > 4 * delta**2
        assert got <= 2 * np.sqrt(2) * delta + 1e-12

    def test_averaged_states_match_brute_force(self):
        spec = random_cq_spec(10)
        L, delta = 3, 0.4
        chan = mac.build_perturbed_channel(spec, L, delta)
        brute = np.zeros((chan.dim, chan.dim), dtype=complex)
        for y in range(spec.ny):
            for ly in range(L):
                brute += spec.p_y[y] / L * chan.rho_prime(1, 2, y, ly)
        npt.assert_allclose(chan.averaged_over_y(1, 2), brute, atol=1e-12)
        brute_all = np.zeros((chan.dim, chan.dim), dtype=complex)
        for x in range(spec.nx):
            for y in range(spec.ny):
                for lx in range(L):
                    for ly in range(L):
                        w = spec.p_x[x] * spec.p_y[y] / L**2
                        brute_all += w * chan.rho_prime(x, lx, y, ly)
        npt.assert_allclose(chan.averaged_all(), brute_all, atol=1e-12)

    def test_averaged_first_summand_block(self):
        # the fully averaged state keeps exactly weight 1/(1+2 d^2) on the
        # embedded average in its first summand block
        spec = random_cq_spec(11)
        delta = 0.25
        chan = mac.build_perturbed_channel(spec, 4, delta)
        block = chan.averaged_all()[chan.layout.slice_of("base"), chan.layout.slice_of("base")]
        expected = mac.typicality.embed_with_ancilla(spec.avg(), 1, spec.dz) / (
            1 + 2 * delta**2
        )
        npt.assert_allclose(block, expected, atol=1e-12)


class TestSmoothingResiduals:
    def test_delta_zero_residuals_vanish(self):
        spec = random_cq_spec(12)
        chan = mac.build_perturbed_channel(spec, 4, 0.0)
        for c in mac.smoothing_residuals(chan):
            assert c.lhs <= 1e-12

    def test_bounds_hold(self):
        spec = random_cq_spec(13)
        chan = mac.build_perturbed_channel(spec, 16, 0.2)
        checks = mac.smoothing_residuals(chan)
        assert report.all_pass(checks)
        assert all(c.rhs == pytest.approx(3 * 0.2 / 4.0) for c in checks)


class TestDecodingPipeline:
    def test_pipeline_checks(self):
        spec = random_cq_spec(14)
        eps = 1e-4
        dec = mac.build_decoding_povms(spec, 64, eps**0.25, eps)
        checks = mac.pipeline_checks(dec)
        by_name = {}
        for c in checks:
            by_name.setdefault(c.name, []).append(c)
        # every stated bound except the defective quadratic perturbation holds
        for name, group in by_name.items():
            if name == "perturbation_l1_stated":
                assert not any(c.passed for c in group)
            else:
                assert all(c.passed for c in group), name
        # at this eps the 22 sqrt(eps) type-1 bound is non-vacuous and holds
        t1 = by_name["type1_sqrt_eps"][0]
        assert t1.rhs < 1.0 and t1.passed

    def test_povm_is_valid(self):
        spec = random_cq_spec(15)
        dec = mac.build_decoding_povms(spec, 8, 0.2, 0.1)
        pi = dec.povm(0, 1, 1, 2)
        qla.povm_element(pi)

    def test_label_covariance(self):
        spec = random_cq_spec(16)
        dec = mac.build_decoding_povms(spec, 6, 0.25, 0.1)
        chan = dec.chan
        vals = []
        for lx, ly in [(0, 0), (3, 1), (2, 2)]:
            pi = dec.povm(1, lx, 0, ly)
            vals.append(np.trace(pi @ chan.rho_prime(1, lx, 0, ly)).real)
        assert max(vals) - min(vals) <= 1e-10

    def test_commuting_channel_matches_classical(self):
        # diagonal output states: the cq information quantities equal the
        # classical ones of the induced kernel
        rng = rng_from_seed(17)
        kernel = rng.random((2, 2, 2)) + 0.2
        kernel /= kernel.sum(axis=2, keepdims=True)
        states = np.zeros((2, 2, 2, 2), dtype=complex)
        for x in range(2):
            for y in range(2):
                states[x, y] = np.diag(kernel[x, y])
        px = np.array([0.5, 0.5])
        py = np.array([0.6, 0.4])
        cspec = mac.ClassicalChannelSpec(kernel, px, py)
        qspec = mac.CqChannelSpec(states, px, py)
        eps = 0.15
        info = mac.classical_information_quantities(cspec, eps)
        dec = mac.build_decoding_povms(qspec, 4, 0.2, eps)
        assert dec.i_x_yz == pytest.approx(info["i_x_yz"], abs=1e-8)
        assert dec.i_y_xz == pytest.approx(info["i_y_xz"], abs=1e-8)
        assert dec.i_xy_z == pytest.approx(info["i_xy_z"], abs=1e-8)


class TestPgm:
    def test_orthogonal_projectors_fixed(self):
        basis = np.eye(4, dtype=complex)
        p1 = np.outer(basis[:, 0], basis[:, 0])
        p2 = np.outer(basis[:, 1], basis[:, 1])
        lambdas, abstain = mac.pgm([p1, p2])
        npt.assert_allclose(lambdas[0], p1, atol=1e-12)
        npt.assert_allclose(lambdas[1], p2, atol=1e-12)
        npt.assert_allclose(abstain, np.eye(4) - p1 - p2, atol=1e-12)

    def test_single_element_support_projector(self):
        rng = rng_from_seed(18)
        pi = random_povm_element(rng, 3)
        lambdas, _ = mac.pgm([pi])
        w = np.linalg.eigvalsh(lambdas[0])
        assert np.all((w < 1e-9) | (np.abs(w - 1) < 1e-9))

    def test_completeness(self):
        rng = rng_from_seed(19)
        povms = [random_povm_element(rng, 6) for _ in range(4)]
        lambdas, abstain = mac.pgm(povms)
        total = sum(lambdas) + abstain
        assert np.max(np.abs(total - np.eye(6))) <= 1e-10


class TestHayashiNagaoka:
    def test_projector_no_interference(self):
        rng = rng_from_seed(20)
        from oneshot.rand import random_projector

        s = random_projector(rng, 4, 2)
        assert mac.hayashi_nagaoka_slack(s, np.zeros((4, 4))) >= -1e-9

    def test_scalar_case(self):
        s = 0.5 * np.eye(3)
        t = 0.25 * np.eye(3)
        # closed form: 1 - s/(s+t) vs 2(1-s) + 4t
        lhs = 1 - 0.5 / 0.75
        rhs = 2 * 0.5 + 4 * 0.25
        assert mac.hayashi_nagaoka_slack(s, t) == pytest.approx(rhs - lhs, abs=1e-12)

    def test_random_instances(self):
        rng = rng_from_seed(21)
        for _ in range(100):
            d = int(rng.integers(2, 7))
            s = random_povm_element(rng, d)
            t = random_density(rng, d) * float(rng.uniform(0, 3))
            assert mac.hayashi_nagaoka_slack(s, t) >= -1e-9


class TestCqExperiment:
    def test_single_message_fallback(self):
        spec = random_cq_spec(22)
        eps = 0.01
        res = mac.cq_mac_experiment(spec, 0.0, 0.0, eps, 16, trials=10, seed=0)
        assert res.mc_mean <= res.bounds["fallback"] + 3 * res.mc_sem + 1e-9

    def test_hn_bound_holds_with_messages(self):
        spec = random_cq_spec(23)
        eps = 0.05
        res = mac.cq_mac_experiment(spec, 1.0, 1.0, eps, 16, trials=20, seed=1)
        assert res.mc_mean <= res.bounds["hn"] + 3 * res.mc_sem + 1e-9

    def test_corner_rates_clamped(self):
        spec = random_cq_spec(24)
        dec = mac.build_decoding_povms(spec, 8, 0.3, 0.01)
        r1, r2 = mac.cq_corner_rates(dec, 0.01)
        assert r1 >= 0 and r2 >= 0
        assert r1 + r2 <= max(0.0, dec.i_xy_z - 1 - np.log2(100)) + 1e-12

    def test_minimal_ancilla_dim(self):
        L = mac.minimal_ancilla_dim(0.2, 2, [1.0, 1.5, 2.0])
        assert 6 * 0.2 * 2 / np.sqrt(L) <= 2.0**-2.0 + 1e-12


class TestTimeSharing:
    def test_experiment_runs_and_bounds(self):
        rng = rng_from_seed(25)
        states = np.array(
            [[random_density(rng, 2) for _ in range(2)] for _ in range(2)]
        )
        ts = mac.TimeSharingSpec(
            states,
            np.array([0.5, 0.5]),
            np.array([[0.8, 0.2], [0.3, 0.7]]),
            np.array([[0.6, 0.4], [0.1, 0.9]]),
        )
        res = mac.time_sharing_experiment(ts, 0.0, 0.0, 0.05, dim_l=2, trials=3, seed=1)
        assert res.mc_mean <= res.bounds["fallback"] + 3 * res.mc_sem + 1e-9
        assert res.bounds["i_x_yz_u"] >= 0
        res2 = mac.time_sharing_experiment(ts, 0.5, 0.0, 0.05, dim_l=2, trials=3, seed=2)
        assert res2.mc_mean <= res2.bounds["hn"] + 3 * res2.mc_sem + 1e-9


class TestTrivialDecodingSet:
    def test_all_trivial_tests_give_slice_projector(self):
        spec = random_cq_spec(30)
        dec = mac.build_decoding_povms(spec, 4, 0.2, 0.1)
        empty = {key: basis[:, :0] for key, basis in dec.w_x.items()}
        trivial = mac.DecodingSet(
            chan=dec.chan, eps=dec.eps, i_x_yz=0.0, i_y_xz=0.0, i_xy_z=0.0,
            w_x=empty, w_y=dict(empty), w_xy=dict(empty), block_tests={},
        )
        e = dec.chan.base_embed()
        npt.assert_allclose(trivial.povm(0, 1, 1, 2), e @ e.conj().T, atol=1e-12)
