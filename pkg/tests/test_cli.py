import json
import os

import numpy as np
import pytest

from oneshot import cli


def run(args):
    return cli.main(args)


@pytest.fixture()
def outdir(tmp_path):
    return str(tmp_path / "out")


class TestParsing:
    def test_parse_kv_comments_and_blank(self):
        cfg = cli.parse_kv("# comment\n\na = 1\nb = two words # trailing\n")
        assert cfg == {"a": "1", "b": "two words"}

    def test_parse_kv_rejects_garbage(self):
        with pytest.raises(cli.ConfigError):
            cli.parse_kv("not a key value line\n")

    def test_complex_matrix_round_trip(self):
        m = np.array([[1 + 2j, 0], [0.5j, -1]])
        lines = cli.format_complex_matrix(m)
        cfg = {"m.dims": lines[0].split("=")[1], "m": lines[1].split("=")[1]}
        back = cli.parse_complex_matrix(cfg, "m")
        np.testing.assert_allclose(back, m)


class TestDh:
    def test_classical(self, tmp_path, outdir, capsys):
        path = tmp_path / "in.txt"
        path.write_text("mode = classical\np = 1 0\nq = 0.5 0.5\nepsilon = 0\n")
        assert run(["dh", str(path), "--out", outdir]) == 0
        out = capsys.readouterr().out.strip()
        assert float(out) == pytest.approx(1.0, abs=1e-12)
        assert os.path.exists(os.path.join(outdir, "test.txt"))

    def test_quantum_equal_states(self, tmp_path, outdir, capsys):
        path = tmp_path / "in.txt"
        path.write_text(
            "mode = quantum\n"
            "rho.dims = 2 2\nrho = 0.5 0 0 0 0 0 0.5 0\n"
            "sigma.dims = 2 2\nsigma = 0.5 0 0 0 0 0 0.5 0\n"
            "epsilon = 0.5\n"
        )
        assert run(["dh", str(path), "--out", outdir]) == 0
        assert float(capsys.readouterr().out.strip()) == pytest.approx(1.0, abs=1e-9)

    def test_quantum_matches_classical_on_diagonals(self, tmp_path, outdir, capsys):
        qpath = tmp_path / "q.txt"
        qpath.write_text(
            "mode = quantum\n"
            "rho.dims = 2 2\nrho = 0.7 0 0 0 0 0 0.3 0\n"
            "sigma.dims = 2 2\nsigma = 0.2 0 0 0 0 0 0.8 0\n"
            "epsilon = 0.1\n"
        )
        cpath = tmp_path / "c.txt"
        cpath.write_text("mode = classical\np = 0.7 0.3\nq = 0.2 0.8\nepsilon = 0.1\n")
        run(["dh", str(qpath), "--out", outdir])
        vq = float(capsys.readouterr().out.strip())
        run(["dh", str(cpath), "--out", outdir])
        vc = float(capsys.readouterr().out.strip())
        assert vq == pytest.approx(vc, abs=1e-8)

    def test_malformed_exits_2(self, tmp_path, outdir, capsys):
        path = tmp_path / "in.txt"
        path.write_text("mode = classical\np = 1 0\n")  # missing q, epsilon
        assert run(["dh", str(path), "--out", outdir]) == 2
        assert "error:" in capsys.readouterr().err


class TestAudit:
    def test_tilting_passes(self, outdir, capsys):
        assert run(["audit", "tilting", "--trials", "30", "--out", outdir]) == 0
        payload = json.load(open(os.path.join(outdir, "audit_tilting.json")))
        assert payload["pass"] is True
        assert all("seed" in c["params"] for c in payload["checks"])

    def test_hn_and_gao(self, outdir):
        assert run(["audit", "hn", "--trials", "25", "--out", outdir]) == 0
        assert run(["audit", "gao", "--trials", "25", "--out", outdir]) == 0

    def test_typicality_report_lists_claims(self, outdir):
        assert run(
            ["audit", "typicality", "--trials", "1", "--k", "1", "--c", "0",
             "--L", "2", "--out", outdir]
        ) == 0
        payload = json.load(open(os.path.join(outdir, "audit_typicality.json")))
        names = {c["name"] for c in payload["checks"]}
        for expected in (
            "claim1_trace_norm",
            "claim2_m_norm",
            "claim2_n_norm",
            "claim3_l1_distance",
            "claim4_prop6_chain",
            "claim5_identity",
            "claim6_soundness",
            "lemma_claim4_soundness",
        ):
            assert expected in names


class TestMac:
    def test_classical_small_config(self, outdir):
        assert run(
            ["mac", "classical", "configs/classical_mac_small.txt",
             "--trials", "30", "--out", outdir]
        ) == 0
        summary = json.load(open(os.path.join(outdir, "summary.json")))
        assert summary["pass"] is True
        lines = open(os.path.join(outdir, "trials.csv")).read().splitlines()
        assert lines[0] == ",".join(cli.CSV_COLUMNS)
        assert len(lines) == 31

    def test_cq_small_config(self, outdir):
        assert run(
            ["mac", "cq", "configs/cq_mac_small.txt", "--trials", "3", "--out", outdir]
        ) == 0
        summary = json.load(open(os.path.join(outdir, "summary.json")))
        assert summary["pass"] is True

    def test_seed_determinism(self, tmp_path):
        out_a, out_b = str(tmp_path / "a"), str(tmp_path / "b")
        for out in (out_a, out_b):
            run(["mac", "classical", "configs/classical_mac_small.txt",
                 "--trials", "20", "--seed", "7", "--out", out])
        assert open(os.path.join(out_a, "trials.csv")).read() == open(
            os.path.join(out_b, "trials.csv")
        ).read()
        assert open(os.path.join(out_a, "summary.json")).read() == open(
            os.path.join(out_b, "summary.json")
        ).read()

    def test_expect_fail_flag(self, tmp_path, outdir, capsys):
        # rates far above the region: the decoder cannot keep up; with the
        # flag the violation is reported without the failure exit code
        cfg = open("configs/classical_mac_small.txt").read()
        cfg = cfg.replace("r1 = auto", "r1 = 3.0").replace("r2 = auto", "r2 = 3.0")
        path = tmp_path / "hot.txt"
        path.write_text(cfg)
        code = run(["mac", "classical", str(path), "--trials", "10",
                    "--expect-fail", "--out", outdir])
        assert code == 0
        summary = json.load(open(os.path.join(outdir, "summary.json")))
        assert summary["expect_fail"] is True
        assert summary["pass"] is False
        code2 = run(["mac", "classical", str(path), "--trials", "10", "--out", outdir])
        assert code2 == 1

    def test_malformed_config_exits_2(self, tmp_path, outdir):
        path = tmp_path / "bad.txt"
        path.write_text("mode = classical\nepsilon = 0.05\n")
        assert run(["mac", "classical", str(path), "--out", outdir]) == 2


class TestTypicalityBuild:
    def test_build_report(self, outdir):
        assert run(
            ["typicality-build", "--k", "1", "--c", "0", "--L", "2",
             "--delta", "0.3", "--out", outdir]
        ) == 0
        payload = json.load(open(os.path.join(outdir, "typicality_build.json")))
        assert payload["pass"] is True
        assert payload["soundness"]
