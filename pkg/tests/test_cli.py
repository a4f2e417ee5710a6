import json

import pytest

from phasecalc.cli import (
    SUITES,
    ConfigError,
    ExperimentConfig,
    emit_plotdata,
    load_config,
    main,
    run_suite,
)


class TestConfig:
    def test_defaults_valid(self, tmp_path):
        cfg = ExperimentConfig(suite="cone", seed=1, out_dir=tmp_path)
        assert cfg.sigma == 3.0 and cfg.q == pytest.approx(4.0 / 3.0)

    def test_sigma_window(self, tmp_path):
        with pytest.raises(ConfigError, match=r"σ ∈ \[3, q/\(q-1\)\) required"):
            ExperimentConfig(suite="cone", seed=1, out_dir=tmp_path, sigma=2.5)
        # above the cap q/(q-1) = 4 at q = 4/3
        with pytest.raises(ConfigError):
            ExperimentConfig(suite="cone", seed=1, out_dir=tmp_path, sigma=4.5)
        # q = 1 leaves sigma unbounded above
        ExperimentConfig(suite="cone", seed=1, out_dir=tmp_path, q=1.0,
                         sigma=8.0)

    def test_unknown_suite(self, tmp_path):
        with pytest.raises(ConfigError, match="unknown suite"):
            ExperimentConfig(suite="nope", seed=1, out_dir=tmp_path)

    @pytest.mark.parametrize("kwargs", [
        {"q": 1.6}, {"k": 0.5}, {"kappa": 1.5}, {"m": 1},
        {"T": -1.0}, {"n_x": 15}, {"budget": 0.0},
    ])
    def test_rejects_bad_parameters(self, tmp_path, kwargs):
        with pytest.raises(ConfigError):
            ExperimentConfig(suite="cone", seed=1, out_dir=tmp_path, **kwargs)


class TestLoadConfig:
    def test_toml_sections_flatten(self, tmp_path):
        p = tmp_path / "c.toml"
        p.write_text('suite = "energy"\nseed = 9\n'
                     '[problem]\nsigma = 3.2\nq = 1.25\n'
                     '[grid]\nn_x = 64\n'
                     '[solver]\nlambda = 2.5\n')
        cfg = load_config(p)
        assert cfg.suite == "energy" and cfg.seed == 9
        assert cfg.sigma == 3.2 and cfg.n_x == 64 and cfg.lam == 2.5

    def test_json_config(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"suite": "cone", "seed": 4, "kappa": 0.25}))
        cfg = load_config(p)
        assert cfg.suite == "cone" and cfg.kappa == 0.25

    def test_cli_flags_override_file(self, tmp_path):
        p = tmp_path / "c.toml"
        p.write_text('suite = "cone"\nseed = 4\n')
        cfg = load_config(p, suite="energy", seed=7, out=tmp_path / "r")
        assert cfg.suite == "energy" and cfg.seed == 7

    def test_seed_required(self, tmp_path):
        p = tmp_path / "c.toml"
        p.write_text('suite = "cone"\n')
        with pytest.raises(ConfigError, match="seed"):
            load_config(p)

    def test_suite_required(self):
        with pytest.raises(ConfigError, match="suite"):
            load_config(None, seed=1)

    def test_unknown_key(self, tmp_path):
        p = tmp_path / "c.toml"
        p.write_text('suite = "cone"\nseed = 1\nwhatever = 3\n')
        with pytest.raises(ConfigError, match="unknown config key"):
            load_config(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "absent.toml", suite="cone", seed=1)

    def test_seed_inside_section(self, tmp_path):
        p = tmp_path / "c.toml"
        p.write_text('suite = "cone"\n[solver]\nseed = 12\n')
        assert load_config(p).seed == 12


class TestMain:
    def test_bad_sigma_exits_2(self, tmp_path, capsys):
        p = tmp_path / "c.toml"
        p.write_text('suite = "cone"\nseed = 1\n[problem]\nsigma = 2.5\n')
        rc = main(["check", "--config", str(p), "--out", str(tmp_path)])
        assert rc == 2
        assert "σ ∈ [3, q/(q-1)) required" in capsys.readouterr().err

    def test_missing_seed_exits_2(self, tmp_path, capsys):
        rc = main(["check", "--suite", "weights-axioms",
                   "--out", str(tmp_path)])
        assert rc == 2
        assert "seed" in capsys.readouterr().err

    def test_weights_suite_green(self, tmp_path):
        rc = main(["check", "--suite", "weights-axioms", "--seed", "3",
                   "--out", str(tmp_path)])
        assert rc == 0
        rep = json.loads((tmp_path / "weights-axioms.json").read_text())
        assert rep["passed"] and rep["seed"] == 3

    def test_report_verb(self, tmp_path, capsys):
        assert main(["check", "--suite", "weights-axioms", "--seed", "3",
                     "--out", str(tmp_path)]) == 0
        assert main(["report", "--out", str(tmp_path)]) == 0
        summary = (tmp_path / "summary.csv").read_text()
        assert "weights-axioms" in summary

    def test_report_empty_dir_exits_2(self, tmp_path, capsys):
        rc = main(["report", "--out", str(tmp_path)])
        assert rc == 2
        assert "no suite reports" in capsys.readouterr().err


class TestSuites:
    def test_all_suites_named(self):
        assert set(SUITES) == {
            "weights-axioms", "symbol-class", "calculus", "conjugation",
            "reduction", "energy", "cone", "full-pipeline"}

    def test_determinism_byte_identical(self, tmp_path):
        outs = []
        for sub in ("a", "b"):
            d = tmp_path / sub
            cfg = ExperimentConfig(suite="weights-axioms", seed=21, out_dir=d)
            assert run_suite(cfg) == 0
            outs.append((d / "weights-axioms.json").read_bytes())
        assert outs[0] == outs[1]

    def test_cone_suite_and_trace(self, tmp_path):
        cfg = ExperimentConfig(suite="cone", seed=7, out_dir=tmp_path)
        assert run_suite(cfg) == 0
        rep = json.loads((tmp_path / "cone.json").read_text())
        assert rep["full_cone"]["passed"]
        assert not rep["shrunken_cone"]["passed"]
        assert rep["shrunken_cone"]["worst_violation_cells"] > 1
        trace = (tmp_path / "cone_support_radius.csv").read_text().splitlines()
        assert trace[0] == "t,radius" and len(trace) == 10

    def test_emit_plotdata_k_sweep(self, tmp_path):
        (tmp_path / "conjugation.json").write_text(json.dumps({
            "suite": "conjugation", "passed": True,
            "ks": [1, 2, 4], "norms": [0.4, 0.25, 0.16], "slope": -0.7}))
        written = emit_plotdata(tmp_path)
        names = {p.name for p in written}
        assert "summary.csv" in names
        assert "conjugation_k_sweep_flat.csv" in names
