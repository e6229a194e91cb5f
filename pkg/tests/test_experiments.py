import math

import numpy as np
import pytest

from corrupted_fourier import experiments as ex
from corrupted_fourier.csvio import parse_records, read_csv
from corrupted_fourier.errors import ConfigError, NotPerfectSquare


def cfg(**kw):
    base = dict(n=[31], m=[20], k=[2], gamma_c=[0.2], trials=3, desk_constants=True)
    base.update(kw)
    return ex.config_from_dict(base)


class TestConfig:
    def test_defaults_use_theory_constants(self):
        c = ex.ExperimentConfig()
        assert c.effective_c_lambda == pytest.approx(math.sqrt(2) / 16)

    def test_validation(self):
        for bad in [dict(mode="plot"), dict(trials=0), dict(m=[]), dict(n=[30]),
                    dict(m=[40]), dict(gamma_c=[1.0]), dict(lam_policy="magic"),
                    dict(trials=2.5), dict(theory_mode="yes"), dict(bogus=1)]:
            with pytest.raises(ConfigError):
                cfg(**bad)

    def test_composite_allowed_outside_theory_mode(self):
        assert cfg(n=[30], theory_mode=False).n == [30]

    def test_counterexample_requires_square(self):
        with pytest.raises(ConfigError):
            cfg(mode="counterexample", n=[10])

    def test_yaml_line_numbers(self, tmp_path):
        p = tmp_path / "c.yaml"
        p.write_text("n: [31]\nm: [20]\ntrials: 0\n")
        with pytest.raises(ConfigError) as info:
            ex.load_config(p)
        assert info.value.line == 3 and info.value.field == "trials"
        assert "line 3" in str(info.value)

    def test_yaml_syntax_error(self, tmp_path):
        p = tmp_path / "c.yaml"
        p.write_text("n: [31\nm: 3\n")
        with pytest.raises(ConfigError):
            ex.load_config(p)

    def test_overrides(self, tmp_path):
        p = tmp_path / "c.yaml"
        p.write_text("n: 31\nm: [20]\nk: [1]\ngamma_c: 0.1\nseed: 4\n")
        c = ex.load_config(p, seed=9, trials=2)
        assert c.seed == 9 and c.trials == 2 and c.n == [31] and c.gamma_c == [0.1]

    def test_lambda_policies(self):
        assert cfg(lam_policy="fixed", lam=[0.5]).lambdas(31) == [0.5]
        assert len(cfg(lam_policy="sweep", lam=[0.2, 0.5, 1.0]).lambdas(31)) == 3


def test_trial_rng_is_order_independent():
    a = ex.trial_rng(1, (31, 20, 2, 0.2, 0.5), 3).random()
    ex.trial_rng(1, (31, 20, 2, 0.2, 0.5), 2).random()
    assert a == ex.trial_rng(1, (31, 20, 2, 0.2, 0.5), 3).random()
    assert a != ex.trial_rng(1, (31, 20, 2, 0.2, 0.5), 4).random()


class TestPhase:
    def test_row_count_and_order(self):
        c = cfg(m=[20, 25], k=[1, 2], trials=2)
        recs = ex.run_phase_transition(c)
        assert len(recs) == 2 * 2 * 2
        keys = [(r.m, r.k, r.trial) for r in recs]
        assert keys == sorted(keys)

    def test_trivial_cells(self):
        recs = ex.run_phase_transition(cfg(k=[0], trials=5))
        assert all(r.exact for r in recs)
        recs = ex.run_phase_transition(cfg(n=[31], m=[31], k=[3], gamma_c=[0.0],
                                           lam_policy="fixed", lam=[1.0], trials=5))
        assert all(r.exact for r in recs)

    def test_parallel_matches_serial(self, tmp_path):
        c1 = cfg(trials=4, certify=True)
        c2 = cfg(trials=4, certify=True, jobs=2)
        r1, r2 = ex.run_phase_transition(c1), ex.run_phase_transition(c2)
        strip = lambda rs: [{**r.__dict__, "wall_time": 0} for r in rs]
        assert strip(r1) == strip(r2)

    def test_failures_recorded(self):
        # m = 2 with heavy corruption leaves one clean row; certificates fail, rows remain
        recs = ex.run_phase_transition(cfg(m=[2], k=[1], gamma_c=[0.5], certify=True))
        assert len(recs) == 3 and all(r.certificate_pass is False for r in recs)

    def test_csv_roundtrip(self, tmp_path):
        c = cfg()
        recs = ex.run_phase_transition(c)
        ex.write_records(recs, tmp_path / "p.csv", c)
        meta, _ = read_csv(tmp_path / "p.csv")
        assert meta["schema"].startswith("corrupted-fourier/1") and "note" in meta
        back = parse_records(tmp_path / "p.csv", ex.ExperimentRecord)
        assert [r.exact for r in back] == [r.exact for r in recs]
        assert [r.rel_err_x for r in back] == [r.rel_err_x for r in recs]

    def test_summary(self):
        recs = ex.run_phase_transition(cfg(k=[0, 2], trials=4))
        summ = ex.summarize(recs)
        assert [s.trials for s in summ] == [4, 4] and summ[0].probability == 1.0


def test_monotone_helper():
    assert ex.monotone_within_noise([0.1, 0.5, 0.9], 50)
    assert ex.monotone_within_noise([0.5, 0.45, 0.9], 50)
    assert not ex.monotone_within_noise([0.9, 0.1], 50)
    assert ex.monotone_within_noise([0.9, 0.1], 50, increasing=False)


class TestCounterexample:
    def test_n9(self):
        rows = ex.run_counterexample(9)
        by = {r.lam: r for r in rows}
        assert by[0.5].objective <= 1.5 + 1e-6 and not by[0.5].exact
        assert by[1.0].objective <= 3 + 1e-6 and not by[1.0].exact
        assert by[1.0].truth_objective == pytest.approx(3)
        assert not by[2.0].asserted and by[2.0].bound_holds is None

    def test_non_square(self):
        with pytest.raises(NotPerfectSquare):
            ex.run_counterexample(10)


class TestCertify:
    def test_sound_and_named(self):
        c = cfg(n=[61], m=[50], k=[1], gamma_c=[0.1], trials=5)
        recs = ex.run_certificate_audit(c)
        assert all(r.sound for r in recs) and any(r.certificate_pass for r in recs)
        bad = ex.run_certificate_audit(c, corrupt_q=True)
        assert all(not r.certificate_pass and "q_inf_below_one" in r.failed_conditions
                   for r in bad)


def test_audit_rows():
    c = cfg(mode="audit", tail_trials=2000, deviation_trials=50, trials=3, tail_M=16)
    rows = ex.run_audit(c)
    checks = [r["check"] for r in rows]
    assert checks[:7] == ["steinhaus_tail"] * 3 + ["rademacher_tail"] * 3 + ["operator_deviation"]
    assert "golfing_residual" in checks
    assert all(set(r) <= set(ex.AUDIT_COLUMNS) for r in rows)
