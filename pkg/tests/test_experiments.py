import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from deconv2d.experiments import (
    CSV_COLUMNS,
    NOISE_LADDER,
    Cell,
    SweepPlan,
    Verdict,
    cell_band,
    holder_fit,
    illposedness_demo,
    noisy_data,
    output_reference,
    kappa_reference,
    reproduce,
    run_manifest,
    run_sweep,
    twofoldness_check,
    write_manifest,
)
from deconv2d.grid import discrete_l2_norm
from deconv2d.problems import ExampleId, NoiseModel, example_function, sample_example, synthesize_data
from deconv2d.rules import RuleResult


class TestExamples:
    def test_closed_forms(self):
        assert example_function(1)(0.5, 0.5) == pytest.approx(1 + np.sqrt(2) / 2, rel=1e-15)
        assert example_function(2)(0.75, 0.2) == 1.0
        assert example_function(2)(0.5, 0.5) == pytest.approx(0.0, abs=1e-15)

    def test_samples_are_nonnegative_midpoints(self):
        for ex in (1, 2):
            x = sample_example(ex, 20)
            assert x.n == 20 and np.all(x.values >= -1e-15)
        x1 = sample_example(1, 2).values
        assert x1[0, 1] == pytest.approx(example_function(1)(0.25, 0.75))

    def test_example1_is_factored(self):
        x = sample_example(1, 10).values
        assert np.linalg.matrix_rank(x, tol=1e-10) == 1
        assert np.linalg.matrix_rank(sample_example(2, 10).values, tol=1e-10) > 1

    def test_parse(self):
        assert ExampleId.parse("example2") is ExampleId.EXAMPLE2
        with pytest.raises(ValueError):
            ExampleId.parse(3)
        with pytest.raises(ValueError):
            sample_example(1, 0)


class TestNoise:
    @pytest.mark.parametrize("case", ["limited", "full"])
    @pytest.mark.parametrize("rho", [0.1, 0.01, 0.0005])
    def test_exact_level(self, case, rho):
        y, yd, delta = synthesize_data(2, 12, case, NoiseModel(rho, seed=7))
        assert discrete_l2_norm(yd.values - y.values, y.h) == pytest.approx(delta, rel=1e-12)
        assert delta == pytest.approx(rho * discrete_l2_norm(y), rel=1e-15)

    def test_zero_noise(self):
        y, yd, delta = synthesize_data(1, 6, "full", NoiseModel(0.0))
        np.testing.assert_array_equal(y.values, yd.values)
        assert delta == 0.0

    def test_full_boundary_untouched(self):
        _, yd, _ = synthesize_data(1, 6, "full", NoiseModel(0.05))
        assert not yd.values[-1].any() and not yd.values[:, -1].any()

    def test_seeds(self):
        a = synthesize_data(1, 8, "limited", NoiseModel(0.01, seed=1))
        b = synthesize_data(1, 8, "limited", NoiseModel(0.01, seed=2))
        c = synthesize_data(1, 8, "limited", NoiseModel(0.01, seed=1))
        assert not np.array_equal(a[1].values, b[1].values)
        np.testing.assert_array_equal(a[1].values, c[1].values)
        assert a[2] == b[2]

    def test_negative_rho(self):
        with pytest.raises(ValueError):
            NoiseModel(-0.01)

    def test_shared_realization_streams(self):
        a = noisy_data(1, 8, "limited", 0.01, 0)[1].values
        b = noisy_data(1, 8, "limited", 0.02, 0)[1].values
        c = noisy_data(2, 8, "limited", 0.01, 0)[1].values
        assert not np.allclose(a / 0.01, b / 0.02)
        assert not np.array_equal(a, c)
        np.testing.assert_array_equal(a, noisy_data(1, 8, "limited", 0.01, 0)[1].values)


class TestHolderFit:
    @given(st.floats(0.05, 0.95), st.floats(0.01, 100.0))
    def test_exact_power_laws(self, kappa, c):
        d = np.array(NOISE_LADDER)
        assert holder_fit(d, c * d ** kappa) == pytest.approx(kappa, abs=1e-9)

    def test_linear(self):
        d = np.array(NOISE_LADDER)
        assert holder_fit(d, 3.0 * d) == pytest.approx(1.0)

    @pytest.mark.parametrize("d,e", [([1, 2, 3], [1, 2, 3]), ([1, 2, 3, 0], [1, 1, 1, 1]),
                                     ([1, 2, 3, 4], [1, -1, 1, 1]), ([1, 2, 3, 4], [1, 2, 3])])
    def test_invalid(self, d, e):
        with pytest.raises(ValueError):
            holder_fit(d, e)


class TestPlan:
    def test_defaults_and_cells(self):
        plan = SweepPlan()
        assert (plan.n, plan.alpha0, plan.q, plan.tau, plan.beta, plan.xbar, plan.x0) == (20, 1, 0.5, 1.2, 0.1, 0.5, 1)
        cells = plan.all_cells()
        assert len(cells) == 2 * 2 * 5
        assert not any(c.method == "irgnm" and c.penalty == "r3" for c in cells)

    def test_cell_validation(self):
        with pytest.raises(ValueError):
            Cell(1, "limited", "irgnm", "r3")
        with pytest.raises(ValueError):
            Cell(3, "limited", "tikhonov", "r1")
        assert Cell(1, "full", "irgnm", "r1").rules() == ("opt", "sdp")

    def test_dict_round_trip(self):
        plan = SweepPlan(cells=(Cell(2, "full", "tikhonov", "r3"),), rhos=(0.05, 0.01), seed=9)
        data = json.loads(json.dumps(plan.to_dict()))
        assert SweepPlan.from_dict(data) == plan
        with pytest.raises((TypeError, ValueError)):
            SweepPlan.from_dict({"bogus": 1})

    def test_bands(self):
        assert cell_band(2.56) == pytest.approx((0.56, 4.56))
        assert cell_band(9.91) == pytest.approx((9.91 * 0.6, 9.91 * 1.4))
        assert len(output_reference(1)) == 16 and len(kappa_reference(2)) == 10
        assert not Verdict("x", None, 1.0, 0.0, 2.0).passed
        assert Verdict("x", 1.0, 1.0, 0.0, 2.0).line().startswith("PASS")


SMALL = SweepPlan(n=8, rhos=(0.05, 0.02, 0.01, 0.005), cells=(
    Cell(1, "limited", "tikhonov", "r1"), Cell(1, "full", "tikhonov", "r2"), Cell(2, "limited", "irgnm", "r2")))


@pytest.fixture(scope="module")
def small_report():
    return run_sweep(SMALL)


class TestSweep:
    def test_rows_and_columns(self, small_report):
        rows = small_report.rows
        assert len(rows) == 4 * (3 + 3 + 2)
        assert all(r.status == "ok" for r in rows)
        header, *lines = small_report.to_csv().splitlines()
        assert header.split(",") == list(CSV_COLUMNS)
        assert len(lines) == len(rows)

    def test_rule_certificates(self, small_report):
        for (cell, rho), trace in small_report.traces.items():
            opt, sdp = trace.results["opt"], trace.results["sdp"]
            assert isinstance(opt, RuleResult) and isinstance(sdp, RuleResult)
            recs = {r.index: r for r in trace.sdp_records()}
            bound = SMALL.tau * trace.delta
            assert recs[sdp.index].residual <= bound < recs[sdp.index - 1].residual
            assert opt.rel_error <= sdp.rel_error
            if "qo" in trace.results:
                assert opt.rel_error <= trace.results["qo"].rel_error

    def test_input_error_is_rho(self, small_report):
        for r in small_report.rows:
            assert r.rel_input_error == pytest.approx(r.rho, rel=1e-12)

    def test_kappa(self, small_report):
        k = small_report.kappa(SMALL.cells[0])
        assert k is not None and 0 < k < 1.5
        short = run_sweep(SweepPlan(n=6, rhos=(0.05, 0.01), cells=SMALL.cells[:1], rules=("opt",)))
        assert short.kappa(SMALL.cells[0]) is None

    def test_deterministic_and_job_independent(self, small_report):
        again = run_sweep(SMALL, jobs=2)
        assert again.to_csv() == small_report.to_csv()

    def test_row_lookup(self, small_report):
        r = small_report.row(1, "full", "tikhonov", "r2", "qo", 0.01)
        assert r.rule == "qo" and math.isclose(r.rho, 0.01)
        with pytest.raises(KeyError):
            small_report.row(2, "full", "tikhonov", "r2", "qo", 0.01)

    def test_noiseless_level_is_accurate(self):
        rep = run_sweep(SweepPlan(n=8, rhos=(0.01, 0.0), cells=(Cell(1, "full", "tikhonov", "r1"),),
                                  rules=("opt",)))
        assert rep.row(1, "full", "tikhonov", "r1", "opt", 0.0).rel_output_error < 1e-3


class TestDemos:
    def test_twofoldness(self):
        rep = twofoldness_check(2, n=8, levels=4)
        assert rep.forward_discrepancy == 0.0
        assert rep.max_mismatch <= 1e-6
        assert math.isfinite(rep.mixed_error_plus) and math.isfinite(rep.mixed_error_minus)

    def test_illposedness_small(self):
        rep = illposedness_demo(n=6, rho=0.008)
        assert rep.full_error > 0 and rep.limited_error > 0
        assert rep.ratio == pytest.approx(rep.limited_error / rep.full_error)

    def test_manifest(self, tmp_path):
        m = run_manifest({"a": 1}, command="x")
        assert m["config"] == {"a": 1} and {"numpy", "scipy", "deconv2d"} <= set(m["versions"])
        write_manifest(m, tmp_path / "m.json")
        assert json.loads((tmp_path / "m.json").read_text()) == m

    def test_reproduce_rejects_unknown_target(self):
        with pytest.raises(ValueError):
            reproduce("table9")
