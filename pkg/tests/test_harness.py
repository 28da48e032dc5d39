import json
import math

import numpy as np
import pytest

from resistor import cli
from resistor.geometry import OrthonormalBasis
from resistor.harness import (
    CSV_COLUMNS,
    RunConfig,
    RunReport,
    MinCrossCheck,
    UnsupportedOrderError,
    audit_instance,
    emit_report,
    run_experiment,
    run_verification,
    sweep,
    verify_invariance,
    verify_lipschitz,
    verify_locality,
)
from resistor.instance import DETERMINISTIC, RANDOMIZED, HardInstance, InstanceParams

from conftest import unit


class TestRunExperiment:
    def test_deterministic_t16_psg(self):
        report = run_experiment(RunConfig(mode=DETERMINISTIC, T=16, k=1, method="psg", seed=0))
        assert len(report.rows) == 16
        assert all(row.certified_gap >= 0.125 for row in report.rows)
        assert report.floor == 0.125
        assert report.passed

    def test_rescaled_floor_column(self):
        report = run_experiment(
            RunConfig(mode=DETERMINISTIC, T=4, k=1, method="psg", seed=0, rescale_L=1.0)
        )
        assert report.floor == 0.00078125
        assert all(row.floor == 0.00078125 for row in report.rows)
        assert report.passed

    def test_randomized_run(self):
        report = run_experiment(
            RunConfig(mode=RANDOMIZED, T=4, k=1, method="psg", seed=11, mc_samples=10_000)
        )
        assert report.event_e_held is not None
        assert report.passed
        assert all(row.event_e_margin is not None for row in report.rows)

    def test_unknown_mode(self):
        with pytest.raises(ValueError, match="mode"):
            run_experiment(RunConfig(mode="hybrid"))


def _empty_report():
    return RunReport(
        mode=DETERMINISTIC,
        T=4,
        k=1,
        method="psg",
        seed=0,
        rescale=1.0,
        floor=0.25,
        rows=[],
        floor_ok=True,
        consistency_ok=True,
        consistency_first_mismatch=None,
        event_e_held=None,
        event_e_first_violation=None,
        min_crosscheck=MinCrossCheck(0.0, 0.0, 0.0, True),
        passed=True,
    )


class TestEmitReport:
    def test_empty_run_header_only(self, tmp_path):
        path = emit_report(_empty_report(), "csv", tmp_path / "empty.csv")
        text = path.read_text(encoding="utf-8")
        assert text == ",".join(CSV_COLUMNS) + "\n"

    def test_sixteen_rows_plus_header(self, tmp_path):
        report = run_experiment(RunConfig(mode=DETERMINISTIC, T=16, k=1, seed=0))
        path = emit_report(report, "csv", tmp_path / "r.csv")
        lines = path.read_text(encoding="utf-8").splitlines()
        assert len(lines) == 17
        assert lines[0] == "iter,certified_gap,floor,regime,event_e_margin,value,grad_norm"
        assert path.read_text(encoding="utf-8").endswith("\n")

    def test_json_round_trip(self, tmp_path):
        report = run_experiment(RunConfig(mode=DETERMINISTIC, T=4, k=1, seed=0))
        path = emit_report(report, "json", tmp_path / "r.json")
        assert json.loads(path.read_text(encoding="utf-8")) == report.to_dict()

    def test_replay_byte_identical(self, tmp_path):
        config = RunConfig(mode=DETERMINISTIC, T=9, k=2, method="cubic", seed=5)
        p1 = emit_report(run_experiment(config), "csv", tmp_path / "a.csv")
        p2 = emit_report(run_experiment(config), "csv", tmp_path / "b.csv")
        assert p1.read_bytes() == p2.read_bytes()

    def test_unknown_format(self, tmp_path):
        with pytest.raises(ValueError, match="format"):
            emit_report(_empty_report(), "xml", tmp_path / "r.xml")


class TestVerifyLipschitz:
    def test_value_audit_within_unit_bound(self):
        audit = verify_lipschitz(audit_instance(4, 1), 0, n_pairs=15, samples=4_000, seed=0)
        assert audit.bound == 1.0
        assert audit.passed

    def test_gradient_audit_t9_k2_bound(self):
        inst = audit_instance(9, 2)
        audit = verify_lipschitz(inst, 1, n_pairs=10, samples=4_000, seed=0)
        assert audit.bound == pytest.approx(9.0 * 486.0, rel=1e-12)
        assert audit.bound <= (10.0 * 2) * 9.0**2.5
        assert audit.passed
        assert audit.max_ratio < audit.bound / 100.0

    def test_hessian_audit_runs(self):
        audit = verify_lipschitz(audit_instance(9, 2), 2, n_pairs=4, samples=2_000, seed=1)
        assert audit.bound == pytest.approx((9.0 * 486.0) ** 2, rel=1e-12)
        assert audit.passed

    def test_one_piece_gradient_ratio_vanishes(self):
        p = InstanceParams(T=4, k=1, m=4, d=5, gamma=1.0 / 6, delta=1.0 / 72, mode=DETERMINISTIC)
        inst = HardInstance.from_basis(p, OrthonormalBasis(unit(5, 0)[None, :]))
        audit = verify_lipschitz(inst, 1, n_pairs=6, samples=4_000, seed=2)
        assert audit.max_ratio <= 0.05

    def test_rescale_scales_bound_exactly(self):
        inst = audit_instance(4, 1)
        base = verify_lipschitz(inst, 1, n_pairs=3, samples=1_000, seed=3)
        scaled = verify_lipschitz(inst, 1, n_pairs=3, samples=1_000, seed=3, rescale=0.5)
        assert scaled.bound == 0.5 * base.bound

    def test_high_orders_reported_unsupported(self):
        with pytest.raises(UnsupportedOrderError, match="order 3"):
            verify_lipschitz(audit_instance(9, 2), 3)

    def test_order_above_instance_smoothness(self):
        with pytest.raises(ValueError, match="exceeds"):
            verify_lipschitz(audit_instance(4, 1), 2)


class TestVerifyInvariance:
    def test_standard_instance(self):
        audit = verify_invariance(audit_instance(4, 1), n_points=15, samples=4_000, seed=0)
        assert audit.passed
        assert audit.n_exact > 0

    def test_wide_tie_band_exercises_monte_carlo(self, plane_instance):
        import dataclasses

        wide = HardInstance(
            dataclasses.replace(plane_instance.params, delta=0.05),
            plane_instance.pieces,
            plane_instance.basis,
        )
        audit = verify_invariance(wide, n_points=40, samples=4_000, seed=1)
        assert audit.passed
        assert audit.n_monte_carlo > 0

    def test_needs_orthogonal_complement(self):
        p = InstanceParams(T=2, k=1, m=2, d=2, gamma=0.1, delta=0.01, mode=DETERMINISTIC)
        inst = HardInstance.from_basis(p, OrthonormalBasis(np.eye(2)))
        with pytest.raises(ValueError, match="complement"):
            verify_invariance(inst)

    def test_zero_shift_trivially_equal(self, plane_instance):
        from resistor.evaluator import MCBudget, smoothed_value_mc

        x = np.array([0.25, 0.30, 0.0])
        v1, _ = smoothed_value_mc(plane_instance, x, MCBudget(2_000, 5))
        v2, _ = smoothed_value_mc(plane_instance, x + np.zeros(3), MCBudget(2_000, 5))
        assert v1 == v2


def test_verify_locality_suite():
    audit = verify_locality(9, 1, seed=0)
    assert audit.consistency_ok and audit.regimes_consistent and audit.passed


def test_run_verification_all():
    summary = run_verification("all", 4, 2, seed=0, n_pairs=6, samples=2_000)
    assert summary.lipschitz and summary.invariance and summary.locality
    assert {a.order for a in summary.lipschitz} == {0, 1, 2}
    assert summary.passed
    with pytest.raises(ValueError, match="suite"):
        run_verification("everything", 4, 1)


class TestSweep:
    def test_deterministic_sweep(self):
        report = sweep(RunConfig(mode=DETERMINISTIC, T=4, k=1, seed=0), 3)
        assert report.n_seeds == 3
        assert report.passed
        assert report.held_count is None

    def test_randomized_sweep_threshold(self):
        report = sweep(
            RunConfig(mode=RANDOMIZED, T=4, k=1, seed=0, mc_samples=5_000), 5
        )
        p = 0.2
        expected = (1.0 - p) - 3.0 * math.sqrt(p * (1.0 - p) / 5)
        assert report.held_threshold == pytest.approx(expected, rel=1e-12)
        assert report.passed


class TestCLI:
    def test_run_csv(self, tmp_path, capsys):
        out = tmp_path / "run.csv"
        code = cli.main(
            ["run", "--mode", "det", "--T", "9", "--k", "1", "--method", "psg",
             "--seed", "0", "--out", str(out)]
        )
        assert code == 0
        assert out.exists()
        assert "PASS" in capsys.readouterr().out

    def test_run_exit_code_reflects_floor(self):
        code = cli.main(["run", "--mode", "det", "--T", "4", "--k", "2", "--method", "cubic"])
        assert code == 0

    def test_verify(self, capsys):
        code = cli.main(
            ["verify", "--suite", "locality", "--T", "4", "--k", "1", "--seed", "0"]
        )
        assert code == 0
        assert "locality" in capsys.readouterr().out

    def test_sweep(self, tmp_path, capsys):
        out = tmp_path / "sweep.json"
        code = cli.main(
            ["sweep", "--seeds", "3", "--mode", "det", "--T", "4", "--k", "1",
             "--out", str(out)]
        )
        assert code == 0
        assert json.loads(out.read_text())["n_seeds"] == 3

    def test_dump_vectors_transcript(self, tmp_path):
        out = tmp_path / "run.csv"
        cli.main(
            ["run", "--mode", "det", "--T", "4", "--k", "1", "--out", str(out), "--dump-vectors"]
        )
        transcript = tmp_path / "run.csv.transcript.jsonl"
        rows = [json.loads(line) for line in transcript.read_text().splitlines()]
        assert len(rows) == 4 and "x" in rows[0]
