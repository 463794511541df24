import json
import shutil
import time

import pytest

from poseval.cli import main
from poseval.dataset_io import EvalConfig, read_report, read_submission, write_submission
from poseval.pipeline import evaluate_dataset, evaluate_submissions
from poseval.scoring import PoseEstimate

from helpers import MINI_ROOT

SUBMISSIONS = MINI_ROOT / "submissions"


def mini_config(**kwargs):
    return EvalConfig(datasets={"mini": MINI_ROOT}, **kwargs)


class TestPipeline:
    def test_perfect_submission_scores_one(self):
        report = evaluate_submissions(
            mini_config(), {"mini": SUBMISSIONS / "perfect.csv"}
        )
        d = report.datasets[0]
        assert (d.ar_vsd, d.ar_mssd, d.ar_mspd) == (1.0, 1.0, 1.0)
        assert d.ar == 1.0 and report.ar_core == 1.0
        assert d.gt_count == 6
        assert d.mean_image_time == 0.5

    def test_empty_submission_scores_zero(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("scene_id,im_id,obj_id,score,R,t,time\n")
        report = evaluate_submissions(mini_config(), {"mini": path})
        d = report.datasets[0]
        assert d.ar == 0.0 and report.ar_core == 0.0
        assert all(r == 0.0 for r in d.mssd_grid.recalls)

    def test_far_translated_submission_scores_zero(self):
        report = evaluate_submissions(
            mini_config(), {"mini": SUBMISSIONS / "shifted.csv"}
        )
        d = report.datasets[0]
        assert (d.ar_vsd, d.ar_mssd, d.ar_mspd) == (0.0, 0.0, 0.0)

    def test_known_mssd_error_single_instance(self):
        config = mini_config(targets_path=MINI_ROOT / "test_targets_im0.json")
        report = evaluate_submissions(config, {"mini": SUBMISSIONS / "mixed.csv"})
        assert report.datasets[0].ar_mssd == 0.6

    def test_workers_do_not_change_results(self):
        base = evaluate_submissions(
            mini_config(workers=1), {"mini": SUBMISSIONS / "perfect.csv"}
        )
        parallel = evaluate_submissions(
            mini_config(workers=2), {"mini": SUBMISSIONS / "mixed.csv"}
        )
        parallel_same = evaluate_submissions(
            mini_config(workers=2), {"mini": SUBMISSIONS / "perfect.csv"}
        )
        from poseval.dataset_io import report_to_dict

        assert report_to_dict(parallel_same) == report_to_dict(base)
        assert report_to_dict(parallel) != report_to_dict(base)

    def test_visibility_filter_drops_occluded_gt(self):
        # With a 99% visibility requirement the partially occluded cube in
        # image 2 leaves the denominator; perfect poses still score 1.0.
        config = mini_config(visibility_threshold=0.99)
        report = evaluate_submissions(config, {"mini": SUBMISSIONS / "perfect.csv"})
        d = report.datasets[0]
        assert d.gt_count == 5
        assert d.ar == 1.0

    def test_missing_depth_disables_vsd(self, tmp_path):
        root = tmp_path / "mini_nodepth"
        shutil.copytree(MINI_ROOT, root)
        shutil.rmtree(root / "test" / "000001" / "depth")
        config = EvalConfig(datasets={"mini": root}, image_size=(64, 64))
        report = evaluate_submissions(
            config, {"mini": root / "submissions" / "perfect.csv"}
        )
        d = report.datasets[0]
        assert d.ar_vsd is None and d.vsd_grid is None
        assert d.ar == 1.0  # mean of the two remaining functions
        assert any("VSD is skipped" in line for line in report.diagnostics)

    def test_inconsistent_times_warn(self, tmp_path):
        ests = read_submission(SUBMISSIONS / "perfect.csv")
        rows = [
            PoseEstimate(e.scene_id, e.im_id, e.obj_id, e.pose, e.score,
                         0.5 + 0.25 * (i % 2))
            for i, e in enumerate(ests)
        ]
        path = tmp_path / "times.csv"
        write_submission(path, rows)
        report, diagnostics = evaluate_dataset(
            "mini", MINI_ROOT, path, mini_config()
        )
        assert any("differing times" in line for line in diagnostics)
        assert report.mean_image_time > 0.5

    def test_missing_submission_for_dataset(self):
        with pytest.raises(Exception, match="no submission"):
            evaluate_submissions(mini_config(), {})

    def test_multiple_datasets_average(self):
        # Same dataset registered twice with a perfect and a failing
        # submission: the overall score is the unweighted mean.
        config = EvalConfig(datasets={"a": MINI_ROOT, "b": MINI_ROOT})
        report = evaluate_submissions(
            config,
            {"a": SUBMISSIONS / "perfect.csv", "b": SUBMISSIONS / "shifted.csv"},
        )
        assert [d.name for d in report.datasets] == ["a", "b"]
        assert report.ar_core == 0.5


class TestCli:
    def _evaluate_args(self, out_dir, workers=1, submission="perfect.csv"):
        return [
            "evaluate",
            "--dataset", f"mini={MINI_ROOT}",
            "--submission", str(SUBMISSIONS / submission),
            "--out", str(out_dir),
            "--workers", str(workers),
        ]

    def test_evaluate_exit_zero_and_reports(self, tmp_path, capsys):
        code = main(self._evaluate_args(tmp_path / "out"))
        assert code == 0
        table = capsys.readouterr().out
        assert "100.0" in table
        report = read_report(tmp_path / "out" / "report.json")
        assert report.ar_core == 1.0

    def test_reports_byte_identical_across_runs_and_workers(self, tmp_path):
        assert main(self._evaluate_args(tmp_path / "a", workers=1)) == 0
        assert main(self._evaluate_args(tmp_path / "b", workers=2)) == 0
        a = (tmp_path / "a" / "report.json").read_bytes()
        b = (tmp_path / "b" / "report.json").read_bytes()
        assert a == b

    def test_input_error_exit_code(self, tmp_path, capsys):
        code = main([
            "evaluate",
            "--dataset", f"mini={MINI_ROOT}",
            "--submission", str(tmp_path / "missing.csv"),
        ])
        assert code == 1

    def test_bad_flag_combination(self, capsys):
        code = main(["evaluate", "--submission", "a.csv,b.csv", "--dataset", "x"])
        assert code == 1

    def test_usage_errors_exit_one(self, capsys):
        assert main(["evaluate"]) == 1  # missing required --submission
        assert main(["no-such-command"]) == 1
        assert main(["--help"]) == 0

    def test_symmetries_command(self, tmp_path):
        from poseval.geometry import save_mesh_ply
        from poseval.shapes import cube, cylinder, scalene_tetrahedron

        cases = [
            (cube(200.0), 23, 0),
            (cylinder(50.0, 100.0, 64), None, 1),
            (scalene_tetrahedron(), 0, 0),
        ]
        for k, (mesh, n_discrete, n_axes) in enumerate(cases):
            ply = tmp_path / f"m{k}.ply"
            save_mesh_ply(ply, mesh)
            out = tmp_path / f"sym{k}.json"
            assert main(["symmetries", str(ply), "--out", str(out)]) == 0
            data = json.loads(out.read_text())["1"]
            if n_discrete is not None:
                assert len(data.get("symmetries_discrete", [])) == n_discrete
            assert len(data.get("symmetries_continuous", [])) == n_axes
            assert "note" in data

    def test_report_command(self, tmp_path, capsys):
        main(self._evaluate_args(tmp_path / "out"))
        capsys.readouterr()
        assert main(["report", str(tmp_path / "out" / "report.json")]) == 0
        assert "100.0" in capsys.readouterr().out

    def test_selftest_passes_quickly(self, capsys):
        start = time.monotonic()
        assert main(["selftest"]) == 0
        assert time.monotonic() - start < 60.0
        out = capsys.readouterr().out
        assert out.count("PASS") == 4

    def test_selftest_detects_corruption(self, monkeypatch, capsys):
        # Documented corruption check: a broken reference implementation
        # must turn the self-test red.
        import poseval.reference as reference

        real = reference.hausdorff_double_loop
        monkeypatch.setattr(
            reference, "hausdorff_double_loop", lambda a, b: real(a, b) + 1.0
        )
        assert main(["selftest"]) == 2
        assert "FAIL" in capsys.readouterr().out
