"""Command-line interface: reports, files, exit codes and determinism."""

import json
import shutil
from pathlib import Path as FsPath

import pytest

from transect_ipp import cli
from transect_ipp.cli import EXIT_BUDGET, EXIT_IO, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE

GOLDEN = FsPath(__file__).parent / "golden"
EPOCH = "1700000000"
PARAMS = ["--l1", "2", "--l2", "1", "--sig2", "1", "--noise2", "0.05", "--mean", "2"]


@pytest.fixture
def run(capsys, monkeypatch, tmp_path):
    """Run ``main`` inside ``tmp_path``; returns ``(exit code, stdout, stderr)``."""
    monkeypatch.setenv("SOURCE_DATE_EPOCH", EPOCH)
    monkeypatch.chdir(tmp_path)

    def _run(*argv):
        code = cli.main([str(a) for a in argv])
        out, err = capsys.readouterr()
        return code, out, err

    return _run


def drop(report, *keys):
    """Copy of a report without the given dotted keys."""
    report = json.loads(json.dumps(report))
    for key in keys:
        node = report
        *parents, leaf = key.split(".")
        for p in parents:
            node = node[p]
        node.pop(leaf, None)
    return report


def leaves(node, prefix=""):
    """Yield ``(dotted key, leaf dict)`` for every value/unit pair in a report."""
    if isinstance(node, dict):
        if set(node) == {"value", "unit"}:
            yield prefix, node
            return
        for k, v in node.items():
            yield from leaves(v, f"{prefix}.{k}" if prefix else k)
    elif isinstance(node, list):
        for i, v in enumerate(node):
            yield from leaves(v, f"{prefix}[{i}]")


class TestRoundTrip:
    def test_golden_gen_plan_eval(self, run):
        code, out, _ = run("gen", "--rows", 3, "--cols", 8, *PARAMS, "--seed", 7, "--out", "field.csv")
        assert code == EXIT_OK
        assert FsPath("field.csv").read_bytes() == (GOLDEN / "field.csv").read_bytes()
        golden_gen = json.loads((GOLDEN / "gen.json").read_text())
        assert drop(json.loads(out), "provenance.backend") == drop(golden_gen, "provenance.backend")

        code, out, _ = run("plan", "--algo", "mepp", "--m", 2, "--robots", 1, "--field", "field.csv", *PARAMS,
                           "--seed", 7, "--out", "path.txt")
        assert code == EXIT_OK
        assert FsPath("path.txt").read_bytes() == (GOLDEN / "path.txt").read_bytes()
        golden_plan = json.loads((GOLDEN / "plan.json").read_text())
        ignore = ("result.wall_time", "provenance.backend")
        assert drop(json.loads(out), *ignore) == drop(golden_plan, *ignore)

        code, out, _ = run("eval", "--path", "path.txt", "--field", "field.csv", *PARAMS, "--seed", 7)
        assert code == EXIT_OK
        golden_eval = json.loads((GOLDEN / "eval.json").read_text())
        assert drop(json.loads(out), "provenance.backend") == drop(golden_eval, "provenance.backend")

    def test_eval_matches_plan_metrics(self, run):
        run("gen", "--rows", 4, "--cols", 10, *PARAMS, "--seed", 3, "--out", "f.csv")
        _, plan_out, _ = run("plan", "--algo", "m2ipp", "--m", 1, "--robots", 2, "--field", "f.csv", *PARAMS,
                             "--out", "p.txt")
        _, eval_out, _ = run("eval", "--path", "p.txt", "--field", "f.csv", *PARAMS)
        assert json.loads(plan_out)["metrics"] == json.loads(eval_out)["metrics"]

    def test_gen_report_units(self, run):
        code, out, _ = run("gen", "--rows", 2, "--cols", 3, *PARAMS, "--out", "f.csv")
        assert code == EXIT_OK
        report = json.loads(out)
        found = dict(leaves(report))
        assert found["grid.rows"] == {"value": 2, "unit": "count"}
        assert found["params.eta"]["unit"] == "dimensionless"
        assert report["provenance"]["timestamp"] == "2023-11-14T22:13:20Z"


class TestPlan:
    def test_two_robots_on_temperature_grid(self, run):
        args = ["--rows", 5, "--cols", 30, "--spacing-h", 5, "--spacing-v", 5,
                "--l1", 40.45, "--l2", 16, "--sig2", 0.1542, "--noise2", 0.0036]
        code, out, _ = run("plan", "--algo", "mepp", "--m", 1, "--robots", 2, *args, "--out", "p.txt")
        assert code == EXIT_OK
        lines = [ln for ln in FsPath("p.txt").read_text().splitlines() if not ln.startswith("#")]
        assert len(lines) == 30
        for ln in lines:
            rows = [int(t) for t in ln.split(",")]
            assert len(rows) == 2 and rows == sorted(set(rows)) and 1 <= rows[0] and rows[-1] <= 5
        report = json.loads(out)
        assert report["result"]["entropy_evals"]["value"] == 10 + 29 * 100
        assert report["bounds"]["cost_model"] == {"value": 3800, "unit": "operations"}

    def test_full_window_equals_exact(self, run):
        grid = ["--rows", 3, "--cols", 4]
        for algo, extra in (("mepp", ["--m", 3]), ("exact-mepp", [])):
            code, _, _ = run("plan", "--algo", algo, *extra, "--robots", 1, *grid, *PARAMS, "--out", f"{algo}.txt")
            assert code == EXIT_OK

        def body(name):
            return [ln for ln in FsPath(name).read_text().splitlines() if not ln.startswith("#")]

        assert body("mepp.txt") == body("exact-mepp.txt")

    @pytest.mark.parametrize("algo", ["gmepp", "gm2ipp", "exact-m2ipp"])
    def test_other_algorithms(self, run, algo):
        code, out, _ = run("plan", "--algo", algo, "--robots", 1, "--rows", 3, "--cols", 4, *PARAMS, "--out", "p.txt")
        assert code == EXIT_OK
        assert json.loads(out)["request"]["m"] is None

    def test_fit_on_field(self, run):
        run("gen", "--rows", 3, "--cols", 6, *PARAMS, "--out", "f.csv")
        code, out, _ = run("plan", "--algo", "gmepp", "--robots", 1, "--field", "f.csv", "--fit", "--out", "p.txt")
        assert code == EXIT_OK
        assert json.loads(out)["request"]["params"]["eta"]["unit"] == "dimensionless"

    def test_params_file(self, run):
        run("gen", "--rows", 3, "--cols", 6, *PARAMS, "--out", "f.csv")
        code, _, _ = run("fit", "--field", "f.csv", "--points", 3, "--rounds", 1, "--out", "params.json")
        assert code == EXIT_OK
        code, _, _ = run("plan", "--algo", "mepp", "--m", 1, "--robots", 1, "--field", "f.csv",
                         "--params", "params.json", "--out", "p.txt")
        assert code == EXIT_OK


class TestExitCodes:
    def test_missing_window(self, run):
        code, _, err = run("plan", "--algo", "mepp", "--robots", 1, "--rows", 3, "--cols", 4, *PARAMS, "--out", "p.txt")
        assert code == EXIT_USAGE and "--m" in err

    def test_argparse_usage(self, run):
        with pytest.raises(SystemExit) as exc:
            run("plan", "--algo", "astar")
        assert exc.value.code == EXIT_USAGE

    def test_too_many_robots(self, run):
        code, _, _ = run("plan", "--algo", "mepp", "--m", 1, "--robots", 4, "--rows", 3, "--cols", 4, *PARAMS,
                         "--out", "p.txt")
        assert code == EXIT_USAGE

    def test_budget(self, run):
        code, _, err = run("plan", "--algo", "exact-mepp", "--robots", 2, "--rows", 5, "--cols", 30, *PARAMS,
                           "--out", "p.txt")
        assert code == EXIT_BUDGET and "BudgetExceeded" in err
        assert not FsPath("p.txt").exists()

    def test_degenerate_noise(self, run):
        code, _, _ = run("bound", "--k", 1, "--n", 10, "--r", 3, "--m", 2, "--l1-norm", 1, "--eta", 0)
        assert code == EXIT_NUMERIC

    def test_zero_mean_truth(self, run, tmp_path):
        (tmp_path / "z.csv").write_text("# transect r=2 n=3 w1=1 w2=1\n1,5,-2\n7,1,3\n", encoding="utf-8")
        (tmp_path / "p.txt").write_text("2\n1\n2\n", encoding="utf-8")
        code, _, _ = run("eval", "--path", "p.txt", "--field", "z.csv", "--l1", 1, "--l2", 1, "--sig2", 1,
                         "--noise2", 0.1)
        assert code == EXIT_NUMERIC

    def test_ragged_field(self, run, tmp_path):
        (tmp_path / "bad.csv").write_text("# transect r=2 n=3 w1=1 w2=1\n1,2,3\n4,5\n", encoding="utf-8")
        code, _, err = run("fit", "--field", "bad.csv")
        assert code == EXIT_IO and "line 3" in err

    def test_missing_file(self, run):
        code, _, _ = run("fit", "--field", "nope.csv")
        assert code == EXIT_IO

    def test_path_field_mismatch(self, run, tmp_path):
        run("gen", "--rows", 3, "--cols", 5, *PARAMS, "--out", "f.csv")
        (tmp_path / "p.txt").write_text("1\n2\n", encoding="utf-8")
        code, _, _ = run("eval", "--path", "p.txt", "--field", "f.csv", *PARAMS)
        assert code == EXIT_IO


class TestBound:
    def test_single_value(self, run):
        code, out, _ = run("bound", "--algo", "mepp", "--k", 1, "--n", 10, "--r", 3, "--m", 2, "--l1-norm", 1,
                           "--eta", 0.1)
        assert code == EXIT_OK
        eps = json.loads(out)["bounds"]["mepp"]["epsilon"]
        assert eps["unit"] == "nats"
        assert eps["value"] == pytest.approx(0.071761820299721823083, rel=1e-13)

    def test_sweep_file(self, run):
        code, _, _ = run("bound", "--k", 1, "--n", 10, "--r", 3, "--l1-norm", 2, "--eta", 0.1, "--sweep-m",
                         "--out", "sweep.dat")
        assert code == EXIT_OK
        blocks = {}
        for ln in FsPath("sweep.dat").read_text().splitlines():
            if ln.startswith("# algo="):
                cur = blocks.setdefault(ln.split()[1].split("=")[1], [])
            else:
                m, e = ln.split()
                cur.append((int(m), float(e)))
        assert [m for m, _ in blocks["mepp"]] == list(range(1, 11))
        assert [m for m, _ in blocks["m2ipp"]] == list(range(1, 6))
        for rows in blocks.values():
            eps = [e for _, e in rows]
            assert all(b <= a for a, b in zip(eps, eps[1:]))
            assert eps[-1] == 0.0

    def test_from_raw_hyperparameters(self, run):
        _, a, _ = run("bound", "--k", 2, "--n", 30, "--r", 5, "--m", 1, "--l1", 40.45, "--spacing-h", 5,
                      "--sig2", 0.1542, "--noise2", 0.0036)
        _, b, _ = run("bound", "--k", 2, "--n", 30, "--r", 5, "--m", 1, "--l1-norm", 40.45 / 5,
                      "--eta", 0.0036 / 0.1542)
        assert json.loads(a)["bounds"] == json.loads(b)["bounds"]

    def test_needs_window(self, run):
        code, _, _ = run("bound", "--k", 1, "--n", 10, "--r", 3, "--l1-norm", 1, "--eta", 0.1)
        assert code == EXIT_USAGE


class TestFit:
    def test_reports_eta_and_writes_params(self, run):
        run("gen", "--rows", 3, "--cols", 8, *PARAMS, "--out", "f.csv")
        code, out, _ = run("fit", "--field", "f.csv", "--sig2-min", 1, "--sig2-max", 1, "--noise2-min", 0.05,
                           "--noise2-max", 0.05, "--l1-min", 2, "--l1-max", 2, "--l2-min", 1, "--l2-max", 1,
                           "--out", "params.json")
        assert code == EXIT_OK
        assert json.loads(out)["params"]["eta"]["value"] == pytest.approx(0.05)
        saved = json.loads(FsPath("params.json").read_text())["params"]
        assert saved["noise_variance"] == 0.05 and saved["lengthscale_h"] == 2.0


class TestBench:
    def test_single_rep_single_algo(self, run):
        code, out, _ = run("bench", "--algos", "mepp", "--m-range", "1:1", "--reps", 1, "--rows", 3, "--cols", 6,
                           *PARAMS, "--out", "bench.dat")
        assert code == EXIT_OK
        lines = FsPath("bench.dat").read_text().splitlines()
        assert lines[0].startswith("# algo=mepp_m")
        data = [ln for ln in lines if not ln.startswith("#")]
        assert len(data) == 1 and data[0].split()[0] == "1" and float(data[0].split()[1]) >= 0
        assert json.loads(out)["runs"][0]["median_wall_time"]["unit"] == "seconds"

    def test_sweep_n_with_greedy(self, run):
        code, _, _ = run("bench", "--algos", "mepp,gmepp", "--sweep", "n", "--n-values", "4,6", "--reps", 1,
                         "--rows", 3, *PARAMS, "--out", "bench.dat")
        assert code == EXIT_OK
        data = [ln for ln in FsPath("bench.dat").read_text().splitlines() if not ln.startswith("#")]
        assert [ln.split()[0] for ln in data] == ["4", "6", "4", "6"]

    def test_over_budget_is_recorded(self, run):
        code, out, _ = run("bench", "--algos", "exact-mepp", "--reps", 1, "--rows", 5, "--cols", 30, "--robots", 2,
                           *PARAMS, "--out", "bench.dat")
        assert code == EXIT_OK
        assert "BudgetExceeded" in json.loads(out)["runs"][0]["error"]

    def test_requires_rows(self, run):
        with pytest.raises(SystemExit) as exc:
            run("bench", *PARAMS, "--out", "b.dat")
        assert exc.value.code == EXIT_USAGE


class TestDeterminism:
    def test_repeated_runs_identical(self, run, tmp_path):
        reports, paths = [], []
        for i in range(2):
            run("gen", "--rows", 4, "--cols", 9, *PARAMS, "--seed", 11, "--out", f"f{i}.csv")
            _, out, _ = run("plan", "--algo", "m2ipp", "--m", 1, "--robots", 1, "--field", f"f{i}.csv", *PARAMS,
                            "--seed", 11, "--out", f"p{i}.txt")
            reports.append(drop(json.loads(out), "result.wall_time", "request.field", "output"))
            paths.append(FsPath(f"p{i}.txt").read_bytes())
        assert FsPath("f0.csv").read_bytes() == FsPath("f1.csv").read_bytes()
        assert paths[0] == paths[1]
        assert reports[0] == reports[1]

    def test_timestamp_follows_epoch(self, run, monkeypatch):
        monkeypatch.setenv("SOURCE_DATE_EPOCH", "0")
        _, out, _ = run("bound", "--k", 1, "--n", 4, "--r", 2, "--m", 1, "--l1-norm", 1, "--eta", 0.1)
        assert json.loads(out)["provenance"]["timestamp"] == "1970-01-01T00:00:00Z"

    def test_path_file_comments_ignored(self, run, tmp_path):
        shutil.copy(GOLDEN / "field.csv", tmp_path / "f.csv")
        body = (GOLDEN / "path.txt").read_text().splitlines()
        (tmp_path / "p.txt").write_text("# a comment\n" + "\n".join(ln for ln in body if not ln.startswith("#")) + "\n")
        _, a, _ = run("eval", "--path", "p.txt", "--field", "f.csv", *PARAMS, "--seed", 7)
        golden = json.loads((GOLDEN / "eval.json").read_text())
        assert json.loads(a)["metrics"] == golden["metrics"]
