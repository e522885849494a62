import csv
import json
import math
import re

import pytest

from klist import cli
from klist.experiment import (
    COLUMNS,
    SMALLBALL_COLUMNS,
    ExperimentSpec,
    ResultRow,
    SpecError,
    load_spec,
    read_results,
    run_experiment,
    run_smallball,
    write_results,
)
from klist.model import GaussianModel, PowerLawErrorModel
from klist.plots import render_plots
from klist.quantizer import FitConfig

SMALL_FIT = FitConfig(n_train=3000, restarts=2, max_iters=50)


def small_spec(out_dir, **kw):
    base = dict(
        dims=(1, 2),
        sigma_x=1.0,
        sigma_n_list=(0.2, 1.0, 5.0),
        k_grid=(1, 2, 4, 8),
        trials_d1=500,
        trials_d2=500,
        fit=SMALL_FIT,
        seed_root=11,
        out_dir=str(out_dir),
    )
    base.update(kw)
    return ExperimentSpec(**base)


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    spec = small_spec(out, emit_plots=True)
    return spec, run_experiment(spec)


def test_row_count_and_schema(small_run):
    spec, path = small_run
    rows = read_results(path)
    assert len(rows) == 2 * len(spec.dims) * len(spec.sigma_n_list) * len(spec.k_grid)
    with open(path) as fh:
        assert next(csv.reader(fh)) == list(COLUMNS)
    keys = [r.sort_key() for r in rows]
    assert keys == sorted(keys)
    for r in rows:
        assert r.theory_kind == ("d1_highrate" if r.estimator == "centralized_d1" else "d2_lower_bound")
        assert r.theory_value > 0


def test_manifest(small_run):
    spec, path = small_run
    with open(f"{spec.out_dir}/manifest.json") as fh:
        man = json.load(fh)
    assert man["version"] == "0.1.0"
    assert man["spec"]["k_grid"] == list(spec.k_grid)
    assert man["spec"]["fit"]["restarts"] == 2


def test_rerun_byte_identical(small_run, tmp_path):
    spec, path = small_run
    again = run_experiment(small_spec(tmp_path, emit_plots=False))
    assert open(again, "rb").read() == open(path, "rb").read()


def test_workers_byte_identical(small_run, tmp_path):
    spec, path = small_run
    again = run_experiment(small_spec(tmp_path), workers=2)
    assert open(again, "rb").read() == open(path, "rb").read()


def test_k1_grid_d1_d2_agree(tmp_path):
    path = run_experiment(small_spec(tmp_path, k_grid=(1,), trials_d1=4000, trials_d2=4000))
    rows = read_results(path)
    by = {}
    for r in rows:
        by.setdefault((r.d, r.sigma_n), {})[r.estimator] = r
    for pair in by.values():
        a, b = pair["centralized_d1"], pair["decentralized_d2"]
        assert abs(a.mean - b.mean) <= 3 * math.hypot(a.stderr, b.stderr)


def test_csv_roundtrip(tmp_path):
    rows = [
        ResultRow("centralized_d1", 1, 1.0, 0.2, 4, 100, 0.1 / 3, 1e-5, 0.02, "d1_highrate", 3),
        ResultRow("decentralized_d2", 1, 1.0, 0.2, 4, 100, 2.0 / 7, 1e-4, None, "d2_lower_bound", 3),
    ]
    p = tmp_path / "r.csv"
    write_results(p, rows)
    assert read_results(p) == rows
    assert p.read_text().splitlines()[2].split(",")[8] == ""


def test_atomic_write_leaves_nothing_on_failure(tmp_path, monkeypatch):
    bad = ResultRow("centralized_d1", 1, 1.0, 0.2, 4, 100, 0.1, 1e-5, 0.02, "d1_highrate", 3)

    class Boom(Exception):
        pass

    import klist.experiment as ex

    real = ex._fmt

    def exploding(v):
        if v == 0.02:
            raise Boom
        return real(v)

    monkeypatch.setattr(ex, "_fmt", exploding)
    with pytest.raises(Boom):
        write_results(tmp_path / "results.csv", [bad])
    assert list(tmp_path.iterdir()) == []


def test_plots(small_run):
    spec, path = small_run
    rows = read_results(path)
    svgs = sorted(p.name for p in __import__("pathlib").Path(spec.out_dir).glob("fig_d*.svg"))
    assert svgs == ["fig_d1.svg", "fig_d2.svg"]
    for d in spec.dims:
        text = open(f"{spec.out_dir}/fig_d{d}.svg").read()
        assert "<image" not in text and ">k</text>" in text and ">distortion</text>" in text
        markers = set()
        for series, sn, body in re.findall(r'<g class="series" data-series="(\w+)" data-sigma-n="([^"]+)">(.*?)</g>', text, re.S):
            for k, v in re.findall(r'data-k="(\d+)" data-value="([^"]+)"', body):
                markers.add((series, float(sn), int(k), float(v)))
        for r in rows:
            if r.d != d:
                continue
            tag = "d1" if r.estimator == "centralized_d1" else "d2"
            assert (f"{tag}_empirical", r.sigma_n, r.k, r.mean) in markers
            assert (f"{tag}_theory", r.sigma_n, r.k, r.theory_value) in markers
        d2_lo = {k: v for s, sn, k, v in markers if s == "d2_theory" and sn == 0.2}
        d2_hi = {k: v for s, sn, k, v in markers if s == "d2_theory" and sn == 5.0}
        assert d2_lo.keys() == d2_hi.keys()
        for k in d2_lo:
            assert d2_lo[k] == pytest.approx(d2_hi[k], rel=1e-14)


def test_plot_errors(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    out = tmp_path / "figs"
    with pytest.raises(ValueError):
        render_plots(empty, out)
    header_only = tmp_path / "h.csv"
    header_only.write_text(",".join(COLUMNS) + "\n")
    with pytest.raises(ValueError, match="no result rows"):
        render_plots(header_only, out)
    assert not out.exists() or list(out.iterdir()) == []
    bad = tmp_path / "bad.csv"
    bad.write_text(",".join(COLUMNS) + "\ncentralized_d1,1,1.0,0.2,4,100,0.1,0.01,0.02,d1_highrate,3\ncentralized_d1,x,1,1,1,1,1,1,1,d1_highrate,3\n")
    with pytest.raises(ValueError, match="row 3"):
        render_plots(bad, out)


def test_spec_validation_names_field(tmp_path):
    with pytest.raises(SpecError, match=r"^experiment.k_grid"):
        small_spec(tmp_path, k_grid=(4, 2)).validate()
    with pytest.raises(SpecError, match=r"^experiment.sigma_n\[1\]"):
        small_spec(tmp_path, sigma_n_list=(1.0, -2.0)).validate()
    with pytest.raises(SpecError, match=r"^experiment.trials_d2"):
        small_spec(tmp_path, trials_d2=5).validate()


def test_unwritable_out_dir(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(SpecError, match="out_dir"):
        run_experiment(small_spec(blocker / "sub"))


def test_load_spec_file_and_overrides(tmp_path):
    cfg = tmp_path / "exp.ini"
    cfg.write_text(
        "[experiment]\ndims = 1, 4\nsigma_n = 0.2, 5\nk_grid = 1,2,4,8\ntrials_d1 = 300\ntrials_d2 = 400\n"
        "seed = 9\nout_dir = somewhere\n\n[fit]\nrestarts = 3\nn_train = 5000\n"
    )
    spec = load_spec(cfg, k_grid=(1, 2), max_iters=17)
    assert spec.dims == (1, 4) and spec.sigma_n_list == (0.2, 5.0)
    assert spec.k_grid == (1, 2) and spec.trials_d2 == 400 and spec.seed_root == 9
    assert spec.fit == FitConfig(n_train=5000, max_iters=17, restarts=3)
    cfg.write_text("[experiment]\ndims = 1, 4\n[fit]\nrestarts = 2\n[fit.d1]\nn_train = 70000\n")
    spec = load_spec(cfg)
    assert spec.fit_for(1) == FitConfig(n_train=70000, restarts=2)
    assert spec.fit_for(4) == FitConfig(restarts=2)
    cfg.write_text("[experiment]\ndims = 1\n[fit.d4]\nrestarts = 2\n")
    with pytest.raises(SpecError, match=r"^fit.d4"):
        load_spec(cfg)
    cfg.write_text("[experiment]\nk_grid = 1, two\n")
    with pytest.raises(SpecError, match=r"^experiment.k_grid"):
        load_spec(cfg)
    cfg.write_text("[experiment]\ncolour = red\n")
    with pytest.raises(SpecError, match=r"^experiment.colour"):
        load_spec(cfg)


def test_reference_defaults():
    spec = ExperimentSpec()
    assert spec.dims == (1, 4, 10) and spec.sigma_n_list == (0.2, 1.0, 5.0)
    assert spec.k_grid == tuple(2**i for i in range(11))
    assert spec.trials_d1 == spec.trials_d2 == 100_000
    assert spec.fit.restarts == 8 and spec.fit.max_iters == 200 and spec.fit.rel_tol == 1e-6
    assert 2 * 3 * 3 * len(spec.k_grid) == 198


def _read_sb(path):
    with open(path) as fh:
        r = csv.reader(fh)
        header = next(r)
        return header, [dict(zip(header, row)) for row in r]


def test_smallball_csv(tmp_path):
    p = run_smallball(GaussianModel.from_std(2, 1.0, 1.0), tmp_path / "g.csv", trials=200_000, seed=1)
    header, rows = _read_sb(p)
    assert tuple(header) == SMALLBALL_COLUMNS
    assert all(float(r["alpha_theory"]) == 1.0 for r in rows)
    assert all(r["bound_lower"] == "" for r in rows)

    n = 1_000_000
    p = run_smallball(PowerLawErrorModel(1, 1.0), tmp_path / "p.csv", trials=n, seed=2)
    _, rows = _read_sb(p)
    assert all(float(r["alpha_theory"]) == 1.0 for r in rows)
    for r in rows:
        lo, hi, emp = float(r["bound_lower"]), float(r["bound_upper"]), float(r["prob_empirical"])
        se = math.sqrt(max(lo * (1 - lo), 1e-300) / n)
        assert lo - 3 * se <= emp <= hi + 3 * se


def test_cli_theory(capsys):
    assert cli.main(["theory", "--d", "1", "--k", "10"]) == 0
    out = capsys.readouterr().out
    line = [l for l in out.splitlines() if l.startswith("10,")][0]
    assert float(line.split(",")[1]) == pytest.approx(0.01360350, abs=1e-8)


def test_cli_run_plot_smallball(tmp_path, capsys):
    out = tmp_path / "o"
    rc = cli.main(["run", "--d", "1", "--sigma-n", "1", "--k-grid", "1,2", "--trials", "200",
                   "--n-train", "1000", "--restarts", "1", "--seed", "4", "--out", str(out), "--plots"])
    assert rc == 0
    assert (out / "results.csv").exists() and (out / "fig_d1.svg").exists()
    assert cli.main(["plot", str(out / "results.csv"), "--out", str(tmp_path / "p")]) == 0
    assert (tmp_path / "p" / "fig_d1.svg").exists()
    assert cli.main(["smallball", "--model", "powerlaw", "--beta", "2", "--trials", "20000",
                     "--out", str(tmp_path / "sb.csv")]) == 0
    capsys.readouterr()


def test_cli_failure_names_stage(tmp_path, capsys):
    rc = cli.main(["run", "--k-grid", "4,2", "--out", str(tmp_path)])
    assert rc != 0
    err = capsys.readouterr().err
    assert "klist run" in err and "experiment.k_grid" in err
    rc = cli.main(["plot", str(tmp_path / "missing.csv")])
    assert rc != 0 and "klist plot" in capsys.readouterr().err
