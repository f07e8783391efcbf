import json

import numpy as np
import pytest

from rffkpkm import accuracy, cli, fit_kpkm
from rffkpkm.oracles import make_blobs


@pytest.fixture
def blob_csv(tmp_path):
    X, y = make_blobs(300, 3, dim=2, separation=10.0, seed=1)
    path = tmp_path / "blobs.csv"
    np.savetxt(path, np.column_stack([X, y]), delimiter=",")
    return path


def _write_manifest(tmp_path, views, labels, name="m.json"):
    entries = []
    for l, V in enumerate(views):
        np.savetxt(tmp_path / f"view{l}.csv", V, delimiter=",")
        entries.append({"path": f"view{l}.csv"})
    np.savetxt(tmp_path / "labels.csv", labels, fmt="%d")
    (tmp_path / name).write_text(json.dumps({"name": "t", "views": entries,
                                             "labels": {"path": "labels.csv"}}))
    return tmp_path / name


def _read_tsv(path):
    lines = path.read_text().splitlines()
    header = lines[0].split("\t")
    return [dict(zip(header, line.split("\t"))) for line in lines[1:]]


def test_cluster_summary_on_blobs(blob_csv, tmp_path, capsys):
    out = tmp_path / "out"
    assert cli.main(["cluster", "--data", str(blob_csv), "--label-column", "-1", "-k", "3",
                     "--out-dir", str(out)]) == 0
    (row,) = _read_tsv(out / "summary.tsv")
    assert row["n_seeds"] == "20" and float(row["acc_mean"]) >= 0.95
    assert len(list(out.glob("kpkm_seed*.json"))) == 20
    assert "acc_mean" in capsys.readouterr().out


def test_single_seed_gives_one_record(blob_csv, tmp_path):
    out = tmp_path / "out"
    assert cli.main(["cluster", "--data", str(blob_csv), "--label-column", "-1", "-k", "3",
                     "--seeds", "1", "--seed-base", "5", "--out-dir", str(out)]) == 0
    assert [p.name for p in out.glob("*.json")] == ["kpkm_seed5.json"]


def test_missing_file_exit_code_and_message(tmp_path, capsys):
    missing = tmp_path / "absent.csv"
    assert cli.main(["cluster", "--data", str(missing), "-k", "2",
                     "--out-dir", str(tmp_path)]) == 2
    assert str(missing) in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["-k", "500"],
    ["-k", "3", "--gamma", "0.5"],
    ["-k", "3", "--seeds", "0"],
])
def test_config_errors_exit_2(blob_csv, tmp_path, argv):
    assert cli.main(["cluster", "--data", str(blob_csv), "--out-dir", str(tmp_path)] + argv) == 2


def test_unparseable_csv_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("1,2\n3,oops\n")
    assert cli.main(["cluster", "--data", str(bad), "-k", "1", "--out-dir", str(tmp_path)]) == 2
    assert "bad.csv:2" in capsys.readouterr().err


def test_solver_failure_exit_1(blob_csv, tmp_path, monkeypatch):
    def boom(*args, **kwargs):
        raise FloatingPointError("overflow")
    monkeypatch.setattr(cli, "fit_kpkm", boom)
    assert cli.main(["cluster", "--data", str(blob_csv), "-k", "3", "--seeds", "1",
                     "--out-dir", str(tmp_path)]) == 1


def test_identical_invocations_are_byte_identical_apart_from_timing(blob_csv, tmp_path):
    def run(out):
        cli.main(["cluster", "--data", str(blob_csv), "--label-column", "-1", "-k", "3",
                  "--seeds", "2", "--out-dir", str(out)])
        recs = {}
        for p in sorted(out.glob("*.json")):
            d = json.loads(p.read_text())
            d.pop("timing")
            recs[p.name] = json.dumps(d, sort_keys=True)
        traces = {p.name: p.read_bytes() for p in out.glob("*.tsv")}
        return recs, traces
    assert run(tmp_path / "a") == run(tmp_path / "b")


def test_parallel_jobs_match_sequential(blob_csv, tmp_path):
    for jobs, name in ((1, "seq"), (2, "par")):
        cli.main(["cluster", "--data", str(blob_csv), "--label-column", "-1", "-k", "3",
                  "--seeds", "3", "--jobs", str(jobs), "--out-dir", str(tmp_path / name)])
    for p in (tmp_path / "seq").glob("*_trace.tsv"):
        assert p.read_bytes() == (tmp_path / "par" / p.name).read_bytes()


def test_out_dir_from_environment(blob_csv, tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_DIR_ENV, str(tmp_path / "envout"))
    assert cli.main(["cluster", "--data", str(blob_csv), "-k", "3", "--seeds", "1"]) == 0
    assert (tmp_path / "envout" / "kpkm_seed0.json").exists()


def test_help_documents_sign_convention(capsys):
    with pytest.raises(SystemExit):
        cli.main(["cluster", "--help"])
    assert "-|s0|" in capsys.readouterr().out


def test_multi_identical_views_uniform_alpha(tmp_path):
    X, y = make_blobs(200, 3, dim=2, separation=10.0, seed=2)
    m = _write_manifest(tmp_path, [X, X], y)
    out = tmp_path / "out"
    assert cli.main(["cluster-multi", "--manifest", str(m), "-k", "3", "--seeds", "3",
                     "--out-dir", str(out)]) == 0
    for row in _read_tsv(out / "seeds.tsv"):
        assert abs(float(row["alpha_1"]) - 0.5) <= 1e-6
        assert abs(float(row["alpha_2"]) - 0.5) <= 1e-6
    rec = json.loads((out / "mkpkm_seed0.json").read_text())
    assert len(rec["config"]["alpha"]) == 2


def test_multi_informative_view_outweighs_noise(tmp_path):
    X, y = make_blobs(200, 3, dim=2, separation=10.0, seed=3)
    N = np.random.default_rng(3).standard_normal((200, 2))
    views = [(V - V.mean(0)) / V.std(0) for V in (X, N)]
    m = _write_manifest(tmp_path, views, y)
    out = tmp_path / "out"
    assert cli.main(["cluster-multi", "--manifest", str(m), "-k", "3", "--seeds", "5",
                     "--out-dir", str(out)]) == 0
    rows = _read_tsv(out / "seeds.tsv")
    assert sum(float(r["alpha_1"]) > float(r["alpha_2"]) for r in rows) > len(rows) / 2


def test_multi_lambda_sweep_one_row_per_value(tmp_path):
    X, y = make_blobs(90, 3, dim=2, separation=10.0, seed=4)
    m = _write_manifest(tmp_path, [X, X], y)
    out = tmp_path / "out"
    lams = ["0.1", "1", "10", "100", "1000"]
    assert cli.main(["cluster-multi", "--manifest", str(m), "-k", "3", "--seeds", "2",
                     "--lam", *lams, "--out-dir", str(out)]) == 0
    assert [r["setting"] for r in _read_tsv(out / "summary.tsv")] == [f"lam={v}" for v in lams]
    assert (out / "lam1000_mkpkm_seed1.json").exists()


def test_multi_ablation_flag(tmp_path):
    X, y = make_blobs(90, 3, dim=2, separation=10.0, seed=4)
    m = _write_manifest(tmp_path, [X], y)
    out = tmp_path / "out"
    assert cli.main(["cluster-multi", "--manifest", str(m), "-k", "3", "--seeds", "1",
                     "--no-possibilistic", "--out-dir", str(out)]) == 0
    assert json.loads((out / "mkpkm_seed0.json").read_text())["config"]["possibilistic"] is False


def test_dim_sweep_single_row(blob_csv, tmp_path):
    out = tmp_path / "out"
    assert cli.main(["dim-sweep", "--data", str(blob_csv), "--label-column", "-1", "-k", "3",
                     "--dims", "8", "--seeds", "3", "--out-dir", str(out)]) == 0
    rows = _read_tsv(out / "dim_sweep.tsv")
    assert len(rows) == 1 and rows[0]["D"] == "8"


def test_dim_sweep_needs_labels(tmp_path):
    X, _ = make_blobs(30, 2, seed=0)
    np.savetxt(tmp_path / "x.csv", X, delimiter=",")
    assert cli.main(["dim-sweep", "--data", str(tmp_path / "x.csv"), "-k", "2",
                     "--out-dir", str(tmp_path)]) == 2


def test_dim_sweep_median_smoothed_trend_is_nondecreasing():
    # median over 20 seeds at each D, then a running median of width three across D
    X, y = make_blobs(200, 3, dim=10, separation=2.0, seed=8)
    dims = list(range(5, 101, 5))
    per_dim = np.array([np.median([accuracy(fit_kpkm(X, 3, D=D, seed=s).assignments, y)
                                   for s in range(20)]) for D in dims])
    padded = np.concatenate([per_dim[:1], per_dim, per_dim[-1:]])
    smooth = [np.median(padded[i:i + 3]) for i in range(len(per_dim))]
    assert all(b >= a for a, b in zip(smooth, smooth[1:])), np.round(smooth, 3)
    assert smooth[-1] > smooth[0]


def test_rff_probe_rows(tmp_path):
    out = tmp_path / "out"
    assert cli.main(["rff-probe", "--dims", "64,256,1024,4096", "--repeats", "20",
                     "--out-dir", str(out)]) == 0
    rows = _read_tsv(out / "rff_probe.tsv")
    abs_err = [float(r["max_abs_error"]) for r in rows]
    rel_err = [float(r["max_rel_error"]) for r in rows]
    assert all(np.isfinite(abs_err)) and all(e > 0 for e in abs_err + rel_err)
    assert all(b < a for a, b in zip(abs_err, abs_err[1:]))


def test_rff_probe_large_dimension_accuracy():
    ((D, err, _),) = cli.rff_probe(d=2, sigma=1.0, dims=[20000], pairs=100, seed=3)
    assert D == 20000 and err <= 0.03
