import csv

import numpy as np
import pytest

from curvkit import InvalidInputError, OrientedPointCloud
from curvkit.cli import main
from curvkit.io import (
    CURVATURE_HEADER,
    REPORT_HEADER,
    XyzFormatError,
    read_curvature_csv,
    read_xyz,
    write_curvature_csv,
    write_xyz,
)
from curvkit.surfaces import Sphere, sample_surface
from curvkit.wme import estimate_field


def test_xyz_roundtrip_exact(tmp_path, rng):
    pos = rng.normal(size=(50, 3)) * 1e3
    nrm = rng.normal(size=(50, 3))
    nrm /= np.linalg.norm(nrm, axis=1)[:, None]
    cloud = OrientedPointCloud(pos, nrm)
    write_xyz(cloud, tmp_path / "a.xyz")
    back = read_xyz(tmp_path / "a.xyz")
    assert np.array_equal(back.positions, pos)
    assert np.allclose(back.normals, nrm, atol=1e-15)
    write_xyz(OrientedPointCloud(pos), tmp_path / "b.xyz")
    assert read_xyz(tmp_path / "b.xyz").normals is None


def test_xyz_comments_and_renormalisation(tmp_path):
    p = tmp_path / "c.xyz"
    p.write_text("# header\n\n0 0 0 0 0 2\n1 0 0 0 0 1\n")
    with pytest.warns(RuntimeWarning):
        c = read_xyz(p)
    assert np.allclose(c.normals, [[0, 0, 1], [0, 0, 1]])


@pytest.mark.parametrize("text", ["0 0\n", "0 0 0\n1 0 0 0 0 1\n", "0 0 x\n", "", "# only\n",
                                  "0 0 0 0 0 0\n", "0 0 nan\n"])
def test_xyz_malformed(tmp_path, text):
    p = tmp_path / "bad.xyz"
    p.write_text(text)
    with pytest.raises(XyzFormatError):
        read_xyz(p)


def test_xyz_error_names_line(tmp_path):
    p = tmp_path / "bad.xyz"
    p.write_text("0 0 0\n1 1 1\n2 2\n")
    with pytest.raises(XyzFormatError, match=":3:"):
        read_xyz(p)


def test_curvature_csv_roundtrip(tmp_path):
    s = sample_surface(Sphere(), 200, seed=0)
    f = estimate_field(s.cloud, 10)
    write_curvature_csv(f, s.cloud, tmp_path / "k.csv")
    t = read_curvature_csv(tmp_path / "k.csv")
    assert np.array_equal(t["K"], f.K) and np.array_equal(t["d1x"], f.dir1[:, 0])
    assert np.array_equal(t["id"], np.arange(200))
    with open(tmp_path / "k.csv") as fh:
        assert next(csv.reader(fh)) == CURVATURE_HEADER
    (tmp_path / "x.csv").write_text("a,b\n1,2\n")
    with pytest.raises(InvalidInputError):
        read_curvature_csv(tmp_path / "x.csv")


def run(*args):
    return main([str(a) for a in args])


def test_cli_pipeline(tmp_path):
    xyz, curv, out, mm = (tmp_path / n for n in ("t.xyz", "k.csv", "s.xyz", "m.csv"))
    assert run("sample", "--surface", "torus", "--params", "5,2", "--n", 1500, "--out", xyz,
               "--truth", tmp_path / "truth.csv") == 0
    assert len(read_xyz(xyz)) == 1500
    assert run("estimate", "--in", xyz, "--k", "auto", "--out", curv) == 0
    t = read_curvature_csv(curv)
    assert len(t["K"]) == 1500 and np.all(t["flag"] == 0)
    assert run("simplify", "--in", xyz, "--curv", curv, "--T", 20, "--out", out, "--member-map", mm) == 0
    m = np.loadtxt(mm, delimiter=",", skiprows=1, dtype=int)
    assert len(m) == 1500 and len(read_xyz(out)) == m[:, 1].max() + 1


def test_cli_is_deterministic(tmp_path):
    for name in ("a", "b"):
        run("sample", "--surface", "sphere", "--n", 500, "--seed", 3, "--out", tmp_path / f"{name}.xyz")
        run("estimate", "--in", tmp_path / f"{name}.xyz", "--k", 20, "--out", tmp_path / f"{name}.csv")
    assert (tmp_path / "a.xyz").read_bytes() == (tmp_path / "b.xyz").read_bytes()
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_cli_estimates_pca_normals_when_missing(tmp_path, caplog):
    xyz = tmp_path / "n.xyz"
    run("sample", "--surface", "sphere", "--n", 2000, "--noise-sigma2", 1e-6, "--out", xyz)
    assert read_xyz(xyz).normals is None
    assert run("estimate", "--in", xyz, "--k", 60, "--out", tmp_path / "k.csv") == 0
    assert "PCA normals" in caplog.text
    t = read_curvature_csv(tmp_path / "k.csv")
    assert np.median(t["K"]) == pytest.approx(1.0, abs=0.1)


def test_cli_normals_and_quad(tmp_path):
    xyz = tmp_path / "p.xyz"
    run("sample", "--surface", "sphere", "--n", 1000, "--out", xyz)
    assert run("normals", "--in", xyz, "--k", 15, "--out", tmp_path / "n.xyz") == 0
    assert read_xyz(tmp_path / "n.xyz").normals is not None
    assert run("estimate", "--in", xyz, "--method", "quad", "--k", 30, "--out", tmp_path / "q.csv") == 0


def test_cli_benchmark_modes(tmp_path):
    for mode in ("convergence", "compare", "holdout"):
        out = tmp_path / f"{mode}.csv"
        assert run("benchmark", "--mode", mode, "--n-list", "600,1200", "--trials", 1,
                   "--k-rule", "fixed:40", "--fractions", "0.5,0.8", "--out", out) == 0
        with open(out) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == REPORT_HEADER and len(rows) > 1


def test_cli_exit_codes(tmp_path, capsys):
    assert run("estimate", "--bogus") == 1
    assert run("frobnicate") == 1
    assert run("estimate", "--in", tmp_path / "missing.xyz", "--out", tmp_path / "o.csv") == 2
    bad = tmp_path / "bad.xyz"
    bad.write_text("1 2\n")
    assert run("estimate", "--in", bad, "--out", tmp_path / "o.csv") == 2
    assert run("sample", "--surface", "torus", "--params", "2,5", "--n", 10, "--out", bad) == 2
    xyz = tmp_path / "s.xyz"
    run("sample", "--surface", "sphere", "--n", 100, "--out", xyz)
    assert run("simplify", "--in", xyz, "--out", tmp_path / "o.xyz") == 1


def test_cli_all_degenerate_exit_3(tmp_path):
    xyz = tmp_path / "line.xyz"
    xyz.write_text("".join(f"{i} 0 0 1 0 0\n" for i in range(10)))
    assert run("estimate", "--in", xyz, "--k", 3, "--oriented", "--out", tmp_path / "o.csv") == 3
