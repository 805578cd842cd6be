import numpy as np
import pytest

from imblab import __version__
from imblab.cli import main


def _lines(path):
    return path.read_text().splitlines()


def test_info_ellipse(tmp_path, capsys):
    rc = main(["info", "--curve", "ellipse:lambda=2", "--mu", "0.3",
               "--out", str(tmp_path)])
    assert rc == 0
    lines = _lines(tmp_path / "info.csv")
    assert lines[0] == f"# imb-lab v{__version__} info"
    body = "\n".join(lines)
    assert "STRONG_FIELD" in body
    assert "rho_min,0.5" in body
    assert "rho_max,4" in body


def test_info_physics_triple(tmp_path):
    rc = main(["info", "--curve", "circle:R=1", "--B", "2", "--mass", "1",
               "--charge", "-1", "--speed", "1", "--out", str(tmp_path)])
    assert rc == 0
    body = (tmp_path / "info.csv").read_text()
    assert "mu,0.5" in body
    assert "energy,0.5" in body


def test_missing_mu_is_config_error(tmp_path):
    assert main(["info", "--curve", "circle:R=1",
                 "--out", str(tmp_path)]) == 2


def test_bad_curve_is_config_error(tmp_path):
    assert main(["info", "--curve", "square:a=1", "--mu", "0.5",
                 "--out", str(tmp_path)]) == 2


def test_bad_tol_override(tmp_path):
    assert main(["info", "--curve", "circle:R=1", "--mu", "0.5",
                 "--tol-override", "TOL_BOGUS=1", "--out", str(tmp_path)]) == 2


def test_portrait_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        rc = main(["portrait", "--curve", "circle:R=1", "--mu", "0.5",
                   "--grid", "3", "--iters", "25", "--seed", "11",
                   "--out", str(out)])
        assert rc == 0
    assert (a / "portrait.csv").read_bytes() == (b / "portrait.csv").read_bytes()
    assert (a / "portrait.svg").exists()


def test_portrait_empty_grid(tmp_path):
    rc = main(["portrait", "--curve", "circle:R=1", "--mu", "0.5",
               "--grid", "0", "--out", str(tmp_path)])
    assert rc == 0
    lines = _lines(tmp_path / "portrait.csv")
    assert lines[0].startswith("# imb-lab")
    assert len(lines) == 2  # header comment + column names only


def test_orbit_artifacts(tmp_path):
    rc = main(["orbit", "--curve", "ellipse:lambda=2", "--mu", "0.3",
               "--s0", "0.4", "--u0", "0.2", "--iters", "12",
               "--out", str(tmp_path)])
    assert rc == 0
    rows = _lines(tmp_path / "orbit.csv")
    assert len(rows) == 2 + 12
    svg = (tmp_path / "orbit.svg").read_text()
    assert svg.startswith("<?xml") and "<svg" in svg and "polyline" in svg


def test_periodic_success_and_failure(tmp_path):
    rc = main(["periodic", "--curve", "circle:R=1", "--mu", "0.2",
               "--m", "1", "--n", "9", "--out", str(tmp_path)])
    assert rc == 0
    body = (tmp_path / "periodic.csv").read_text()
    assert "status,ok" in body
    assert (tmp_path / "periodic.svg").exists()
    assert (tmp_path / "periodic_orbit.csv").exists()
    # weak field has no variational orbits: numerical failure exit code
    rc = main(["periodic", "--curve", "ellipse:lambda=2", "--mu", "5",
               "--m", "1", "--n", "3", "--out", str(tmp_path)])
    assert rc == 3
    assert "status,failed" in (tmp_path / "periodic.csv").read_text()


def test_check_passes_strong_field(tmp_path):
    rc = main(["check", "--curve", "ellipse:lambda=2", "--mu", "0.3",
               "--grid", "10", "--out", str(tmp_path)])
    assert rc == 0
    body = (tmp_path / "check.csv").read_text()
    assert "fail" not in body


def test_caustic_circle(tmp_path):
    rc = main(["caustic", "--curve", "circle:R=1", "--mu", "0.3",
               "--u0", "0.4", "--iters", "60", "--out", str(tmp_path)])
    assert rc == 0
    assert "caustic-consistent" in (tmp_path / "caustic_summary.csv").read_text()
    assert (tmp_path / "caustic.svg").exists()


def test_config_file_with_flag_override(tmp_path):
    cfgfile = tmp_path / "run.cfg"
    cfgfile.write_text("curve = circle:R=1\nmu = 0.4\nseed = 5\n")
    rc = main(["info", "--config", str(cfgfile), "--mu", "0.6",
               "--out", str(tmp_path)])
    assert rc == 0
    body = (tmp_path / "info.csv").read_text()
    mu_row = [ln for ln in body.splitlines() if ln.startswith("mu,")][0]
    assert float(mu_row.split(",")[1]) == pytest.approx(0.6)  # flag wins
