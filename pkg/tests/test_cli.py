import csv
import json

import pytest

from cssnorm import cli
from cssnorm import nonlin as nl
from cssnorm import solver as so
from cssnorm.errors import NoFixedPoint

P6 = {"family": "PurePower", "params": {"p": 6}, "theta": 6.0}
SUPER = nl.NonlinearitySpec(nl.Supercritical(0.02, 3.0, 1.0, 6.0, 1.0, 1.5, 10.0), 6.0).to_dict()


def run(tmp_path, command, cfg, *flags):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    out = tmp_path / "runs"
    code = cli.main([command, "--config", str(path), "--out", str(out), "--quiet", *flags])
    dirs = sorted(out.iterdir()) if out.exists() else []
    return code, (dirs[-1] if dirs else None)


# -- plumbing -------------------------------------------------------------------------

def test_run_dir_named_by_command_and_hash(tmp_path):
    cfg = {"spec": P6, "solver": {"a": 0.0}, "grid": {"L": 5, "N": 64}}
    _, d = run(tmp_path, "solve", cfg)
    assert d.name.endswith("-solve-" + cli.config_hash(cfg))
    assert json.loads((d / "config.json").read_text()) == cfg


def test_config_hash_is_order_independent():
    assert cli.config_hash({"a": 1, "b": 2}) == cli.config_hash({"b": 2, "a": 1})


def test_unreadable_config(tmp_path, capsys):
    assert cli.main(["solve", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text("[1, 2]")
    assert cli.main(["solve", "--config", str(bad), "--out", str(tmp_path)]) == 1


def test_field_path_errors(tmp_path, capsys):
    code, d = run(tmp_path, "solve", {"spec": P6, "solver": {"a": 0.5, "dt": "fast"}, "grid": {"L": 5, "N": 64}})
    assert code == 1 and "solver.dt" in capsys.readouterr().err
    code, _ = run(tmp_path, "solve", {"spec": P6, "solver": {"a": 0.5, "bogus": 1}, "grid": {"L": 5, "N": 64}})
    assert code == 1 and "bogus" in capsys.readouterr().err
    code, _ = run(tmp_path, "solve", {"spec": P6, "solver": {"a": 0.5}})
    assert code == 1 and "grid" in capsys.readouterr().err


# -- solve --------------------------------------------------------------------------------

@pytest.mark.slow
def test_solve_ok(tmp_path):
    code, d = run(tmp_path, "solve", {"spec": P6, "solver": {"a": 0.5}, "grid": {"auto": True, "N": 512}})
    assert code == 0
    sol = json.loads((d / "solution.json").read_text())
    assert sol["status"] == "ok" and sol["lambda"] > 0 and sol["converged"]
    assert (d / "progress.csv").read_text().startswith("step,E,J,gradnorm,mass")


def test_solve_a_zero(tmp_path, capsys):
    code, d = run(tmp_path, "solve", {"spec": P6, "solver": {"a": 0}, "grid": {"L": 5, "N": 64}})
    assert code == 1
    assert "a must be nonzero" in capsys.readouterr().err
    assert "a must be nonzero" in (d / "error.txt").read_text()


def test_solve_domain_too_small(tmp_path):
    code, d = run(tmp_path, "solve", {"spec": P6, "solver": {"a": 0.5}, "grid": {"L": 0.3, "N": 64}}, "--binary")
    assert code == 3
    assert json.loads((d / "solution.json").read_text())["status"] == "domain_too_small"
    assert (d / "u.bin").exists()


def test_solve_max_steps(tmp_path):
    cfg = {"spec": P6, "solver": {"a": 0.5, "max_steps": 5, "newton": False}, "grid": {"auto": True, "N": 128}}
    code, d = run(tmp_path, "solve", cfg)
    assert code == 2
    assert json.loads((d / "solution.json").read_text())["status"] == "max_steps"


# -- moser ---------------------------------------------------------------------------------

def test_moser_two_rows(tmp_path):
    code, d = run(tmp_path, "moser", {"moser": {"a": 1.0, "rho": 1.0, "n_list": [10, 100], "N": 256}})
    assert code == 0
    with open(d / "moser.csv") as fh:
        rows = list(csv.reader(fh))
    assert len(rows) == 3
    res = json.loads((d / "threshold.json").read_text())
    assert len(res["rows"]) == 2


def test_moser_threshold_block(tmp_path):
    crit = nl.NonlinearitySpec(nl.CriticalExp(alpha0=1.0, beta=50.0, order=3), 6.0).to_dict()
    block = {"a": 1.0, "rho": 1.0, "n_list": [10, 100], "N": 128, "alpha0": 1.0, "theta": 6.0, "beta0": 50.0,
             "threshold": {"spec": crit}}
    code, d = run(tmp_path, "moser", {"moser": block})
    assert code == 0
    thr = json.loads((d / "threshold.json").read_text())["threshold"]
    assert len(thr["reports"]) == 2 and thr["c_star"] == pytest.approx(6.283185307179586)


def test_moser_missing_rho(tmp_path, capsys):
    code, _ = run(tmp_path, "moser", {"moser": {"a": 1.0, "n_list": [10, 100]}})
    assert code == 1 and "moser.rho" in capsys.readouterr().err


def test_moser_rn_violation(tmp_path, capsys):
    code, _ = run(tmp_path, "moser", {"moser": {"Rn": 0.5, "rho": 1.0, "n_list": [10]}})
    err = capsys.readouterr().err
    assert code == 1 and "Eq. (Rn)" in err and "1.03039" in err


def test_moser_bad_n_list(tmp_path):
    assert run(tmp_path, "moser", {"moser": {"a": 1.0, "rho": 1.0, "n_list": [100, 10]}})[0] == 1
    assert run(tmp_path, "moser", {"moser": {"a": 1.0, "rho": 1.0, "n_list": []}})[0] == 1


# -- verify ---------------------------------------------------------------------------------

def test_verify_default_corpus(tmp_path):
    code, d = run(tmp_path, "verify", {"spec": P6})
    res = json.loads((d / "verify.json").read_text())
    assert code == 0 and res["all_passed"], [c for c in res["checks"] if not c["passed"]]
    names = {c["name"] for c in res["checks"]}
    assert {"gauge0", "radial_ansatz", "nehari_minus_pohozaev_is_J", "ar", "fbar_monotone"} <= names
    assert (d / "gauge_bounds.json").exists()


def test_verify_ar_violation(tmp_path):
    code, d = run(tmp_path, "verify", {"spec": dict(P6, theta=7.0)})
    assert code == 4
    checks = {c["name"]: c["passed"] for c in json.loads((d / "verify.json").read_text())["checks"]}
    assert checks["ar"] is False


def test_verify_empty_corpus(tmp_path, capsys):
    code, _ = run(tmp_path, "verify", {"spec": P6, "verify": {"corpus": []}})
    assert code == 1 and "empty corpus" in capsys.readouterr().err


def test_verify_bad_r(tmp_path):
    assert run(tmp_path, "verify", {"spec": P6, "verify": {"r": 2.5}})[0] == 1


# -- sweep ------------------------------------------------------------------------------------

def _fake_solver(energies):
    from conftest import gaussian
    from test_solver import _fake_record

    def fake(spec, cfg, grid, **kw):
        return _fake_record(gaussian(grid), spec, E=energies[cfg.a])

    return fake


def test_sweep_three_rows(tmp_path, monkeypatch):
    monkeypatch.setattr(so, "minimize_on_sphere", _fake_solver({0.3: 5.0, 0.4: 4.0, 0.5: 3.0}))
    cfg = {"spec": P6, "sweep": {"a_list": [0.3, 0.4, 0.5]}, "grid": {"L": 8, "N": 64}}
    code, d = run(tmp_path, "sweep", cfg)
    assert code == 0
    with open(d / "sweep.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["a", "m", "lambda", "converged", "L", "monotone_ok"]
    assert len(rows) == 4 and all(r[5] == "True" for r in rows[1:])


def test_sweep_monotonicity_failure(tmp_path, monkeypatch):
    monkeypatch.setattr(so, "minimize_on_sphere", _fake_solver({0.3: 5.0, 0.4: 6.0}))
    code, _ = run(tmp_path, "sweep", {"spec": P6, "sweep": {"a_list": [0.3, 0.4]}, "grid": {"L": 8, "N": 64}})
    assert code == 4


# -- supercritical -----------------------------------------------------------------------------

def _fake_super(solved, raise_nfp=False):
    from conftest import gaussian
    from test_solver import _fake_record

    def fake(spec, cfg, grid, R_init, max_outer, mode, progress=None):
        g = grid if not callable(grid) else grid(spec)
        rec = _fake_record(gaussian(g), spec)
        rec.extra.update(original_problem_solved=solved, R=R_init, outer_trace=[])
        if raise_nfp:
            err = NoFixedPoint("no fixed point")
            err.record = rec
            raise err
        return rec

    return fake


SC_CFG = {"spec": SUPER, "solver": {"a": 0.5}, "grid": {"L": 8, "N": 64}, "supercritical": {"R_init": 1.0}}


def test_supercritical_accepted(tmp_path, monkeypatch):
    monkeypatch.setattr(so, "solve_supercritical", _fake_super(True))
    code, d = run(tmp_path, "supercritical", SC_CFG)
    assert code == 0
    assert (d / "supercritical.json").exists()


def test_supercritical_no_fixed_point(tmp_path, monkeypatch):
    monkeypatch.setattr(so, "solve_supercritical", _fake_super(False, raise_nfp=True))
    assert run(tmp_path, "supercritical", SC_CFG)[0] == 5
    monkeypatch.setattr(so, "solve_supercritical", _fake_super(False))
    assert run(tmp_path, "supercritical", SC_CFG)[0] == 5


def test_supercritical_needs_supercritical_spec(tmp_path):
    assert run(tmp_path, "supercritical", dict(SC_CFG, spec=P6))[0] == 1
    bad = dict(SC_CFG, supercritical={"R_init": 1.0, "mode": "nonsense"})
    assert run(tmp_path, "supercritical", bad)[0] == 1


def test_console_script_help():
    with pytest.raises(SystemExit) as ei:
        cli.main(["--help"])
    assert ei.value.code == 0
