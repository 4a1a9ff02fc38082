import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from grushin_pohozaev.cli import main
from grushin_pohozaev.config import parse_config
from grushin_pohozaev.exceptions import ConfigError
from grushin_pohozaev.geometry import GrushinGeometry
from grushin_pohozaev.solver import oracle_torsion

BASE = {
    "geometry": {"N": 1, "l": 2, "gamma": 1.0, "p": 2},
    "domain": {"bounds": [-1, 1], "resolution": 9},
    "nonlinearity": "1",
    "subdomain": {"lower": [0.25, -0.5, -0.25], "upper": [0.75, 0.25, 0.5]},
}


def write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg, indent=2))
    return str(path)


def run(tmp_path, argv, cfg):
    out = tmp_path / "out"
    code = main(argv + ["--config", write(tmp_path, cfg), "--out", str(out)])
    return code, out


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_solve_zero_forcing(tmp_path):
    code, out = run(tmp_path, ["solve"], {**BASE, "nonlinearity": "0"})
    assert code == 0
    rows = read_csv(out / "solution.csv")
    assert rows[0] == ["z1", "z2", "z3", "u"]
    assert all(float(r[3]) == 0.0 for r in rows[1:])
    assert json.loads((out / "solve.json").read_text())["converged"]


def test_solve_torsion_golden(tmp_path):
    # comparison principle: the cube solution lies between the torsion
    # solutions of the inscribed and circumscribed balls
    cfg = {**BASE, "geometry": {"N": 1, "l": 2, "gamma": 0, "p": 2}, "domain": {"bounds": [-1, 1], "resolution": 17}}
    code, out = run(tmp_path, ["solve"], cfg)
    assert code == 0
    rows = np.array([[float(v) for v in r] for r in read_csv(out / "solution.csv")[1:]])
    z, u = rows[:, :3], rows[:, 3]
    geo = GrushinGeometry(1, 2, 0.0, 2.0)
    assert np.all(u >= oracle_torsion(geo, 1.0)(z) - 1e-9)
    assert np.all(u <= oracle_torsion(geo, np.sqrt(3.0))(z) + 1e-9)
    centre = u[np.argmin(np.linalg.norm(z, axis=1))]
    assert centre == pytest.approx(0.22352, abs=1e-4)


def test_solve_trace_csv(tmp_path):
    code, out = run(tmp_path, ["solve"], BASE)
    assert code == 0
    rows = read_csv(out / "trace.csv")
    assert rows[0] == ["iteration", "energy", "grad_norm", "step"]


def test_malformed_nonlinearity(tmp_path, capsys):
    code, _ = run(tmp_path, ["solve"], {**BASE, "nonlinearity": "x1 * q"})
    assert code == 1
    err = capsys.readouterr().err
    assert "'q'" in err and "line" in err


def test_non_convergence_exit_code(tmp_path):
    code, out = run(tmp_path, ["solve"], {**BASE, "solver": {"max_iter": 3}})
    assert code == 2
    assert not json.loads((out / "solve.json").read_text())["converged"]


def test_verify_trivial(tmp_path):
    code, out = run(tmp_path, ["verify", "scale-local"], {**BASE, "nonlinearity": "0"})
    assert code == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["residual"] == 0 and rep["relative_residual"] == 0
    assert list(rep["terms"])[0] == "lhs.t1"


def test_verify_threshold_exit(tmp_path):
    code, _ = run(tmp_path, ["verify", "translate-y", "1", "--threshold", "0"], BASE)
    assert code == 3
    code, _ = run(tmp_path, ["verify", "translate-y", "1", "--threshold", "1"], BASE)
    assert code == 0


def test_verify_index_checked(tmp_path, capsys):
    code, _ = run(tmp_path, ["verify", "translate-x", "2"], BASE)
    assert code == 1
    code, _ = run(tmp_path, ["verify", "translate-y"], BASE)
    assert code == 1
    assert "1..2" in capsys.readouterr().err


def test_verify_singular_slab(tmp_path, capsys):
    cfg = {**BASE, "geometry": {"N": 1, "l": 2, "gamma": 0.5, "p": 2},
           "subdomain": {"lower": [0.0, -0.5, -0.25], "upper": [0.5, 0.25, 0.5]}}
    code, _ = run(tmp_path, ["verify", "translate-x", "1"], cfg)
    assert code == 1
    assert "x = 0" in capsys.readouterr().err


def test_verify_refinement(tmp_path):
    code, out = run(tmp_path, ["verify", "scale-global", "--levels", "2", "--threshold", "1"], BASE)
    assert code == 0
    rows = read_csv(out / "refinement.csv")
    assert rows[0] == ["h", "residual", "relative_residual", "collapse_residual"]
    assert len(rows) == 3
    assert "order" in json.loads((out / "refinement.json").read_text())["summary"]


def test_study_refinement(tmp_path):
    cfg = {**BASE, "study": {"identity": "translate-y", "index": 2, "levels": [9, 17]}}
    code, out = run(tmp_path, ["study", "refinement"], cfg)
    assert code == 0
    assert len(read_csv(out / "refinement.csv")) == 3


def test_study_whole_space(tmp_path):
    cfg = {**BASE, "nonlinearity": "bump(0.5)", "study": {"radii": [1.0, 1.5], "h": 0.25}}
    code, out = run(tmp_path, ["study", "whole-space"], cfg)
    assert code == 0
    summary = json.loads((out / "whole_space.json").read_text())["summary"]
    assert summary["boundary_term_decreasing"] is True


def test_study_stationarity(tmp_path, capsys):
    cfg = {**BASE, "subdomain": {"lower": [0.125, -0.25, -0.25], "upper": [0.375, 0.25, 0.25]},
           "study": {"delta": 0.3, "variation": "scale", "levels": [9], "oversample": 1, "steps": [0.005, 0.0025]}}
    code, out = run(tmp_path, ["study", "stationarity"], cfg)
    assert code == 0
    assert read_csv(out / "stationarity.csv")[0] == ["h", "slope"]
    cfg["study"]["delta"] = 0.9
    code, _ = run(tmp_path, ["study", "stationarity"], cfg)
    assert code == 1
    assert "delta" in capsys.readouterr().err


def test_study_abort_writes_partial_table(tmp_path):
    cfg = {**BASE, "solver": {"max_iter": 3}, "study": {"levels": [9, 17]}}
    code, out = run(tmp_path, ["study", "refinement"], cfg)
    assert code == 2
    assert read_csv(out / "refinement.csv") == [["h", "residual", "relative_residual", "aux_residual"]]


def test_deterministic_reports(tmp_path):
    cfg = {**BASE, "solver": {"init": "random"}}
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        assert main(["verify", "scale-local", "--seed", "4", "--config", write(tmp_path, cfg), "--out", str(out)]) == 0
        outs.append(out)
    for name in ("report.json",):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
    for k in range(2):
        main(["solve", "--seed", "4", "--config", write(tmp_path, cfg), "--out", str(outs[k])])
    for name in ("solution.csv", "trace.csv", "solve.json"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_config_line_numbers():
    text = json.dumps({**BASE, "geometry": {"N": 1, "l": 2, "gamma": 1.0}}, indent=2)
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.line == 2 and "geometry.p" in str(info.value)
    with pytest.raises(ConfigError) as info:
        parse_config('{\n  "geometry": {\n    "N": 1,\n  }\n}')
    assert info.value.line == 4
    text = json.dumps({**BASE, "solver": {"tolerance": 1}}, indent=2)
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert "solver.tolerance" in str(info.value)
    assert text.splitlines()[info.value.line - 1].strip().startswith('"tolerance"')


@pytest.mark.parametrize(
    "patch",
    [
        {"geometry": {"N": 1, "l": 2, "gamma": -1, "p": 2}},
        {"geometry": {"N": 1.5, "l": 2, "gamma": 0, "p": 2}},
        {"domain": {"bounds": [1, -1], "resolution": 9}},
        {"domain": {"bounds": [-1, 1], "resolution": 2}},
        {"nonlinearity": 3},
        {"threshold": -1},
        {"subdomain": {"lower": [0, 0], "upper": [1, 1]}},
        {"extra": 1},
    ],
)
def test_config_rejects(patch):
    with pytest.raises(ConfigError):
        parse_config(json.dumps({**BASE, **patch}))


def test_missing_file(tmp_path, capsys):
    assert main(["solve", "--config", str(tmp_path / "none.json"), "--out", str(tmp_path)]) == 1


def test_levels_from_count():
    cfg = parse_config(json.dumps(BASE))
    assert cfg.levels(3) == [9, 17, 33]
    assert parse_config(json.dumps({**BASE, "study": {"levels": [5, 9]}})).levels() == [5, 9]


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "grushin_pohozaev", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "verify" in proc.stdout
