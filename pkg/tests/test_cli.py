import json
import subprocess
import sys

import numpy as np
import pytest

from permlab import cli


def run_cli(args):
    return subprocess.run(
        [sys.executable, "-m", "permlab.cli", *args], capture_output=True, text=True
    )


@pytest.fixture()
def kernel_csv(tmp_path):
    p = tmp_path / "kernel.csv"
    p.write_text("1,0\n0,1\n")
    return str(p)


def test_classify_identity(kernel_csv):
    out = run_cli(["classify", kernel_csv])
    assert out.returncode == 0
    rep = json.loads(out.stdout)["report"]
    assert rep["has_pd_sym_part"] and rep["gamma"] == 1.0 and rep["is_m_matrix"]


def test_classify_m_matrix(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("2,-1\n-1,2\n")
    out = run_cli(["classify", str(p)])
    assert json.loads(out.stdout)["report"]["is_m_matrix"]


def test_classify_malformed_exits_2(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("1,oops\n")
    out = run_cli(["classify", str(p)])
    assert out.returncode == 2
    assert "column 2" in out.stderr


def test_density_sweep_n1_matches_closed_form(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(
        json.dumps(
            {"kernel": {"rows": [[2.0]]}, "l_grid": {"per_dim": [[0.5, 1.0, 2.0]]}, "seed": 1}
        )
    )
    out_csv = tmp_path / "sweep.csv"
    res = run_cli(["density", "--config", str(cfg), "--out", str(out_csv)])
    assert res.returncode == 0
    lines = out_csv.read_text().strip().splitlines()
    assert lines[0] == "l1,rho_quad,rho_series,residue"
    for line in lines[1:]:
        l, rq, rs, resid = (float(t) for t in line.split(","))
        assert rq == pytest.approx(np.exp(-l / 2) / 2, rel=1e-12)
        assert rs == pytest.approx(rq, rel=1e-10)


def test_density_cost_guard_exit_4(tmp_path):
    cfg = tmp_path / "cfg.json"
    eye6 = np.eye(6).tolist()
    cfg.write_text(
        json.dumps({"kernel": {"rows": eye6}, "K": 64, "l_grid": {"points": [[0.1] * 6]}})
    )
    res = run_cli(["density", "--config", str(cfg), "--out", str(tmp_path / "x.csv")])
    assert res.returncode == 4


def test_sample_determinism_and_provenance(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(
        json.dumps(
            {
                "sampler": "loop_soup",
                "model": {"P": [[0, 0.8, 0.2], [0.3, 0, 0.7], [0.5, 0.5, 0]]},
                "h": [0.5, 0.3, 0.8],
                "n_samples": 50,
                "seed": 9,
            }
        )
    )
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    r1 = run_cli(["sample", "--config", str(cfg), "--out", str(a)])
    r2 = run_cli(["sample", "--config", str(cfg), "--out", str(b)])
    assert r1.returncode == 0 and r2.returncode == 0
    assert a.read_bytes() == b.read_bytes()
    lines = a.read_text().strip().splitlines()
    assert lines[0].endswith("provenance")
    assert all(line.endswith("loop_soup") for line in lines[1:])
    record = json.loads(r1.stdout)
    assert record["config"]["seed"] == 9  # echoed config carries the seed


def test_verify_pass_fail_and_unknown_kind(tmp_path):
    ok_cfg = tmp_path / "ok.json"
    ok_cfg.write_text(
        json.dumps(
            {
                "kind": "laplace",
                "sampler_config": {"sampler": "gaussian", "kernel": {"rows": [[1.0, 0.4], [0.4, 1.2]]}},
                "N": 20000,
                "seed": 5,
            }
        )
    )
    res = run_cli(["verify", "--config", str(ok_cfg)])
    assert res.returncode == 0
    assert json.loads(res.stdout)["passed"]

    bad_cfg = tmp_path / "bad.json"
    bad_cfg.write_text(
        json.dumps(
            {
                "kind": "laplace",
                "sampler_config": {"sampler": "gaussian", "kernel": {"rows": [[1.0, 0.4], [0.4, 1.2]]}},
                "claimed_kernel": {"rows": [[1.2, 0.4], [0.4, 1.2]]},
                "N": 50000,
                "seed": 5,
            }
        )
    )
    res = run_cli(["verify", "--config", str(bad_cfg)])
    assert res.returncode == 1

    unk = tmp_path / "unk.json"
    unk.write_text(json.dumps({"kind": "nonsense"}))
    assert run_cli(["verify", "--config", str(unk)]).returncode == 2


def test_verify_thread_independence(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(
        json.dumps(
            {
                "kind": "laplace",
                "sampler_config": {"sampler": "gaussian", "kernel": {"rows": [[1.0, 0.4], [0.4, 1.2]]}},
                "N": 30000,
                "seed": 5,
            }
        )
    )
    outs = []
    for threads in ("1", "3"):
        res = run_cli(["verify", "--config", str(cfg), "--threads", threads])
        rec = json.loads(res.stdout)
        rec.pop("wall_time_s")
        rec.pop("threads")
        outs.append(rec)
    assert outs[0] == outs[1]


def test_seed_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(
        json.dumps(
            {
                "sampler": "gaussian",
                "kernel": {"rows": [[1.0, 0.4], [0.4, 1.2]]},
                "n_samples": 20,
                "seed": 1,
            }
        )
    )
    a = run_cli(["sample", "--config", str(cfg), "--out", str(tmp_path / "a.csv"), "--seed", "77"])
    b = run_cli(["sample", "--config", str(cfg), "--out", str(tmp_path / "b.csv"), "--seed", "77"])
    c = run_cli(["sample", "--config", str(cfg), "--out", str(tmp_path / "c.csv")])
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert (tmp_path / "a.csv").read_bytes() != (tmp_path / "c.csv").read_bytes()


def test_main_entrypoint_inprocess(tmp_path, capsys):
    p = tmp_path / "id.csv"
    p.write_text("1,0\n0,1\n")
    assert cli.main(["classify", str(p)]) == 0
    rec = json.loads(capsys.readouterr().out)
    assert rec["report"]["certified_family"] == "psd_symmetric"
