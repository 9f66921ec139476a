from risched.channel import derive_rng
from risched.cli import main
from risched.config import OptimParams, Scenario, save_scenario
from risched.gnn import GnnArch, random_init_model, save_model

from conftest import toy_config


def write_scenario(tmp_path, **overrides):
    cfg = toy_config(Upsilon=2, **overrides)
    opt = OptimParams(wmmse_max_iter=40, rcg_max_iter=20, bcd_max_outer=2)
    path = tmp_path / "scenario.cfg"
    save_scenario(Scenario(system=cfg, optim=opt), path)
    return cfg, path


def write_models(tmp_path, cfg):
    rng = derive_rng(90, 0)
    paths = []
    for d, name in ((cfg.D_beta, "sched"), (cfg.D_theta, "ris")):
        model = random_init_model(GnnArch(M=cfg.M, N=cfg.N, D=d, Z=2,
                                          g_hidden=12, repr_dim=12), rng)
        p = tmp_path / f"{name}.bin"
        save_model(model, p)
        paths.append(str(p))
    return paths


def test_gen_run_eval_pipeline(tmp_path, capsys):
    cfg, scenario = write_scenario(tmp_path)
    sched_path, ris_path = write_models(tmp_path, cfg)
    cache = tmp_path / "cache"

    dump = tmp_path / "pilots.csv"
    assert main(["gen", "--config", str(scenario), "--out-dir", str(cache),
                 "--dump-pilots", str(dump)]) == 0
    assert len(list(cache.glob("stats_*.npz"))) == 2
    assert dump.read_text().startswith("kind,a,b,c,re,im")

    trace = tmp_path / "trace.csv"
    rc = main(["run", "--config", str(scenario), "--scheduler", "gnn3stage",
               "--mode", "extra_pilots", "--model-sched", sched_path,
               "--model-ris", ris_path, "--stats-dir", str(cache),
               "--periods", "2", "--out", str(trace)])
    assert rc == 0
    out = capsys.readouterr().out
    assert "log_utility" in out and "pilot_overhead" in out

    trace_b = tmp_path / "trace_baseline.csv"
    rc = main(["run", "--config", str(scenario), "--scheduler", "greedy_bcd",
               "--csi", "estimated", "--stats-dir", str(cache),
               "--periods", "1", "--out", str(trace_b)])
    assert rc == 0

    cdf = tmp_path / "cdf.csv"
    summary = tmp_path / "summary.csv"
    rc = main(["eval", "--traces", str(trace), str(trace_b),
               "--out", str(cdf), "--summary", str(summary)])
    assert rc == 0
    lines = cdf.read_text().strip().splitlines()
    assert lines[0] == "rate,cdf"
    assert len(lines) == 1 + 2 * cfg.K
    assert "sched_fraction" in summary.read_text()


def test_run_outputs_byte_identical(tmp_path):
    cfg, scenario = write_scenario(tmp_path)
    out_a = tmp_path / "a.csv"
    out_b = tmp_path / "b.csv"
    for out in (out_a, out_b):
        rc = main(["run", "--config", str(scenario), "--scheduler", "random",
                   "--periods", "2", "--seed", "5", "--out", str(out)])
        assert rc == 0
    assert out_a.read_bytes() == out_b.read_bytes()


def test_validation_failure_exit_code(tmp_path, capsys):
    cfg, scenario = write_scenario(tmp_path)
    rc = main(["run", "--config", str(scenario), "--scheduler", "gnn3stage"])
    assert rc == 1
    assert "error" in capsys.readouterr().err

    bad = tmp_path / "bad.cfg"
    bad.write_text("m = 0\n", encoding="utf-8")
    assert main(["run", "--config", str(bad), "--scheduler", "random"]) == 1


def test_trace_rows_match_trace_shape(tmp_path):
    cfg, scenario = write_scenario(tmp_path)
    out = tmp_path / "t.csv"
    main(["run", "--config", str(scenario), "--scheduler", "round_robin",
          "--periods", "2", "--out", str(out)])
    rows = [l for l in out.read_text().splitlines()
            if l and not l.startswith("#") and not l.startswith("period,")]
    assert len(rows) == 2 * cfg.Upsilon * cfg.K
