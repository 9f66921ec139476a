import numpy as np
import pytest

from risched.config import (OptimParams, Scenario, SystemConfig, dbm_to_watts,
                            load_scenario, save_scenario, watts_to_dbm)


def test_dbm_conversion():
    assert dbm_to_watts(15.0) == pytest.approx(0.0316227766, rel=1e-8)
    assert dbm_to_watts(0.0) == pytest.approx(1e-3)
    assert watts_to_dbm(dbm_to_watts(-100.0)) == pytest.approx(-100.0)


def test_default_noise_matches_psd_times_bandwidth():
    cfg = SystemConfig()
    want = dbm_to_watts(-170.0 + 10 * np.log10(10e6))   # -100 dBm
    assert cfg.sigma_d2 == pytest.approx(want, rel=1e-6)


@pytest.mark.parametrize("kw", [
    dict(M=0), dict(K=0), dict(gamma=1.5), dict(P_d=0.0), dict(Upsilon=0),
    dict(D_beta=4, D_theta=2), dict(phase_bits=0), dict(sigma_u2=-1.0),
    dict(user_region=(1.0, 0.0, 0.0, 1.0, 0.0, 1.0)),
])
def test_invariants_rejected(kw):
    with pytest.raises(ValueError):
        SystemConfig(**kw)


def test_scenario_round_trip(tmp_path):
    cfg = SystemConfig(M=4, N=16, K=6, P_d=dbm_to_watts(12.0), gamma=0.05,
                       Upsilon=7, D_theta=5, D_beta=2, D_W=0, phase_bits=3,
                       seed=42)
    opt = OptimParams(wmmse_max_iter=77, D_H=9)
    path = tmp_path / "scenario.cfg"
    save_scenario(Scenario(system=cfg, optim=opt), path)
    back = load_scenario(path)
    for field in ("M", "N", "K", "gamma", "Upsilon", "D_theta", "D_beta", "D_W",
                  "phase_bits", "seed", "bs_pos", "ris_pos", "user_region"):
        assert getattr(back.system, field) == getattr(cfg, field)
    assert back.system.P_d == pytest.approx(cfg.P_d, rel=1e-9)
    assert back.system.sigma_d2 == pytest.approx(cfg.sigma_d2, rel=1e-12)
    assert back.optim.wmmse_max_iter == 77
    assert back.optim.D_H == 9
    assert back.optim.rcg_max_iter == OptimParams().rcg_max_iter


def test_dbm_keys_accepted(tmp_path):
    path = tmp_path / "s.cfg"
    path.write_text("m = 2\nn = 4\nk = 3\np_d_dbm = 15\nbandwidth = 10e6\n"
                    "noise_psd_dbm_hz = -170\n", encoding="utf-8")
    sc = load_scenario(path)
    assert sc.system.P_d == pytest.approx(dbm_to_watts(15.0))
    assert sc.system.sigma_d2 == pytest.approx(1e-13, rel=1e-6)
    assert sc.system.sigma_u2 == pytest.approx(1e-13, rel=1e-6)


def test_unknown_key_rejected(tmp_path):
    path = tmp_path / "s.cfg"
    path.write_text("m = 2\nbogus = 3\n", encoding="utf-8")
    with pytest.raises(ValueError):
        load_scenario(path)


def test_comments_and_blank_lines(tmp_path):
    path = tmp_path / "s.cfg"
    path.write_text("# header\n\nm = 2  # trailing\nn = 4\nk = 2\n",
                    encoding="utf-8")
    sc = load_scenario(path)
    assert (sc.system.M, sc.system.N, sc.system.K) == (2, 4, 2)
