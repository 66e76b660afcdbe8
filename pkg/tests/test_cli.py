import json
import math
import os

import numpy as np
import pytest

from rgwaves.cli import main
from rgwaves.errors import ConfigError
from rgwaves.io import config_from_dict, load_config, locate_field, profile_from_dict
from rgwaves.model import PhysParams
from rgwaves.presets import GENTLE, STEEP

SMALL = {
    "params": GENTLE,
    "grid": {"x_lo": 0.0, "x_hi": 10.0, "n_cells": 40, "bc": "outflow"},
    "initial": {"type": "riemann_phi", "h": 1.0, "x0": 3.0, "phi_left": 0.2, "phi_right": 0.5},
    "time": {"t_end": 0.5, "snapshots": [0.0, 0.25, 0.5]},
}


def _write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg, indent=2))
    return str(path)


def test_config_error_names_field_and_line(tmp_path):
    cfg = json.loads(json.dumps(SMALL))
    cfg["grid"]["n_cells"] = "many"
    path = _write(tmp_path, cfg)
    with pytest.raises(ConfigError) as exc:
        load_config(path)
    lines = open(path).read().splitlines()
    assert exc.value.field == "grid.n_cells"
    assert '"n_cells"' in lines[exc.value.line - 1]


def test_cli_reports_config_error(tmp_path, capsys):
    cfg = json.loads(json.dumps(SMALL))
    cfg["params"]["c_f"] = -1.0
    path = _write(tmp_path, cfg)
    assert main(["simulate", path, "--out", str(tmp_path / "o")]) == 1
    err = capsys.readouterr().err
    assert "params" in err and "line" in err


@pytest.mark.parametrize("mutate, field", [
    (lambda c: c.pop("time"), "time"),
    (lambda c: c.update(extra={}), "extra"),
    (lambda c: c["grid"].update(bc="reflective"), None),
    (lambda c: c["initial"].update(type="vortex"), "initial.type"),
    (lambda c: c["time"].update(snapshots=[0.3, 0.1]), "time.snapshots"),
    (lambda c: c["params"].update(g=9.81), "params.g"),
])
def test_invalid_configs_rejected(mutate, field):
    cfg = json.loads(json.dumps(SMALL))
    mutate(cfg)
    with pytest.raises(ConfigError) as exc:
        config_from_dict(cfg)
    if field is not None:
        assert exc.value.field == field


def test_invalid_json_reports_line(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "params": {\n    "g_perp": 1,,\n  }\n}\n')
    with pytest.raises(ConfigError) as exc:
        load_config(str(path))
    assert exc.value.line == 3


def test_locate_field_follows_nesting():
    text = '{\n "time": {"t_end": 1},\n "grid": {\n  "t_end": 2\n }\n}'
    assert locate_field(text, "grid.t_end") == 4
    assert locate_field(text, "time.t_end") == 2


def test_simulate_writes_manifest_listing_every_file(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["simulate", _write(tmp_path, SMALL), "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert sorted(manifest["files"]) == sorted(os.listdir(out))
    assert {"t00000.0000.csv", "t00000.2500.csv", "t00000.5000.csv",
            "diagnostics.csv"} <= set(manifest["files"])
    assert manifest["config"]["grid"]["n_cells"] == 40
    assert manifest["steps"] > 0


def test_simulation_output_is_deterministic(tmp_path):
    path = _write(tmp_path, SMALL)
    blobs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        main(["simulate", path, "--out", str(out), "--cells", "64"])
        blobs.append((out / "t00000.5000.csv").read_bytes())
    assert blobs[0] == blobs[1]
    header = blobs[0].decode().splitlines()[0]
    assert header == "x,h,U,Phi,phi"
    assert len(blobs[0].decode().splitlines()) == 65


def test_seed_check_flag(tmp_path):
    cfg = json.loads(json.dumps(SMALL))
    cfg["initial"]["phi_left"] = -0.1
    path = _write(tmp_path, cfg)
    assert main(["simulate", path, "--out", str(tmp_path / "a")]) == 1


def test_preset_runs_and_reports_checks(tmp_path, capsys):
    out = tmp_path / "fig9"
    code = main(["preset", "fig9", "--out", str(out), "--cells", "100"])
    text = capsys.readouterr().out
    assert code == 0
    assert "[PASS] mass drift" in text
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["name"] == "fig9"
    assert {c["name"] for c in manifest["checks"]} >= {"mass drift", "h phi drift"}


def test_riemann_command(capsys):
    code = main(["riemann", "--h-left", "1", "--h-right", "0.2", "--phi-left", "0.3",
                 "--phi-right", "0.6", "--params", "fig7"])
    text = capsys.readouterr().out
    assert code == 0
    assert "contact speed: 10\n" in text
    assert f"shock speed: {(25 - math.sqrt(5)) / 2:.12g}" in text
    assert "shock speed: 11.3819660113" in text


def test_stability_command_flags_unstable_constant_state(tmp_path, capsys):
    spec = {"params": dict(GENTLE, c_t=1.2),
            "profile": {"kind": "constant", "h0": 1.0, "phi0": 0.3}}
    out = tmp_path / "st"
    assert main(["stability", _write(tmp_path, spec), "--out", str(out)]) == 0
    assert "verdict (standard): unstable" in capsys.readouterr().out
    rep = json.loads((out / "stability.json").read_text())
    assert rep["verdict"] == "unstable"


def test_stability_command_with_evans(tmp_path, capsys):
    spec = {"params": GENTLE, "profile": {"kind": "constant", "h0": 1.0, "phi0": 0.3}}
    out = tmp_path / "st"
    assert main(["stability", _write(tmp_path, spec), "--out", str(out), "--evans"]) == 0
    rep = json.loads((out / "stability.json").read_text())
    assert rep["evans_winding"] == 0
    assert rep["contour"] == {"r0": 1e-3, "R": 5.0, "M": 10.0}


def test_dispersion_command(tmp_path):
    out = tmp_path / "d"
    assert main(["dispersion", "--phi0", "0.3", "--params", "fig4", "--n", "11",
                 "--out", str(out)]) == 0
    data = np.genfromtxt(out / "dispersion.csv", delimiter=",", names=True)
    assert data.dtype.names == ("xi", "re_lambda1", "re_lambda2", "im_lambda1", "im_lambda2")
    assert data.size == 11
    assert np.max(np.maximum(data["re_lambda1"], data["re_lambda2"])) > 0


def test_param_flags_override_named_set(capsys):
    main(["riemann", "--h-left", "1", "--h-right", "1", "--params", "fig7",
          "--g-parallel", str(4 * 0.05)])
    assert "contact speed: 2\n" in capsys.readouterr().out


def test_profile_command(tmp_path, capsys):
    spec = {"params": GENTLE, "profile": {"kind": "single_jump", "phi_left": 0.2,
                                          "phi_right": 0.5, "x_lo": -60, "x_hi": 10}}
    out = tmp_path / "p"
    assert main(["profile", _write(tmp_path, spec), "--out", str(out)]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["jumps"] == [0.0]
    assert info["max_relation_residual"] < 1e-8
    assert (out / "profile.csv").read_text().startswith("# jumps: ")


def test_connect_profile_widens_for_large_gap():
    p = PhysParams(**STEEP)
    prof = profile_from_dict({"kind": "connect", "phi_minus": 0.3, "phi_plus": 4.0}, p)
    assert prof.phi[0] == pytest.approx(0.3) and prof.phi[-1] == pytest.approx(4.0, rel=1e-6)
    assert np.all(prof.h > 0) and np.all(prof.phi > 0)


def test_unknown_profile_kind():
    with pytest.raises(ConfigError) as exc:
        profile_from_dict({"kind": "spiral"}, PhysParams(**GENTLE))
    assert exc.value.field == "profile.kind"
