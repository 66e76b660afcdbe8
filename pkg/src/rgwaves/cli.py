"""Command-line front end.

Subcommands::

    rgwaves simulate CONFIG.json --out DIR [--cells N] [--cfl X] [--no-seed-check]
    rgwaves preset NAME --out DIR [--cells N] [--cfl X] [--strict]
    rgwaves profile SPEC.json --out DIR
    rgwaves stability SPEC.json --out DIR [--mode M] [--evans]
    rgwaves riemann --h-left 1 --h-right 0.2 --phi-left .3 --phi-right .6 --params fig7
    rgwaves dispersion --h0 1 --phi0 .3 --params fig4 --out DIR

Exit status: 0 on success, 2 when preset checks fail under --strict, 1 on
errors (the message names the offending config field and line).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time

import numpy as np

from . import __version__
from .equilibrium import EquilibriumState, riemann_solve
from .errors import RGError
from .evans import Contour, count_unstable
from .io import (RunManifest, config_from_dict, config_to_dict, load_config,
                 params_from_dict, profile_from_dict, read_json, write_json_atomic)
from .presets import PRESETS, evaluate_checks, get_preset
from .solver import run, snapshot_name, write_diagnostics
from .spectral import MODES, dispersion_roots, stability_verdict

log = logging.getLogger("rgwaves")

PARAM_SETS = {name: PRESETS[name].config["params"] for name in ("fig2", "fig4", "fig5", "fig7")}


def _add_run_flags(sp):
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--cells", type=int, help="override the number of cells")
    sp.add_argument("--cfl", type=float, help="override the CFL number")
    sp.add_argument("--seed-check", dest="seed_check", action=argparse.BooleanOptionalAction,
                    default=True, help="validate initial data admissibility (default on)")


def _add_param_flags(sp):
    sp.add_argument("--params", help="JSON file with a 'params' object, or one of "
                    + ", ".join(sorted(PARAM_SETS)))
    for flag in ("g-perp", "g-parallel", "c-f", "c-t"):
        sp.add_argument(f"--{flag}", type=float)


def build_parser():
    ap = argparse.ArgumentParser(prog="rgwaves", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="run the finite-volume solver on a JSON config")
    sp.add_argument("config")
    _add_run_flags(sp)

    sp = sub.add_parser("preset", help="run a bundled experiment and evaluate its checks")
    sp.add_argument("name", choices=sorted(PRESETS))
    _add_run_flags(sp)
    sp.add_argument("--strict", action="store_true", help="failed checks give exit status 2")

    sp = sub.add_parser("profile", help="construct a convective wave profile")
    sp.add_argument("spec")
    sp.add_argument("--out", required=True)

    sp = sub.add_parser("stability", help="stability report for a convective wave")
    sp.add_argument("spec")
    sp.add_argument("--out", required=True)
    sp.add_argument("--mode", choices=MODES, default="standard")
    sp.add_argument("--evans", action="store_true",
                    help="also count Evans zeros in the default contour")

    sp = sub.add_parser("riemann", help="equilibrium Riemann wave pattern")
    for side in ("left", "right"):
        sp.add_argument(f"--h-{side}", type=float, required=True)
        sp.add_argument(f"--phi-{side}", type=float, default=0.0)
    _add_param_flags(sp)

    sp = sub.add_parser("dispersion", help="dispersion relation table of a constant state")
    sp.add_argument("--h0", type=float, default=1.0)
    sp.add_argument("--phi0", type=float, required=True)
    sp.add_argument("--xi-max", type=float, default=50.0)
    sp.add_argument("--n", type=int, default=1001)
    sp.add_argument("--out", required=True)
    _add_param_flags(sp)
    return ap


def _params(args):
    base = {}
    if args.params:
        if args.params in PARAM_SETS:
            base = dict(PARAM_SETS[args.params])
        else:
            base = dict(read_json(args.params).get("params", {}))
    for key in ("g_perp", "g_parallel", "c_f", "c_t"):
        v = getattr(args, key)
        if v is not None:
            base[key] = v
    return params_from_dict(base)


def _write_snapshots(out, result, files):
    for s in result.snapshots:
        name = snapshot_name(s.t)
        s.to_csv(os.path.join(out, name))
        files.append(name)
    write_diagnostics(os.path.join(out, "diagnostics.csv"), result.history)
    files.append("diagnostics.csv")


def _simulate(cfg_dict, config, out, checks_fn=None):
    os.makedirs(out, exist_ok=True)
    t0 = time.perf_counter()
    result = run(config)
    files = []
    _write_snapshots(out, result, files)
    checks = checks_fn(result) if checks_fn else []
    manifest = RunManifest(config=cfg_dict, wall_time=time.perf_counter() - t0, files=files,
                           checks=checks,
                           extra={"steps": result.steps, "floor_breaches": result.floor_breaches})
    manifest.write(out)
    return result, checks


def cmd_simulate(args):
    overrides = {"cells": args.cells, "cfl": args.cfl}
    _, config = load_config(args.config, overrides=overrides, seed_check=args.seed_check)
    result, _ = _simulate(config_to_dict(config), config, args.out)
    print(f"{result.steps} steps, {len(result.snapshots)} snapshots written to {args.out}")
    return 0


def cmd_preset(args):
    preset = get_preset(args.name)
    overrides = {"cells": args.cells, "cfl": args.cfl}
    config = config_from_dict(preset.config, overrides=overrides, seed_check=args.seed_check)
    cfg = config_to_dict(config)
    cfg["name"] = preset.name
    _, checks = _simulate(cfg, config, args.out, lambda r: evaluate_checks(preset, r))
    failed = [c for c in checks if not c.passed]
    for c in checks:
        print(f"[{'PASS' if c.passed else 'FAIL'}] {c.name}: {c.value} "
              f"(expected {c.expected}) {c.detail}".rstrip())
    if failed:
        if args.strict:
            return 2
        log.warning("%d check(s) failed", len(failed))
    return 0


def cmd_profile(args):
    spec = read_json(args.spec)
    p = params_from_dict(spec.get("params"))
    prof = profile_from_dict(spec.get("profile"), p)
    os.makedirs(args.out, exist_ok=True)
    prof.to_csv(os.path.join(args.out, "profile.csv"))
    info = {"jumps": list(prof.jumps), "c": prof.c, "h0": prof.h0, "kappa": prof.kappa,
            "phi_minus": prof.phi_minus, "phi_plus": prof.phi_plus, "n": int(prof.x.size),
            "max_relation_residual": float(np.max(np.abs(prof.relation_residual())))}
    RunManifest(config=spec, wall_time=0.0, files=["profile.csv"], extra={"profile": info}
                ).write(args.out)
    print(json.dumps(info, indent=2))
    return 0


def cmd_stability(args):
    spec = read_json(args.spec)
    p = params_from_dict(spec.get("params"))
    prof = profile_from_dict(spec.get("profile"), p)
    rep = stability_verdict(prof, p, args.mode)
    if args.evans:
        contour = Contour()
        rep.evans_winding = count_unstable(prof, contour, args.mode)
        rep.contour = {"r0": contour.r0, "R": contour.R, "M": contour.M}
    os.makedirs(args.out, exist_ok=True)
    write_json_atomic(os.path.join(args.out, "stability.json"), rep.to_dict())
    print(f"verdict ({args.mode}): {rep.verdict}")
    return 0


def cmd_riemann(args):
    p = _params(args)
    sol = riemann_solve(EquilibriumState(args.h_left, args.phi_left),
                        EquilibriumState(args.h_right, args.phi_right), p)
    print(f"contact speed: {sol.contact_speed:.12g}")
    wave = sol.second_wave
    if wave is None:
        print("no second wave (h_left == h_right)")
    elif sol.is_shock:
        print(f"shock speed: {wave.speed:.12g}")
    else:
        print(f"rarefaction: {wave.left_edge_speed:.12g} .. {wave.right_edge_speed:.12g}")
    mid = sol.intermediate_state
    print(f"intermediate state: h = {mid.h:.12g}, phi = {mid.phi:.12g}")
    return 0


def cmd_dispersion(args):
    p = _params(args)
    xi = np.linspace(-args.xi_max, args.xi_max, args.n)
    a, b = dispersion_roots(xi, args.h0, args.phi0, p)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "dispersion.csv")
    with open(path, "w", newline="") as fh:
        fh.write("xi,re_lambda1,re_lambda2,im_lambda1,im_lambda2\n")
        for row in zip(xi, a.real, b.real, a.imag, b.imag):
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
    print(f"max Re lambda = {max(a.real.max(), b.real.max()):.6g}; table in {path}")
    return 0


COMMANDS = {"simulate": cmd_simulate, "preset": cmd_preset, "profile": cmd_profile,
            "stability": cmd_stability, "riemann": cmd_riemann, "dispersion": cmd_dispersion}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (RGError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
