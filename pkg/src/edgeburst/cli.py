"""Command-line front end.

Examples
--------
List presets::

    edgeburst --list-presets

Run a preset with an override, writing to ``out/``::

    edgeburst --preset fig1c --set geometry.L=80 --out out

Exit codes: 0 success, 1 invalid configuration, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np

from . import __version__
from .dynamics import EvolveConfig, edge_side, edge_wavefunction_decay, loss_profile_mixture, loss_profiles, relative_height
from .errors import ConfigError, DomainError, EdgeBurstError
from .greens import (
    bulk_loss_infinite,
    char_roots,
    classify_closing_points,
    gbz,
    inside_gbz,
    local_expansion,
    write_gbz_csv,
    write_root_scan_csv,
)
from .io import write_csv, write_json
from .models import LatticeGeometry, model_from_dict, model_to_dict
from .presets import SCHEMA_VERSION, get_preset, list_presets
from .scaling import AREA_TOL, GAP_TOL, classify_regime, fit_power, scaling_run
from .spectral import gap_closing_points, imaginary_gap, pbc_spectrum, spectral_area, write_spectrum_csv

__all__ = ["main", "run", "validate_config", "CONFIG_SCHEMA", "OUT_ENV"]

OUT_ENV = "EDGEBURST_OUT"
KINDS = ["profile", "spectrum", "gbz", "greens", "scaling", "regime", "sumrule"]

_num = {"type": "number"}
_int = {"type": "integer"}


def _model_schema(tag, keys):
    return {
        "type": "object",
        "properties": {"model": {"const": tag}, **{k: _num for k in keys}},
        "required": ["model", *keys],
        "additionalProperties": False,
    }


CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "kind": {"enum": KINDS},
        "description": {"type": "string"},
        "model": {"oneOf": [
            _model_schema("I", ["t1", "t2", "gamma"]),
            _model_schema("II", ["t1", "t2", "t3", "alpha", "gamma"]),
            _model_schema("III", ["t", "gamma", "gamma_prime"]),
        ]},
        "geometry": {
            "type": "object",
            "properties": {"L": {"type": "integer", "minimum": 3}, "boundary": {"enum": ["OBC", "PBC"]}},
            "required": ["L"],
            "additionalProperties": False,
        },
        "x0": {"oneOf": [{"type": "integer", "minimum": 1},
                         {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1}]},
        "p_s": {"oneOf": [{"const": "uniform"}, {"type": "array", "items": {"type": "number", "minimum": 0}}]},
        "sweep": {"type": "array", "minItems": 1,
                  "items": {"type": "object", "additionalProperties": _num}},
        "Nk": {"type": "integer", "minimum": 16},
        "evolve": {
            "type": "object",
            "properties": {"dt": _num, "norm_floor": _num, "t_max": _num, "integrator_tolerance": _num},
            "additionalProperties": False,
        },
        "allow_truncation": {"type": "boolean"},
        "x0_sweep": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 8},
        "window": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2},
        "displacements": {"type": "array", "items": {"type": "integer"}, "minItems": 1},
        "omega_scan": {
            "type": "object",
            "properties": {"start": _num, "stop": _num, "num": {"type": "integer", "minimum": 2}},
            "required": ["start", "stop", "num"],
            "additionalProperties": False,
        },
        "expansion": {"type": "boolean"},
        "compare_profile": {"type": "boolean"},
        "edge_decay": {
            "type": "object",
            "properties": {"t_end": _num, "x0": _int},
            "additionalProperties": False,
        },
    },
    "required": ["schema_version", "kind", "model"],
    "additionalProperties": False,
    "allOf": [
        {"if": {"properties": {"kind": {"enum": ["profile", "sumrule"]}}},
         "then": {"required": ["geometry"], "anyOf": [{"required": ["x0"]}, {"required": ["p_s"]}]}},
        {"if": {"properties": {"kind": {"const": "scaling"}}}, "then": {"required": ["geometry", "x0"]}},
        {"if": {"properties": {"kind": {"const": "gbz"}}}, "then": {"required": ["geometry"]}},
    ],
}


def validate_config(cfg: dict) -> dict:
    """Check ``cfg`` against the schema and the lattice; return a normalized copy.

    Raises
    ------
    ConfigError
        Schema violation, inconsistent model parameters, or starting cells
        outside the chain.
    """
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as err:
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {err.message}") from None
    cfg = copy.deepcopy(cfg)
    for over in cfg.get("sweep", [{}]):
        try:
            model_from_dict({**cfg["model"], **over})
        except DomainError as err:
            raise ConfigError(f"model: {err}") from None
        except TypeError as err:
            raise ConfigError(f"sweep entry {over}: {err}") from None
    try:
        EvolveConfig(**cfg.get("evolve", {}))
    except DomainError as err:
        raise ConfigError(f"evolve: {err}") from None
    if "geometry" in cfg:
        L = cfg["geometry"]["L"]
        x0 = cfg.get("x0", [])
        for x in (x0 if isinstance(x0, list) else [x0]):
            if not 1 <= x <= L:
                raise ConfigError(f"x0={x} outside [1, {L}]")
        if isinstance(cfg.get("p_s"), list) and len(cfg["p_s"]) != L:
            raise ConfigError(f"p_s must have {L} entries")
    return cfg


def _parse_override(text: str):
    if "=" not in text:
        raise ConfigError(f"--set expects key=value, got {text!r}")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip().split("."), value


def apply_overrides(cfg: dict, overrides) -> dict:
    """Apply dotted ``key=value`` overrides; values are parsed as JSON when possible."""
    cfg = copy.deepcopy(cfg)
    for text in overrides or []:
        path, value = _parse_override(text)
        node = cfg
        for key in path[:-1]:
            node = node.setdefault(key, {})
            if not isinstance(node, dict):
                raise ConfigError(f"cannot set {'.'.join(path)}: {key} is not an object")
        node[path[-1]] = value
    return cfg


def config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


# ---------------------------------------------------------------- runners


def _models(cfg):
    return [model_from_dict({**cfg["model"], **over}) for over in cfg.get("sweep", [{}])]


def _tag(i, n):
    return "" if n == 1 else f"_{i:02d}"


def _evolve_cfg(cfg):
    return EvolveConfig(**cfg.get("evolve", {}))


def _x0_list(cfg):
    x0 = cfg.get("x0")
    return x0 if isinstance(x0, list) else ([x0] if x0 is not None else [])


def _profile_columns(prof):
    idx = np.arange(1, len(prof.values) + 1)
    return {"link" if prof.link_resolved else "x": idx, "P": prof.values}


def _sides(model):
    side = edge_side(model)
    return ["left", "right"] if side == "both" else [side]


def _edge_heights(model, prof, x0):
    return {s: relative_height(prof, x0, s) for s in _sides(model)}


def _run_profile(cfg, model, out, tag, sumrule=False):
    geom = LatticeGeometry.for_model(model, cfg["geometry"]["L"], cfg["geometry"].get("boundary", "OBC"))
    ecfg = _evolve_cfg(cfg)
    allow = cfg.get("allow_truncation", False)
    files, rows = [], []
    if "p_s" in cfg:
        p = np.full(geom.L, 1.0 / geom.L) if cfg["p_s"] == "uniform" else np.asarray(cfg["p_s"], float)
        profs = [loss_profile_mixture(model, geom, p, ecfg, allow)]
        starts = [None]
    else:
        starts = _x0_list(cfg)
        profs = loss_profiles(model, geom, starts, ecfg, allow)
    for x0, prof in zip(starts, profs):
        row = {"x0": prof.x0, "total": prof.total, "truncation_error": prof.truncation_error,
               "sum_rule_residual": prof.total + prof.truncation_error - 1.0, "t_end": prof.t_end}
        if not sumrule:
            if x0 is None:
                # random start: the minimum runs over the whole chain
                row["relative_height"] = {s: relative_height(prof, geom.L if s == "left" else 1, s)
                                          for s in _sides(model)}
            else:
                row["relative_height"] = _edge_heights(model, prof, x0)
            name = f"profile{tag}" + ("" if len(profs) == 1 else f"_x0_{x0}") + ".csv"
            files.append(write_csv(out / name, _profile_columns(prof)))
        rows.append(row)
    return rows, files


def _run_spectrum(cfg, model, out, tag):
    samples = pbc_spectrum(model, cfg.get("Nk", 512))
    path = out / f"spectrum{tag}.csv"
    write_spectrum_csv(path, samples)
    pts = gap_closing_points(model)
    area = spectral_area(model)
    info = {
        "imaginary_gap": imaginary_gap(model),
        "gapped": pts.gapped,
        "gap_closing_points": [{"k0": p.k0, "omega0": p.omega0} for p in pts],
        "spectral_area": area.total,
        "area_per_loop": area.per_loop,
        "area_Nk": area.Nk,
        "band_tracking_ambiguous": area.ambiguous,
        "defective_samples": [s.k for s in samples if s.defective],
    }
    return info, [path]


def _run_gbz(cfg, model, out, tag):
    data = gbz(model, cfg["geometry"]["L"])
    path = out / f"gbz{tag}.csv"
    write_gbz_csv(path, data)
    right, left = classify_closing_points(model)
    info = {
        "radius_analytic": data.radius_analytic,
        "points": len(data.beta_points),
        "isolated_energies": data.isolated_energies,
        "saddle": None if data.saddle is None else {
            "beta_s": data.saddle.beta_s, "E_s": data.saddle.E_s, "fallback": data.saddle.fallback},
        "closing_points": [
            {"omega0": p.omega0, "k0": p.k0, "controls": side,
             "inside_gbz": inside_gbz(data, b) if len(data.beta_points) else None}
            for side, group in (("right", right), ("left", left)) for p, b in group
        ],
    }
    return info, [path]


def _run_greens(cfg, model, out, tag):
    files, info = [], {}
    if "displacements" in cfg:
        ds = [d for d in cfg["displacements"] if d != 0]
        P = [bulk_loss_infinite(model, d) for d in ds]
        cols = {"displacement": ds, "P_infinite": P}
        if cfg.get("compare_profile") and "geometry" in cfg:
            L = cfg["geometry"]["L"]
            x0 = _x0_list(cfg)[0]
            geom = LatticeGeometry.for_model(model, L, "OBC")
            prof = loss_profiles(model, geom, [x0], _evolve_cfg(cfg), cfg.get("allow_truncation", False))[0]
            cols["P_obc"] = [prof.values[x0 + d - 1] if 1 <= x0 + d <= len(prof.values) else float("nan")
                             for d in ds]
        files.append(write_csv(out / f"greens_infinite{tag}.csv", cols))
    if "omega_scan" in cfg:
        sc = cfg["omega_scan"]
        path = out / f"root_scan{tag}.csv"
        write_root_scan_csv(path, model, np.linspace(sc["start"], sc["stop"], sc["num"]))
        files.append(path)
    if cfg.get("expansion"):
        exps = []
        for p in gap_closing_points(model):
            e = local_expansion(model, p)
            exps.append({"omega0": p.omega0, "k0": p.k0, "n": str(e.n), "m": str(e.m), "K": e.K,
                         "alpha_b": str(e.alpha_b_analytic), "r2_n": e.r2_n, "r2_m": e.r2_m})
        info["expansions"] = exps
    if "edge_decay" in cfg and "geometry" in cfg:
        ed = cfg["edge_decay"]
        geom = LatticeGeometry.for_model(model, cfg["geometry"]["L"], "OBC")
        x0 = ed.get("x0", _x0_list(cfg)[0])
        fit = edge_wavefunction_decay(model, geom, x0, _evolve_cfg(cfg), t_end=ed.get("t_end", 2000.0))
        sad = gbz(model, max(60, cfg["geometry"]["L"])).saddle
        info["edge_decay"] = {"slope": fit.slope, "stderr": fit.stderr, "saddle_im": sad.E_s.imag,
                              "saddle_fallback": sad.fallback}
        path = out / f"edge_decay{tag}.csv"
        write_csv(path, {"t": fit.times, "log_abs_psi": fit.log_amplitude})
        files.append(path)
    return info, files


def _run_scaling(cfg, model, out, tag):
    L = cfg["geometry"]["L"]
    res = scaling_run(model, L, cfg["x0"] if isinstance(cfg["x0"], int) else cfg["x0"][0],
                      cfg.get("x0_sweep"), _evolve_cfg(cfg), cfg.get("window"))
    path = out / f"edge_sweep{tag}.csv"
    write_csv(path, {"x0": res.edge_x0, "P_edge": res.edge_values})
    law = res.bulk.kind
    info = {
        "law": law,
        ("alpha_b" if law == "power" else "lambda_b"): res.bulk.exponent_or_base,
        ("alpha_e" if res.edge.kind == "power" else "lambda_e"): res.edge.exponent_or_base,
        "difference": res.difference,
        "bulk_fit": res.bulk.to_dict(),
        "edge_fit": res.edge.to_dict(),
        "regime": res.regime.to_dict(),
        "relative_height": res.relative_height,
        "truncation_error": res.truncation_error,
    }
    return info, [path]


def _run_regime(cfg, model, out, tag):
    return classify_regime(model).to_dict(), []


RUNNERS = {
    "profile": _run_profile,
    "spectrum": _run_spectrum,
    "gbz": _run_gbz,
    "greens": _run_greens,
    "scaling": _run_scaling,
    "regime": _run_regime,
    "sumrule": lambda cfg, model, out, tag: _run_profile(cfg, model, out, tag, sumrule=True),
}


def _one(args):
    cfg, i, n, out = args
    model = _models(cfg)[i]
    info, files = RUNNERS[cfg["kind"]](cfg, model, Path(out), _tag(i, n))
    return {"model": model_to_dict(model), "result": info}, [str(f) for f in files]


def _growth_summary(cfg, entries):
    """Power-law growth of the relative height with x0, when a profile sweep has enough starts."""
    x0s = _x0_list(cfg)
    if cfg["kind"] != "profile" or len(x0s) < 5:
        return
    for e in entries:
        side = edge_side(model_from_dict(e["model"]))
        side = "left" if side == "both" else side
        h = [r["relative_height"][side] for r in e["result"]]
        fit = fit_power(np.array(x0s, float), np.array(h))
        e["growth_exponent"] = -fit.exponent_or_base
        e["growth_fit_r2"] = fit.r_squared


def run(cfg: dict, out_dir, threads: int = 1) -> dict:
    """Validate and execute one configuration; return the manifest written alongside.

    Raises
    ------
    ConfigError
        Invalid configuration.
    EdgeBurstError
        Numerical failure in a library module.
    """
    cfg = validate_config(cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n = len(cfg.get("sweep", [{}]))
    jobs = [(cfg, i, n, str(out)) for i in range(n)]
    if threads > 1 and n > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_one, jobs))
    else:
        results = [_one(j) for j in jobs]
    entries = [r[0] for r in results]
    files = [f for r in results for f in r[1]]
    _growth_summary(cfg, entries)
    summary_path = out / "summary.json"
    write_json(summary_path, {"kind": cfg["kind"], "runs": entries})
    ecfg = _evolve_cfg(cfg)
    manifest = {
        "library": "edgeburst",
        "version": __version__,
        "config": cfg,
        "config_hash": config_hash(cfg),
        "tolerances": {
            "evolve": {"dt": ecfg.dt, "norm_floor": ecfg.norm_floor, "t_max": ecfg.t_max,
                       "integrator_tolerance": ecfg.integrator_tolerance, "atol": ecfg.atol},
            "gap_closed_tol": GAP_TOL,
            "area_tol": AREA_TOL,
            "greens_quad": {"epsabs": 1e-14, "epsrel": 1e-10},
        },
        "outputs": sorted(os.path.relpath(f, out) for f in files + [str(summary_path)]),
    }
    write_json(out / "run_manifest.json", manifest)
    return manifest


def _load_config(args) -> dict:
    if args.preset and args.config:
        raise ConfigError("use either --preset or --config, not both")
    if args.preset:
        try:
            return get_preset(args.preset)
        except KeyError as err:
            raise ConfigError(str(err)) from None
    if not args.config:
        raise ConfigError("no configuration: pass --config PATH or --preset NAME")
    try:
        with open(args.config) as fh:
            return json.load(fh)
    except OSError as err:
        raise ConfigError(f"cannot read {args.config}: {err}") from None
    except json.JSONDecodeError as err:
        raise ConfigError(f"{args.config} is not valid JSON: {err}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="edgeburst", description="Lossy quantum-walk and edge-burst experiments.")
    p.add_argument("--config", metavar="PATH", help="experiment configuration (JSON)")
    p.add_argument("--preset", metavar="NAME", help="built-in configuration (see --list-presets)")
    p.add_argument("--set", dest="overrides", action="append", metavar="KEY=VALUE", default=[],
                   help="override a config entry, e.g. geometry.L=80 (repeatable)")
    p.add_argument("--out", metavar="DIR", help=f"output directory (default: ${OUT_ENV} or ./edgeburst_out)")
    p.add_argument("--threads", type=int, default=1, metavar="N", help="worker processes for sweeps")
    p.add_argument("--list-presets", action="store_true", help="print the preset catalog and exit")
    p.add_argument("--dump-config", action="store_true", help="print the resolved configuration and exit")
    p.add_argument("--version", action="version", version=f"edgeburst {__version__}")
    return p


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.list_presets:
        for name, desc in list_presets().items():
            print(f"{name:20s} {desc}")
        return 0
    try:
        cfg = apply_overrides(_load_config(args), args.overrides)
        if args.dump_config:
            validate_config(cfg)
            print(json.dumps(cfg, indent=2, sort_keys=True))
            return 0
        out = args.out or os.environ.get(OUT_ENV) or "edgeburst_out"
        run(cfg, out, max(1, args.threads))
    except ConfigError as err:
        print(f"edgeburst: configuration error: {err}", file=sys.stderr)
        return 1
    except EdgeBurstError as err:
        print(f"edgeburst: numerical failure ({type(err).__name__}): {err}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
