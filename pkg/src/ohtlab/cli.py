"""Command-line pipelines: simulate → reconstruct → reports.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure.  Every run is reproducible: (config, seed) fixes all artifacts
byte-for-byte.  A --threads flag is accepted for symmetry with batch
runners; results never depend on it.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

try:
    import jsonschema
except ImportError:  # pragma: no cover
    jsonschema = None

from . import arrays, detection, formats, moments, patterns, radon, states, temporal, twomode
from .errors import (AliasingError, ConfigError, CoverageError, DataFormatError,
                     GramConditionError, NearVacuumError, OhtlabError, TruncationError)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

_NUM = {"type": "number"}
_INT = {"type": "integer"}

STATE_SCHEMA = {
    "type": "object",
    "properties": {
        "kind": {"enum": list(states.StateSpec.KINDS)},
        "n": _INT,
        "alpha": {"oneOf": [_NUM, {"type": "array", "items": _NUM,
                                   "minItems": 2, "maxItems": 2}]},
        "nbar": _NUM,
        "r": _NUM,
        "phi": _NUM,
        "truncation_dim": _INT,
    },
    "required": ["kind"],
    "additionalProperties": False,
}

DETECTOR_SCHEMA = {
    "type": "object",
    "properties": {
        "eta_q": _NUM, "eta_ls": _NUM, "lo_mean_photons": _NUM,
        "sigma_e": _NUM, "gain": _NUM, "balance_imbalance": _NUM,
    },
    "additionalProperties": False,
}

SCHEDULE_SCHEMA = {
    "type": "object",
    "properties": {
        "kind": {"enum": list(detection.PhaseSchedule.KINDS)},
        "d": _INT,
        "span": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
    },
    "required": ["kind"],
    "additionalProperties": False,
}

RECONSTRUCTION_SCHEMA = {
    "type": "object",
    "properties": {
        "method": {"enum": ["radon", "pattern", "both"]},
        "params": {
            "type": "object",
            "properties": {
                "dim": _INT, "d_phases": _INT, "k_c": _NUM, "n_phase_bins": _INT,
                "kernel": {"type": "string"}, "grid_points": _INT,
                "grid_span": _NUM, "bootstrap": _INT,
            },
            "additionalProperties": False,
        },
    },
    "required": ["method"],
    "additionalProperties": False,
}

OUTPUTS_SCHEMA = {
    "type": "object",
    "properties": {
        "dir": {"type": "string"},
        "formats": {"type": "array", "items": {"enum": ["csv", "json"]}},
    },
    "additionalProperties": False,
}

SIMULATE_SCHEMA = {
    "type": "object",
    "properties": {
        "state": STATE_SCHEMA,
        "detector": DETECTOR_SCHEMA,
        "schedule": SCHEDULE_SCHEMA,
        "n_samples": _INT,
        "seed": _INT,
        "reconstruction": RECONSTRUCTION_SCHEMA,
        "outputs": OUTPUTS_SCHEMA,
    },
    "required": ["state", "schedule", "n_samples", "seed"],
    "additionalProperties": False,
}

TWOMODE_SCHEMA = {
    "type": "object",
    "properties": {
        "source": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["correlated_thermal", "independent_poisson", "hbt_split",
                                  "anticorrelated_thermal"]},
                "nbar": _NUM, "nbar2": _NUM, "corr": _NUM,
            },
            "required": ["kind"],
            "additionalProperties": False,
        },
        "detector": DETECTOR_SCHEMA,
        "n_samples": _INT,
        "seed": _INT,
        "outputs": OUTPUTS_SCHEMA,
    },
    "required": ["source", "n_samples", "seed"],
    "additionalProperties": False,
}

ARRAY_SCHEMA = {
    "type": "object",
    "properties": {
        "detector": DETECTOR_SCHEMA,
        "n_pixels": _INT,
        "pixel_area": _NUM,
        "schedule": SCHEDULE_SCHEMA,
        "n_pulses": _INT,
        "seed": _INT,
        "modes": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "shape": {"oneOf": [{"enum": ["uniform", "ramp"]},
                                        {"type": "array", "items": _NUM}]},
                    "state": STATE_SCHEMA,
                },
                "required": ["shape", "state"],
                "additionalProperties": False,
            },
        },
        "outputs": OUTPUTS_SCHEMA,
    },
    "required": ["n_pulses", "seed"],
    "additionalProperties": False,
}

SAMPLE_SCHEMA = {
    "type": "object",
    "properties": {
        "signal": {
            "type": "object",
            "properties": {
                "nu": _NUM, "bandwidth": _NUM, "band_fill": _NUM,
                "span": _NUM, "points": _INT, "chirp": _NUM, "seed": _INT,
            },
            "required": ["nu", "bandwidth"],
            "additionalProperties": False,
        },
        "tau_span": _NUM,
        "tau_step_grid_units": _INT,
        "outputs": OUTPUTS_SCHEMA,
        "seed": _INT,
    },
    "required": ["signal", "seed"],
    "additionalProperties": False,
}

CALIBRATE_SCHEMA = {
    "type": "object",
    "properties": {
        "detector": DETECTOR_SCHEMA,
        "lo_levels": {"type": "array", "items": _NUM, "minItems": 3},
        "pulses_per_level": _INT,
        "seed": _INT,
        "outputs": OUTPUTS_SCHEMA,
    },
    "required": ["lo_levels", "pulses_per_level", "seed"],
    "additionalProperties": False,
}


def load_config(path, schema) -> dict:
    try:
        cfg = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if jsonschema is not None:
        try:
            jsonschema.validate(cfg, schema)
        except jsonschema.ValidationError as exc:
            where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigError(f"{path}: at {where}: {exc.message}") from exc
    return cfg


def _state_from_config(doc: dict) -> states.StateSpec:
    kw = dict(doc)
    if "alpha" in kw and isinstance(kw["alpha"], list):
        kw["alpha"] = complex(kw["alpha"][0], kw["alpha"][1])
    return states.StateSpec(**kw)


def _detector_from_config(doc: dict | None) -> detection.DetectorModel:
    return detection.DetectorModel(**(doc or {}))


def _schedule_from_config(doc: dict) -> detection.PhaseSchedule:
    return detection.PhaseSchedule.from_dict(doc)


def _outdir(cfg: dict, args) -> Path:
    out = args.out or (cfg.get("outputs") or {}).get("dir") or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_simulate(args) -> int:
    cfg = load_config(args.config, SIMULATE_SCHEMA)
    seed = args.seed if args.seed is not None else cfg["seed"]
    out = _outdir(cfg, args)
    spec = _state_from_config(cfg["state"])
    det = _detector_from_config(cfg.get("detector"))
    sched = _schedule_from_config(cfg["schedule"])
    rho = states.make_state(spec)
    ds = detection.sample_quadratures(rho, sched, det, cfg["n_samples"], seed)
    ds_path = out / "dataset.jsonl"
    formats.write_quadrature_dataset(ds_path, ds)
    formats.write_manifest(out / "manifest.json", seed, cfg, {"dataset.jsonl": ds_path})
    print(f"wrote {ds_path} ({cfg['n_samples']} samples)")
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    ds = formats.read_quadrature_dataset(args.input)
    if isinstance(ds, twomode.DualQuadratureDataset):
        raise DataFormatError("reconstruction expects a single-mode dataset")
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    report = {"input": str(args.input), "n_samples": len(ds),
              "eta_eff": ds.meta.detector.eta_eff}
    fmt = args.format or "csv"
    if args.method in ("radon", "both"):
        folded = np.unique(np.round(
            np.where(ds.thetas >= np.pi, ds.thetas - np.pi, ds.thetas), 9))
        n_bins = min(args.phase_bins, folded.size)
        cfg = radon.RadonConfig(k_c=args.k_c, n_phase_bins=n_bins)
        w = radon.filtered_backprojection(ds, cfg)
        formats.write_wigner_csv(out / "wigner.csv", w)
        report["radon"] = {
            "k_c": cfg.k_c, "kernel": cfg.kernel,
            "bin_counts": w.meta["bin_counts"],
            "raw_integral": w.meta["raw_integral"],
        }
        i0 = int(np.argmin(np.abs(w.q_axis)))
        j0 = int(np.argmin(np.abs(w.p_axis)))
        origin = float(w.values[i0, j0])
        report["radon"]["w_origin"] = origin
        if args.bootstrap:
            se = radon.bootstrap_backprojection(ds, cfg, n_boot=args.bootstrap,
                                                seed=ds.meta.seed)
            s0 = float(se.values[i0, j0])
            report["radon"]["bootstrap"] = {
                "n_boot": args.bootstrap,
                "w_origin_stderr": s0,
                "origin_negative_3sigma": bool(origin < -3.0 * s0),
            }
    if args.method in ("pattern", "both"):
        pf = patterns.build_pattern_functions(args.dim)
        rho, err = patterns.rho_from_quadratures(ds, pf, args.phases)
        formats.write_density_matrix(out / "rho.json", rho, errors=err)
        pops = rho.populations()
        formats.write_pn_csv(out / "pn.csv", pops, np.diag(err))
        folded, _ = patterns.fold_to_half_circle(ds.thetas, ds.qs)
        report["pattern"] = {
            "dim": args.dim,
            "d_phases": int(np.unique(np.round(folded, 10)).size),
            "populations": [float(x) for x in pops],
            "population_stderr": [float(x) for x in np.diag(err)],
            "gram_condition_numbers": pf.condition_numbers,
        }
    (out / "report.json").write_text(formats.dumps_canonical(report) + "\n")
    print(f"report: {out / 'report.json'}")
    return EXIT_OK


def cmd_moments(args) -> int:
    ds = formats.read_quadrature_dataset(args.input)
    if isinstance(ds, twomode.DualQuadratureDataset):
        ds = ds.as_single_mode()
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    rep = moments.moment_report(ds)
    (out / "moments.json").write_text(formats.dumps_canonical(rep.to_dict()) + "\n")
    if (args.format or "json") == "csv":
        with open(out / "moments.csv", "w") as f:
            f.write("quantity,value,stderr\n")
            f.write(f"mean_n,{rep.mean_n!r},{rep.mean_n_stderr!r}\n")
            if rep.g2 is not None:
                f.write(f"g2,{rep.g2!r},{rep.g2_stderr!r}\n")
            for r, (v, se) in rep.factorial_moments.items():
                f.write(f"factorial_{r},{v!r},{se!r}\n")
    print(formats.dumps_canonical(rep.to_dict()))
    return EXIT_OK


def cmd_twomode(args) -> int:
    cfg = load_config(args.config, TWOMODE_SCHEMA)
    seed = args.seed if args.seed is not None else cfg["seed"]
    out = _outdir(cfg, args)
    det = _detector_from_config(cfg.get("detector"))
    src = cfg["source"]
    kind = src["kind"]
    if kind == "correlated_thermal":
        st = twomode.TwoModeState("correlated_thermal", nbar=src["nbar"],
                                  corr=src.get("corr", 0.0))
    elif kind == "hbt_split":
        st = twomode.TwoModeState("planted", law=twomode.hbt_split_law(src["nbar"]))
    elif kind == "anticorrelated_thermal":
        st = twomode.TwoModeState("planted", law=twomode.anticorrelated_thermal_law(src["nbar"]))
    else:
        st = twomode.TwoModeState("planted", law=twomode.independent_poisson_law(
            src["nbar"], src.get("nbar2", src["nbar"])))
    rand = detection.PhaseSchedule("uniform_random")
    runs = []
    for i, alpha in enumerate((0.0, np.pi / 4, np.pi / 2)):
        ds = twomode.combined_quadrature_samples(
            st, twomode.LOSuperposition(alpha=alpha), det, cfg["n_samples"],
            seed + i, theta_schedule=rand, zeta_schedule=rand)
        formats.write_quadrature_dataset(out / f"dual_alpha{i}.jsonl", ds)
        runs.append(ds)
    g2, se = twomode.two_time_g2(*runs)
    report = {"g2": g2, "g2_stderr": se, "source": src, "n_samples": cfg["n_samples"]}
    (out / "twomode_report.json").write_text(formats.dumps_canonical(report) + "\n")
    print(formats.dumps_canonical(report))
    return EXIT_OK


def cmd_array(args) -> int:
    cfg = load_config(args.config, ARRAY_SCHEMA)
    seed = args.seed if args.seed is not None else cfg["seed"]
    out = _outdir(cfg, args)
    det = _detector_from_config(cfg.get("detector"))
    grid = arrays.PixelGrid(n_pixels=cfg.get("n_pixels", 64),
                            pixel_area=cfg.get("pixel_area", 1.0 / cfg.get("n_pixels", 64)))
    sched = _schedule_from_config(cfg.get("schedule", {"kind": "uniform_random"}))
    planted = []
    for m in cfg.get("modes", []):
        if m["shape"] == "uniform":
            mv = arrays.uniform_mode(grid)
        elif m["shape"] == "ramp":
            mv = arrays.ramp_mode(grid)
        else:
            mv = arrays.ModeVector.normalized(np.array(m["shape"], float), grid)
        planted.append((mv, _state_from_config(m["state"])))
    frames = arrays.simulate_array_frames(planted, det, grid, sched, cfg["n_pulses"], seed)
    formats.write_array_frames(out / "frames.jsonl", frames)
    M = arrays.difference_correlation_matrix(frames)
    w_opt, n_est = arrays.optimal_mode(M, det, grid)
    with open(out / "optimal_mode.csv", "w") as f:
        f.write("pixel,x,w\n")
        for j, (x, wv) in enumerate(zip(grid.coordinates, w_opt.w)):
            f.write(f"{j},{float(x)!r},{float(wv)!r}\n")
    report = {"photon_estimate": n_est, "n_pulses": cfg["n_pulses"],
              "n_pixels": grid.n_pixels}
    (out / "array_report.json").write_text(formats.dumps_canonical(report) + "\n")
    print(formats.dumps_canonical(report))
    return EXIT_OK


def cmd_sample(args) -> int:
    cfg = load_config(args.config, SAMPLE_SCHEMA)
    out = _outdir(cfg, args)
    sc = cfg["signal"]
    nu, B = sc["nu"], sc["bandwidth"]
    span = sc.get("span", 160.0)
    n = sc.get("points", 16384)
    fill = sc.get("band_fill", 0.9)
    t = np.linspace(-span, span, n, endpoint=False)
    dt = t[1] - t[0]
    omega = 2 * np.pi * np.fft.fftfreq(n, d=dt)
    inside = np.abs(omega - nu) <= fill * B / 2.0
    rng = np.random.default_rng(sc.get("seed", cfg["seed"]))
    chirp = sc.get("chirp", 8.0)
    phi = np.zeros(n, complex)
    for k in np.nonzero(inside)[0]:
        w = omega[k]
        amp = np.exp(-(((w - nu) / (0.3 * B)) ** 2)) * np.exp(1j * chirp * (w - nu) ** 2)
        phi += amp * np.exp(-1j * w * t)
    phi /= np.sqrt(np.sum(np.abs(phi) ** 2) * dt)
    sig = temporal.TemporalSignal(t, phi, nu, B)
    tau_span = cfg.get("tau_span", span / 5)
    step = cfg.get("tau_step_grid_units", 16)
    tau = t[(t > -tau_span) & (t < tau_span)][::step]
    rec = temporal.bandlimited_exact_recovery(sig, B, nu, tau)
    truth = np.interp(tau, t, phi.real) + 1j * np.interp(tau, t, phi.imag)
    rel_rms = float(np.sqrt(np.mean(np.abs(rec - truth) ** 2) / np.mean(np.abs(truth) ** 2)))
    formats.write_signal_csv(out / "signal.csv", t, phi)
    formats.write_signal_csv(out / "recovered.csv", tau, rec)
    report = {"relative_rms_error": rel_rms, "bandwidth": B, "band_fill": fill}
    (out / "sampling_report.json").write_text(formats.dumps_canonical(report) + "\n")
    print(formats.dumps_canonical(report))
    return EXIT_OK


def cmd_calibrate(args) -> int:
    cfg = load_config(args.config, CALIBRATE_SCHEMA)
    seed = args.seed if args.seed is not None else cfg["seed"]
    out = _outdir(cfg, args)
    det = _detector_from_config(cfg.get("detector"))
    cal = detection.calibration_curve(det, cfg["lo_levels"], cfg["pulses_per_level"], seed)
    report = {
        "gain_estimate": cal.gain_estimate,
        "sigma_e_estimate": cal.sigma_e_estimate,
        "intercept": cal.intercept,
        "intercept_stderr": cal.intercept_stderr,
        "nonlinearity_flag": cal.nonlinearity_flag,
        "reduced_residual": cal.reduced_residual,
        "table": {"mean_v_plus": cal.mean_v_plus.tolist(),
                  "var_v_minus": cal.var_v_minus.tolist()},
    }
    (out / "calibration.json").write_text(formats.dumps_canonical(report) + "\n")
    print(formats.dumps_canonical(report))
    return EXIT_OK


def cmd_validate(args) -> int:
    issues = []
    path = Path(args.input)
    try:
        if not path.exists():
            raise DataFormatError(f"{path}: no such file")
        if path.suffix == ".jsonl":
            head = json.loads(path.open().readline())
            fmt = head.get("format")
            if fmt == formats.FORMAT_VERSION:
                ds = formats.read_quadrature_dataset(path)
                var = float(np.var(ds.qs))
                if not (1e-3 < var < 1e3):
                    issues.append(f"sample variance {var:.3g} outside sanity bounds")
            elif fmt == formats.ARRAY_FORMAT:
                formats.read_array_frames(path)
            elif fmt == formats.KREC_FORMAT:
                formats.read_k_records(path)
            else:
                raise DataFormatError(f"{path}: unknown format tag {fmt!r}")
        elif path.suffix == ".json":
            doc = json.loads(path.read_text())
            if doc.get("format") == formats.MANIFEST_FORMAT:
                for name, digest in doc["files"].items():
                    fpath = path.parent / name
                    if not fpath.exists():
                        issues.append(f"manifest file missing: {name}")
                    elif formats.sha256_file(fpath) != digest:
                        issues.append(f"checksum mismatch: {name}")
            elif "re" in doc and "im" in doc:
                formats.read_density_matrix(path)
            else:
                raise DataFormatError(f"{path}: unrecognized JSON document")
        else:
            raise DataFormatError(f"{path}: unknown artifact type")
    except (json.JSONDecodeError, KeyError, ValueError) as exc:
        raise DataFormatError(f"{path}: {exc}") from exc
    report = {"input": str(path), "issues": issues, "ok": not issues}
    print(formats.dumps_canonical(report))
    if issues and not args.report:
        return EXIT_DATA
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ohtlab",
                                description="homodyne tomography laboratory pipelines")
    p.add_argument("--threads", type=int, default=None,
                   help="bound worker threads (outputs never depend on this)")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int, default=None, help="override config seed")
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--format", choices=["csv", "json"], default=None)

    sp = sub.add_parser("simulate", help="synthesize a quadrature dataset")
    sp.add_argument("--config", required=True)
    common(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("reconstruct", help="invert a dataset to W and/or rho")
    sp.add_argument("--input", required=True)
    sp.add_argument("--method", choices=["radon", "pattern", "both"], default="both")
    sp.add_argument("--dim", type=int, default=8, help="pattern reconstruction size")
    sp.add_argument("--phases", type=int, default=None,
                    help="phase-grid size (defaults to the dataset schedule)")
    sp.add_argument("--k-c", type=float, default=5.0, dest="k_c")
    sp.add_argument("--phase-bins", type=int, default=32, dest="phase_bins")
    sp.add_argument("--bootstrap", type=int, default=0)
    common(sp)
    sp.set_defaults(func=cmd_reconstruct)

    sp = sub.add_parser("moments", help="photon statistics straight from a dataset")
    sp.add_argument("--input", required=True)
    common(sp)
    sp.set_defaults(func=cmd_moments)

    sp = sub.add_parser("twomode", help="dual-LO three-angle g2 pipeline")
    sp.add_argument("--config", required=True)
    common(sp)
    sp.set_defaults(func=cmd_twomode)

    sp = sub.add_parser("array", help="array-detector frames and mode recovery")
    sp.add_argument("--config", required=True)
    common(sp)
    sp.set_defaults(func=cmd_array)

    sp = sub.add_parser("sample", help="band-limited linear optical sampling demo")
    sp.add_argument("--config", required=True)
    common(sp)
    sp.set_defaults(func=cmd_sample)

    sp = sub.add_parser("calibrate", help="detector gain/noise calibration run")
    sp.add_argument("--config", required=True)
    common(sp)
    sp.set_defaults(func=cmd_calibrate)

    sp = sub.add_parser("validate", help="check an artifact file")
    sp.add_argument("--input", required=True)
    sp.add_argument("--report", action="store_true",
                    help="list issues without a failing exit code")
    common(sp)
    sp.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AliasingError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        print("hint: a state holding at most ñ photons needs ñ+1 equally spaced "
              "LO phases; rerun the simulation with more phases or lower --dim",
              file=sys.stderr)
        return EXIT_DATA
    except (DataFormatError, CoverageError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (GramConditionError, TruncationError, NearVacuumError,
            FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OhtlabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
