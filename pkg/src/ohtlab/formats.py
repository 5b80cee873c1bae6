"""File formats: JSON-Lines datasets, density-matrix JSON, long-format CSVs.

All writers emit canonical JSON (sorted keys, compact separators) so a rerun
with the same seed produces byte-identical artifacts.  Readers reject files
whose format tag is missing or unknown.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .detection import (FORMAT_VERSION, DatasetMeta, DetectorModel, PhaseSchedule,
                        QuadratureDataset)
from .errors import DataFormatError
from .states import DensityMatrix, WignerGrid
from .twomode import DualQuadratureDataset

ARRAY_FORMAT = "ohtlab-array-v1"
KREC_FORMAT = "ohtlab-krec-v1"
MANIFEST_FORMAT = "ohtlab-manifest-v1"


def dumps_canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _dataset_header(ds) -> dict:
    det = ds.meta.detector
    sched = ds.meta.schedule
    header = {
        "format": FORMAT_VERSION,
        "eta_q": det.eta_q,
        "eta_ls": det.eta_ls,
        "lo_mean_photons": det.lo_mean_photons,
        "sigma_e": det.sigma_e,
        "schedule": sched.to_dict(),
        "n_phases": sched.d,
        "seed": ds.meta.seed,
    }
    if ds.meta.source is not None:
        header["source"] = ds.meta.source
    if isinstance(ds, DualQuadratureDataset):
        header["mode"] = "dual"
        header["alpha"] = ds.alpha
        header["zeta_schedule"] = ds.meta.extra.get("zeta_schedule")
    return header


def write_quadrature_dataset(path, ds) -> None:
    """Write a (single or dual) quadrature record as JSON Lines."""
    path = Path(path)
    with open(path, "w") as f:
        f.write(dumps_canonical(_dataset_header(ds)) + "\n")
        if isinstance(ds, DualQuadratureDataset):
            for th, ze, q in zip(ds.thetas, ds.zetas, ds.qs):
                f.write(dumps_canonical({"theta": float(th), "zeta": float(ze),
                                         "Q": float(q)}) + "\n")
        else:
            for th, q in zip(ds.thetas, ds.qs):
                f.write(dumps_canonical({"theta": float(th), "q": float(q)}) + "\n")


def read_quadrature_dataset(path):
    """Read an ohtlab-quad-v1 file; returns QuadratureDataset or
    DualQuadratureDataset according to the header."""
    path = Path(path)
    with open(path) as f:
        first = f.readline()
        try:
            header = json.loads(first)
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"{path}: header line is not JSON: {exc}") from exc
        if header.get("format") != FORMAT_VERSION:
            raise DataFormatError(
                f"{path}: format {header.get('format')!r} is not {FORMAT_VERSION!r}"
            )
        dual = header.get("mode") == "dual"
        thetas, zetas, qs = [], [], []
        for i, line in enumerate(f, start=2):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                thetas.append(rec["theta"])
                if dual:
                    zetas.append(rec["zeta"])
                    qs.append(rec["Q"])
                else:
                    qs.append(rec["q"])
            except (json.JSONDecodeError, KeyError) as exc:
                raise DataFormatError(f"{path}:{i}: bad record: {exc}") from exc
    det = DetectorModel(eta_q=header["eta_q"], eta_ls=header["eta_ls"],
                        lo_mean_photons=header["lo_mean_photons"],
                        sigma_e=header["sigma_e"])
    sched = PhaseSchedule.from_dict(header["schedule"])
    meta = DatasetMeta(detector=det, schedule=sched, seed=header["seed"],
                       source=header.get("source"))
    if dual:
        meta.extra = {"mode": "dual", "alpha": header["alpha"],
                      "zeta_schedule": header.get("zeta_schedule")}
        return DualQuadratureDataset(thetas=np.array(thetas), zetas=np.array(zetas),
                                     qs=np.array(qs), alpha=header["alpha"], meta=meta)
    return QuadratureDataset(thetas=np.array(thetas), qs=np.array(qs), meta=meta)


def write_density_matrix(path, rho: DensityMatrix, errors: np.ndarray | None = None) -> None:
    doc = {
        "dim": rho.dim,
        "re": [[float(x) for x in row] for row in rho.elements.real],
        "im": [[float(x) for x in row] for row in rho.elements.imag],
    }
    if errors is not None:
        doc["errors"] = [[float(x) for x in row] for row in np.asarray(errors)]
    Path(path).write_text(dumps_canonical(doc) + "\n")


def read_density_matrix(path):
    doc = json.loads(Path(path).read_text())
    for key in ("dim", "re", "im"):
        if key not in doc:
            raise DataFormatError(f"{path}: missing key {key!r}")
    elements = np.array(doc["re"], float) + 1j * np.array(doc["im"], float)
    rho = DensityMatrix(dim=doc["dim"], elements=elements, normalized=False)
    errors = np.array(doc["errors"], float) if "errors" in doc else None
    return rho, errors


def write_wigner_csv(path, w: WignerGrid) -> None:
    with open(path, "w") as f:
        f.write("q,p,w\n")
        for i, qv in enumerate(w.q_axis):
            for j, pv in enumerate(w.p_axis):
                f.write(f"{float(qv)!r},{float(pv)!r},{float(w.values[i, j])!r}\n")


def read_wigner_csv(path) -> WignerGrid:
    raw = np.genfromtxt(path, delimiter=",", names=True)
    if raw.dtype.names != ("q", "p", "w"):
        raise DataFormatError(f"{path}: expected header q,p,w")
    q_axis = np.unique(raw["q"])
    p_axis = np.unique(raw["p"])
    vals = raw["w"].reshape(q_axis.size, p_axis.size)
    return WignerGrid(q_axis=q_axis, p_axis=p_axis, values=vals)


def write_pn_csv(path, p: np.ndarray, stderr: np.ndarray) -> None:
    with open(path, "w") as f:
        f.write("n,p,stderr\n")
        for n, (pv, se) in enumerate(zip(p, stderr)):
            f.write(f"{n},{float(pv)!r},{float(se)!r}\n")


def write_phase_csv(path, phi_axis, values) -> None:
    with open(path, "w") as f:
        f.write("phi,pr\n")
        for x, v in zip(phi_axis, values):
            f.write(f"{float(x)!r},{float(v)!r}\n")


def write_signal_csv(path, t_axis, values) -> None:
    values = np.asarray(values, complex)
    with open(path, "w") as f:
        f.write("t,re,im\n")
        for t, v in zip(t_axis, values):
            f.write(f"{float(t)!r},{float(v.real)!r},{float(v.imag)!r}\n")


def write_map_csv(path, omega_axis, t_axis, values) -> None:
    with open(path, "w") as f:
        f.write("omega,t,value\n")
        for i, om in enumerate(omega_axis):
            for j, t in enumerate(t_axis):
                f.write(f"{float(om)!r},{float(t)!r},{float(values[i, j])!r}\n")


def write_array_frames(path, frames) -> None:
    header = {
        "format": ARRAY_FORMAT,
        "n_pixels": frames.grid.n_pixels,
        "pixel_area": frames.grid.pixel_area,
        "eta_q": frames.detector.eta_q,
        "lo_mean_photons": frames.detector.lo_mean_photons,
        "sigma_e": frames.detector.sigma_e,
        "schedule": frames.schedule.to_dict(),
        "seed": frames.seed,
        "vacuum_offsets": [float(x) for x in frames.vacuum_offsets],
        "planted": frames.planted,
    }
    with open(path, "w") as f:
        f.write(dumps_canonical(header) + "\n")
        for th, row in zip(frames.thetas, frames.frames):
            f.write(dumps_canonical({"theta": float(th), "d": [int(x) for x in row]}) + "\n")


def read_array_frames(path):
    from .arrays import ArrayFrameSet, PixelGrid

    with open(path) as f:
        header = json.loads(f.readline())
        if header.get("format") != ARRAY_FORMAT:
            raise DataFormatError(f"{path}: not an {ARRAY_FORMAT} file")
        thetas, rows = [], []
        for line in f:
            if not line.strip():
                continue
            rec = json.loads(line)
            thetas.append(rec["theta"])
            rows.append(rec["d"])
    grid = PixelGrid(n_pixels=header["n_pixels"], pixel_area=header["pixel_area"])
    det = DetectorModel(eta_q=header["eta_q"], lo_mean_photons=header["lo_mean_photons"],
                        sigma_e=header["sigma_e"])
    return ArrayFrameSet(frames=np.array(rows, np.int64), thetas=np.array(thetas),
                         vacuum_offsets=np.array(header["vacuum_offsets"]),
                         grid=grid, detector=det,
                         schedule=PhaseSchedule.from_dict(header["schedule"]),
                         seed=header["seed"], planted=header.get("planted", []))


def write_k_records(path, recs) -> None:
    header = {
        "format": KREC_FORMAT,
        "l_values": [int(x) for x in recs.l_values],
        "lo_photons": recs.lo_photons,
        "eta_q": recs.eta_q,
        "window": recs.window,
        "j_lo": recs.j_lo,
    }
    with open(path, "w") as f:
        f.write(dumps_canonical(header) + "\n")
        for pulse, row in enumerate(recs.K):
            for l, val in zip(recs.l_values, row):
                f.write(dumps_canonical({"pulse": pulse, "l": int(l),
                                         "re": float(val.real), "im": float(val.imag)}) + "\n")


def read_k_records(path):
    from .arrays import SpectralKRecords

    with open(path) as f:
        header = json.loads(f.readline())
        if header.get("format") != KREC_FORMAT:
            raise DataFormatError(f"{path}: not an {KREC_FORMAT} file")
        l_values = np.array(header["l_values"], int)
        by_pulse = {}
        for line in f:
            if not line.strip():
                continue
            rec = json.loads(line)
            by_pulse.setdefault(rec["pulse"], {})[rec["l"]] = rec["re"] + 1j * rec["im"]
    K = np.array([[by_pulse[p][l] for l in l_values] for p in sorted(by_pulse)], complex)
    return SpectralKRecords(l_values=l_values, K=K, lo_photons=header["lo_photons"],
                            eta_q=header["eta_q"], window=header["window"],
                            j_lo=header["j_lo"])


def write_manifest(path, seed: int, config: dict, files: dict) -> None:
    import ohtlab

    doc = {
        "format": MANIFEST_FORMAT,
        "seed": seed,
        "config": config,
        "versions": {"ohtlab": ohtlab.__version__, "numpy": np.__version__},
        "files": {name: sha256_file(p) for name, p in files.items()},
    }
    Path(path).write_text(dumps_canonical(doc) + "\n")
