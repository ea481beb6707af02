"""File formats: CSV tables, JSON envelopes, design bundles, sweep manifests.

All floats are written with shortest-roundtrip precision, so JSON round trips
are bit-exact. Writes go through a temp file plus atomic rename; a failed
command never leaves partial output behind.
"""
from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from .bench import FidelitySweep, ToyModelResult
from .curves import FrenetData, SpaceCurve
from .dynamics import ControlFields
from .errors import PreconditionError
from .holonomy import BlochPath
from .synthesis import DogDesign


def _fmt(x: float) -> str:
    return repr(float(x))


def write_text_atomic(path: str | Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def content_hash(data: bytes | str | Path) -> str:
    """sha256 of file contents (Path) or raw data."""
    if isinstance(data, Path):
        data = data.read_bytes()
    if isinstance(data, str):
        data = data.encode()
    return hashlib.sha256(data).hexdigest()


def json_dumps(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# CSV renderings
# ---------------------------------------------------------------------------

def _csv(header: list[str], columns: list[np.ndarray]) -> str:
    rows = ["",] * (len(columns[0]) + 1)
    rows[0] = ",".join(header)
    cols = [np.asarray(c, dtype=float) for c in columns]
    for i in range(len(cols[0])):
        rows[i + 1] = ",".join(_fmt(c[i]) for c in cols)
    return "\n".join(rows) + "\n"


def curve_csv(curve: SpaceCurve) -> str:
    return _csv(["t", "x", "y", "z"],
                [curve.t, curve.points[:, 0], curve.points[:, 1], curve.points[:, 2]])


def curve_from_csv(text: str) -> SpaceCurve:
    lines = [ln for ln in text.strip().splitlines() if ln]
    if lines[0].split(",") != ["t", "x", "y", "z"]:
        raise PreconditionError("bad curve CSV header")
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    return SpaceCurve(t=data[:, 0], points=data[:, 1:4])


def fields_csv(fields: ControlFields) -> str:
    return _csv(["t", "omega", "phi", "delta"],
                [fields.t, fields.omega, fields.phi, fields.delta])


def fields_from_csv(text: str, jumps=(), metadata=None) -> ControlFields:
    lines = [ln for ln in text.strip().splitlines() if ln]
    if lines[0].split(",") != ["t", "omega", "phi", "delta"]:
        raise PreconditionError("bad fields CSV header")
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    return ControlFields(t=data[:, 0], omega=data[:, 1], phi=data[:, 2],
                         delta=data[:, 3], jumps=tuple(jumps),
                         metadata=dict(metadata or {}))


def path_csv(path: BlochPath) -> str:
    return _csv(["t", "theta", "phi", "alpha"],
                [path.t, path.theta, path.phi, path.alpha])


def frenet_csv(data: FrenetData) -> str:
    out = ["t,kappa,tau,defined"]
    for i in range(len(data.t)):
        out.append(f"{_fmt(data.t[i])},{_fmt(data.kappa[i])},"
                   f"{_fmt(data.tau[i])},{int(data.defined[i])}")
    return "\n".join(out) + "\n"


def sweep_csv(sweep: FidelitySweep) -> str:
    header = ["axis"] + [label for label, _ in sweep.series]
    cols = [sweep.axis] + [vals for _, vals in sweep.series]
    return _csv(header, cols)


def toy_table_csv(results: Iterable[ToyModelResult]) -> str:
    out = ["scenario,gate_kind,phi,eps,f_closed_form,f_simulated,is_approximation"]
    for r in results:
        out.append(f"{r.scenario},{r.gate_kind},{_fmt(r.phi)},{_fmt(r.eps)},"
                   f"{_fmt(r.f_closed_form)},{_fmt(r.f_simulated)},"
                   f"{int(r.is_approximation)}")
    return "\n".join(out) + "\n"


def phase_map_csv(table: Iterable[tuple[float, float]]) -> str:
    out = ["xi,beta_g"]
    for xi, bg in table:
        out.append(f"{_fmt(xi)},{_fmt(bg)}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# design bundles
# ---------------------------------------------------------------------------

def save_design(design: DogDesign, out_dir: str | Path) -> dict[str, str]:
    """Write a design bundle (JSON + companion CSVs); returns path->hash map."""
    out_dir = Path(out_dir)
    files = {
        "design.json": json_dumps(design.to_dict()) + "\n",
        "curve.csv": curve_csv(design.error_curve),
        "fields.csv": fields_csv(design.fields),
        "path.csv": path_csv(design.path),
    }
    hashes = {}
    for name, text in files.items():
        write_text_atomic(out_dir / name, text)
        hashes[name] = content_hash(text)
    write_text_atomic(out_dir / "manifest.json",
                      json_dumps({"kind": "design_bundle",
                                  "family": design.family,
                                  "parameters": design.parameters,
                                  "hashes": hashes}) + "\n")
    return hashes


def load_design(bundle: str | Path) -> DogDesign:
    """Load a design from a bundle directory or its design.json path."""
    p = Path(bundle)
    if p.is_dir():
        p = p / "design.json"
    try:
        data = json.loads(p.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise PreconditionError(f"cannot read design bundle: {exc}") from exc
    if data.get("kind") != "dog_design":
        raise PreconditionError("not a design bundle")
    return DogDesign.from_dict(data)


def save_sweep(sweep: FidelitySweep, out_dir: str | Path,
               extra_manifest: dict | None = None) -> dict[str, str]:
    out_dir = Path(out_dir)
    text = sweep_csv(sweep)
    write_text_atomic(out_dir / "sweep.csv", text)
    manifest = {
        "kind": "fidelity_sweep",
        "axis_kind": sweep.axis_kind,
        "axis": sweep.axis.tolist(),
        "series": [label for label, _ in sweep.series],
        "metadata": dict(sweep.metadata),
        "hashes": {"sweep.csv": content_hash(text)},
    }
    manifest.update(extra_manifest or {})
    write_text_atomic(out_dir / "manifest.json", json_dumps(manifest) + "\n")
    return manifest["hashes"]
