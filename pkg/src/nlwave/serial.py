"""On-disk formats: raw little-endian float64 arrays with JSON sidecars for
fields and sinograms, JSON experiment configs, CSV tables, and run
manifests keyed by a config hash.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .model import (
    COMPLEX,
    COMPLEX_WAVE,
    REAL,
    REAL_WAVE,
    Envelope,
    ExperimentConfig,
    Grid2D,
    NonlinearityBase,
    OddSeparated,
    PolyInP,
    PolynomialNonlinearity,
    ScalarField2D,
    ZeroNonlinearity,
    gaussian_field,
    gaussian_support_radius,
)
from .xray import Sinogram


# ---------------------------------------------------------------------------
# fields and sinograms: raw f64 + sidecar
# ---------------------------------------------------------------------------

def save_field(field: ScalarField2D, base: str | Path) -> None:
    """base.f64 holds row-major little-endian float64 samples (complex
    interleaved re,im); base.json carries the grid and kind."""
    base = Path(base)
    g = field.grid
    if field.kind == COMPLEX:
        data = field.values.astype("<c16", copy=False)
    else:
        data = field.values.astype("<f8", copy=False)
    base.with_suffix(".f64").write_bytes(data.tobytes())
    meta = {"nx": g.nx, "ny": g.ny, "xmin": g.xmin, "xmax": g.xmax,
            "ymin": g.ymin, "ymax": g.ymax, "kind": field.kind}
    base.with_suffix(".json").write_text(json.dumps(meta, indent=1))


def load_field(base: str | Path) -> ScalarField2D:
    base = Path(base)
    meta = json.loads(base.with_suffix(".json").read_text())
    grid = Grid2D(meta["nx"], meta["ny"], meta["xmin"], meta["xmax"],
                  meta["ymin"], meta["ymax"])
    raw = base.with_suffix(".f64").read_bytes()
    dtype = "<c16" if meta["kind"] == COMPLEX else "<f8"
    vals = np.frombuffer(raw, dtype=dtype).reshape(meta["ny"], meta["nx"])
    return ScalarField2D(grid, vals.copy(), meta["kind"])


def save_sinogram(sino: Sinogram, base: str | Path) -> None:
    base = Path(base)
    base.with_suffix(".f64").write_bytes(
        sino.values.astype("<f8", copy=False).tobytes())
    meta = {"n_angles": sino.n_angles, "n_offsets": sino.n_offsets,
            "L": sino.L}
    base.with_suffix(".json").write_text(json.dumps(meta, indent=1))


def load_sinogram(base: str | Path) -> Sinogram:
    base = Path(base)
    meta = json.loads(base.with_suffix(".json").read_text())
    raw = base.with_suffix(".f64").read_bytes()
    vals = np.frombuffer(raw, dtype="<f8").reshape(meta["n_angles"],
                                                   meta["n_offsets"])
    angles = np.arange(meta["n_angles"]) * (math.pi / meta["n_angles"])
    offsets = np.linspace(-meta["L"], meta["L"], meta["n_offsets"])
    return Sinogram(angles=angles, offsets=offsets, values=vals.copy())


def write_csv(path: str | Path, header: list[str],
              columns: list[np.ndarray]) -> None:
    arr = np.column_stack([np.asarray(c) for c in columns])
    np.savetxt(path, arr, delimiter=",", header=",".join(header), comments="")


# ---------------------------------------------------------------------------
# experiment config JSON
# ---------------------------------------------------------------------------

def _envelope_to_dict(chi: Envelope) -> dict:
    d = {"kind": chi.kind, "amplitude": chi.amplitude}
    if chi.kind == "gaussian":
        d["width2"] = chi.width2
    else:
        d["delta"] = chi.delta
    return d


def _envelope_from_dict(d: dict) -> Envelope:
    return Envelope(kind=d["kind"], amplitude=d.get("amplitude", 1.0),
                    width2=d.get("width2", 0.02), delta=d.get("delta", 0.0))


def tag_alpha(nl: NonlinearityBase, spec: dict) -> NonlinearityBase:
    """Attach the JSON-expressible description of the coefficient fields
    (needed to serialize a config; sampled arrays alone are not enough)."""
    object.__setattr__(nl, "_alpha_spec", spec)
    return nl


def _alpha_spec_of(nl: NonlinearityBase) -> dict:
    spec = getattr(nl, "_alpha_spec", None)
    if spec is None:
        raise ConfigError(
            "nonlinearity carries no serializable coefficient spec; build "
            "it from a config or tag it with serial.tag_alpha")
    return spec


def _nonlinearity_to_dict(nl: NonlinearityBase) -> dict:
    if isinstance(nl, ZeroNonlinearity):
        return {"variant": "zero"}
    if isinstance(nl, OddSeparated):
        if not isinstance(nl.f0, PolyInP):
            raise ConfigError("only polynomial F0 profiles serialize to JSON")
        return {"variant": "odd_separated",
                "alpha": _alpha_spec_of(nl),
                "f0_poly": list(nl.f0.coeffs),
                "support_radius": nl.support_radius}
    if isinstance(nl, PolynomialNonlinearity):
        return {"variant": "polynomial",
                "terms": [{"degree": m, "alpha": _alpha_spec_of(nl)}
                          for m, _ in nl.terms],
                "support_radius": nl.support_radius}
    raise ConfigError(f"cannot serialize {type(nl).__name__} to JSON")


def _alpha_from_dict(d: dict, grid: Grid2D) -> tuple[ScalarField2D, float]:
    if d.get("kind", "gaussian") != "gaussian":
        raise ConfigError("only gaussian alpha specs load from JSON")
    amp = d.get("amplitude", 1.0)
    w2 = d.get("width2", 0.02)
    center = tuple(d.get("center", (0.0, 0.0)))
    field = gaussian_field(grid, amp, w2, center)
    return field, gaussian_support_radius(abs(amp), w2)


def _nonlinearity_from_dict(d: dict, grid: Grid2D) -> NonlinearityBase:
    variant = d["variant"]
    if variant == "zero":
        return ZeroNonlinearity()
    if variant == "odd_separated":
        alpha, R = _alpha_from_dict(d["alpha"], grid)
        nl = OddSeparated(alpha=alpha, f0=PolyInP(tuple(d["f0_poly"])),
                          support_radius=d.get("support_radius", R))
        object.__setattr__(nl, "_alpha_spec", d["alpha"])
        return nl
    if variant == "polynomial":
        terms = []
        R = 0.0
        spec0 = None
        for t in d["terms"]:
            alpha, Ri = _alpha_from_dict(t["alpha"], grid)
            terms.append((int(t["degree"]), alpha))
            R = max(R, Ri)
            spec0 = t["alpha"]
        nl = PolynomialNonlinearity(terms=tuple(terms),
                                    support_radius=d.get("support_radius", R))
        object.__setattr__(nl, "_alpha_spec", spec0)
        return nl
    raise ConfigError(f"unknown nonlinearity variant {variant!r}")


def config_to_dict(config: ExperimentConfig) -> dict:
    g = config.grid
    p = config.probe
    return {
        "grid": {"nx": g.nx, "ny": g.ny, "xmin": g.xmin, "xmax": g.xmax,
                 "ymin": g.ymin, "ymax": g.ymax},
        "probe": {"h": p.h, "omega": list(p.omega),
                  "chi": _envelope_to_dict(p.chi), "T": p.T,
                  "field_kind": p.field_kind},
        "nonlinearity": _nonlinearity_to_dict(config.nonlinearity),
        "cfl": config.cfl,
        "outputs": {"dir": config.out_dir or "."},
    }


def config_from_dict(d: dict) -> ExperimentConfig:
    from .model import ProbeSpec
    g = d["grid"]
    grid = Grid2D(g["nx"], g["ny"], g["xmin"], g["xmax"], g["ymin"],
                  g["ymax"])
    pr = d["probe"]
    probe = ProbeSpec(h=pr["h"], omega=tuple(pr["omega"]),
                      chi=_envelope_from_dict(pr["chi"]), T=pr["T"],
                      field_kind=pr.get("field_kind", REAL_WAVE))
    nl = _nonlinearity_from_dict(d["nonlinearity"], grid)
    return ExperimentConfig(grid=grid, probe=probe, nonlinearity=nl,
                            cfl=d.get("cfl", 0.5),
                            out_dir=d.get("outputs", {}).get("dir"))


def save_config(config: ExperimentConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(config_to_dict(config), indent=1))


def load_config(path: str | Path) -> ExperimentConfig:
    return config_from_dict(json.loads(Path(path).read_text()))


def config_hash(config: ExperimentConfig) -> str:
    blob = json.dumps(config_to_dict(config), sort_keys=True,
                      separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def write_manifest(path: str | Path, config: ExperimentConfig, dt: float,
                   n_steps: int, capture_times: list[float],
                   max_history: list[float]) -> None:
    doc = {
        "config_hash": config_hash(config),
        "dt": dt,
        "n_steps": n_steps,
        "capture_times": list(capture_times),
        "max_abs_u": [float(v) for v in max_history],
    }
    Path(path).write_text(json.dumps(doc, indent=1))
