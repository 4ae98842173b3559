"""YAML spec files for curves, base paths and gauge potentials.

Curve spec::

    kind: cone                 # a preset name, or "sampled"
    duration: 6.283185307179586
    sample_count: 2001
    parameters: {theta0: 1.0471975511965976, rate: 1.0}
    magnitude: 0.5             # number, or a mapping (see MAGNITUDE_KINDS)

Sampled curves replace ``parameters`` with ``table: file.csv`` holding the
columns t, r, theta, phi (radians), comma- or whitespace-delimited; relative
paths resolve against the spec file's directory.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np
import yaml

from . import curves as fc
from . import holonomy as hol

MAGNITUDE_KINDS = ("constant", "linear", "wobble", "step", "lemma1", "designed")


class SpecError(ValueError):
    """A spec file is malformed or refers to something unknown."""


def read_yaml(path) -> tuple[dict, str]:
    """Return the parsed mapping and the sha256 of the raw bytes."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise SpecError(f"cannot read {path}: {exc}") from exc
    try:
        data = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise SpecError(f"{path}: not valid YAML ({exc})") from exc
    if not isinstance(data, dict):
        raise SpecError(f"{path}: expected a mapping at top level")
    return data, hashlib.sha256(raw).hexdigest()


def read_table(path, columns: int | None = None) -> np.ndarray:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise SpecError(f"cannot read table {path}: {exc}") from exc
    delimiter = "," if "," in text else None
    try:
        table = np.loadtxt(path, delimiter=delimiter, comments="#", ndmin=2)
    except ValueError as exc:
        raise SpecError(f"{path}: {exc}") from exc
    if columns is not None and table.shape[1] != columns:
        raise SpecError(f"{path}: expected {columns} columns, found {table.shape[1]}")
    return table


def _call(factory, params: dict, what: str):
    try:
        return factory(**params)
    except TypeError as exc:
        raise SpecError(f"bad parameters for {what}: {exc}") from exc


def _magnitude(spec, direction: fc.FieldCurve) -> fc.FieldCurve:
    if spec is None:
        return direction
    if isinstance(spec, (int, float)):
        return direction.with_magnitude(float(spec))
    if not isinstance(spec, dict) or "kind" not in spec:
        raise SpecError("magnitude must be a number or a mapping with a 'kind'")
    kind = spec["kind"]
    params = {k: v for k, v in spec.items() if k != "kind"}
    if kind == "constant":
        return direction.with_magnitude(_call(fc.Profile.constant, {"c": params.get("value")}, "constant"))
    if kind == "linear":
        return direction.with_magnitude(_call(fc.Profile.linear, params, "linear magnitude"))
    if kind == "wobble":
        return direction.with_magnitude(_call(fc.Profile.wobble, params, "wobble magnitude"))
    if kind == "step":
        return direction.with_magnitude(_call(fc.Profile.step_change, params, "step magnitude"))
    if kind in ("lemma1", "designed"):
        nu0 = 0.0 if kind == "lemma1" else params.get("nu0")
        if nu0 is None:
            raise SpecError("designed magnitude needs nu0")
        return fc.design_field(direction, float(nu0))
    raise SpecError(f"unknown magnitude kind {kind!r}; expected one of {MAGNITUDE_KINDS}")


def curve_from_spec(spec: dict, base_dir=".", need_magnitude: bool = True) -> fc.FieldCurve:
    kind = spec.get("kind")
    if kind == "sampled":
        if "table" not in spec:
            raise SpecError("sampled curve needs a 'table' entry")
        table = read_table(Path(base_dir) / spec["table"], 4)
        try:
            return fc.sampled_curve(*table.T)
        except ValueError as exc:
            raise SpecError(str(exc)) from exc
    if kind not in fc.PRESETS:
        raise SpecError(f"unknown curve kind {kind!r}; expected 'sampled' or one of {sorted(fc.PRESETS)}")
    if "duration" not in spec:
        raise SpecError("curve spec needs a duration")
    params = dict(spec.get("parameters") or {})
    try:
        duration = float(spec["duration"])
        sample_count = int(spec.get("sample_count", fc.DEFAULT_SAMPLES))
    except (TypeError, ValueError) as exc:
        raise SpecError(f"bad duration or sample_count: {exc}") from exc
    direction = _call(fc.PRESETS[kind], dict(params, duration=duration, sample_count=sample_count), kind)
    if need_magnitude and spec.get("magnitude") is None:
        raise SpecError("curve spec needs a magnitude")
    return _magnitude(spec.get("magnitude"), direction)


def load_curve(path, need_magnitude: bool = True) -> tuple[fc.FieldCurve, dict, str]:
    spec, digest = read_yaml(path)
    return curve_from_spec(spec, Path(path).parent, need_magnitude), spec, digest


def designed_spec(direction_spec: dict, nu0: float) -> dict:
    """The curve spec that reproduces ``design_field(direction, nu0)`` on reload."""
    out = {k: v for k, v in direction_spec.items() if k != "magnitude"}
    out["magnitude"] = {"kind": "designed", "nu0": float(nu0)}
    return out


def dump_yaml(data: dict, path) -> None:
    Path(path).write_text(yaml.safe_dump(data, sort_keys=False))


def path_from_spec(spec: dict, base_dir=".") -> hol.BasePath:
    kind = spec.get("kind")
    params = dict(spec.get("parameters") or {})
    if "duration" in spec:
        params["duration"] = float(spec["duration"])
    if kind == "sampled":
        if "table" not in spec:
            raise SpecError("sampled path needs a 'table' entry")
        table = read_table(Path(base_dir) / spec["table"])
        try:
            return hol.sampled_path(table[:, 0], table[:, 1:])
        except ValueError as exc:
            raise SpecError(str(exc)) from exc
    if kind not in hol.PATHS:
        raise SpecError(f"unknown path kind {kind!r}; expected 'sampled' or one of {sorted(hol.PATHS)}")
    return _call(hol.PATHS[kind], params, f"{kind} path")


def potential_from_spec(spec: dict) -> hol.GaugePotential:
    kind = spec.get("kind")
    if kind not in hol.POTENTIALS:
        raise SpecError(f"unknown potential kind {kind!r}; expected one of {sorted(hol.POTENTIALS)}")
    return _call(hol.POTENTIALS[kind], dict(spec.get("parameters") or {}), f"{kind} potential")
