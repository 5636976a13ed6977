"""File formats: trace I/O, device/material records, fit reports.

Traces travel as Touchstone 1-port files (.s1p) or three-column CSV
(freq_hz, re, im).  Both writers emit 17 significant digits so a write/read
round trip is bit-exact.  Device tables and materials are JSON with
SI-unit field names; a measured-device catalog ships with the package.
"""

from __future__ import annotations

import csv
import fnmatch
import io
import json
import math
import warnings
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import TraceFormatError, ValidationError
from .fitting import FitResult
from .geometry import DeviceGeometry, MaterialParams
from .response import ComplexTrace

REPORT_SCHEMA = "sawres-fit-report/1"
DEVICES_SCHEMA = "sawres-devices/1"

# Trace meta keys that survive a write/read round trip.
_META_KEYS = ("power_dbm", "attenuation_db", "temperature_k")

_REPORT_FIELDS = ("f0_hz", "qi", "qe", "qi_sigma", "qe_sigma",
                  "residual_rms", "converged")


@dataclass(frozen=True)
class DeviceRecord:
    """One measured device: geometry plus measured resonance parameters."""

    name: str
    geometry: DeviceGeometry
    f0_meas: float
    qe_meas: float
    qi_meas: float
    qi_f0_product: float

    def __post_init__(self) -> None:
        for field in ("f0_meas", "qe_meas", "qi_meas", "qi_f0_product"):
            value = getattr(self, field)
            if not (math.isfinite(value) and value > 0):
                raise ValidationError(
                    f"{field}: must be finite and > 0, got {value} "
                    f"(device {self.name!r})")
        product = self.qi_meas * self.f0_meas
        rel = abs(self.qi_f0_product - product) / self.qi_f0_product
        if rel > 0.01:
            raise ValidationError(
                f"qi_f0_product: {self.qi_f0_product:.4g} disagrees with "
                f"qi_meas*f0_meas = {product:.4g} by {100 * rel:.2f}% "
                f"(device {self.name!r})")


@dataclass(frozen=True)
class DeviceTable:
    """A device catalog and the material its measurements assume."""

    material: MaterialParams
    devices: tuple[DeviceRecord, ...]

    def __getitem__(self, name: str) -> DeviceRecord:
        for d in self.devices:
            if d.name == name:
                return d
        raise KeyError(name)

    def select(self, patterns: str | Sequence[str]) -> tuple[DeviceRecord, ...]:
        """Devices whose name matches any glob pattern, in table order.

        patterns may be a comma-separated string ("r*,q3") or a sequence.
        """
        if isinstance(patterns, str):
            patterns = [p.strip() for p in patterns.split(",") if p.strip()]
        picked = tuple(d for d in self.devices
                       if any(fnmatch.fnmatch(d.name, p) for p in patterns))
        if not picked:
            raise ValidationError(
                f"name: no device matches {list(patterns)}; table has "
                f"{[d.name for d in self.devices]}")
        return picked


def _get(obj: dict, field: str, where: str) -> object:
    if field not in obj:
        raise ValidationError(f"{field}: missing in {where}")
    return obj[field]


def material_from_dict(obj: dict, where: str = "material") -> MaterialParams:
    return MaterialParams(
        v=float(_get(obj, "v_m_per_s", where)),
        rho=float(_get(obj, "rho_kg_per_m3", where)),
        rs_mag=float(_get(obj, "rs_mag", where)),
        temperature=float(_get(obj, "temperature_k", where)))


def geometry_from_dict(obj: dict, where: str = "geometry") -> DeviceGeometry:
    return DeviceGeometry(
        a=float(_get(obj, "a_m", where)),
        w=float(_get(obj, "w_m", where)),
        nt=int(_get(obj, "nt", where)),
        ng=int(_get(obj, "ng", where)),
        m_half_waves=int(_get(obj, "m_half_waves", where)),
        h=float(_get(obj, "h_m", where)))


def load_material(path: str | Path) -> MaterialParams:
    with open(path) as fh:
        return material_from_dict(json.load(fh), where=str(path))


def load_geometry(path: str | Path) -> DeviceGeometry:
    with open(path) as fh:
        return geometry_from_dict(json.load(fh), where=str(path))


def load_device_table(path: str | Path | None = None) -> DeviceTable:
    """Load a device table; None loads the bundled measured catalog."""
    if path is None:
        text = resources.files("sawres").joinpath(
            "data/devices.json").read_text()
        where = "bundled devices.json"
    else:
        with open(path) as fh:
            text = fh.read()
        where = str(path)
    obj = json.loads(text)
    schema = obj.get("schema")
    if schema != DEVICES_SCHEMA:
        raise ValidationError(
            f"schema: expected {DEVICES_SCHEMA!r}, got {schema!r} in {where}")
    material = material_from_dict(_get(obj, "material", where))
    rows = _get(obj, "devices", where)
    if not rows:
        warnings.warn(f"{where}: device table is empty")
    devices = []
    for i, row in enumerate(rows):
        where_row = f"{where} devices[{i}]"
        name = str(_get(row, "name", where_row))
        devices.append(DeviceRecord(
            name=name,
            geometry=geometry_from_dict(row, where_row),
            f0_meas=float(_get(row, "f0_meas_hz", where_row)),
            qe_meas=float(_get(row, "qe_meas", where_row)),
            qi_meas=float(_get(row, "qi_meas", where_row)),
            qi_f0_product=float(_get(row, "qi_f0_product_hz", where_row))))
    return DeviceTable(material=material, devices=tuple(devices))


def rs_alpha_dataset(records: Sequence[DeviceRecord]
                     ) -> list[tuple[float, float, float]]:
    """(d, f0_meas, qi_meas) rows for loss.fit_rs_alpha."""
    return [(r.geometry.d, r.f0_meas, r.qi_meas) for r in records]


def powerlaw_dataset(records: Sequence[DeviceRecord]
                     ) -> list[tuple[float, float]]:
    """(f0_meas, qi_meas) rows for loss.fit_powerlaw."""
    return [(r.f0_meas, r.qi_meas) for r in records]


# ---------------------------------------------------------------------------
# Traces
# ---------------------------------------------------------------------------

def _sniff_format(path: str | Path, fmt: str | None) -> str:
    if fmt is not None:
        if fmt not in ("csv", "s1p"):
            raise ValidationError(
                f"format: expected 'csv' or 's1p', got {fmt!r}")
        return fmt
    suffix = Path(path).suffix.lower()
    if suffix == ".csv":
        return "csv"
    if suffix in (".s1p", ".snp"):
        return "s1p"
    raise ValidationError(
        f"format: cannot infer trace format from {path!r}; "
        "pass format='csv' or 's1p'")


def _parse_meta(comment: str, meta: dict) -> None:
    if "=" not in comment:
        return
    key, _, value = comment.partition("=")
    key = key.strip()
    if key in _META_KEYS:
        try:
            meta[key] = float(value.strip())
        except ValueError:
            pass


def _finite(values: list[float], lineno: int, line: str) -> None:
    if not all(math.isfinite(v) for v in values):
        raise TraceFormatError(
            f"line {lineno}: non-finite value in {line.strip()!r}")


def read_trace(path: str | Path, fmt: str | None = None) -> ComplexTrace:
    """Read a complex trace from a Touchstone .s1p or CSV file."""
    resolved = _sniff_format(path, fmt)
    with open(path) as fh:
        text = fh.read()
    if resolved == "csv":
        return _read_csv(text)
    return _read_touchstone(text)


def _read_csv(text: str) -> ComplexTrace:
    freqs: list[float] = []
    res: list[float] = []
    ims: list[float] = []
    meta: dict = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            _parse_meta(stripped[1:], meta)
            continue
        parts = [p.strip() for p in stripped.split(",")]
        if parts == ["freq_hz", "re", "im"]:
            continue
        if len(parts) != 3:
            raise TraceFormatError(
                f"line {lineno}: expected 3 comma-separated values, got "
                f"{len(parts)}: {stripped!r}")
        try:
            values = [float(p) for p in parts]
        except ValueError as exc:
            raise TraceFormatError(
                f"line {lineno}: {exc}: {stripped!r}") from exc
        _finite(values, lineno, line)
        freqs.append(values[0])
        res.append(values[1])
        ims.append(values[2])
    if len(freqs) < 2:
        raise TraceFormatError(f"only {len(freqs)} data rows; need >= 2")
    return ComplexTrace(np.array(freqs),
                        np.array(res) + 1j * np.array(ims), meta)


_UNIT_SCALE = {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9}


def _read_touchstone(text: str) -> ComplexTrace:
    scale = 1e9        # Touchstone defaults: GHz, S, MA
    fmt = "ma"
    meta: dict = {}
    freqs: list[float] = []
    values: list[complex] = []
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("!"):
            _parse_meta(stripped[1:], meta)
            continue
        if stripped.startswith("#"):
            tokens = stripped[1:].split()
            k = 0
            while k < len(tokens):
                token = tokens[k].lower()
                if token in _UNIT_SCALE:
                    scale = _UNIT_SCALE[token]
                elif token in ("ri", "ma", "db"):
                    fmt = token
                elif token == "s":
                    pass
                elif token in ("y", "z", "g", "h"):
                    raise TraceFormatError(
                        f"line {lineno}: parameter type "
                        f"{token.upper()!r} not supported; only S")
                elif token == "r":
                    k += 1  # reference resistance value follows
                else:
                    raise TraceFormatError(
                        f"line {lineno}: unrecognized option {tokens[k]!r}")
                k += 1
            continue
        data_part = stripped.split("!")[0].strip()
        if not data_part:
            continue
        parts = data_part.split()
        if len(parts) in (5, 9):
            raise TraceFormatError(
                f"line {lineno}: {len(parts)} values per row looks like an "
                "n-port file; only 1-port (.s1p) is supported")
        if len(parts) != 3:
            raise TraceFormatError(
                f"line {lineno}: expected 3 values, got {len(parts)}: "
                f"{data_part!r}")
        try:
            raw = [float(p) for p in parts]
        except ValueError as exc:
            raise TraceFormatError(
                f"line {lineno}: {exc}: {data_part!r}") from exc
        _finite(raw, lineno, line)
        freqs.append(raw[0] * scale)
        if fmt == "ri":
            values.append(raw[1] + 1j * raw[2])
        elif fmt == "ma":
            theta = math.radians(raw[2])
            values.append(raw[1] * math.cos(theta)
                          + 1j * raw[1] * math.sin(theta))
        else:  # db
            mag = 10.0 ** (raw[1] / 20.0)
            theta = math.radians(raw[2])
            values.append(mag * math.cos(theta)
                          + 1j * mag * math.sin(theta))
    if len(freqs) < 2:
        raise TraceFormatError(f"only {len(freqs)} data rows; need >= 2")
    return ComplexTrace(np.array(freqs), np.array(values), meta)


def _check_trace_finite(trace: ComplexTrace) -> None:
    # ComplexTrace validates on construction; cheap re-check before writing
    # in case the arrays were mutated in place.
    if not (np.all(np.isfinite(trace.freqs))
            and np.all(np.isfinite(trace.s11.view(np.float64)))):
        raise ValidationError("s11: trace contains non-finite values")


def _meta_lines(trace: ComplexTrace, prefix: str) -> list[str]:
    lines = []
    for key in _META_KEYS:
        if key in trace.meta:
            lines.append(f"{prefix} {key} = {float(trace.meta[key]):.17g}")
    return lines


def write_trace(trace: ComplexTrace, path: str | Path,
                fmt: str | None = None) -> None:
    """Write a trace as Touchstone .s1p or CSV (17 significant digits)."""
    resolved = _sniff_format(path, fmt)
    _check_trace_finite(trace)
    lines: list[str] = []
    if resolved == "csv":
        lines.extend(_meta_lines(trace, "#"))
        lines.append("freq_hz,re,im")
        for f, s in zip(trace.freqs, trace.s11):
            lines.append(f"{f:.17g},{s.real:.17g},{s.imag:.17g}")
    else:
        lines.extend(_meta_lines(trace, "!"))
        lines.append("# Hz S RI R 50")
        for f, s in zip(trace.freqs, trace.s11):
            lines.append(f"{f:.17g} {s.real:.17g} {s.imag:.17g}")
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Fit reports
# ---------------------------------------------------------------------------

def _report_row(result: FitResult) -> dict:
    row = {
        "f0_hz": result.mode.f0,
        "qi": result.mode.qi,
        "qe": result.mode.qe,
        "qi_sigma": result.sigma.get("qi", float("nan")),
        "qe_sigma": result.sigma.get("qe", float("nan")),
        "residual_rms": result.residual_norm,
        "converged": bool(result.converged),
    }
    for key, value in row.items():
        if key != "converged" and not math.isfinite(value):
            raise ValidationError(
                f"{key}: non-finite value {value} in fit result at "
                f"f0 = {result.mode.f0}")
    return row


def report_dict(results: Sequence[FitResult] | FitResult) -> dict:
    if isinstance(results, FitResult):
        results = [results]
    return {"schema": REPORT_SCHEMA,
            "results": [_report_row(r) for r in results]}


def report_text(results: Sequence[FitResult] | FitResult,
                fmt: str = "json") -> str:
    """Render fit results as a versioned JSON report or a flat CSV."""
    obj = report_dict(results)
    if fmt == "json":
        return json.dumps(obj, indent=2) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=_REPORT_FIELDS,
                                lineterminator="\n")
        writer.writeheader()
        for row in obj["results"]:
            writer.writerow(row)
        return buf.getvalue()
    raise ValidationError(f"format: expected 'json' or 'csv', got {fmt!r}")


def write_report(results: Sequence[FitResult] | FitResult,
                 path: str | Path, fmt: str = "json") -> None:
    """Write fit results to a file; see report_text."""
    Path(path).write_text(report_text(results, fmt))
