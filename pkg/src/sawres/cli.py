"""Command-line interface.

Subcommands: design, synth, fit, fit-multimode, extract (rs-alpha /
powerlaw / tls), table.  All runs are deterministic: anything stochastic
takes --seed (default 1234).  Errors are reported as one JSON object on
stderr; exit code 2 means a missing input file, 1 any other failure
(including a fit that did not converge).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import dataio, geometry, loss
from .constants import watts_to_dbm
from .errors import (DegenerateFitError, FitDataError, NoDipFoundError,
                     SingularBackgroundError, TraceFormatError,
                     ValidationError)
from .fitting import FitConfig, bootstrap_errors, fit_multimode, fit_resonance
from .response import DEFAULT_SEED, BackgroundModel, ModeParams, synth_trace

_HANDLED = (ValidationError, TraceFormatError, FitDataError,
            NoDipFoundError, SingularBackgroundError, DegenerateFitError)


def _fail(kind: str, message: str) -> None:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _load_material(path: str | None) -> geometry.MaterialParams:
    if path is None:
        return dataio.load_device_table().material
    return dataio.load_material(path)


def _kv_csv(pairs: list[tuple[str, object]]) -> str:
    lines = ["key,value"]
    lines += [f"{k},{v}" for k, v in pairs]
    return "\n".join(lines) + "\n"


def _parse_window(text: str | None):
    if text is None:
        return None
    if text in ("first-stopband", "idt"):
        return text
    if ":" in text:
        lo, _, hi = text.partition(":")
        return (float(lo), float(hi))
    raise ValidationError(
        f"window: expected 'first-stopband', 'idt' or LO:HI, got {text!r}")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_design(args: argparse.Namespace) -> int:
    geom = dataio.load_geometry(args.geometry)
    mat = _load_material(args.material)
    derived = geometry.derive_params(geom, mat)
    window = _parse_window(args.window)
    modes = geometry.mode_frequencies(derived, window)
    payload = {
        "derived": {
            "lambda0_m": derived.lambda0,
            "f0_hz": derived.f0,
            "lp_m": derived.lp,
            "lc_m": derived.lc,
            "fsr_hz": derived.fsr,
            "r_mirror": derived.r_mirror,
            "df_stopband_hz": derived.df_stopband,
            "df_idt_hz": derived.df_idt,
            "qg": derived.qg,
        },
        "modes": {
            "window": args.window or "min(first-stopband, idt)",
            "count": int(modes.shape[0]),
            "frequencies_hz": [float(f) for f in modes],
        },
    }
    if args.format == "json":
        _emit(json.dumps(payload, indent=2) + "\n", args.out)
    else:
        pairs = list(payload["derived"].items())
        pairs.append(("mode_count", payload["modes"]["count"]))
        _emit(_kv_csv(pairs), args.out)
    return 0


_BG_KEYS = ("amp0", "amp_slope_per_hz", "phase0_rad", "delay_s", "f_ref_hz")


def cmd_synth(args: argparse.Namespace) -> int:
    with open(args.modes) as fh:
        obj = json.load(fh)
    modes = []
    for i, m in enumerate(obj.get("modes", [])):
        for key in ("f0_hz", "qi", "qe"):
            if key not in m:
                raise ValidationError(f"modes[{i}]: missing {key}")
        modes.append(ModeParams(f0=float(m["f0_hz"]), qi=float(m["qi"]),
                                qe=float(m["qe"])))
    if not modes:
        raise ValidationError(f"modes: none defined in {args.modes}")
    start, stop, n = args.grid
    freqs = np.linspace(float(start), float(stop), int(n))
    bg_obj = obj.get("background", {})
    unknown = sorted(set(bg_obj) - set(_BG_KEYS))
    if unknown:
        raise ValidationError(
            f"background: unknown keys {unknown}; expected any of "
            f"{list(_BG_KEYS)}")
    bg = BackgroundModel(
        amp0=float(bg_obj.get("amp0", 1.0)),
        amp_slope=float(bg_obj.get("amp_slope_per_hz", 0.0)),
        phase0=float(bg_obj.get("phase0_rad", 0.0)),
        delay=float(bg_obj.get("delay_s", 0.0)),
        f_ref=float(bg_obj.get("f_ref_hz", 0.5 * (freqs[0] + freqs[-1]))))
    trace = synth_trace(modes, bg, freqs, noise_sigma=args.noise_sigma,
                        seed=args.seed)
    if args.out:
        dataio.write_trace(trace, args.out)
    else:
        lines = ["freq_hz,re,im"]
        lines += [f"{f:.17g},{s.real:.17g},{s.imag:.17g}"
                  for f, s in zip(trace.freqs, trace.s11)]
        _emit("\n".join(lines) + "\n", None)
    return 0


def _fit_config(args: argparse.Namespace) -> FitConfig:
    kwargs = {}
    if getattr(args, "window_linewidths", None) is not None:
        kwargs["window_linewidths"] = args.window_linewidths
    return FitConfig(**kwargs)


def cmd_fit(args: argparse.Namespace) -> int:
    trace = dataio.read_trace(args.trace)
    config = _fit_config(args)
    result = fit_resonance(trace, config)
    if args.bootstrap and args.format == "json":
        boot = bootstrap_errors(trace, result, config,
                                n_boot=args.bootstrap, seed=args.seed)
        obj = dataio.report_dict(result)
        obj["bootstrap_sigma"] = boot
        _emit(json.dumps(obj, indent=2) + "\n", args.out)
    elif args.bootstrap:
        raise ValidationError(
            "bootstrap: only supported with --format json")
    else:
        _emit(dataio.report_text(result, args.format), args.out)
    if not result.converged:
        _fail("FitNotConverged",
              f"fit did not converge after {result.n_iter} steps "
              f"(gradient norm {result.grad_norm:.3g})")
        return 1
    return 0


def cmd_fit_multimode(args: argparse.Namespace) -> int:
    trace = dataio.read_trace(args.trace)
    results = fit_multimode(trace, _fit_config(args))
    _emit(dataio.report_text(results, args.format), args.out)
    bad = sum(1 for r in results if not r.converged)
    if bad:
        _fail("FitNotConverged",
              f"{bad} of {len(results)} mode fits did not converge")
        return 1
    return 0


def cmd_extract_rs_alpha(args: argparse.Namespace) -> int:
    table = dataio.load_device_table(args.table)
    records = table.select(args.devices)
    mat = dataio.load_material(args.material) if args.material \
        else table.material
    template = records[0].geometry
    for rec in records:
        if rec.geometry.a != template.a or rec.geometry.ng != template.ng:
            raise FitDataError(
                f"device {rec.name!r} breaks the series: the cavity-length "
                "sweep must share electrode pitch and mirror length")
    fit = loss.fit_rs_alpha(dataio.rs_alpha_dataset(records), template, mat)
    payload = {
        "schema": "sawres-rs-alpha/1",
        "rs_mag": fit.rs_mag,
        "rs_sigma": fit.rs_sigma,
        "alpha_p_per_m": fit.alpha_p,
        "alpha_sigma_per_m": fit.alpha_sigma,
        "mean_free_path_m": loss.mean_free_path(fit.alpha_p),
        "residual_rms": fit.residual_rms,
        "converged": fit.converged,
        "devices": [r.name for r in records],
    }
    _emit(json.dumps(payload, indent=2) + "\n", args.out)
    if args.plot_data:
        fitted_mat = geometry.MaterialParams(
            v=mat.v, rho=mat.rho, rs_mag=fit.rs_mag,
            temperature=mat.temperature)
        lines = ["name,d_m,qi_meas,qi_fit"]
        for rec in records:
            derived = geometry.derive_params(rec.geometry, fitted_mat)
            qi_fit = loss.predict_qi(derived, fit.alpha_p, fitted_mat)
            lines.append(f"{rec.name},{rec.geometry.d:.17g},"
                         f"{rec.qi_meas:.17g},{qi_fit:.17g}")
        Path(args.plot_data).write_text("\n".join(lines) + "\n")
    return 0 if fit.converged else 1


def cmd_extract_powerlaw(args: argparse.Namespace) -> int:
    table = dataio.load_device_table(args.table)
    records = table.select(args.devices)
    fit = loss.fit_powerlaw(dataio.powerlaw_dataset(records))
    payload = {
        "schema": "sawres-powerlaw/1",
        "c1": fit.c1,
        "c1_sigma": fit.c1_sigma,
        "c2": fit.c2,
        "c2_sigma": fit.c2_sigma,
        "devices": [r.name for r in records],
    }
    _emit(json.dumps(payload, indent=2) + "\n", args.out)
    if args.plot_data:
        lines = ["name,f0_hz,qi_meas,qi_fit"]
        for rec in records:
            lines.append(f"{rec.name},{rec.f0_meas:.17g},"
                         f"{rec.qi_meas:.17g},{fit.qi(rec.f0_meas):.17g}")
        Path(args.plot_data).write_text("\n".join(lines) + "\n")
    return 0


def _read_power_sweep(path: str) -> list[tuple[float, float]]:
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            parts = [p.strip() for p in stripped.split(",")]
            if parts == ["p_dbm", "qi"]:
                continue
            if len(parts) != 2:
                raise TraceFormatError(
                    f"line {lineno}: expected 'p_dbm,qi', got {stripped!r}")
            try:
                rows.append((float(parts[0]), float(parts[1])))
            except ValueError as exc:
                raise TraceFormatError(
                    f"line {lineno}: {exc}: {stripped!r}") from exc
    return rows


def cmd_extract_tls(args: argparse.Namespace) -> int:
    dataset = _read_power_sweep(args.sweep)
    mat = _load_material(args.material)
    # Placeholder TLS numbers; fit_tls only keeps rho, v, f0, temperature.
    ctx0 = loss.TlsParams(n0_gamma2=1.0, p_c=1e-15, q_rl=1e5, rho=mat.rho,
                          v=mat.v, f0=args.f0,
                          temperature=args.temperature or mat.temperature)
    fit = loss.fit_tls(dataset, ctx0, attenuation_db=args.attenuation_db)
    params = fit.params
    payload = {
        "schema": "sawres-tls/1",
        "n0_gamma2_j_per_m3": params.n0_gamma2,
        "n0_gamma2_sigma": fit.sigma["n0_gamma2"],
        "p_c_w": params.p_c,
        "p_c_sigma_w": fit.sigma["p_c"],
        "p_c_dbm_at_instrument": watts_to_dbm(params.p_c)
        - args.attenuation_db,
        "q_rl": params.q_rl,
        "q_rl_sigma": fit.sigma["q_rl"],
        "qi_low_power": loss.tls_qi(0.0, params),
        "residual_rms": fit.residual_rms,
        "converged": fit.converged,
    }
    _emit(json.dumps(payload, indent=2) + "\n", args.out)
    if args.plot_data:
        lines = ["p_dbm,p_w_at_sample,qi_meas,qi_fit"]
        for p_dbm, qi in dataset:
            p_w = loss.power_at_sample(p_dbm, args.attenuation_db)
            lines.append(f"{p_dbm:.17g},{p_w:.17g},{qi:.17g},"
                         f"{loss.tls_qi(p_w, params):.17g}")
        Path(args.plot_data).write_text("\n".join(lines) + "\n")
    return 0 if fit.converged else 1


def cmd_table(args: argparse.Namespace) -> int:
    table = dataio.load_device_table(args.table)
    if args.format == "json":
        rows = []
        for d in table.devices:
            rows.append({
                "name": d.name, "a_m": d.geometry.a, "w_m": d.geometry.w,
                "nt": d.geometry.nt, "ng": d.geometry.ng,
                "m_half_waves": d.geometry.m_half_waves,
                "h_m": d.geometry.h, "f0_meas_hz": d.f0_meas,
                "qe_meas": d.qe_meas, "qi_meas": d.qi_meas,
                "qi_f0_product_hz": d.qi_f0_product,
            })
        _emit(json.dumps({"schema": dataio.DEVICES_SCHEMA,
                          "devices": rows}, indent=2) + "\n", args.out)
    else:
        lines = ["name,a_m,w_m,nt,ng,m_half_waves,h_m,"
                 "f0_meas_hz,qe_meas,qi_meas,qi_f0_product_hz"]
        for d in table.devices:
            lines.append(
                f"{d.name},{d.geometry.a:.17g},{d.geometry.w:.17g},"
                f"{d.geometry.nt},{d.geometry.ng},"
                f"{d.geometry.m_half_waves},{d.geometry.h:.17g},"
                f"{d.f0_meas:.17g},{d.qe_meas:.17g},{d.qi_meas:.17g},"
                f"{d.qi_f0_product:.17g}")
        _emit("\n".join(lines) + "\n", args.out)
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _add_common(sub: argparse.ArgumentParser, fmt: bool = True) -> None:
    sub.add_argument("--out", help="output file (default: stdout)")
    if fmt:
        sub.add_argument("--format", choices=("json", "csv"),
                         default="json", help="output format")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sawres",
        description="One-port SAW resonator design, synthesis and fitting.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design", help="derived parameters for a geometry")
    p.add_argument("geometry", help="geometry JSON file")
    p.add_argument("--material", help="material JSON file (default: bundled)")
    p.add_argument("--window",
                   help="mode window: first-stopband, idt or LO:HI in Hz")
    _add_common(p)
    p.set_defaults(func=cmd_design)

    p = sub.add_parser(
        "synth", help="synthesize a reflection trace",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog='modes JSON example:\n'
               '  {"modes": [{"f0_hz": 3.09e9, "qi": 7.47e4, "qe": 1.2e5}],\n'
               '   "background": {"amp0": 0.97, "amp_slope_per_hz": 0.0,\n'
               '                  "phase0_rad": 0.3, "delay_s": 3e-8,\n'
               '                  "f_ref_hz": 3.09e9}}')
    p.add_argument("modes", help="JSON file with modes and background")
    p.add_argument("--grid", nargs=3, required=True,
                   metavar=("START", "STOP", "N"),
                   help="frequency grid: start Hz, stop Hz, points")
    p.add_argument("--noise-sigma", type=float, default=0.0,
                   help="per-quadrature noise std")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", help="trace file (.csv or .s1p); default stdout")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("fit", help="fit a single resonance")
    p.add_argument("trace", help="trace file (.csv or .s1p)")
    p.add_argument("--bootstrap", type=int, default=0, metavar="N",
                   help="residual-bootstrap error bars from N refits")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    _add_common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("fit-multimode", help="fit every dip in a trace")
    p.add_argument("trace", help="trace file (.csv or .s1p)")
    p.add_argument("--window-linewidths", type=float, default=None,
                   help="per-mode window half-width in local linewidths")
    _add_common(p)
    p.set_defaults(func=cmd_fit_multimode)

    p = sub.add_parser("extract", help="loss-parameter extraction pipelines")
    esub = p.add_subparsers(dest="pipeline", required=True)

    e = esub.add_parser("rs-alpha",
                        help="|rs| and propagation loss from a length series")
    e.add_argument("--table", help="device table JSON (default: bundled)")
    e.add_argument("--devices", default="r*",
                   help="comma-separated name patterns (default r*)")
    e.add_argument("--material", help="material JSON (default: table's)")
    e.add_argument("--plot-data", help="write measured-vs-fit CSV here")
    _add_common(e, fmt=False)
    e.set_defaults(func=cmd_extract_rs_alpha)

    e = esub.add_parser("powerlaw", help="qi vs frequency power law")
    e.add_argument("--table", help="device table JSON (default: bundled)")
    e.add_argument("--devices", default="q*,r6",
                   help="comma-separated name patterns (default q*,r6)")
    e.add_argument("--plot-data", help="write measured-vs-fit CSV here")
    _add_common(e, fmt=False)
    e.set_defaults(func=cmd_extract_powerlaw)

    e = esub.add_parser("tls", help="TLS saturation fit to a power sweep")
    e.add_argument("sweep", help="CSV power sweep: p_dbm,qi")
    e.add_argument("--f0", type=float, required=True,
                   help="mode frequency in Hz")
    e.add_argument("--attenuation-db", type=float, default=-67.0,
                   help="line attenuation instrument->sample (negative dB)")
    e.add_argument("--temperature", type=float, default=None,
                   help="bath temperature K (default: material's)")
    e.add_argument("--material", help="material JSON (default: bundled)")
    e.add_argument("--plot-data", help="write measured-vs-fit CSV here")
    _add_common(e, fmt=False)
    e.set_defaults(func=cmd_extract_tls)

    p = sub.add_parser("table", help="print the device catalog")
    p.add_argument("--table", help="device table JSON (default: bundled)")
    _add_common(p)
    p.set_defaults(func=cmd_table)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        _fail("FileNotFoundError", f"no such file: {exc.filename}")
        return 2
    except _HANDLED as exc:
        _fail(type(exc).__name__, str(exc))
        return 1


if __name__ == "__main__":
    sys.exit(main())
