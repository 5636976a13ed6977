"""Resonance fitting on complex reflection traces.

The fit minimizes the stacked real/imaginary residuals of

    model(f) = background(f) * reflection(f; f0, qi, qe)

with a damped Gauss-Newton iteration and the analytic Jacobian from the
kernel module.  Internally everything is scaled to O(1): frequency offset
in units of the grid span, Q factors in log space (which also keeps them
positive), magnitude slope and delay multiplied by the span.  That keeps
the normal equations well conditioned with f0 in GHz and delays in ns on
the same parameter vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.signal import find_peaks, peak_widths

from . import kernels
from ._lm import LMResult, least_squares_lm
from .errors import NoDipFoundError, ValidationError
from .response import BackgroundModel, ComplexTrace, ModeParams

# median(|diff|) of iid complex Gaussian noise = sqrt(2)*sigma*sqrt(2 ln 2);
# dividing by this constant turns it into a per-quadrature std estimate.
_MAD_DIFF = 1.6651092223153954

_PARAM_NAMES = ("f0", "qi", "qe", "amp0", "amp_slope", "phase0", "delay")


@dataclass(frozen=True)
class FitConfig:
    """Fit behaviour knobs; the defaults suit narrowband resonator scans."""

    max_iter: int = 200
    xtol: float = 1e-10
    ftol: float = 1e-12
    gtol: float = 1e-6
    lm_lambda0: float = 1e-3
    lm_up: float = 10.0
    lm_down: float = 0.25
    window_linewidths: float = 10.0   # half-width of per-mode fit windows
    edge_fraction: float = 0.1        # trace fraction per side used for bg
    min_prominence: float | None = None  # dip detection floor; None = auto

    def __post_init__(self) -> None:
        if self.max_iter < 1:
            raise ValidationError(
                f"max_iter: must be >= 1, got {self.max_iter}")
        if not 0 < self.edge_fraction < 0.5:
            raise ValidationError(
                f"edge_fraction: must be in (0, 0.5), got {self.edge_fraction}")
        if self.window_linewidths <= 0:
            raise ValidationError(
                f"window_linewidths: must be > 0, got {self.window_linewidths}")


@dataclass(frozen=True)
class FitResult:
    """Converged (or not) parameters of one resonance fit.

    sigma holds per-parameter standard errors (linearized covariance scaled
    by the residual RMS); residual_norm is the RMS complex residual;
    cost_history records the cost after every accepted damped step and is
    non-increasing by construction.
    """

    mode: ModeParams
    bg: BackgroundModel
    sigma: dict[str, float]
    residual_norm: float
    n_iter: int
    converged: bool
    grad_norm: float
    cost_history: tuple[float, ...]
    window_overlap: bool = False


def _noise_floor(values: np.ndarray) -> float:
    """Per-quadrature noise std, robust to the resonance itself."""
    if values.shape[0] < 3:
        return 0.0
    return float(np.median(np.abs(np.diff(values))) / _MAD_DIFF)


def _edge_indices(n: int, edge_fraction: float) -> np.ndarray:
    k = max(4, int(round(edge_fraction * n)))
    k = min(k, n // 3)
    return np.r_[0:k, n - k:n]


def _smooth(values: np.ndarray, width: int) -> np.ndarray:
    if width <= 1:
        return values
    kernel = np.full(width, 1.0 / width)
    pad = width // 2
    padded = np.r_[np.full(pad, values[0]), values, np.full(pad, values[-1])]
    return np.convolve(padded, kernel, mode="valid")[:values.shape[0]]


def initial_guess(trace: ComplexTrace,
                  edge_fraction: float = 0.1
                  ) -> tuple[ModeParams, BackgroundModel]:
    """Starting point for fit_resonance.

    Background comes from the off-resonant trace edges (per-edge phase
    slopes for the delay, so a winding through resonance cannot leak in);
    the dip position, half-depth width and complex dip value then give f0,
    the loaded Q and the qi/qe split.  Raises NoDipFoundError when the
    deepest dip does not clear 3x the estimated noise floor.
    """
    freqs, data = trace.freqs, trace.s11
    n = freqs.shape[0]
    f_ref = 0.5 * (freqs[0] + freqs[-1])
    span = freqs[-1] - freqs[0]

    k = max(4, int(round(edge_fraction * n)))
    k = min(k, n // 3)
    left, right = slice(0, k), slice(n - k, n)

    df = freqs - f_ref
    slopes = []
    for edge in (left, right):
        phase = np.unwrap(np.angle(data[edge]))
        slopes.append(np.polyfit(df[edge], phase, 1)[0])
    delay = -0.5 * (slopes[0] + slopes[1]) / (2.0 * np.pi)
    edge = _edge_indices(n, edge_fraction)
    derotated = data[edge] * np.exp(2j * np.pi * delay * df[edge])
    phase0 = float(np.angle(np.sum(derotated)))
    amp_slope, amp0 = np.polyfit(df[edge], np.abs(data[edge]), 1)
    if abs(amp0) < 1e-12:
        raise NoDipFoundError("off-resonant level is zero; no baseline")
    bg = BackgroundModel(amp0=float(amp0), amp_slope=float(amp_slope),
                         phase0=phase0, delay=float(delay), f_ref=f_ref)

    norm = data / bg(freqs)
    mag = np.abs(norm)
    sigma = _noise_floor(norm)
    depth = 1.0 - float(np.min(mag))
    if depth < max(3.0 * sigma, 1e-9):
        raise NoDipFoundError(
            f"deepest dip ({depth:.3g}) is below 3x the noise floor "
            f"({sigma:.3g})")

    width_pts = 5 if n >= 50 else 1
    smooth_mag = _smooth(mag, width_pts)
    i_min = int(np.argmin(smooth_mag))

    # Parabolic refinement of the dip position.
    f0 = freqs[i_min]
    if 0 < i_min < n - 1:
        y0, y1, y2 = smooth_mag[i_min - 1:i_min + 2]
        curv = y0 - 2.0 * y1 + y2
        if curv > 0:
            shift = float(np.clip(0.5 * (y0 - y2) / curv, -1.0, 1.0))
            f0 = freqs[i_min] + shift * span / (n - 1)

    # Full width of the power dip at half depth.
    power = smooth_mag**2
    target = 1.0 - 0.5 * (1.0 - power[i_min])

    def cross(i_out: int, i_in: int) -> float:
        pa, pb = power[i_out], power[i_in]
        if pb == pa:
            return freqs[i_out]
        return float(freqs[i_out] + (target - pa)
                     * (freqs[i_in] - freqs[i_out]) / (pb - pa))

    i_left = i_min
    while i_left > 0 and power[i_left] < target:
        i_left -= 1
    i_right = i_min
    while i_right < n - 1 and power[i_right] < target:
        i_right += 1
    left_hit = power[i_left] >= target and i_left < i_min
    right_hit = power[i_right] >= target and i_right > i_min
    f_left = cross(i_left, i_left + 1) if left_hit else freqs[0]
    f_right = cross(i_right, i_right - 1) if right_hit else freqs[-1]
    width = max(f_right - f_left, span / (n - 1))
    ql = f0 / width

    # Dip value splits ql into qi and qe: s11(f0) = (qe - qi)/(qe + qi).
    lo, hi = max(i_min - 2, 0), min(i_min + 3, n)
    s_dip = float(np.clip(np.median(norm[lo:hi].real), -0.999, 0.999))
    u = (1.0 - s_dip) / (1.0 + s_dip)          # qi / qe
    u = float(np.clip(u, 1e-6, 1e6))
    qi = ql * (1.0 + u)
    qe = qi / u
    return ModeParams(f0=float(f0), qi=float(qi), qe=float(qe)), bg


def _pack(mode: ModeParams, bg: BackgroundModel, f_ref: float,
          span: float) -> np.ndarray:
    return np.array([
        (mode.f0 - f_ref) / span,
        math.log(mode.qi),
        math.log(mode.qe),
        bg.amp0,
        bg.amp_slope * span,
        bg.phase0,
        bg.delay * span,
    ])


def _unpack(x: np.ndarray, f_ref: float,
            span: float) -> tuple[ModeParams, BackgroundModel]:
    mode = ModeParams(f0=f_ref + x[0] * span, qi=_safe_exp(x[1]),
                      qe=_safe_exp(x[2]))
    bg = BackgroundModel(amp0=x[3], amp_slope=x[4] / span, phase0=x[5],
                         delay=x[6] / span, f_ref=f_ref)
    return mode, bg


def _safe_exp(v: float) -> float:
    # Trial steps can wander far before being rejected; keep exp finite so
    # the cost comes back NaN-free or NaN (rejected), never an exception.
    return math.exp(min(max(v, -700.0), 700.0))


def _external(x: np.ndarray, f_ref: float, span: float) -> tuple[float, ...]:
    return (f_ref + x[0] * span, _safe_exp(x[1]), _safe_exp(x[2]), x[3],
            x[4] / span, x[5], x[6] / span)


def fit_resonance(trace: ComplexTrace, config: FitConfig | None = None,
                  guess: tuple[ModeParams, BackgroundModel] | None = None
                  ) -> FitResult:
    """Fit one resonance plus background to a complex trace."""
    config = config or FitConfig()
    if guess is None:
        guess = initial_guess(trace, edge_fraction=config.edge_fraction)
    mode0, bg0 = guess

    freqs, data = trace.freqs, trace.s11
    span = float(freqs[-1] - freqs[0])
    f_ref = bg0.f_ref if bg0.f_ref != 0.0 else 0.5 * (freqs[0] + freqs[-1])
    x0 = _pack(mode0, replace(bg0, f_ref=f_ref), f_ref, span)
    # d(external)/d(internal): converts kernel Jacobian columns and the
    # covariance back and forth.
    scale = np.array([span, 1.0, 1.0, 1.0, 1.0 / span, 1.0, 1.0 / span])

    def residual(x: np.ndarray) -> np.ndarray:
        s = kernels.model(freqs, *_external(x, f_ref, span), f_ref)
        rc = s - data
        return np.concatenate([rc.real, rc.imag])

    def jacobian(x: np.ndarray) -> np.ndarray:
        _, jac = kernels.model_and_jacobian(freqs, *_external(x, f_ref, span),
                                            f_ref)
        jac = jac * scale
        return np.concatenate([jac.real, jac.imag])

    res = least_squares_lm(residual, x0, jacobian, max_iter=config.max_iter,
                           xtol=config.xtol, ftol=config.ftol,
                           gtol=config.gtol, lambda0=config.lm_lambda0,
                           lambda_up=config.lm_up, lambda_down=config.lm_down)
    return _build_result(res, f_ref, span, scale, freqs.shape[0])


def _build_result(res: LMResult, f_ref: float, span: float,
                  scale: np.ndarray, n_points: int) -> FitResult:
    mode, bg = _unpack(res.x, f_ref, span)
    sigma = {name: float("nan") for name in _PARAM_NAMES}
    if res.cov is not None:
        internal = np.sqrt(np.clip(np.diag(res.cov), 0.0, None))
        external = internal * scale
        # log-Q errors map to absolute via the delta method
        external[1] = mode.qi * internal[1]
        external[2] = mode.qe * internal[2]
        sigma = dict(zip(_PARAM_NAMES, (float(v) for v in external)))
    return FitResult(
        mode=mode, bg=bg, sigma=sigma,
        residual_norm=math.sqrt(res.cost / n_points),
        n_iter=res.n_iter, converged=res.converged, grad_norm=res.grad_inf,
        cost_history=res.cost_history)


def _merge_close(peaks: np.ndarray, widths: np.ndarray,
                 depths: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Collapse detections closer than one width, keeping the deeper one."""
    order = np.argsort(peaks)
    peaks, widths, depths = peaks[order], widths[order], depths[order]
    keep_p: list[float] = []
    keep_w: list[float] = []
    keep_d: list[float] = []
    for p, w, d in zip(peaks, widths, depths):
        if keep_p and abs(p - keep_p[-1]) < max(w, keep_w[-1]):
            if d > keep_d[-1]:
                keep_p[-1], keep_w[-1], keep_d[-1] = p, w, d
            continue
        keep_p.append(p); keep_w.append(w); keep_d.append(d)
    return np.asarray(keep_p), np.asarray(keep_w)


def fit_multimode(trace: ComplexTrace,
                  config: FitConfig | None = None) -> list[FitResult]:
    """Detect every dip in a multimode trace and fit each one separately.

    Detection is prominence-based on |s11|; each mode is fit on a window of
    +- window_linewidths local linewidths.  Windows that overlap a
    neighbour are flagged on the corresponding results but still fitted.
    Results come back sorted by fitted f0.
    """
    config = config or FitConfig()
    freqs, data = trace.freqs, trace.s11
    mag = np.abs(data)
    sigma = _noise_floor(data)
    min_prom = config.min_prominence
    if min_prom is None:
        min_prom = max(8.0 * sigma, 0.01)

    peaks, props = find_peaks(-mag, prominence=min_prom)
    if peaks.shape[0] == 0:
        raise NoDipFoundError(
            f"no dip with prominence above {min_prom:.3g} found")
    width_pts = peak_widths(-mag, peaks, rel_height=0.5)[0]
    step = float(np.median(np.diff(freqs)))
    centers = freqs[peaks]
    widths = np.maximum(width_pts, 1.0) * step
    centers, widths = _merge_close(centers, widths, props["prominences"])

    half = config.window_linewidths * widths
    lo = np.maximum(centers - half, freqs[0])
    hi = np.minimum(centers + half, freqs[-1])
    overlap = np.zeros(centers.shape[0], dtype=bool)
    overlap[:-1] |= hi[:-1] > lo[1:]
    overlap[1:] |= hi[:-1] > lo[1:]

    results = []
    for k in range(centers.shape[0]):
        sub = trace.window(lo[k], hi[k])
        fit = fit_resonance(sub, config)
        results.append(replace(fit, window_overlap=bool(overlap[k])))
    results.sort(key=lambda r: r.mode.f0)
    return results


def bootstrap_errors(trace: ComplexTrace, fit: FitResult,
                     config: FitConfig | None = None, n_boot: int = 100,
                     seed: int = 0) -> dict[str, float]:
    """Residual-bootstrap standard errors for a finished fit.

    Residuals of the fitted model are resampled with replacement onto the
    model and each synthetic trace is refit starting from the optimum.
    Deterministic for a given seed.
    """
    if n_boot < 2:
        raise ValidationError(f"n_boot: must be >= 2, got {n_boot}")
    config = config or FitConfig()
    freqs = trace.freqs
    f_ref = fit.bg.f_ref
    model = kernels.model(freqs, fit.mode.f0, fit.mode.qi, fit.mode.qe,
                          fit.bg.amp0, fit.bg.amp_slope, fit.bg.phase0,
                          fit.bg.delay, f_ref)
    resid = trace.s11 - model
    rng = np.random.default_rng(seed)
    samples = {"f0": [], "qi": [], "qe": []}
    for _ in range(n_boot):
        pick = rng.integers(0, resid.shape[0], size=resid.shape[0])
        synth = ComplexTrace(freqs, model + resid[pick], dict(trace.meta))
        refit = fit_resonance(synth, config, guess=(fit.mode, fit.bg))
        samples["f0"].append(refit.mode.f0)
        samples["qi"].append(refit.mode.qi)
        samples["qe"].append(refit.mode.qe)
    return {name: float(np.std(vals, ddof=1))
            for name, vals in samples.items()}
