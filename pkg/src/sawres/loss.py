"""Loss budgets and loss-parameter extraction.

The internal quality factor of a grating resonator splits into mirror
leakage and propagation loss:

    1/qi = 1/qg + v alpha_p / (pi f0)

with qg from the geometry module and alpha_p the propagation power loss
per unit length (1/m).  Across devices of different pitch, the averaged qi
follows a power law qi/1e3 = c1 (f/GHz)^-c2.  At millikelvin temperature
the propagation loss is dominated by two-level systems and saturates with
drive power:

    alpha_tls(P) = 2 pi^2 f0 n0_gamma2 / (rho v^3)
                   * (1 + P/p_c)^-1/2 * tanh(h f0 / (2 kB T))

(the v^3 makes the prefactor a proper 1/length; dividing by v^2 instead
gives the same expression in 1/time units and is available via
convention="per-time").
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from ._lm import least_squares_lm
from .constants import BOLTZMANN, ELEMENTARY_CHARGE, HBAR, PLANCK, \
    dbm_to_watts
from .errors import FitDataError, ValidationError
from .geometry import DeviceGeometry, DerivedParams, MaterialParams, \
    one_minus_tanh
from .response import ModeParams


def _require(cond: bool, field: str, msg: str) -> None:
    if not cond:
        raise ValidationError(f"{field}: {msg}")


@dataclass(frozen=True)
class LossBudget:
    """One device's internal-Q budget at frequency f0 (Hz), velocity v (m/s)."""

    qg: float
    alpha_p: float
    qi_pred: float
    f0: float
    v: float


@dataclass(frozen=True)
class PowerLaw:
    """qi/1e3 = c1 (f/GHz)^-c2, with 1-sigma standard errors from the fit."""

    c1: float
    c2: float
    c1_sigma: float = 0.0
    c2_sigma: float = 0.0

    def __post_init__(self) -> None:
        _require(self.c1 > 0, "c1", f"must be > 0, got {self.c1}")

    def qi(self, f0_hz: float) -> float:
        """Predicted internal Q at f0_hz."""
        return 1e3 * self.c1 * (f0_hz / 1e9) ** (-self.c2)


@dataclass(frozen=True)
class TlsParams:
    """Two-level-system loss context.

    n0_gamma2   TLS density of states times coupling squared (J/m^3)
    p_c         critical (saturation) power at the sample plane (W)
    q_rl        residual, power-independent Q limit
    rho         mass density (kg/m^3)
    v           SAW velocity (m/s)
    f0          mode frequency (Hz)
    temperature bath temperature (K)
    """

    n0_gamma2: float
    p_c: float
    q_rl: float
    rho: float
    v: float
    f0: float
    temperature: float

    def __post_init__(self) -> None:
        for name in ("n0_gamma2", "p_c", "q_rl", "rho", "v", "f0",
                     "temperature"):
            value = getattr(self, name)
            _require(math.isfinite(value) and value > 0, name,
                     f"must be finite and > 0, got {value}")


@dataclass(frozen=True)
class RsAlphaFit:
    """Result of the reflectivity / propagation-loss extraction.

    When the dataset does not resolve alpha_p (mirror leakage explains the
    measured qi on its own) the estimate collapses toward zero and
    alpha_sigma sets the scale of the upper limit.
    """

    rs_mag: float
    alpha_p: float
    rs_sigma: float
    alpha_sigma: float
    residual_rms: float
    n_iter: int
    converged: bool


@dataclass(frozen=True)
class TlsFit:
    """Result of the power-sweep TLS fit."""

    params: TlsParams
    sigma: dict[str, float]
    residual_rms: float
    n_iter: int
    converged: bool


def predict_qi(derived: DerivedParams, alpha_p: float,
               mat: MaterialParams) -> float:
    """Internal Q from mirror leakage plus propagation loss."""
    _require(alpha_p >= 0, "alpha_p", f"must be >= 0, got {alpha_p}")
    return 1.0 / (1.0 / derived.qg
                  + mat.v * alpha_p / (math.pi * derived.f0))


def loss_budget(derived: DerivedParams, alpha_p: float,
                mat: MaterialParams) -> LossBudget:
    """predict_qi with the ingredients kept alongside."""
    return LossBudget(qg=derived.qg, alpha_p=alpha_p,
                      qi_pred=predict_qi(derived, alpha_p, mat),
                      f0=derived.f0, v=mat.v)


def mean_free_path(alpha_p: float) -> float:
    """Phonon mean free path 1/alpha_p (m)."""
    _require(alpha_p > 0 and math.isfinite(alpha_p), "alpha_p",
             f"must be finite and > 0, got {alpha_p}")
    return 1.0 / alpha_p


def power_at_sample(p_dbm: float, attenuation_db: float) -> float:
    """Drive power in watts at the sample, given line attenuation in dB
    (negative for loss, e.g. -67)."""
    return dbm_to_watts(p_dbm + attenuation_db)


# ---------------------------------------------------------------------------
# |rs| and alpha_p from a cavity-length series
# ---------------------------------------------------------------------------

def _qg_of(d: float, rs: float, a: float, ng: int) -> float:
    lambda0 = 4.0 * a
    lc = d + 2.0 * a / rs
    leakage = one_minus_tanh(rs * ng)
    if leakage <= 0.0:
        return math.inf
    return math.pi * lc / (lambda0 * leakage)


def fit_rs_alpha(dataset: Sequence[tuple[float, float, float]],
                 geom_template: DeviceGeometry,
                 mat: MaterialParams) -> RsAlphaFit:
    """Fit (|rs|, alpha_p) to measured qi across a cavity-length series.

    dataset rows are (d, f0_meas, qi_meas) with d the cavity length in m.
    All devices share the template's pitch and mirror electrode count.
    Residuals are relative (log-qi), both parameters are fitted in log
    space, and the standard errors come from the linearized covariance.
    Needs at least 4 devices spanning a factor of 5 in d.
    """
    rows = [(float(d), float(f0), float(qi)) for d, f0, qi in dataset]
    if len(rows) < 4:
        raise FitDataError(f"need >= 4 devices, got {len(rows)}")
    ds = np.array([r[0] for r in rows])
    f0s = np.array([r[1] for r in rows])
    qis = np.array([r[2] for r in rows])
    if np.any(ds <= 0) or np.any(f0s <= 0) or np.any(qis <= 0):
        raise FitDataError("d, f0_meas and qi_meas must all be > 0")
    if ds.max() / ds.min() < 5.0:
        raise FitDataError(
            f"cavity lengths span only x{ds.max() / ds.min():.2f}; "
            "need a factor >= 5 to separate mirror leakage from "
            "propagation loss")

    a, ng = geom_template.a, geom_template.ng
    alpha_scale = mat.v / (math.pi * f0s)

    def log_qi_model(x: np.ndarray) -> np.ndarray:
        # Trial steps may wander; clip the log-parameters so the model
        # stays evaluable (bad steps are rejected by their cost).
        xc = np.clip(x, -300.0, 300.0)
        rs, alpha = math.exp(xc[0]), math.exp(xc[1])
        qg = np.array([_qg_of(d, rs, a, ng) for d in ds])
        with np.errstate(divide="ignore"):
            return -np.log(1.0 / qg + alpha * alpha_scale)

    log_qi = np.log(qis)

    def residual(x: np.ndarray) -> np.ndarray:
        return log_qi_model(x) - log_qi

    # Coarse scan over rs with no propagation loss seeds the iteration.
    grid = np.linspace(math.log(1e-4), math.log(5e-2), 60)
    costs = [float(np.sum((log_qi_model(np.array([g, -50.0])) - log_qi)**2))
             for g in grid]
    rs0 = grid[int(np.argmin(costs))]
    # Residual loss of the longest cavity seeds alpha.  Floor the seed at
    # the alpha contributing 1% of that cavity's loss so the first Jacobian
    # has a usable alpha column even when the data want alpha -> 0.
    i_long = int(np.argmax(ds))
    qg_long = _qg_of(ds[i_long], math.exp(rs0), a, ng)
    excess = 1.0 / qis[i_long] - 1.0 / qg_long
    floor = 0.01 / (qis[i_long] * alpha_scale[i_long])
    alpha0 = max(excess / alpha_scale[i_long], floor)

    res = least_squares_lm(residual, np.array([rs0, math.log(alpha0)]),
                           max_iter=500)
    rs = math.exp(float(np.clip(res.x[0], -300.0, 300.0)))
    alpha = math.exp(float(np.clip(res.x[1], -300.0, 300.0)))

    # Standard errors in linear (rs, alpha): unlike the log-alpha column,
    # d residual/d alpha never vanishes, so the covariance stays meaningful
    # when alpha is pinned at the boundary (alpha_sigma is then the scale
    # of the upper limit).
    lambda0 = 4.0 * a
    lc = ds + 2.0 * a / rs
    th = np.tanh(rs * ng)
    inv_qg = lambda0 * one_minus_tanh(rs * ng) / (math.pi * lc)
    d_invqg_drs = (lambda0 / math.pi) * (
        -ng * (1.0 - th * th) / lc + (1.0 - th) * (2.0 * a / rs**2) / lc**2)
    qi_model = 1.0 / (inv_qg + alpha * alpha_scale)
    jac = np.column_stack([-qi_model * d_invqg_drs,
                           -qi_model * alpha_scale])
    rs_sigma = alpha_sigma = float("nan")
    if len(rows) > 2:
        scale = res.cost / (len(rows) - 2)
        try:
            cov = np.linalg.inv(jac.T @ jac) * scale
            rs_sigma = math.sqrt(max(cov[0, 0], 0.0))
            alpha_sigma = math.sqrt(max(cov[1, 1], 0.0))
        except np.linalg.LinAlgError:
            pass
    return RsAlphaFit(rs_mag=rs, alpha_p=alpha, rs_sigma=rs_sigma,
                      alpha_sigma=alpha_sigma,
                      residual_rms=math.sqrt(res.cost / len(rows)),
                      n_iter=res.n_iter, converged=res.converged)


# ---------------------------------------------------------------------------
# Frequency power law
# ---------------------------------------------------------------------------

def fit_powerlaw(dataset: Sequence[tuple[float, float]]) -> PowerLaw:
    """Fit qi/1e3 = c1 (f/GHz)^-c2 to (f0_hz, qi) pairs.

    Ordinary least squares on ln(qi/1e3) vs ln(f/GHz); standard errors use
    the usual RSS/(n-2) variance estimate (nan for the exactly-determined
    two-point case).  Needs >= 2 devices spanning a factor >= 2 in f0.
    """
    rows = [(float(f0), float(qi)) for f0, qi in dataset]
    if len(rows) < 2:
        raise FitDataError(f"need >= 2 devices, got {len(rows)}")
    f0s = np.array([r[0] for r in rows])
    qis = np.array([r[1] for r in rows])
    if np.any(f0s <= 0) or np.any(qis <= 0):
        raise FitDataError("f0 and qi must be > 0")
    if f0s.max() / f0s.min() < 2.0:
        raise FitDataError(
            f"frequencies span only x{f0s.max() / f0s.min():.2f}; "
            "need a factor >= 2 to constrain the exponent")

    x = np.log(f0s / 1e9)
    y = np.log(qis / 1e3)
    n = len(rows)
    xm, ym = x.mean(), y.mean()
    sxx = float(np.sum((x - xm)**2))
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    intercept = ym - slope * xm
    if n > 2:
        resid = y - (intercept + slope * x)
        s2 = float(resid @ resid) / (n - 2)
        slope_sigma = math.sqrt(s2 / sxx)
        intercept_sigma = math.sqrt(s2 * (1.0 / n + xm**2 / sxx))
    else:
        slope_sigma = intercept_sigma = float("nan")

    c1 = math.exp(intercept)
    return PowerLaw(c1=c1, c2=-slope, c1_sigma=c1 * intercept_sigma,
                    c2_sigma=slope_sigma)


# ---------------------------------------------------------------------------
# TLS saturation
# ---------------------------------------------------------------------------

def tls_alpha(p_watts: float, ctx: TlsParams,
              convention: str = "per-length") -> float:
    """TLS propagation loss at drive power p_watts (at the sample plane).

    convention="per-length" (default) divides the prefactor by rho v^3 and
    returns 1/m; "per-time" divides by rho v^2 and returns 1/s.
    """
    _require(p_watts >= 0, "p_watts", f"must be >= 0, got {p_watts}")
    if convention == "per-length":
        v_power = 3
    elif convention == "per-time":
        v_power = 2
    else:
        raise ValidationError(
            f"convention: expected 'per-length' or 'per-time', "
            f"got {convention!r}")
    prefactor = 2.0 * math.pi**2 * ctx.f0 * ctx.n0_gamma2 \
        / (ctx.rho * ctx.v**v_power)
    saturation = (1.0 + p_watts / ctx.p_c) ** -0.5
    thermal = math.tanh(PLANCK * ctx.f0
                        / (2.0 * BOLTZMANN * ctx.temperature))
    return prefactor * saturation * thermal


def tls_qi(p_watts: float, ctx: TlsParams) -> float:
    """Internal Q at drive power p_watts: TLS loss plus the residual limit."""
    alpha = tls_alpha(p_watts, ctx)  # per-length; the budget needs 1/m
    return 1.0 / (ctx.v * alpha / (math.pi * ctx.f0) + 1.0 / ctx.q_rl)


def fit_tls(dataset: Sequence[tuple[float, float]], ctx0: TlsParams,
            attenuation_db: float = 0.0) -> TlsFit:
    """Fit (n0_gamma2, p_c, q_rl) to a power sweep of measured qi.

    dataset rows are (p_dbm, qi_meas) with power quoted at the instrument;
    attenuation_db (negative) moves it to the sample plane.  rho, v, f0 and
    temperature are taken from ctx0 and held fixed.  Relative (log-qi)
    residuals, all three parameters in log space.  Needs >= 5 points
    spanning >= 3 decades of power.
    """
    rows = [(float(p), float(qi)) for p, qi in dataset]
    if len(rows) < 5:
        raise FitDataError(f"need >= 5 power points, got {len(rows)}")
    p_w = np.array([power_at_sample(p, attenuation_db) for p, _ in rows])
    qis = np.array([qi for _, qi in rows])
    if np.any(qis <= 0):
        raise FitDataError("qi_meas must be > 0")
    if p_w.max() / p_w.min() < 1e3:
        raise FitDataError(
            f"power span is only {10 * math.log10(p_w.max() / p_w.min()):.1f}"
            " dB; need >= 30 dB to see the saturation knee")

    thermal = math.tanh(PLANCK * ctx0.f0
                        / (2.0 * BOLTZMANN * ctx0.temperature))
    pre_unit = 2.0 * math.pi**2 * ctx0.f0 / (ctx0.rho * ctx0.v**3)
    qi_scale = ctx0.v / (math.pi * ctx0.f0)
    log_qi = np.log(qis)

    def residual(x: np.ndarray) -> np.ndarray:
        n0g2, p_c, q_rl = np.exp(np.clip(x, -300.0, 300.0))
        alpha = pre_unit * n0g2 * thermal / np.sqrt(1.0 + p_w / p_c)
        return -np.log(alpha * qi_scale + 1.0 / q_rl) - log_qi

    # Seeds: the high-power plateau bounds q_rl, the low-power end sets the
    # unsaturated loss, and the knee is put at the median power.
    q_rl0 = 1.05 * float(qis.max())
    i_lo = int(np.argmin(p_w))
    excess = max(1.0 / qis[i_lo] - 1.0 / q_rl0, 0.05 / qis[i_lo])
    n0g20 = excess / (qi_scale * pre_unit * thermal)
    p_c0 = float(np.median(p_w))
    x0 = np.log(np.array([n0g20, p_c0, q_rl0]))

    res = least_squares_lm(residual, x0, max_iter=500)
    n0g2, p_c, q_rl = (math.exp(v) for v in res.x)
    params = replace(ctx0, n0_gamma2=n0g2, p_c=p_c, q_rl=q_rl)
    sigma = {"n0_gamma2": float("nan"), "p_c": float("nan"),
             "q_rl": float("nan")}
    if res.cov is not None:
        for i, name in enumerate(("n0_gamma2", "p_c", "q_rl")):
            sigma[name] = getattr(params, name) \
                * math.sqrt(max(res.cov[i, i], 0.0))
    return TlsFit(params=params, sigma=sigma,
                  residual_rms=math.sqrt(res.cost / len(rows)),
                  n_iter=res.n_iter, converged=res.converged)


# ---------------------------------------------------------------------------
# Drive scales
# ---------------------------------------------------------------------------

def phonon_number(p_watts: float, mode: ModeParams) -> float:
    """Steady-state intracavity phonon number of a one-port resonator."""
    _require(p_watts >= 0, "p_watts", f"must be >= 0, got {p_watts}")
    omega0 = 2.0 * math.pi * mode.f0
    return 4.0 * mode.ql**2 * p_watts / (mode.qe * HBAR * omega0**2)


def coupling_estimate(beta: float, v0_rms: float) -> float:
    """Charge-dipole coupling g/2pi (Hz) for a qubit of dipole fraction
    beta sitting in a vacuum voltage v0_rms."""
    _require(beta >= 0, "beta", f"must be >= 0, got {beta}")
    _require(v0_rms >= 0, "v0_rms", f"must be >= 0, got {v0_rms}")
    return ELEMENTARY_CHARGE * beta * v0_rms / (2.0 * math.pi * HBAR)
