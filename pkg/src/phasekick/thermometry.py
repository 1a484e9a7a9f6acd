"""Mean-occupation estimation from contrast-revival lineshapes.

The measurement is two-stage, mirroring how the raw data is taken: each
delay angle theta yields a microwave-detuning fringe whose contrast is
extracted by a weighted linear fit (`extract_contrast`); the contrast
points versus theta then feed a nonlinear lineshape fit
(`RevivalThermometer` / `fit_lineshape`) whose width encodes nbar.

The lineshape is contrast(theta) = A * exp(-4(N eta)^2 (2 nbar + 1)
(1 - cos theta)): colder ions keep contrast over a wide range of delays,
hotter ions revive only in a narrow window around full trap periods, so
the revival width measures temperature over many decades of nbar.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .core import theta_resolution
from .errors import FitError, InfeasibleError, ValidationError
from .fringes import fwhm_exact, thermal_envelope
from .validation import as_float_array, check_positive, check_same_length

__all__ = [
    "ContrastPoint",
    "ThermometryResult",
    "extract_contrast",
    "RevivalThermometer",
    "fit_lineshape",
    "plan_theta_grid",
]

# exp(u) stays comfortably inside float range on this interval and the
# physically interesting decades are well covered.
_U_BOUNDS = (-46.0, 46.0)
_AMPLITUDE_BOUNDS = (1e-9, 1.0)


@dataclass(frozen=True)
class ContrastPoint:
    """Fringe contrast at one delay angle, with standard error."""

    theta: float
    contrast: float
    error: float

    def __post_init__(self):
        if not self.error > 0:
            raise ValidationError(f"contrast error must be > 0, got {self.error}")


@dataclass(frozen=True)
class ThermometryResult:
    """Outcome of a lineshape fit.

    lower_bound_only is set when the data shows no significant revival
    structure, in which case nbar only bounds the temperature and the
    errors are not trustworthy.
    """

    nbar: float
    nbar_err: float
    amplitude: float
    amplitude_err: float
    chi2: float
    dof: int
    fwhm: float
    lower_bound_only: bool = False

    def __post_init__(self):
        if self.nbar < 0:
            raise ValidationError("nbar must be >= 0")
        if not 0.0 < self.amplitude <= 1.0:
            raise ValidationError("amplitude must lie in (0, 1]")


def extract_contrast(scan):
    """Fringe contrast from one detuning scan by weighted linear least squares.

    Fits counts/shots to a + b cos(delta T) + c sin(delta T) with
    binomial weights and returns 2*sqrt(b^2 + c^2) with its propagated
    error.  Requires at least 5 detuning points spanning a full fringe
    period.  A flat scan is not an error: it yields contrast ~ 0 with a
    finite error bar.

    Returns
    -------
    ContrastPoint
    """
    phis = scan.phis
    if len(phis) < 5:
        raise ValidationError(f"need >= 5 detuning points, got {len(phis)}")
    if phis.max() - phis.min() < 2.0 * math.pi - 1e-9:
        raise ValidationError("detuning grid must span at least one fringe period")

    p_hat = scan.counts / scan.shots
    # Rule-of-succession probability inside the variance keeps weights
    # finite when a point comes out all-up or all-down.
    p_tilde = (scan.counts + 1.0) / (scan.shots + 2.0)
    sigma = np.sqrt(p_tilde * (1.0 - p_tilde) / scan.shots)

    design = np.column_stack([np.ones_like(phis), np.cos(phis), np.sin(phis)])
    w = 1.0 / sigma
    coef, *_ = np.linalg.lstsq(design * w[:, None], p_hat * w, rcond=None)
    cov = np.linalg.inv((design * w[:, None] ** 2).T @ design)
    _, b, c = coef

    r2 = b * b + c * c
    contrast = 2.0 * math.sqrt(r2)
    if r2 > 1e-12:
        grad = np.array([2.0 * b, 2.0 * c]) / math.sqrt(r2)
        var = grad @ cov[1:, 1:] @ grad
    else:
        # Direction undefined at zero amplitude; quote the isotropic bound.
        var = 4.0 * (cov[1, 1] + cov[2, 2])
    return ContrastPoint(theta=scan.theta, contrast=contrast, error=math.sqrt(max(var, 0.0)))


def _raw_fwhm(theta, contrast):
    """Crude revival width read straight off the data, or None.

    Finds the highest point, walks out to the half-maximum crossings on
    both sides, and interpolates linearly.  Used only to seed the fit.
    """
    order = np.argsort(theta)
    th, co = theta[order], contrast[order]
    ipk = int(np.argmax(co))
    half = co[ipk] / 2.0

    def crossing(indices):
        prev = ipk
        for i in indices:
            if co[i] <= half:
                t0, t1 = th[i], th[prev]
                c0, c1 = co[i], co[prev]
                if c1 == c0:
                    return t0
                return t0 + (half - c0) * (t1 - t0) / (c1 - c0)
            prev = i
        return None

    left = crossing(range(ipk - 1, -1, -1))
    right = crossing(range(ipk + 1, len(th)))
    if left is None or right is None:
        return None
    return right - left


class RevivalThermometer(BaseEstimator):
    """Least-squares estimator of (nbar, amplitude) from revival contrast.

    Parameters
    ----------
    eta : float
        Lamb-Dicke parameter used when the data was taken.
    n_kicks : int
        Signed kicks per SDK set.
    n_grid : int
        Size of the coarse log-spaced nbar scan used to seed the
        optimizer (robustness across many decades).

    Attributes (after fit)
    ----------------------
    nbar_, nbar_err_ : float
        Estimated mean occupation and its covariance-derived error.
    amplitude_, amplitude_err_ : float
        Fitted revival amplitude in (0, 1].
    chi2_, dof_ : float, int
        Weighted residual sum of squares and degrees of freedom.
    fwhm_ : float
        Exact width of the fitted envelope (nan if it never reaches half).
    lower_bound_only_ : bool
        True when the fit is not statistically better than a constant.

    Notes
    -----
    nbar is fitted as exp(u) so positivity never needs clamping, and the
    optimizer is started from several candidates: a crude width

    inversion when the data resolves the revival, plus the best point of
    a coarse scan over decades of nbar.  Errors come from the Jacobian
    at the optimum without rescaling by reduced chi-square, so scaling
    all input errors by a constant scales the reported parameter errors
    and nothing else.
    """

    def __init__(self, eta=0.2, n_kicks=1, n_grid=40):
        self.eta = eta
        self.n_kicks = n_kicks
        self.n_grid = n_grid

    def _envelope(self, u, theta):
        return thermal_envelope(math.exp(u), self.n_kicks, self.eta, theta)

    def fit(self, theta, contrast, contrast_err=None):
        """Fit the lineshape to contrast-vs-theta data.

        Parameters
        ----------
        theta : array, shape (n,)
        contrast : array, shape (n,)
        contrast_err : array, optional
            Standard errors; equal weights when omitted.
        """
        theta = as_float_array(theta, "theta")
        contrast = as_float_array(contrast, "contrast")
        check_same_length("theta", theta, "contrast", contrast)
        if contrast_err is None:
            err = np.ones_like(contrast)
        else:
            err = as_float_array(contrast_err, "contrast_err")
            check_same_length("theta", theta, "contrast_err", err)
            if np.any(err <= 0):
                raise ValidationError("contrast errors must be > 0")
        if len(theta) < 4:
            raise ValidationError(f"need >= 4 contrast points, got {len(theta)}")
        w = 1.0 / err

        def residuals(params):
            u, amp = params
            return (amp * self._envelope(u, theta) - contrast) * w

        starts = self._start_points(theta, contrast, err)
        best = None
        for u0, a0 in starts:
            try:
                res = least_squares(
                    residuals,
                    x0=[u0, a0],
                    bounds=(
                        [_U_BOUNDS[0], _AMPLITUDE_BOUNDS[0]],
                        [_U_BOUNDS[1], _AMPLITUDE_BOUNDS[1]],
                    ),
                    method="trf",
                )
            except Exception:
                continue
            if res.success and (best is None or res.cost < best.cost):
                best = res
        if best is None:
            raise FitError(
                "lineshape fit did not converge from any start point",
                residuals=[(float(u0), float(a0)) for u0, a0 in starts],
            )

        u_hat, a_hat = best.x
        cov = self._covariance(best.jac)
        self.nbar_ = math.exp(u_hat)
        self.nbar_err_ = self.nbar_ * math.sqrt(cov[0, 0])
        self.amplitude_ = float(a_hat)
        self.amplitude_err_ = math.sqrt(cov[1, 1])
        self.chi2_ = float(2.0 * best.cost)
        self.dof_ = len(theta) - 2
        self.fwhm_ = fwhm_exact(self.nbar_, self.n_kicks, self.eta)

        # Flat data cannot constrain the width; flag rather than fail.
        const = np.sum(w * w * contrast) / np.sum(w * w)
        chi2_const = float(np.sum(((contrast - const) * w) ** 2))
        self.lower_bound_only_ = chi2_const - self.chi2_ < 4.0
        return self

    def _start_points(self, theta, contrast, err):
        starts = []
        width = _raw_fwhm(theta, contrast)
        scale = (self.n_kicks * self.eta) ** 2
        if width is not None and width > 0:
            nbar0 = (0.83 / (abs(self.n_kicks) * self.eta * width)) ** 2
            for factor in (0.1, 1.0, 10.0):
                u = math.log(max(nbar0 * factor, 1e-12))
                starts.append((np.clip(u, *_U_BOUNDS), self._best_amp(u, theta, contrast, err)))
        # Coarse scan over decades; keeps the fit honest when the data
        # does not resolve the revival shape at all.
        u_grid = np.linspace(math.log(1e-3 / scale), math.log(1e8 / scale), self.n_grid)
        costs = []
        for u in u_grid:
            a = self._best_amp(u, theta, contrast, err)
            r = (a * self._envelope(u, theta) - contrast) / err
            costs.append(np.sum(r * r))
        u_best = u_grid[int(np.argmin(costs))]
        starts.append((u_best, self._best_amp(u_best, theta, contrast, err)))
        return starts

    def _best_amp(self, u, theta, contrast, err):
        """Optimal amplitude for a fixed width parameter (linear subproblem)."""
        env = self._envelope(u, theta)
        w2 = 1.0 / err**2
        denom = np.sum(w2 * env * env)
        if denom <= 0:
            return 0.5
        a = np.sum(w2 * env * contrast) / denom
        return float(np.clip(a, *_AMPLITUDE_BOUNDS))

    def _covariance(self, jac):
        jtj = jac.T @ jac
        try:
            return np.linalg.inv(jtj)
        except np.linalg.LinAlgError:
            return np.linalg.pinv(jtj)

    def _check_fitted(self):
        if not hasattr(self, "nbar_"):
            raise NotFittedError("this RevivalThermometer is not fitted yet; call fit first")

    def predict(self, theta):
        """Model contrast at the given delay angles."""
        self._check_fitted()
        theta = as_float_array(np.atleast_1d(theta), "theta")
        return self.amplitude_ * thermal_envelope(self.nbar_, self.n_kicks, self.eta, theta)


def fit_lineshape(points, cfg, n_kicks):
    """Fit a revival lineshape to ContrastPoints taken with n_kicks per set.

    Thin wrapper assembling a RevivalThermometer from the trap config;
    see that class for the algorithm.

    Returns
    -------
    ThermometryResult
    """
    points = list(points)
    theta = np.array([p.theta for p in points])
    contrast = np.array([p.contrast for p in points])
    err = np.array([p.error for p in points])
    est = RevivalThermometer(eta=cfg.eta, n_kicks=n_kicks).fit(theta, contrast, err)
    return ThermometryResult(
        nbar=est.nbar_,
        nbar_err=est.nbar_err_,
        amplitude=est.amplitude_,
        amplitude_err=est.amplitude_err_,
        chi2=est.chi2_,
        dof=est.dof_,
        fwhm=est.fwhm_,
        lower_bound_only=est.lower_bound_only_,
    )


def plan_theta_grid(nbar_guess, cfg, n_kicks, revival_index=1, fine_resolution=1e-4,
                    points_per_fwhm=10, span_fwhms=2.0):
    """Delay angles for measuring the revival around theta = 2*pi*revival_index.

    For a hot ion the grid covers +-span_fwhms revival widths with about
    points_per_fwhm points per width.  Step sizes are quantized to what
    the hardware can realize: multiples of theta_resolution(cfg) when
    that is fine enough (re-timing pulses), otherwise multiples of
    fine_resolution (trap-frequency scanning).  If even fine_resolution
    cannot put points_per_fwhm points across the revival, the plan is
    infeasible and an InfeasibleError is raised.

    A cold ion (nbar below 1/(N eta)^2) has a revival wider than the
    trap period; the grid then spans a full period at coarse resolution.

    Returns
    -------
    ndarray of theta values, ascending.
    """
    nbar_guess = check_positive(nbar_guess, "nbar_guess")
    center = 2.0 * math.pi * int(revival_index)
    coarse = theta_resolution(cfg)
    scale = (n_kicks * cfg.eta) ** 2

    if nbar_guess * scale < 1.0:
        # Revival occupies the whole period; scan all of it coarsely.
        n_side = int(math.floor(math.pi / coarse))
        offsets = np.arange(-n_side, n_side + 1) * coarse
        grid = center + offsets
        return grid[grid >= 0]

    fwhm = 0.83 / (abs(n_kicks) * cfg.eta * math.sqrt(nbar_guess))
    wanted = fwhm / points_per_fwhm
    if wanted < fine_resolution:
        raise InfeasibleError(
            f"resolving nbar ~ {nbar_guess:.3g} needs theta steps of {wanted:.2e} rad, "
            f"below the finest achievable {fine_resolution:.2e} rad"
        )
    if wanted >= coarse:
        spacing = math.floor(wanted / coarse) * coarse
    else:
        spacing = math.floor(wanted / fine_resolution) * fine_resolution
    n_side = int(math.ceil(span_fwhms * fwhm / spacing))
    offsets = np.arange(-n_side, n_side + 1) * spacing
    grid = center + offsets
    return grid[grid >= 0]
