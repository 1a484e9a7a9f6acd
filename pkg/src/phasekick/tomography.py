"""Phase-space tomography on kick-number rings.

A delay scan at fixed signed kick count N reads the motional
characteristic function chi along a circle through the origin of phase
space; changing N changes the circle.  This module plans those ring
scans, converts measured spin-up probabilities into chi samples, fits a
smooth surface through the scattered samples, and quantifies where the
reconstructed chi dips significantly below zero (a nonclassicality
witness: no classical mixture of coherent states does that).
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import NearestNDInterpolator, RBFInterpolator
from scipy.spatial import Delaunay, QhullError
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .core import ring_alpha
from .errors import ValidationError
from .synth import DEFAULT_RING_SET
from .validation import check_positive

__all__ = [
    "RingPoint",
    "ChiSample",
    "ChiGrid",
    "NegativityReport",
    "plan_rings",
    "chi_from_samples",
    "ChiInterpolator",
    "reconstruct_grid",
    "negativity_report",
]


@dataclass(frozen=True)
class RingPoint:
    """One planned measurement setting and the phase-space point it probes."""

    n_kicks: int
    theta: float
    alpha: complex


@dataclass(frozen=True)
class ChiSample:
    """Measured characteristic-function value at one phase-space point.

    im is None when only the phi = 0 fringe point was measured for this
    setting.  Samples outside |chi| <= 1 are physically impossible but
    statistically expected at finite shots; they are kept, and
    `physical` reports whether the sample is within 3 errors of the
    allowed band.
    """

    alpha: complex
    re: float
    re_err: float
    im: float | None
    im_err: float | None
    n_kicks: int
    theta: float

    @property
    def physical(self):
        ok = abs(self.re) <= 1.0 + 3.0 * self.re_err
        if self.im is not None:
            ok = ok and abs(self.im) <= 1.0 + 3.0 * self.im_err
        return ok


@dataclass(frozen=True)
class ChiGrid:
    """Reconstructed chi on a Cartesian phase-space grid.

    Cells outside the convex hull of the measured points are masked
    (mask False, values nan): the reconstruction interpolates but never
    extrapolates.  im is nan wherever no phi = pi/2 data covered the
    cell.  err fields carry the nearest measured sample error as a
    local noise scale.
    """

    x: np.ndarray
    y: np.ndarray
    re: np.ndarray
    im: np.ndarray
    re_err: np.ndarray
    im_err: np.ndarray
    mask: np.ndarray
    metadata: dict = field(default_factory=dict)


@dataclass(frozen=True)
class NegativityReport:
    """Where and how significantly the reconstructed Re chi goes negative."""

    min_value: float
    min_alpha: complex
    min_err: float
    significant: bool
    negative_area_fraction: float
    cells_evaluated: int


def plan_rings(cfg, ring_set=DEFAULT_RING_SET, theta_count=64):
    """Measurement plan covering phase space with kick-number rings.

    Each signed kick count N contributes theta_count settings uniformly
    spaced over a full trap period (endpoint excluded; theta = 2 pi
    repeats theta = 0).

    Returns
    -------
    list of RingPoint
    """
    rings = [int(n) for n in ring_set]
    if not rings:
        raise ValidationError("ring_set must be nonempty")
    theta_count = int(theta_count)
    if theta_count < 8:
        raise ValidationError(f"theta_count must be >= 8, got {theta_count}")
    thetas = np.arange(theta_count) * (2.0 * math.pi / theta_count)
    return [
        RingPoint(n_kicks=n, theta=float(t), alpha=ring_alpha(cfg, n, float(t)))
        for n in rings
        for t in thetas
    ]


def _phi_kind(phi):
    if abs(phi) <= 1e-9:
        return "re"
    if abs(phi - math.pi / 2.0) <= 1e-9:
        return "im"
    raise ValidationError(f"ring samples must have phi of 0 or pi/2, got {phi}")


def chi_from_samples(samples, cfg):
    """Convert ring measurements into characteristic-function samples.

    Pairs phi = 0 and phi = pi/2 measurements taken at the same
    (n_kicks, theta): re = 2 S(0) - 1, im = 2 S(pi/2) - 1, errors twice
    the binomial errors.  Repeated measurements of one setting pool
    their counts.  Settings measured only at phi = 0 produce re-only
    samples (im None); a phi = pi/2 measurement without its partner is
    an error.

    Returns
    -------
    list of ChiSample, ordered by first appearance of the setting.
    """
    samples = list(samples)
    if not samples:
        raise ValidationError("no samples given")
    pooled = {}
    order = []
    for s in samples:
        key = (s.n_kicks, round(s.theta, 12))
        kind = _phi_kind(s.phi)
        if key not in pooled:
            pooled[key] = {"re": [0, 0], "im": [0, 0], "theta": s.theta}
            order.append(key)
        pooled[key][kind][0] += s.count
        pooled[key][kind][1] += s.shots

    out = []
    for key in order:
        n_kicks, _ = key
        rec = pooled[key]
        theta = rec["theta"]
        if rec["re"][1] == 0:
            raise ValidationError(
                f"setting (N={n_kicks}, theta={theta:.6g}) has a phi=pi/2 "
                "measurement but no phi=0 partner"
            )

        def estimate(count, shots):
            p_tilde = (count + 1.0) / (shots + 2.0)
            return count / shots, math.sqrt(p_tilde * (1.0 - p_tilde) / shots)

        s0, e0 = estimate(*rec["re"])
        re, re_err = 2.0 * s0 - 1.0, 2.0 * e0
        if rec["im"][1] > 0:
            s1, e1 = estimate(*rec["im"])
            im, im_err = 2.0 * s1 - 1.0, 2.0 * e1
        else:
            im, im_err = None, None
        out.append(
            ChiSample(
                alpha=ring_alpha(cfg, n_kicks, theta),
                re=re,
                re_err=re_err,
                im=im,
                im_err=im_err,
                n_kicks=n_kicks,
                theta=theta,
            )
        )
    return out


def _dedupe(points, values, errors):
    """Merge samples at coincident points by inverse-variance averaging.

    Every ring passes through the origin, so exact duplicates are the
    rule, not the exception, and exact interpolation needs them merged.
    """
    buckets = {}
    order = []
    for p, v, e in zip(points, values, errors):
        key = (round(p[0], 12), round(p[1], 12))
        if key not in buckets:
            buckets[key] = []
            order.append(key)
        buckets[key].append((v, e))
    merged_p, merged_v, merged_e = [], [], []
    for key in order:
        vals = buckets[key]
        wsum = sum(1.0 / e**2 for _, e in vals)
        merged_p.append(key)
        merged_v.append(sum(v / e**2 for v, e in vals) / wsum)
        merged_e.append(math.sqrt(1.0 / wsum))
    return np.array(merged_p), np.array(merged_v), np.array(merged_e)


class ChiInterpolator(BaseEstimator):
    """Scattered-data surface fit for characteristic-function samples.

    Thin-plate-spline radial basis interpolation through the measured
    points (exact by default, optional smoothing), with evaluation
    restricted to the convex hull of the data: queries outside return
    nan rather than an extrapolation.

    Attributes (after fit)
    ----------------------
    hull_ : scipy.spatial.Delaunay
        Triangulation of the (deduplicated) sample locations.
    n_points_ : int
        Number of distinct sample locations.
    """

    def __init__(self, kernel="thin_plate_spline", smoothing=0.0):
        self.kernel = kernel
        self.smoothing = smoothing

    def fit(self, alpha, values, errors=None):
        """Fit the surface.

        Parameters
        ----------
        alpha : complex array, shape (n,)
            Sample locations in phase space.
        values : float array, shape (n,)
        errors : float array, optional
            Standard errors per sample; used for merging duplicate
            locations and for the local-error query. Ones when omitted.
        """
        alpha = np.asarray(alpha, dtype=complex).ravel()
        values = np.asarray(values, dtype=float).ravel()
        if len(alpha) != len(values):
            raise ValidationError("alpha and values must have equal length")
        if errors is None:
            errors = np.ones(len(alpha))
        else:
            errors = np.asarray(errors, dtype=float).ravel()
        points = np.column_stack([alpha.real, alpha.imag])
        points, values, errors = _dedupe(points, values, errors)
        if len(points) < 3:
            raise ValidationError("need at least 3 distinct sample points")
        try:
            self.hull_ = Delaunay(points)
        except QhullError as exc:
            raise ValidationError(f"degenerate sample geometry: {exc}") from None
        self.rbf_ = RBFInterpolator(
            points, values, kernel=self.kernel, smoothing=self.smoothing
        )
        self.err_ = NearestNDInterpolator(points, errors)
        self.n_points_ = len(points)
        return self

    def _check_fitted(self):
        if not hasattr(self, "rbf_"):
            raise NotFittedError("this ChiInterpolator is not fitted yet; call fit first")

    def inside(self, alpha):
        """Boolean mask of query points inside the data hull."""
        self._check_fitted()
        alpha = np.asarray(alpha, dtype=complex)
        pts = np.column_stack([alpha.real.ravel(), alpha.imag.ravel()])
        return (self.hull_.find_simplex(pts) >= 0).reshape(alpha.shape)

    def predict(self, alpha):
        """Interpolated values at alpha; nan for points outside the hull."""
        self._check_fitted()
        alpha = np.asarray(alpha, dtype=complex)
        pts = np.column_stack([alpha.real.ravel(), alpha.imag.ravel()])
        ok = self.hull_.find_simplex(pts) >= 0
        out = np.full(len(pts), np.nan)
        if np.any(ok):
            out[ok] = self.rbf_(pts[ok])
        return out.reshape(alpha.shape)

    def local_error(self, alpha):
        """Error of the nearest measured sample, as a local noise scale."""
        self._check_fitted()
        alpha = np.asarray(alpha, dtype=complex)
        pts = np.column_stack([alpha.real.ravel(), alpha.imag.ravel()])
        return self.err_(pts).reshape(alpha.shape)


def reconstruct_grid(chis, resolution=0.05, kernel="thin_plate_spline", smoothing=0.0):
    """Interpolate chi samples onto a Cartesian phase-space grid.

    Parameters
    ----------
    chis : list of ChiSample
    resolution : float
        Grid spacing in both Re(alpha) and Im(alpha).
    kernel, smoothing :
        Passed to ChiInterpolator.

    Returns
    -------
    ChiGrid
        Covering the bounding box of the samples; cells outside the
        convex hull of the data are masked.  The imaginary part is
        reconstructed from whatever subset of samples carries it, and
        masked by that subset's own hull.
    """
    chis = list(chis)
    resolution = check_positive(resolution, "resolution")
    alphas = np.array([s.alpha for s in chis], dtype=complex)
    interp_re = ChiInterpolator(kernel=kernel, smoothing=smoothing).fit(
        alphas,
        np.array([s.re for s in chis]),
        np.array([s.re_err for s in chis]),
    )

    x = np.arange(alphas.real.min(), alphas.real.max() + resolution / 2.0, resolution)
    y = np.arange(alphas.imag.min(), alphas.imag.max() + resolution / 2.0, resolution)
    grid_alpha = x[None, :] + 1j * y[:, None]

    re = interp_re.predict(grid_alpha)
    mask = interp_re.inside(grid_alpha)
    re_err = np.where(mask, interp_re.local_error(grid_alpha), np.nan)

    with_im = [s for s in chis if s.im is not None]
    im = np.full_like(re, np.nan)
    im_err = np.full_like(re, np.nan)
    if len(with_im) >= 3:
        try:
            interp_im = ChiInterpolator(kernel=kernel, smoothing=smoothing).fit(
                np.array([s.alpha for s in with_im], dtype=complex),
                np.array([s.im for s in with_im]),
                np.array([s.im_err for s in with_im]),
            )
            im = interp_im.predict(grid_alpha)
            im_err = np.where(interp_im.inside(grid_alpha), interp_im.local_error(grid_alpha), np.nan)
        except ValidationError:
            pass

    return ChiGrid(
        x=x,
        y=y,
        re=re,
        im=im,
        re_err=re_err,
        im_err=im_err,
        mask=mask,
        metadata={
            "interpolation": kernel,
            "smoothing": smoothing,
            "resolution": resolution,
            "n_samples": len(chis),
            "n_locations": interp_re.n_points_,
        },
    )


def negativity_report(grid):
    """Summarize negative structure in the reconstructed Re chi.

    The minimum is significant when it lies below -3 times the local
    noise scale; the area fraction counts unmasked cells below their
    own -3 sigma level.

    Returns
    -------
    NegativityReport
    """
    mask = grid.mask & np.isfinite(grid.re)
    if not np.any(mask):
        raise ValidationError("grid has no valid cells")
    re = np.where(mask, grid.re, np.inf)
    idx = np.unravel_index(np.argmin(re), re.shape)
    min_value = float(grid.re[idx])
    min_err = float(grid.re_err[idx])
    min_alpha = complex(grid.x[idx[1]], grid.y[idx[0]])
    threshold = -3.0 * np.where(np.isfinite(grid.re_err), grid.re_err, 0.0)
    negative = mask & (grid.re < threshold)
    return NegativityReport(
        min_value=min_value,
        min_alpha=min_alpha,
        min_err=min_err,
        significant=min_value < -3.0 * min_err,
        negative_area_fraction=float(np.sum(negative)) / float(np.sum(mask)),
        cells_evaluated=int(np.sum(mask)),
    )
