"""Radial ground-state profile of lap(w) - w + f(w) = 0 on R^N.

The profile is found by bisection shooting on w(0), tabulated on a fine
grid with exact nodal derivatives, and continued by its far-field
formula beyond r_tail. The far part of the table comes from a backward
integration started on the asymptotic series at large radius, which
keeps the growing mode out of the data the decay-constant fit sees.
"""

import csv
import json
import os
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import IntegrationWarning, quad, solve_ivp
from scipy.interpolate import CubicHermiteSpline
from scipy.special import i0e, kve

from .errors import (
    ConfigError,
    DecayFitError,
    IntegrationError,
    IterationError,
    NoGroundStateError,
)
from .nonlinearity import Nonlinearity

_R_MATCH = 10.0
_R_BACK = 24.0
_R_SERIES = 1e-3


def _rhs(r, y, nl):
    w, wp = y
    return (wp, w - nl.f(w) - (nl.dim_n - 1) / r * wp)


def _series_start(nl, w0, r0=_R_SERIES):
    # removable singularity at r=0: w ~ w0 + (w0 - f(w0)) r^2 / (2N)
    a = (w0 - nl.f(w0)) / (2.0 * nl.dim_n)
    return [w0 + a * r0 * r0, 2.0 * a * r0]


def _classify(nl, w0, r_max, rtol):
    def hit_zero(r, y, nl):
        return y[0]

    hit_zero.terminal = True
    hit_zero.direction = -1

    def turn_up(r, y, nl):
        return y[1]

    turn_up.terminal = True
    turn_up.direction = 1

    sol = solve_ivp(
        _rhs,
        (_R_SERIES, r_max),
        _series_start(nl, w0),
        args=(nl,),
        method="DOP853",
        rtol=rtol,
        atol=1e-18,
        events=[hit_zero, turn_up],
    )
    if sol.t_events[0].size:
        return "cross", sol.t_events[0][0], 0.0
    if sol.t_events[1].size:
        w_at = sol.y_events[1][0][0]
        if w_at > 1e-12:
            return "turn", sol.t_events[1][0], w_at
        return "decay", r_max, abs(sol.y[0, -1])
    return "decay", r_max, abs(sol.y[0, -1])


def _tail_value_deriv(p, dim_n, A, r):
    """Far-field formula: exact linear part plus leading nonlinear term."""
    nu, C, B, q = _tail_coeffs(p, dim_n, A)
    damp = np.exp(-r)
    lin = C * r ** (-nu) * kve(nu, r) * damp
    corr = B * np.exp(-(p - 1.0) * r) * r ** (-q)
    dlin = -C * r ** (-nu) * kve(nu + 1.0, r) * damp
    dcorr = corr * (-(p - 1.0) - q / r)
    return lin + corr, dlin + dcorr


def _forward_solve(nl, w0, rtol=1e-13):
    return solve_ivp(
        _rhs,
        (_R_SERIES, _R_MATCH),
        _series_start(nl, w0),
        args=(nl,),
        method="DOP853",
        rtol=rtol,
        atol=1e-18,
        dense_output=True,
    )


def _backward_solve(nl, A, rtol=1e-13):
    w, dw = _tail_value_deriv(nl.p, nl.dim_n, A, _R_BACK)
    return solve_ivp(
        _rhs,
        (_R_BACK, _R_MATCH),
        [w, dw],
        args=(nl,),
        method="DOP853",
        rtol=rtol,
        atol=1e-30,
        dense_output=True,
    )


def _tail_coeffs(p, dim_n, A):
    nu = (dim_n - 2) / 2.0
    C = A * np.sqrt(2.0 / np.pi)
    B = -(A ** (p - 1.0)) / ((p - 1.0) ** 2 - 1.0)
    q = (p - 1.0) * (dim_n - 1) / 2.0
    return nu, C, B, q


@dataclass(frozen=True)
class RadialProfile:
    """Tabulated decaying radial profile with its far-field formula.

    The table covers [0, 20] at spacing h_r with exact nodal
    derivatives; value/derivative use cubic Hermite interpolation up to
    r_tail and the far-field formula beyond. decay_A is the constant of
    the w ~ A r^{-(N-1)/2} e^{-r} law.
    """

    p: float
    dim_n: int
    r_grid: np.ndarray
    w_values: np.ndarray
    w_prime_values: np.ndarray
    w0: float
    decay_A: float
    r_tail: float

    def __post_init__(self):
        spline = CubicHermiteSpline(self.r_grid, self.w_values, self.w_prime_values)
        object.__setattr__(self, "_spline", spline)
        object.__setattr__(self, "_dspline", spline.derivative())

    def _tail_parts(self, r):
        return _tail_value_deriv(self.p, self.dim_n, self.decay_A, r)

    def value(self, r):
        r = _check_radius(r)
        scalar = r.ndim == 0
        r = np.atleast_1d(r)
        out = np.empty_like(r)
        low = r <= self.r_tail
        if low.any():
            out[low] = self._spline(r[low])
        if (~low).any():
            out[~low] = self._tail_parts(r[~low])[0]
        return out[0] if scalar else out

    def derivative(self, r):
        r = _check_radius(r)
        scalar = r.ndim == 0
        r = np.atleast_1d(r)
        out = np.empty_like(r)
        low = r <= self.r_tail
        if low.any():
            out[low] = self._dspline(r[low])
        if (~low).any():
            out[~low] = self._tail_parts(r[~low])[1]
        return out[0] if scalar else out

    def log_value(self, r):
        """log w(r), finite far beyond double-precision underflow."""
        r = _check_radius(r)
        scalar = r.ndim == 0
        r = np.atleast_1d(r)
        out = np.empty_like(r)
        low = r <= self.r_tail
        if low.any():
            out[low] = np.log(self._spline(r[low]))
        if (~low).any():
            rt = r[~low]
            nu, C, B, q = _tail_coeffs(self.p, self.dim_n, self.decay_A)
            kv_scaled = kve(nu, rt)
            log_lin = np.log(C) - nu * np.log(rt) + np.log(kv_scaled) - rt
            ratio = (B / C) * np.exp(-(self.p - 2.0) * rt) * rt ** (nu - q) / kv_scaled
            out[~low] = log_lin + np.log1p(ratio)
        return out[0] if scalar else out


def _check_radius(r):
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ConfigError("radius must be nonnegative")
    return r


def shoot(nl: Nonlinearity, tol: float = 1e-12, h_r: float = 0.005, r_max: float = 20.0):
    """Compute the decaying radial profile by bisection shooting.

    Bisects w(0) between shots that cross zero and shots that turn back
    up, until a shot decays monotonically through r_max or the bracket
    is below tol. The returned table is forward-integrated on the core
    and backward-integrated from the asymptotic series on the far side,
    matched at r = 10, which pins the decay constant to ~1e-8.
    """
    if tol <= 0:
        raise ConfigError("tol must be positive")
    lo, hi = 0.1, 10.0
    kind_lo = _classify(nl, lo, r_max, rtol=1e-11)[0]
    kind_hi = _classify(nl, hi, r_max, rtol=1e-11)[0]
    if kind_lo == "decay":
        w_star = lo
    elif kind_hi == "decay":
        w_star = hi
    else:
        if kind_lo != "turn" or kind_hi != "cross":
            # scan for a valid bracket before giving up
            grid = np.geomspace(0.05, 50.0, 40)
            kinds = [_classify(nl, w, r_max, rtol=1e-9)[0] for w in grid]
            bracket = None
            for i in range(len(grid) - 1):
                if kinds[i] == "turn" and kinds[i + 1] == "cross":
                    bracket = (grid[i], grid[i + 1])
                    break
            if bracket is None:
                raise NoGroundStateError(
                    f"no shooting bracket for p={nl.p}, N={nl.dim_n}"
                )
            lo, hi = bracket
        w_star = None
        for _ in range(220):
            mid = 0.5 * (lo + hi)
            kind, r_ev, w_ev = _classify(nl, mid, r_max, rtol=1e-12)
            if kind == "decay":
                w_star = mid
                break
            if kind == "turn":
                lo = mid
            else:
                hi = mid
            if hi - lo < tol:
                # bracket resolved; accept a shot that survives far out
                # at tiny amplitude even if an event fires eventually
                if r_ev >= 16.0 and w_ev < 1e-4:
                    w_star = mid
                    break
                if hi - lo < max(tol * 1e-3, 1e-15):
                    w_star = mid
                    break
        if w_star is None:
            raise IterationError("shooting bisection did not converge")

    fw = _forward_solve(nl, w_star)
    if not fw.success:
        raise NoGroundStateError("forward integration failed at converged w0")
    w_f, wp_f = fw.y[0, -1], fw.y[1, -1]
    if w_f <= 0:
        raise NoGroundStateError("converged shot lost positivity before matching")

    m = (nl.dim_n - 1) / 2.0
    A = w_f * _R_MATCH**m * np.exp(_R_MATCH)
    bw = None
    for _ in range(3):
        bw = _backward_solve(nl, A)
        A *= w_f / bw.y[0, -1]
    bw = _backward_solve(nl, A)

    r_grid = np.round(np.arange(0.0, r_max + 0.5 * h_r, h_r), 12)
    w = np.empty_like(r_grid)
    wp = np.empty_like(r_grid)
    w[0], wp[0] = w_star, 0.0
    fwd = (r_grid > 0) & (r_grid <= _R_MATCH)
    back = r_grid > _R_MATCH
    w[fwd], wp[fwd] = fw.sol(r_grid[fwd])
    w[back], wp[back] = bw.sol(r_grid[back])

    if np.any(w <= 0) or np.any(np.diff(w) >= 0) or np.any(wp[1:] > 0):
        raise NoGroundStateError("tabulated profile is not positive decreasing")

    profile = None
    for r_tail in (12.0, 14.0, 16.0, 18.0):
        cand = RadialProfile(
            p=nl.p,
            dim_n=nl.dim_n,
            r_grid=r_grid,
            w_values=w,
            w_prime_values=wp,
            w0=w_star,
            decay_A=A,
            r_tail=r_tail,
        )
        idx = int(round(r_tail / h_r))
        tail_val = cand._tail_parts(np.array([r_grid[idx]]))[0][0]
        if abs(w[idx] - tail_val) <= 1e-6 * abs(tail_val):
            profile = cand
            break
    if profile is None:
        raise DecayFitError("far-field formula never matched the table to 1e-6")
    return profile


def decay_constant(profile: RadialProfile):
    """Refit the decay constant from the tabulated plateau on [12, 18].

    Independent of the constant stored at shoot time: least squares of
    w r^{(N-1)/2} e^r against 1 and 1/r. Spread above 1e-2 relative
    signals an unconverged shot.
    """
    m = (profile.dim_n - 1) / 2.0
    sel = (profile.r_grid >= 12.0) & (profile.r_grid <= 18.0)
    r = profile.r_grid[sel]
    g = profile.w_values[sel] * r**m * np.exp(r)
    design = np.column_stack([np.ones_like(r), 1.0 / r])
    coef, *_ = np.linalg.lstsq(design, g, rcond=None)
    fitted = design @ coef
    spread = np.max(np.abs(g - fitted)) / abs(coef[0])
    if spread > 1e-2:
        raise DecayFitError(f"plateau spread {spread:.2e} exceeds 1e-2")
    return float(coef[0]), float(spread)


def _quad_checked(fun, a, b, points=None, what=""):
    # epsabs is pushed below what quad can certify, so it warns about
    # roundoff; the explicit error check below is the one that matters.
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        val, err = quad(fun, a, b, points=points, limit=400, epsabs=1e-13, epsrel=1e-11)
    if err > 1e-7 * max(1.0, abs(val)):
        raise IntegrationError(f"quadrature for {what} unreliable (err {err:.2e})")
    return val


def normalization_constants(profile: RadialProfile):
    """Per-spike limit energy e1 and the weighted interaction mass gamma.

    e1 = (1/2) int (|grad w|^2 + w^2) - int F(w); gamma = int f(w) e^{z1}.
    Both reduce to radial integrals (a cosh weight in 1d, a Bessel I0
    weight in 2d) evaluated adaptively with the far-field formula past
    the end of the table.
    """
    nl = Nonlinearity(p=profile.p, dim_n=profile.dim_n)
    n = profile.dim_n
    if n not in (1, 2):
        raise ConfigError("normalization constants implemented for N in {1, 2}")
    r_cut = max(60.0, 40.0 / (profile.p - 2.0))
    pts = [profile.r_tail, profile.r_grid[-1]]

    def density(r):
        wv = profile.value(r)
        wd = profile.derivative(r)
        return 0.5 * (wd * wd + wv * wv) - nl.F(wv)

    if n == 1:
        e1 = 2.0 * _quad_checked(density, 0.0, r_cut, points=pts, what="e1")
        gamma = 2.0 * _quad_checked(
            lambda r: nl.f(profile.value(r)) * np.cosh(r), 0.0, r_cut, points=pts, what="gamma"
        )
    else:
        e1 = 2.0 * np.pi * _quad_checked(
            lambda r: density(r) * r, 0.0, r_cut, points=pts, what="e1"
        )
        gamma = 2.0 * np.pi * _quad_checked(
            lambda r: nl.f(profile.value(r)) * i0e(r) * np.exp(r) * r,
            0.0,
            r_cut,
            points=pts,
            what="gamma",
        )
    if gamma <= 0:
        raise IntegrationError("gamma must be positive for a positive profile")
    return float(e1), float(gamma)


def save_profile(profile: RadialProfile, csv_path, json_path=None):
    """Write the table as CSV (r, w, w_prime) and the scalars as JSON.

    Floats are printed with 17 significant digits so a save/load/save
    cycle is byte-identical.
    """
    if json_path is None:
        json_path = os.path.splitext(csv_path)[0] + ".json"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["r", "w", "w_prime"])
        for r, wv, wp in zip(profile.r_grid, profile.w_values, profile.w_prime_values):
            writer.writerow([f"{r:.17g}", f"{wv:.17g}", f"{wp:.17g}"])
    header = {
        "p": profile.p,
        "N": profile.dim_n,
        "w0": profile.w0,
        "A": profile.decay_A,
        "r_tail": profile.r_tail,
    }
    with open(json_path, "w") as fh:
        json.dump(header, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_profile(csv_path, json_path=None):
    if json_path is None:
        json_path = os.path.splitext(csv_path)[0] + ".json"
    with open(json_path) as fh:
        header = json.load(fh)
    rows = []
    with open(csv_path, newline="") as fh:
        reader = csv.reader(fh)
        names = next(reader)
        if names != ["r", "w", "w_prime"]:
            raise ConfigError(f"unexpected profile CSV columns {names}")
        for row in reader:
            rows.append([float(x) for x in row])
    table = np.asarray(rows)
    return RadialProfile(
        p=float(header["p"]),
        dim_n=int(header["N"]),
        r_grid=table[:, 0],
        w_values=table[:, 1],
        w_prime_values=table[:, 2],
        w0=float(header["w0"]),
        decay_A=float(header["A"]),
        r_tail=float(header["r_tail"]),
    )
