"""
From weak-value scans to state vectors, densities, phases and fits.

Phases are reported principal-valued in (-pi, pi].  Fits never see raw
principal values: the quadratic phase fit works on the phase with sign flips
(pi jumps) removed, the linear fit on the 2 pi-unwrapped phase, both built
from differences between consecutive retained modes.
"""
import csv
import io
import json
from dataclasses import dataclass

import numpy as np
from scipy import linalg, optimize

from .errors import DegenerateWeightsError, DomainError, FitFailureError
from .states import OamState, sinc

NULL_FRACTION = 0.01


@dataclass(frozen=True, eq=False)
class ReconstructedState:
    ells: np.ndarray
    state: OamState
    prob_density: np.ndarray
    phase: np.ndarray
    prob_err: np.ndarray
    phase_err: np.ndarray

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["ell", "prob", "prob_err", "phase", "phase_err"])
        for row in zip(self.ells, self.prob_density, self.prob_err, self.phase, self.phase_err):
            writer.writerow([int(row[0])] + [repr(float(x)) for x in row[1:]])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text):
        rows = list(csv.DictReader(io.StringIO(text)))
        cols = {"ell", "prob", "prob_err", "phase", "phase_err"}
        if not rows or set(rows[0]) != cols:
            raise DomainError(f"reconstruction CSV needs columns {sorted(cols)}")
        get = lambda k: np.array([float(r[k]) for r in rows])
        prob, phase = get("prob"), get("phase")
        state = OamState(np.sqrt(prob) * np.exp(1j * phase))
        return cls(np.array([int(r["ell"]) for r in rows]), state, prob, phase, get("prob_err"), get("phase_err"))


def _principal(phi):
    """Wrap to (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(phi, dtype=float), 2 * np.pi)


def renormalize_scan(scan):
    """Normalize a scan into a state with phase(l=0) = 0.

    Uncertainties on Re w and Im w are propagated to first order.  Phase
    errors are capped at pi, beyond which they carry no information.
    """
    w = scan.values
    total = float(np.sum(np.abs(w) ** 2))
    if total == 0:
        raise DomainError("scan has no nonzero weak value")
    ells = scan.ells
    zero = np.flatnonzero(ells == 0)
    ref = int(zero[0]) if zero.size and abs(w[zero[0]]) > 0 else int(np.argmax(np.abs(w)))
    psi = w / np.sqrt(total) * np.exp(-1j * np.angle(w[ref]))
    psi = np.where(np.abs(psi) == 0, 0.0, psi)
    prob = np.abs(psi) ** 2
    phase = np.where(np.abs(psi) > 0, np.angle(psi), 0.0)
    phase[ref] = 0.0

    x, y = w.real, w.imag
    sx2, sy2 = scan.err_re**2, scan.err_im**2
    eye = np.eye(ells.size)
    jac_x = 2 * x[None, :] * (eye / total - prob[:, None] / total)
    jac_y = 2 * y[None, :] * (eye / total - prob[:, None] / total)
    prob_err = np.sqrt(jac_x**2 @ sx2 + jac_y**2 @ sy2)

    mag4 = np.abs(w) ** 4
    num = y**2 * sx2 + x**2 * sy2
    with np.errstate(divide="ignore", invalid="ignore"):
        arg_var = np.where(mag4 > 0, num / mag4, np.where(sx2 + sy2 > 0, np.inf, 0.0))
    phase_var = arg_var + arg_var[ref]
    phase_var[ref] = 0.0
    phase_err = np.minimum(np.sqrt(phase_var), np.pi)
    return ReconstructedState(ells.copy(), OamState(psi), prob, phase, prob_err, phase_err)


def amplitude_mask(recon, fraction=NULL_FRACTION):
    """Modes whose probability is at least ``fraction`` of the peak."""
    keep = recon.prob_density >= fraction * recon.prob_density.max()
    return {int(ell) for ell in recon.ells[keep]}


def phase_difference(recon, reference):
    """Pointwise phase of ``recon`` minus that of ``reference``, with errors."""
    if not np.array_equal(recon.ells, reference.ells):
        raise DomainError("reconstructions cover different mode ranges")
    dphi = _principal(recon.phase - reference.phase)
    return dphi, np.hypot(recon.phase_err, reference.phase_err)


@dataclass(frozen=True)
class FitResult:
    model: str
    params: dict
    chi2: float
    dof: int

    def __getitem__(self, name):
        return self.params[name][0]

    def err(self, name):
        return self.params[name][1]

    def to_dict(self):
        return {
            "model": self.model,
            "params": {k: {"value": float(v), "err": float(e)} for k, (v, e) in self.params.items()},
            "chi2": float(self.chi2),
            "dof": int(self.dof),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data):
        params = {k: (v["value"], v["err"]) for k, v in data["params"].items()}
        return cls(data["model"], params, data["chi2"], data["dof"])


def _select(ells, values, err, mask):
    ells = np.asarray(ells, dtype=int)
    values = np.asarray(values, dtype=float)
    err = None if err is None else np.asarray(err, dtype=float)
    keep = np.ones(ells.size, bool) if mask is None else np.isin(ells, sorted(mask))
    order = np.argsort(ells[keep])
    pick = lambda a: None if a is None else a[keep][order]
    return pick(ells), pick(values), pick(err)


def _weights(err, n):
    """Return (sigma, weighted); missing or all-zero errors mean unweighted."""
    if err is None or np.all(err == 0):
        return np.ones(n), False
    if np.any(~np.isfinite(err)):
        err = np.where(np.isfinite(err), err, np.inf)
    return err, True


def _linear_lsq(design, y, err):
    """Weighted least squares.

    ``err=None`` gives an unweighted fit with residual-scaled covariance.
    Points with zero error are exact equality constraints; the remaining
    freedom is fitted to the other points.  Inconsistent constraints, or
    freedom left with no weighted points to fix it, raise
    DegenerateWeightsError.
    """
    n, k = design.shape
    if err is not None and np.any(err == 0):
        exact = err == 0
        c, d = design[exact], y[exact]
        beta0, *_ = np.linalg.lstsq(c, d, rcond=None)
        if np.max(np.abs(d - c @ beta0)) > 1e-9 * (1 + np.max(np.abs(d))):
            raise DegenerateWeightsError("zero-error points are inconsistent with the model")
        free = linalg.null_space(c)
        if free.shape[1] == 0:
            chi2 = float(np.sum(((y - design @ beta0)[~exact] / err[~exact]) ** 2))
            return beta0, np.zeros((k, k)), chi2
        rest = ~exact
        wts = 1.0 / err[rest]
        a = (design[rest] @ free) * wts[:, None]
        if np.linalg.matrix_rank(a) < free.shape[1]:
            raise DegenerateWeightsError("zero-error points and the rest do not determine the model")
        b = (y[rest] - design[rest] @ beta0) * wts
        z, *_ = np.linalg.lstsq(a, b, rcond=None)
        chi2 = float(np.sum((b - a @ z) ** 2))
        return beta0 + free @ z, free @ np.linalg.inv(a.T @ a) @ free.T, chi2
    sigma, weighted = _weights(err, n)
    wts = 1.0 / sigma
    a = design * wts[:, None]
    b = y * wts
    beta, *_ = np.linalg.lstsq(a, b, rcond=None)
    chi2 = float(np.sum((b - a @ beta) ** 2))
    cov = np.linalg.pinv(a.T @ a)
    dof = n - k
    if not weighted:
        cov = cov * (chi2 / dof if dof > 0 else 0.0)
    return beta, cov, chi2


def unwrap_along_ells(ells, phase, period=2 * np.pi):
    """Remove jumps that are multiples of ``period`` between consecutive points.

    With ``period = pi`` sign flips are removed as well.  The point nearest
    l = 0 keeps its original value.
    """
    phase = np.asarray(phase, dtype=float)
    if phase.size == 0:
        return phase
    steps = np.diff(phase)
    steps = steps - period * np.round(steps / period)
    out = np.concatenate([[0.0], np.cumsum(steps)])
    anchor = int(np.argmin(np.abs(np.asarray(ells))))
    return out - out[anchor] + phase[anchor]


def fit_phase_quadratic(ells, phase, err=None, mask=None):
    """Fit phi(l) = a l^2 + b l + c to the sign-corrected phase."""
    x, y, e = _select(ells, phase, err, mask)
    if x.size < 4:
        raise DomainError(f"quadratic phase fit needs >= 4 points, got {x.size}")
    y = unwrap_along_ells(x, y, period=np.pi)
    design = np.stack([x**2, x, np.ones_like(x)], axis=1).astype(float)
    beta, cov, chi2 = _linear_lsq(design, y, e)
    errs = np.sqrt(np.clip(np.diag(cov), 0, None))
    params = {name: (float(v), float(s)) for name, v, s in zip("abc", beta, errs)}
    return FitResult("quadratic-phase", params, chi2, x.size - 3)


def fit_phase_linear_chi2(ells, delta_phase, err=None, mask=None):
    """Chi-square straight-line fit phi(l) = slope * l + intercept."""
    x, y, e = _select(ells, delta_phase, err, mask)
    if x.size < 3:
        raise DomainError(f"linear phase fit needs >= 3 points, got {x.size}")
    y = unwrap_along_ells(x, y)
    design = np.stack([x, np.ones_like(x)], axis=1).astype(float)
    beta, cov, chi2 = _linear_lsq(design, y, e)
    errs = np.sqrt(np.clip(np.diag(cov), 0, None))
    params = {"slope": (float(beta[0]), float(errs[0])), "intercept": (float(beta[1]), float(errs[1]))}
    return FitResult("linear-phase", params, chi2, x.size - 2)


def sinc_squared_model(ells, amplitude, width):
    return amplitude * sinc(np.pi * np.asarray(ells, dtype=float) / width) ** 2


def _first_null_guess(ells, density):
    """Mean distance from the peak to the first local minimum on each side."""
    order = np.argsort(ells)
    x, y = np.asarray(ells)[order], np.asarray(density)[order]
    peak = int(np.argmax(y))
    guesses = []
    for step in (1, -1):
        i = peak
        while 0 <= i + step < x.size and y[i + step] < y[i]:
            i += step
        if i != peak and 0 < i < x.size - 1:
            guesses.append(abs(x[i] - x[peak]))
    return float(np.mean(guesses)) if guesses else None


def fit_sinc_squared(ells, density, err=None, maxiter=500):
    """Least-squares fit of A sinc^2(pi l / width) over (A, width).

    For fixed width the amplitude is solved in closed form; the width is
    found by a bounded derivative-free search on [1, 4 L] seeded by a grid
    scan and by the first empirical null.  Errors, when given and nonzero,
    weight the fit and set absolute parameter uncertainties.
    """
    x = np.asarray(ells, dtype=float)
    y = np.asarray(density, dtype=float)
    if x.size < 5:
        raise DomainError(f"sinc-squared fit needs >= 5 points, got {x.size}")
    e = None if err is None else np.asarray(err, dtype=float)
    if e is not None and np.any(e == 0) and not np.all(e == 0):
        e = np.where(e == 0, np.min(e[e > 0]), e)
    sigma, weighted = _weights(e, x.size)
    wts = 1.0 / sigma**2
    lo, hi = 1.0, 4.0 * max(np.max(np.abs(x)), 1.0)

    def amp_for(width):
        m = sinc(np.pi * x / width) ** 2
        den = np.sum(wts * m * m)
        return np.sum(wts * m * y) / den if den > 0 else 0.0

    def chi2(width):
        return float(np.sum(wts * (y - sinc_squared_model(x, amp_for(width), width)) ** 2))

    grid = np.linspace(lo, hi, int((hi - lo) / 0.05) + 1)
    costs = np.array([chi2(g) for g in grid])
    starts = [grid[int(np.argmin(costs))]]
    guess = _first_null_guess(x, y)
    if guess is not None and lo <= guess <= hi:
        starts.append(guess)
    candidates = []
    for start in starts:
        bracket = (max(lo, start - 0.1), min(hi, start + 0.1))
        res = optimize.minimize_scalar(chi2, bounds=bracket, method="bounded",
                                       options={"xatol": 1e-10, "maxiter": maxiter})
        if not res.success:
            raise FitFailureError(f"width search did not converge: {res.message}", last=float(res.x))
        candidates.append((float(res.fun), float(res.x)))
    best = min(candidates, key=lambda c: (c[0], c[1]))
    for cost, width in candidates:
        if cost <= best[0] * (1 + 1e-12) + 1e-300 and width < best[1]:
            best = (cost, width)
    cost, width = best
    amp = amp_for(width)

    arg = np.pi * x / width
    s = sinc(arg)
    with np.errstate(divide="ignore", invalid="ignore"):
        ds = np.where(arg != 0, (np.cos(arg) - s) / arg, 0.0)
    jac = np.stack([s**2, amp * 2 * s * ds * (-np.pi * x / width**2)], axis=1)
    cov = np.linalg.pinv(jac.T @ (jac * wts[:, None]))
    dof = x.size - 2
    if not weighted:
        cov = cov * (cost / dof if dof > 0 else 0.0)
    errs = np.sqrt(np.clip(np.diag(cov), 0, None))
    params = {"amplitude": (float(amp), float(errs[0])), "width": (width, float(errs[1]))}
    return FitResult("sinc-squared", params, cost, dof)


def detect_pi_jumps(recon, tol=0.5):
    """Modes at a local probability minimum across which the phase steps by pi.

    The phase is compared between the two neighbours of each interior local
    minimum, so a jump is found whether the amplitude passes exactly through
    zero at the minimum or changes sign between the minimum and a neighbour.
    """
    order = np.argsort(recon.ells)
    ells = recon.ells[order]
    prob = recon.prob_density[order]
    phase = recon.phase[order]
    jumps = set()
    for k in range(1, ells.size - 1):
        if prob[k] > prob[k - 1] or prob[k] > prob[k + 1]:
            continue
        across = abs(_principal(phase[k + 1] - phase[k - 1]))
        if abs(across - np.pi) < tol:
            jumps.add(int(ells[k]))
    return jumps


def fits_to_json(fits):
    """Serialize a mapping name -> FitResult."""
    return json.dumps({k: v.to_dict() for k, v in fits.items()}, indent=2, sort_keys=True) + "\n"
