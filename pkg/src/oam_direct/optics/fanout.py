"""
Continuous-phase fan-out gratings.

A grating has one period in the normalized coordinate q in [0, 1) and the
even phase profile

    G(q) = sum_k c_k cos(2 pi k q),   k = 1..K.

Its far field has order amplitudes equal to the Fourier coefficients of
exp(i G(q)).  An even profile gives orders +m and -m equal power, so
uniformity only has to be enforced between |m| values.
"""
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from ..errors import DomainError

SAMPLES = 512


@dataclass(frozen=True, eq=False)
class FanoutSpec:
    """Designed grating: period in metres, cosine coefficients, achieved figures."""

    copies: int
    period: float
    phase_coeffs: tuple
    efficiency: float
    uniformity: float
    order_powers: np.ndarray
    below_target: bool = False

    def profile(self, q):
        return phase_profile(q, self.phase_coeffs)

    def order_amplitudes(self, samples=SAMPLES):
        return order_amplitudes(self.phase_coeffs, self.copies, samples)


def phase_profile(q, coeffs):
    q = np.asarray(q, dtype=float)
    out = np.zeros_like(q)
    for k, c in enumerate(coeffs, start=1):
        out = out + c * np.cos(2 * np.pi * k * q)
    return out


def order_amplitudes(coeffs, copies, samples=SAMPLES):
    """Amplitudes of orders -(copies//2)..copies//2 from a sampled period."""
    q = np.arange(samples) / samples
    spectrum = np.fft.fft(np.exp(1j * phase_profile(q, coeffs))) / samples
    half = copies // 2
    return spectrum[np.arange(-half, half + 1)]


def efficiency_and_uniformity(powers):
    powers = np.asarray(powers, dtype=float)
    top, low = powers.max(), powers.min()
    return float(powers.sum()), float((top - low) / (top + low)) if top + low > 0 else 0.0


def farfield_orders(coeffs, copies):
    """Order amplitudes by adaptive quadrature of the grating transmission.

    Independent of the FFT route used during optimization.
    """
    half = copies // 2
    out = []
    for m in range(-half, half + 1):
        kern = lambda q, part: part(np.exp(1j * (phase_profile(q, coeffs) - 2 * np.pi * m * q)))
        re = integrate.quad(kern, 0, 1, args=(np.real,), limit=200, epsabs=1e-12)[0]
        im = integrate.quad(kern, 0, 1, args=(np.imag,), limit=200, epsabs=1e-12)[0]
        out.append(re + 1j * im)
    return np.array(out)


def _evaluate(coeffs, copies):
    return efficiency_and_uniformity(np.abs(order_amplitudes(coeffs, copies)) ** 2)


def brute_force_scan(copies=3, uniformity_tol=0.01, span=3.0, steps=241):
    """Dense scan over the first and third cosine coefficients.

    Returns (efficiency, coeffs) of the best profile within tolerance.
    """
    best = (0.0, None)
    grid = np.linspace(-span, span, steps)
    q = np.arange(SAMPLES) / SAMPLES
    orders = np.arange(-(copies // 2), copies // 2 + 1)
    third = grid[:, None] * np.cos(6 * np.pi * q)[None, :]
    for c1 in grid:
        trans = np.exp(1j * (c1 * np.cos(2 * np.pi * q)[None, :] + third))
        powers = np.abs(np.fft.fft(trans, axis=-1)[:, orders] / SAMPLES) ** 2
        top, low = powers.max(axis=-1), powers.min(axis=-1)
        eff = np.where((top - low) / (top + low) <= uniformity_tol, powers.sum(axis=-1), -1.0)
        j = int(np.argmax(eff))
        if eff[j] > best[0]:
            best = (float(eff[j]), (float(c1), 0.0, float(grid[j])))
    return best


def design_fanout(copies=3, uniformity_tol=0.01, period=1.0, n_terms=6, target=0.9):
    """Optimize a continuous phase profile that splits into ``copies`` orders.

    Maximizes the power in the central ``copies`` orders subject to
    (max - min)/(max + min) <= ``uniformity_tol`` with SLSQP from a set of
    deterministic starts.  ``below_target`` flags a result under ``target``.
    """
    if copies < 1 or copies % 2 != 1:
        raise DomainError(f"copies must be a positive odd integer, got {copies}")
    if copies == 1:
        return FanoutSpec(1, period, (), 1.0, 0.0, np.array([1.0]))
    cons = {"type": "ineq", "fun": lambda c: uniformity_tol - _evaluate(c, copies)[1]}
    best = None
    for start in np.linspace(0.5, 3.0, 11):
        x0 = np.zeros(n_terms)
        x0[0] = start
        res = optimize.minimize(lambda c: -_evaluate(c, copies)[0], x0, method="SLSQP",
                                constraints=[cons], options={"maxiter": 500, "ftol": 1e-12})
        eff, unif = _evaluate(res.x, copies)
        if unif <= uniformity_tol * (1 + 1e-6) and (best is None or eff > best[0]):
            best = (eff, unif, res.x)
    if best is None:
        return FanoutSpec(copies, period, (), 0.0, 1.0, np.zeros(copies), below_target=True)
    eff, unif, coeffs = best
    powers = np.abs(order_amplitudes(coeffs, copies)) ** 2
    return FanoutSpec(copies, period, tuple(float(c) for c in coeffs), eff, unif, powers,
                      below_target=eff < target)
