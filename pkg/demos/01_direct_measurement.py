"""
Direct measurement of a 27-dimensional OAM state, noiseless.

A sharp angular aperture of width 2 pi / 9 gives a sinc-shaped spectrum over
l = -13..13.  Weakly coupling each mode to the polarization pointer, then
post-selecting on one angle, reads out the complex amplitudes directly.
"""
import numpy as np

from oam_direct import aperture_state, direct_measure, renormalize_scan
from oam_direct.analysis import amplitude_mask, detect_pi_jumps, fit_phase_quadratic, fit_sinc_squared
from oam_direct.states import fidelity

state = aperture_state(2 * np.pi / 9, 13)
print("true |a_l|^2 at l = 0, 4, 9:", np.round(np.abs(state.amplitudes[[13, 17, 22]]) ** 2, 5))

# Measure sigma_1 and sigma_2 of the pointer for every mode and form w(l).
scan = direct_measure(state, alpha=np.pi / 9)
print("weak values near the centre:", np.round(scan.values[11:16], 4))

# Normalize so the probabilities sum to one and phase(l = 0) = 0.
recon = renormalize_scan(scan)
print(f"fidelity with the true state: {fidelity(recon.state, state):.6f}")

# The width of the sinc^2 envelope should come out at 9 modes.
fit = fit_sinc_squared(recon.ells, recon.prob_density)
print(f"sinc^2 width: {fit['width']:.4f} +/- {fit.err('width'):.1e}")

# Phase is flat apart from sign flips where the sinc passes through zero.
print("pi jumps at l =", sorted(detect_pi_jumps(recon)))
quad = fit_phase_quadratic(recon.ells, recon.phase, mask=amplitude_mask(recon))
print(f"quadratic phase fit a = {quad['a']:.2e}, b = {quad['b']:.2e}")

# Smaller coupling removes the finite-alpha bias.
for alpha in np.pi / np.array([9, 18, 36, 72]):
    f = fidelity(renormalize_scan(direct_measure(state, alpha)).state, state)
    print(f"alpha = pi/{np.pi / alpha:.0f}: 1 - fidelity = {1 - f:.2e}")
