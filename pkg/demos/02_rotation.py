"""
Rotating the state by theta0 multiplies each amplitude by a phase linear in l.

The measured phase difference against the unrotated state is therefore a
straight line with slope equal to the rotation angle, here pi/9 = 0.349.
"""
import json

import numpy as np

from oam_direct import aperture_state, direct_measure, pipeline, renormalize_scan
from oam_direct.analysis import amplitude_mask, fit_phase_linear_chi2, phase_difference
from oam_direct.config import build_config
from oam_direct.states import rotate_state

base = aperture_state(2 * np.pi / 9, 13)
ref = renormalize_scan(direct_measure(base))
mask = amplitude_mask(ref)

for theta0 in (np.pi / 9, -np.pi / 9):
    rot = renormalize_scan(direct_measure(rotate_state(base, theta0)))
    dphi, _ = phase_difference(rot, ref)
    fit = fit_phase_linear_chi2(ref.ells, dphi, mask=mask)
    print(f"theta0 = {theta0:+.4f}: slope {fit['slope']:+.4f} rad/mode")

# The same through the pipeline, with a tilt that drifts between the
# reference and the rotated datasets (misalignment between runs).
for drift in (0.0, 0.03):
    cfg = build_config({"noise": {"noiseless": True}, "measurement": {"drift_tilt": drift}})
    slopes = json.loads(pipeline.run_direct_measurement(cfg)["summary.json"])["slopes"]
    print(f"drift tilt {drift:.2f}: plus {slopes['plus'][0]:+.4f}, minus {slopes['minus'][0]:+.4f}")
