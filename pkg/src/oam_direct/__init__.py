"""Direct measurement of high-dimensional OAM state vectors by weak and strong measurements, in simulation."""
__version__ = "0.1.0"

from .analysis import (FitResult, ReconstructedState, detect_pi_jumps, fit_phase_linear_chi2,
                       fit_phase_quadratic, fit_sinc_squared, renormalize_scan)
from .detection import CountRecord, NoiseSpec, average_runs, estimate_pauli, simulate_counts
from .states import OamState, aperture_state, basis_state, fidelity, rotate_state
from .weak import CouplingSpec, WeakValueScan, direct_measure, pointer_states, weak_then_strong
