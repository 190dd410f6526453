"""
Photon-counting readout of the pointer: a PBS with two single-photon
detectors, measured in the diagonal (sigma_1) and circular (sigma_2) bases
on disjoint photon ensembles.

Random numbers
--------------
Every (master seed, stream, run, mode l, basis) cell draws from its own
Philox counter-based generator keyed by ``SeedSequence(seed,
spawn_key=(stream, run, zigzag(l), basis))`` where zigzag(l) = 2l for
l >= 0 and -2l - 1 otherwise, and basis is 0 (diagonal) or 1 (circular).
``stream`` separates independent datasets sharing a master seed.  Each cell draws two Poisson
signal counts (plus port, minus port) followed by two uniforms that are
mapped through the Poisson inverse CDF to the detector nuisance counts.
Evaluation order therefore never changes the result, and raising the dark
or background rate can only add nuisance counts.
"""
import csv
import io
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import stats

from .errors import DomainError, InsufficientSignalError
from .weak import WeakValueScan

BASES = ("linear", "circular")

# Analyzer eigenvectors: +1 and -1 eigenstates of sigma_1 and sigma_2.
_ANALYZERS = {
    "linear": (np.array([1, 1]) / np.sqrt(2), np.array([1, -1]) / np.sqrt(2)),
    "circular": (np.array([1, 1j]) / np.sqrt(2), np.array([1, -1j]) / np.sqrt(2)),
}


@dataclass(frozen=True)
class NoiseSpec:
    """Photon budget and detector nuisance.

    Defaults: 1e5 photons per mode per basis, 1 s integration, 100 counts/s
    dark rate, no background light.  Flux and background are placeholders;
    only the dark rate is a detector datasheet value.
    """

    photons_per_setting: int = 100_000
    dark_rate: float = 100.0
    integration_time: float = 1.0
    background_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.photons_per_setting < 0:
            raise DomainError("photons_per_setting must be >= 0")
        for name in ("dark_rate", "integration_time", "background_rate"):
            if not getattr(self, name) >= 0:
                raise DomainError(f"{name} must be >= 0")
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")

    @property
    def nuisance_mean(self):
        """Expected dark plus background counts per detector."""
        return (self.dark_rate + self.background_rate) * self.integration_time


def _zigzag(ell):
    return 2 * ell if ell >= 0 else -2 * ell - 1


def substream(seed, run, ell, basis, stream=0):
    """Generator for one (stream, run, mode, basis) cell."""
    ss = np.random.SeedSequence(seed, spawn_key=(stream, run, _zigzag(int(ell)), basis))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True, eq=False)
class CountRecord:
    """Counts with shape (n_modes, 2); column 0 is the diagonal basis, 1 circular."""

    ells: np.ndarray
    n_plus: np.ndarray
    n_minus: np.ndarray
    postsel_prob: np.ndarray

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["ell", "basis", "n_plus", "n_minus", "postsel_prob"])
        for i, ell in enumerate(self.ells):
            for b, name in enumerate(BASES):
                writer.writerow([int(ell), name, int(self.n_plus[i, b]), int(self.n_minus[i, b]),
                                 repr(float(self.postsel_prob[i]))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text):
        rows = list(csv.DictReader(io.StringIO(text)))
        ells = sorted({int(r["ell"]) for r in rows})
        idx = {ell: i for i, ell in enumerate(ells)}
        n_plus = np.zeros((len(ells), 2), dtype=np.int64)
        n_minus = np.zeros_like(n_plus)
        prob = np.zeros(len(ells))
        for r in rows:
            i, b = idx[int(r["ell"])], BASES.index(r["basis"])
            n_plus[i, b], n_minus[i, b] = int(r["n_plus"]), int(r["n_minus"])
            prob[i] = float(r["postsel_prob"])
        return cls(np.array(ells), n_plus, n_minus, prob)


def port_probabilities(pointer, basis):
    pointer = np.asarray(pointer, dtype=complex)
    pointer = pointer / np.linalg.norm(pointer)
    plus, minus = _ANALYZERS[basis]
    return abs(np.vdot(plus, pointer)) ** 2, abs(np.vdot(minus, pointer)) ** 2


def simulate_counts(pointer_states, noise, run=0, stream=0):
    """Draw detector counts for each mode in ``pointer_states``.

    ``pointer_states`` maps l to a (pointer, probability) pair such as the
    output of :func:`oam_direct.weak.pointer_states`.
    """
    ells = np.array(sorted(pointer_states), dtype=int)
    n_plus = np.zeros((ells.size, 2), dtype=np.int64)
    n_minus = np.zeros_like(n_plus)
    prob = np.zeros(ells.size)
    uniforms = np.zeros((ells.size, 2, 2))
    for i, ell in enumerate(ells):
        pointer, p_post = pointer_states[int(ell)]
        prob[i] = p_post
        for b, basis in enumerate(BASES):
            p_plus, p_minus = port_probabilities(pointer, basis)
            mean = noise.photons_per_setting * p_post * np.array([p_plus, p_minus])
            rng = substream(noise.seed, run, ell, b, stream)
            n_plus[i, b], n_minus[i, b] = rng.poisson(mean)
            uniforms[i, b] = rng.random(2)
    mu = noise.nuisance_mean
    if mu > 0:
        nuisance = np.maximum(stats.poisson.ppf(uniforms, mu), 0).astype(np.int64)
        n_plus += nuisance[..., 0]
        n_minus += nuisance[..., 1]
    return CountRecord(ells, n_plus, n_minus, prob)


class PauliEstimate(NamedTuple):
    ells: np.ndarray
    sigma1: np.ndarray
    sigma2: np.ndarray
    err1: np.ndarray
    err2: np.ndarray


def estimate_pauli(record, noise):
    """Nuisance-subtracted Pauli estimates with Poisson error propagation.

    sigma = (n+ - n-) / (n+ + n- - 2B), B the expected nuisance per detector;
    the variance uses var(n) = n for each port.
    """
    bias = noise.nuisance_mean
    n_p = record.n_plus.astype(float)
    n_m = record.n_minus.astype(float)
    denom = n_p + n_m - 2 * bias
    bad = np.argwhere(denom <= 0)
    if bad.size:
        ell = int(record.ells[bad[0, 0]])
        raise InsufficientSignalError(f"no signal left after nuisance subtraction at mode {ell}", ell=ell)
    sigma = (n_p - n_m) / denom
    var = 4 * ((n_m - bias) ** 2 * n_p + (n_p - bias) ** 2 * n_m) / denom**4
    err = np.sqrt(var)
    return PauliEstimate(record.ells, sigma[:, 0], sigma[:, 1], err[:, 0], err[:, 1])


def scan_from_estimate(est, alpha):
    s = np.sin(alpha)
    return WeakValueScan(est.ells, est.sigma1, est.sigma2, alpha, est.err1 / s, est.err2 / s)


def noisy_scan(pointer_states, alpha, noise, run=0, stream=0):
    """One simulated experimental run: counts -> Pauli estimates -> weak values."""
    record = simulate_counts(pointer_states, noise, run, stream)
    return scan_from_estimate(estimate_pauli(record, noise), alpha)


def average_runs(scans):
    """Average weak-value scans; uncertainties become standard errors of the mean.

    A single scan is returned unchanged (its propagated errors are kept).
    """
    scans = list(scans)
    if not scans:
        raise DomainError("need at least one scan to average")
    ref = scans[0]
    for sc in scans[1:]:
        if not np.array_equal(sc.ells, ref.ells):
            raise DomainError("scans cover different mode ranges")
        if sc.alpha != ref.alpha:
            raise DomainError("scans use different coupling angles")
    if len(scans) == 1:
        return ref
    s1 = np.array([sc.sigma1 for sc in scans])
    s2 = np.array([sc.sigma2 for sc in scans])
    w = np.array([sc.values for sc in scans])
    n = len(scans)
    # spread about the first run: shift-invariant, and exactly zero for identical runs
    sem = lambda x: np.std(x - x[0], axis=0, ddof=1) / np.sqrt(n)
    return WeakValueScan(ref.ells, s1.mean(axis=0), s2.mean(axis=0), ref.alpha, sem(w.real), sem(w.imag))
