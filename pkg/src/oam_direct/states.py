"""
Discrete OAM states and the conjugate angular-position basis.

A state is a vector of complex amplitudes a_l on the symmetric mode range
l = -L..L (dimension d = 2L + 1).  Angular position is modelled as the
d-point discrete Fourier conjugate basis, theta_n = 2 pi n / d, with

    <theta_n|l> = exp(-i l theta_n) / sqrt(d)

so every OAM state overlaps every angular state with magnitude 1/sqrt(d).
"""
import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

NORM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class OamState:
    """Complex amplitudes indexed by l from -l_max to +l_max.

    The array is copied and made read-only on construction.
    """

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex).ravel()
        if amps.size % 2 != 1:
            raise DomainError(f"dimension must be odd, got {amps.size}")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def l_max(self):
        return (self.amplitudes.size - 1) // 2

    @property
    def d(self):
        return self.amplitudes.size

    @property
    def ells(self):
        return np.arange(-self.l_max, self.l_max + 1)

    def __len__(self):
        return self.d

    def __getitem__(self, ell):
        if abs(ell) > self.l_max:
            raise DomainError(f"mode {ell} outside [-{self.l_max}, {self.l_max}]")
        return self.amplitudes[ell + self.l_max]

    def norm(self):
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2)))

    def normalize(self):
        n = self.norm()
        if n == 0:
            raise DomainError("cannot normalize the zero vector")
        return OamState(self.amplitudes / n)

    def gauged(self):
        """Return the state with the reference component made real positive.

        The reference is l = 0 when that amplitude is nonzero, otherwise the
        largest-magnitude component.
        """
        amps = self.amplitudes
        mags = np.abs(amps)
        ref = self.l_max if mags[self.l_max] > NORM_TOL * mags.max() else int(np.argmax(mags))
        if mags[ref] == 0:
            return self
        out = amps * np.exp(-1j * np.angle(amps[ref]))
        out[ref] = mags[ref]
        return OamState(out)

    def __repr__(self):
        return f"OamState(l_max={self.l_max}, amplitudes={np.array2string(self.amplitudes, precision=4)})"


@dataclass(frozen=True)
class AngularBasisSpec:
    """Angular basis of dimension ``d``; ``theta_index`` labels 2 pi n / d."""

    d: int
    theta_index: int = 0

    def __post_init__(self):
        if self.d < 1 or self.d % 2 != 1:
            raise DomainError(f"angular basis dimension must be odd and positive, got {self.d}")
        if not 0 <= self.theta_index < self.d:
            raise DomainError(f"theta_index {self.theta_index} outside [0, {self.d})")

    @property
    def theta(self):
        return 2 * np.pi * self.theta_index / self.d


def basis_state(ell, l_max):
    if abs(ell) > l_max:
        raise DomainError(f"mode {ell} outside [-{l_max}, {l_max}]")
    amps = np.zeros(2 * l_max + 1, dtype=complex)
    amps[ell + l_max] = 1.0
    return OamState(amps)


def sinc(x):
    """Unnormalized sinc, sin(x)/x with sinc(0) = 1."""
    return np.sinc(np.asarray(x, dtype=float) / np.pi)


def aperture_state(delta_theta, l_max):
    """State produced by an angular aperture of width ``delta_theta``.

    Amplitudes follow sinc(delta_theta * l / 2).  Modes where the argument is
    a nonzero multiple of pi are set to exactly zero.
    """
    if not 0 < delta_theta <= 2 * np.pi:
        raise DomainError(f"aperture width must lie in (0, 2pi], got {delta_theta}")
    if l_max < 1:
        raise DomainError(f"l_max must be >= 1, got {l_max}")
    ells = np.arange(-l_max, l_max + 1)
    x = delta_theta * ells / 2
    amps = sinc(x)
    cycles = x / np.pi
    nulls = (ells != 0) & np.isclose(cycles, np.round(cycles), rtol=0, atol=1e-12)
    amps[nulls] = 0.0
    return OamState(amps).normalize()


def rotate_state(state, theta0):
    """Rotate by ``theta0``: a_l -> a_l exp(i l theta0)."""
    theta0 = float(np.mod(theta0, 2 * np.pi))
    return OamState(state.amplitudes * np.exp(1j * state.ells * theta0))


def angle_basis_matrix(d):
    """Unitary matrix F[n, k] = <theta_n | l_k> for l_k = k - (d-1)/2."""
    spec = AngularBasisSpec(d)
    l_max = (spec.d - 1) // 2
    n = np.arange(d)[:, None]
    ells = np.arange(-l_max, l_max + 1)[None, :]
    return np.exp(-2j * np.pi * n * ells / d) / np.sqrt(d)


def angle_overlap(spec, n, state):
    """<theta_n|state> in the angular basis described by ``spec``."""
    if spec.d != state.d:
        raise DomainError(f"basis dimension {spec.d} does not match state dimension {state.d}")
    theta = 2 * np.pi * n / spec.d
    return complex(np.sum(np.exp(-1j * state.ells * theta) * state.amplitudes) / np.sqrt(spec.d))


def angle_transform(state):
    """All angular amplitudes <theta_n|state>, n = 0..d-1."""
    return angle_basis_matrix(state.d) @ state.amplitudes


def inverse_angle_transform(angular):
    angular = np.asarray(angular, dtype=complex)
    return OamState(angle_basis_matrix(angular.size).conj().T @ angular)


def fidelity(a, b):
    """|<a|b>|^2 for normalized states."""
    if a.d != b.d:
        raise DomainError(f"dimension mismatch: {a.d} vs {b.d}")
    return float(min(1.0, abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2))


def state_to_csv(state):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["ell", "re", "im"])
    for ell, amp in zip(state.ells, state.amplitudes):
        writer.writerow([int(ell), repr(float(amp.real)), repr(float(amp.imag))])
    return buf.getvalue()


def state_from_csv(text):
    rows = list(csv.DictReader(io.StringIO(text)))
    if not rows or set(rows[0]) != {"ell", "re", "im"}:
        raise DomainError("state CSV needs header ell,re,im")
    ells = [int(r["ell"]) for r in rows]
    l_max = (len(ells) - 1) // 2
    if ells != list(range(-l_max, l_max + 1)):
        raise DomainError("state CSV rows must cover -L..L in ascending order")
    return OamState([complex(float(r["re"]), float(r["im"])) for r in rows])


def write_state_csv(state, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(state_to_csv(state))


def read_state_csv(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return state_from_csv(fh.read())
