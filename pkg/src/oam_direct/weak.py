"""
Weak OAM projection with a polarization pointer, followed by angular
post-selection and Pauli readout.

Conventions: pointer basis (H, V), initial pointer |V> = (0, 1), and

    U = exp(i sin(alpha) pi_l (x) sigma_2 / 2)

which rotates the polarization of mode l only.  The readout inverts

    w = (<sigma_1> - i <sigma_2>) / sin(alpha).

Evolution is exact, so results carry the O(alpha^2) bias that the
first-order expansion drops.
"""
import csv
import io
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import DegeneratePostSelectionError, DomainError
from .states import AngularBasisSpec, OamState

SIGMA1 = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA3 = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([1, 0], dtype=complex)
V = np.array([0, 1], dtype=complex)

DEFAULT_ALPHA = np.pi / 9
POSTSELECT_FLOOR = 1e-30


@dataclass(frozen=True)
class CouplingSpec:
    alpha: float = DEFAULT_ALPHA
    target_ell: int = 0

    def __post_init__(self):
        if not 0 <= self.alpha <= np.pi / 2:
            raise DomainError(f"alpha must lie in [0, pi/2], got {self.alpha}")


@dataclass(frozen=True, eq=False)
class JointState:
    """System (x) pointer amplitudes with shape (d, 2); column 0 is H, 1 is V."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex)
        if amps.ndim != 2 or amps.shape[1] != 2 or amps.shape[0] % 2 != 1:
            raise DomainError(f"joint amplitudes must have shape (odd d, 2), got {amps.shape}")
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def product(cls, state, pointer=V):
        return cls(np.outer(state.amplitudes, pointer))

    @property
    def d(self):
        return self.amplitudes.shape[0]

    def norm(self):
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2)))

    def evolve(self, unitary):
        return JointState((unitary @ self.amplitudes.reshape(-1)).reshape(self.d, 2))

    def postselect(self, bra):
        """Contract the system register with ``bra`` (components <F|l>).

        Returns the unnormalized conditional pointer state.
        """
        return np.asarray(bra) @ self.amplitudes


def pointer_rotation(alpha):
    """exp(i sin(alpha) sigma_2 / 2), a real rotation by sin(alpha)/2."""
    half = np.sin(alpha) / 2
    return np.array([[np.cos(half), np.sin(half)], [-np.sin(half), np.cos(half)]], dtype=complex)


def coupling_unitary(spec, d):
    """Coupling operator on the (d x 2) space, index order (l, polarization)."""
    l_max = (d - 1) // 2
    if abs(spec.target_ell) > l_max:
        raise DomainError(f"target mode {spec.target_ell} outside [-{l_max}, {l_max}]")
    proj = np.zeros((d, d), dtype=complex)
    proj[spec.target_ell + l_max, spec.target_ell + l_max] = 1.0
    return np.eye(2 * d, dtype=complex) + np.kron(proj, pointer_rotation(spec.alpha) - np.eye(2))


def aberration_phases(l_max, defocus=0.0, tilt=0.0):
    """Mode-dependent phase defocus * l**2 + tilt * l picked up at the sorted plane."""
    ells = np.arange(-l_max, l_max + 1)
    return defocus * ells**2 + tilt * ells


def postselection_bra(d, theta_index=0, phases=None):
    """Components <F|l> of the angular post-selection, optionally aberrated."""
    spec = AngularBasisSpec(d, theta_index)
    l_max = (d - 1) // 2
    ells = np.arange(-l_max, l_max + 1)
    bra = np.exp(-1j * ells * spec.theta) / np.sqrt(d)
    if phases is not None:
        bra = bra * np.exp(1j * np.asarray(phases))
    return bra


class PointerResult(NamedTuple):
    pointer: np.ndarray
    probability: float


def weak_then_strong(state, spec, theta_index=0, phases=None):
    """Weakly couple mode ``spec.target_ell``, then post-select on theta_n.

    Returns the renormalized pointer state and the post-selection probability.
    Raises DegeneratePostSelectionError when <F|I> or the post-selection
    probability vanishes.
    """
    bra = postselection_bra(state.d, theta_index, phases)
    overlap = np.dot(bra, state.amplitudes)
    joint = JointState.product(state).evolve(coupling_unitary(spec, state.d))
    pointer = joint.postselect(bra)
    prob = float(np.sum(np.abs(pointer) ** 2))
    if abs(overlap) ** 2 < POSTSELECT_FLOOR or prob < POSTSELECT_FLOOR:
        raise DegeneratePostSelectionError(
            f"post-selection amplitude vanishes for mode {spec.target_ell}", ell=spec.target_ell
        )
    return PointerResult(pointer / np.sqrt(prob), prob)


def pauli_expectations(pointer):
    pointer = np.asarray(pointer, dtype=complex)
    n2 = float(np.sum(np.abs(pointer) ** 2))
    if n2 == 0:
        raise DomainError("pointer state is the zero vector")
    return tuple(float(np.real(np.vdot(pointer, s @ pointer)) / n2) for s in (SIGMA1, SIGMA2, SIGMA3))


@dataclass(frozen=True, eq=False)
class WeakValueScan:
    """Per-mode weak values with the Pauli expectations they came from.

    Arrays are aligned with ``ells``.  ``values`` is always
    ``(sigma1 - 1j*sigma2) / sin(alpha)``.
    """

    ells: np.ndarray
    sigma1: np.ndarray
    sigma2: np.ndarray
    alpha: float
    err_re: np.ndarray = None
    err_im: np.ndarray = None
    values: np.ndarray = field(init=False)

    def __post_init__(self):
        ells = np.asarray(self.ells, dtype=int)
        s1 = np.asarray(self.sigma1, dtype=float)
        s2 = np.asarray(self.sigma2, dtype=float)
        if not (ells.shape == s1.shape == s2.shape):
            raise DomainError("ells, sigma1 and sigma2 must have equal shapes")
        if np.sin(self.alpha) <= 0:
            raise DomainError("sin(alpha) must be positive")
        zeros = np.zeros(ells.shape)
        err_re = zeros if self.err_re is None else np.asarray(self.err_re, dtype=float)
        err_im = zeros if self.err_im is None else np.asarray(self.err_im, dtype=float)
        for name, val in [("ells", ells), ("sigma1", s1), ("sigma2", s2), ("err_re", err_re), ("err_im", err_im)]:
            object.__setattr__(self, name, val)
        object.__setattr__(self, "values", (s1 - 1j * s2) / np.sin(self.alpha))

    @property
    def l_max(self):
        return int(self.ells.max())

    def value(self, ell):
        return complex(self.values[np.flatnonzero(self.ells == ell)[0]])

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["ell", "re_w", "im_w", "sigma1", "sigma2", "err_re", "err_im"])
        for row in zip(self.ells, self.values, self.sigma1, self.sigma2, self.err_re, self.err_im):
            ell, w, s1, s2, er, ei = row
            writer.writerow([int(ell)] + [repr(float(x)) for x in (w.real, w.imag, s1, s2, er, ei)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text, alpha):
        rows = list(csv.DictReader(io.StringIO(text)))
        cols = {"ell", "re_w", "im_w", "sigma1", "sigma2", "err_re", "err_im"}
        if not rows or set(rows[0]) != cols:
            raise DomainError(f"scan CSV needs columns {sorted(cols)}")
        get = lambda k: [float(r[k]) for r in rows]
        return cls([int(r["ell"]) for r in rows], get("sigma1"), get("sigma2"), alpha, get("err_re"), get("err_im"))


def pointer_states(state, alpha=DEFAULT_ALPHA, theta_index=0, phases=None):
    """Run the weak-then-strong sequence for every mode; dict l -> PointerResult."""
    out = {}
    for ell in state.ells:
        try:
            out[int(ell)] = weak_then_strong(state, CouplingSpec(alpha, int(ell)), theta_index, phases)
        except DegeneratePostSelectionError as exc:
            raise DegeneratePostSelectionError(f"mode {ell}: {exc}", ell=int(ell)) from exc
    return out


def direct_measure(state, alpha=DEFAULT_ALPHA, theta_index=0, phases=None):
    """Noiseless direct measurement of ``state`` over all of its modes."""
    if np.sin(alpha) <= 0:
        raise DomainError("sin(alpha) must be positive")
    results = pointer_states(state, alpha, theta_index, phases)
    paulis = np.array([pauli_expectations(results[int(ell)].pointer) for ell in state.ells])
    return WeakValueScan(state.ells, paulis[:, 0], paulis[:, 1], alpha)


def ideal_weak_values(state, theta_index=0, phases=None):
    """<F|pi_l|I> / <F|I> for every l, the quantity the scan estimates."""
    bra = postselection_bra(state.d, theta_index, phases)
    overlap = np.dot(bra, state.amplitudes)
    if abs(overlap) ** 2 < POSTSELECT_FLOOR:
        raise DegeneratePostSelectionError("post-selection amplitude vanishes")
    return bra * state.amplitudes / overlap
