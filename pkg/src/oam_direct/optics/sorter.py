"""
Log-polar OAM sorter: unwrapper R1, free space f, phase corrector R2, then
Fourier optics that turn the linear phase exp(i l v / a) into a spot whose
position encodes l.  An optional fan-out grating in the first Fourier plane
makes three abutting copies of the unwrapped strip, and a piecewise phase
corrector removes the order-dependent phase between copies.

Coordinates after R1 + f are (u, v) = (-a ln(r/b), a atan2(y, x)); on the
grid u runs along columns (axis 1) and v along rows (axis 0).  Everything
after R2 acts along v only, so the sorted plane is computed as a 1-D
transform along v and detection windows integrate over u.
"""
from dataclasses import dataclass

import numpy as np

from ..errors import DomainError
from .fanout import order_amplitudes, phase_profile
from .field import WAVELENGTH, fresnel_propagate, grid_coords, make_oam_field

PMMA_INDEX = 1.49
# Stationary-phase error of the unwrapping grows as l^2 wavelength f / (a r),
# so the defaults use a long strip and a beam filling much of the grid.
DEFAULT_STRIP_FRACTION = 0.9
DEFAULT_WAIST = 2.4e-3


@dataclass(frozen=True)
class SorterGeometry:
    """a: azimuth-to-length scale; b: radius mapped to u = 0; f: integrated focal length (all metres)."""

    a: float
    b: float
    f: float = 0.3
    n_index: float = PMMA_INDEX

    def __post_init__(self):
        if min(self.a, self.b, self.f) <= 0:
            raise DomainError("a, b and f must be positive")
        if not 1 < self.n_index < 2:
            raise DomainError("refractive index must lie in (1, 2)")

    @classmethod
    def default(cls, n=1024, pitch=10e-6, wavelength=WAVELENGTH, waist=DEFAULT_WAIST, f=0.3,
                strip_fraction=DEFAULT_STRIP_FRACTION):
        """Strip length 2 pi a set to ``strip_fraction`` of the R2 window; b at the beam's peak radius.

        The R2 window after a single-transform Fresnel step over f is
        wavelength * f / pitch wide, which is also the largest strip the
        input grid can encode without aliasing R1.
        """
        a = strip_fraction * wavelength * f / (2 * np.pi * pitch)
        return cls(a=float(a), b=float(waist / np.sqrt(2)), f=f)


def thickness_r1(geom, x, y):
    """Optical thickness Z1 of the unwrapping element.

    The azimuth uses the four-quadrant arctangent so the full turn maps onto
    a strip of length 2 pi a.  Returns NaN at r = 0.
    """
    r = np.hypot(x, y)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_r = np.where(r > 0, np.log(r / geom.b), np.nan)
    theta = np.arctan2(y, x)
    bracket = y * theta - x * log_r + x - (x**2 + y**2) / (2 * geom.a)
    return geom.a / (geom.f * (geom.n_index - 1)) * bracket


def thickness_r2(geom, u, v):
    """Optical thickness Z2 of the phase-correcting element.

    The quadratic term is a converging lens of focal length f, the sign that
    cancels the curvature left by the Fresnel transform from R1.
    """
    ab = geom.a * geom.b
    return -ab / (geom.f * (geom.n_index - 1)) * (
        np.exp(-u / geom.a) * np.cos(v / geom.a) + (u**2 + v**2) / (2 * ab)
    )


def element_phase_r1(geom, field):
    """Phase mask (radians) of R1 on ``field``'s grid; NaN-free, zero at r = 0."""
    x, y = field.coords()
    phase = 2 * np.pi / field.wavelength * (geom.n_index - 1) * thickness_r1(geom, x, y)
    return np.nan_to_num(phase, nan=0.0)


def element_phase_r2(geom, field):
    u, v = field.coords()
    return 2 * np.pi / field.wavelength * (geom.n_index - 1) * thickness_r2(geom, u, v)


def unwrap_mode(field, geom, spacing=None):
    """Apply R1, propagate ``spacing`` (default f) and apply R2."""
    spacing = geom.f if spacing is None else spacing
    x, y = field.coords()
    grid = field.grid * np.exp(1j * element_phase_r1(geom, field))
    grid = np.where((x == 0) & (y == 0), 0, grid)
    at_r2 = fresnel_propagate(field.with_grid(grid), spacing)
    return at_r2.apply_phase(element_phase_r2(geom, at_r2))


@dataclass(frozen=True, eq=False)
class SortedProfile:
    """Power per bin along the sorted coordinate q (mode spacing is q = 1 nominally)."""

    q: np.ndarray
    power: np.ndarray

    @property
    def dq(self):
        return float(self.q[1] - self.q[0])

    def window_power(self, lo, hi):
        """Power between q = lo and q = hi with fractional edge bins."""
        edges_lo = self.q - self.dq / 2
        overlap = np.clip(np.minimum(edges_lo + self.dq, hi) - np.maximum(edges_lo, lo), 0, None)
        return float(np.sum(self.power * overlap / self.dq))

    def centroid(self, near, half_width=0.5):
        sel = np.abs(self.q - near) <= half_width
        return float(np.sum(self.q[sel] * self.power[sel]) / np.sum(self.power[sel]))

    def peak(self):
        return float(self.q[int(np.argmax(self.power))])


def _ft_rows(a):
    return np.fft.fftshift(np.fft.fft(np.fft.ifftshift(a, axes=0), axis=0, norm="ortho"), axes=0)


class SorterChain:
    """Sorter from the input plane to the sorted plane.

    ``pad`` enlarges the v axis after R2 so that the copies fit; the sorted
    plane has about ``pad / strip_fraction`` samples per mode spacing.
    """

    def __init__(self, geom=None, n=1024, pitch=10e-6, wavelength=WAVELENGTH, waist=DEFAULT_WAIST,
                 fanout=None, pad=8, spacing=None):
        self.geom = SorterGeometry.default(n, pitch, wavelength, waist) if geom is None else geom
        self.n, self.pitch, self.wavelength, self.waist = n, pitch, wavelength, waist
        self.fanout = fanout
        self.pad = pad
        self.spacing = spacing

    def input_field(self, ell):
        return make_oam_field(ell, self.waist, self.n, self.pitch, self.wavelength)

    def strip(self, ell):
        """Field right after R2 for mode ``ell``."""
        return unwrap_mode(self.input_field(ell), self.geom, self.spacing)

    def _padded_rows(self, strip):
        col_power = np.sum(np.abs(strip.grid) ** 2, axis=0)
        cols = col_power > 1e-14 * col_power.sum()
        block = strip.grid[:, cols]
        m = self.n * self.pad
        out = np.zeros((m, block.shape[1]), dtype=complex)
        start = m // 2 - self.n // 2
        out[start:start + self.n] = block
        return out * strip.pitch

    def _q_axis(self, strip, m):
        kappa = (np.arange(m) - m // 2) / (m * strip.pitch)
        return 2 * np.pi * self.geom.a * kappa

    def copies_plane(self, strip):
        """Rows after grating, second transform and phase corrector (before L2).

        Returns (v coordinates, field block).  Without a fan-out this is the
        parity-flipped strip, for like-for-like comparison.
        """
        rows = self._padded_rows(strip)
        m = rows.shape[0]
        fourier = _ft_rows(rows)
        if self.fanout is not None and self.fanout.copies > 1:
            q = self._q_axis(strip, m)
            fourier = fourier * np.exp(1j * phase_profile(q, self.fanout.phase_coeffs))[:, None]
        copies = _ft_rows(fourier)
        v = (np.arange(m) - m // 2) * strip.pitch
        if self.fanout is not None and self.fanout.copies > 1:
            half = self.fanout.copies // 2
            amps = order_amplitudes(self.fanout.phase_coeffs, self.fanout.copies)
            strip_len = 2 * np.pi * self.geom.a
            corrector = np.zeros(m)
            for order, amp in zip(range(-half, half + 1), amps):
                region = np.abs(v - order * strip_len) < strip_len / 2
                corrector[region] = -np.angle(amp)
            copies = copies * np.exp(1j * corrector)[:, None]
        return v, copies

    def sorted_profile(self, ell=None, strip=None):
        if strip is None:
            strip = self.strip(ell)
        _, copies = self.copies_plane(strip)
        sorted_rows = _ft_rows(copies)
        # Two transforms after the strip flip parity; report q so mode l lands at +l.
        q = -self._q_axis(strip, copies.shape[0])[::-1]
        return SortedProfile(q, np.sum(np.abs(sorted_rows) ** 2, axis=1)[::-1])

    def profiles(self, ells):
        return {int(ell): self.sorted_profile(ell) for ell in ells}


@dataclass(frozen=True, eq=False)
class Crosstalk:
    ells: np.ndarray
    matrix: np.ndarray
    neighbor_overlap: np.ndarray
    centers: np.ndarray
    pitch: float

    @property
    def mean_neighbor_overlap(self):
        return float(np.mean(self.neighbor_overlap))

    def to_csv(self):
        head = ["ell"] + [str(int(e)) for e in self.ells]
        lines = [",".join(head)]
        for ell, row in zip(self.ells, self.matrix):
            lines.append(",".join([str(int(ell))] + [repr(float(x)) for x in row]))
        return "\n".join(lines) + "\n"


def crosstalk_from_profiles(profiles, window_fraction=1.0, input_power=1.0):
    """Fraction of each mode's power inside every detection window.

    Windows are calibrated from the l = 0 and l = 1 spot centroids: equal
    width ``window_fraction`` times the spot pitch, centred on
    c0 + l * pitch.  The neighbour overlap of mode l sums its power in the
    windows of l - 1 and l + 1, including windows beyond the listed range.
    """
    if not 0 < window_fraction <= 1:
        raise DomainError("detection windows must not overlap (0 < window_fraction <= 1)")
    if 0 not in profiles or 1 not in profiles:
        raise DomainError("calibration needs the l = 0 and l = 1 profiles")
    c0 = profiles[0].centroid(profiles[0].peak())
    c1 = profiles[1].centroid(profiles[1].peak())
    pitch = c1 - c0
    if abs(pitch) < 2 * profiles[0].dq:
        raise DomainError("calibration spots are not resolved")
    width = window_fraction * abs(pitch)
    ells = np.array(sorted(profiles))
    window = lambda prof, k: prof.window_power(c0 + k * pitch - width / 2, c0 + k * pitch + width / 2)
    matrix = np.array([[window(profiles[int(l)], int(k)) for k in ells] for l in ells]) / input_power
    neighbors = np.array([window(profiles[int(l)], int(l) - 1) + window(profiles[int(l)], int(l) + 1)
                          for l in ells]) / input_power
    centers = np.array([profiles[int(l)].centroid(c0 + l * pitch) for l in ells])
    return Crosstalk(ells, matrix, neighbors, centers, float(pitch))


def crosstalk_matrix(chain, ells=range(-13, 14), window_fraction=1.0):
    ells = sorted(set(int(e) for e in ells) | {0, 1})
    return crosstalk_from_profiles(chain.profiles(ells), window_fraction)


def wavefront_residual(strip, ell, geom, threshold=0.01):
    """Intensity-weighted RMS (radians) of the strip phase after removing l v / a, piston and tilt."""
    u, v = strip.coords()
    inten = strip.intensity()
    sel = inten > threshold * inten.max()
    phase = np.angle(strip.grid * np.exp(-1j * ell * v / geom.a))
    wts = inten[sel]
    ref = np.angle(np.sum(wts * np.exp(1j * phase[sel])))
    resid = np.angle(np.exp(1j * (phase[sel] - ref)))
    uu = np.broadcast_to(u, inten.shape)[sel]
    vv = np.broadcast_to(v, inten.shape)[sel]
    design = np.stack([np.ones_like(uu), uu, vv], axis=1) * np.sqrt(wts)[:, None]
    beta, *_ = np.linalg.lstsq(design, resid * np.sqrt(wts), rcond=None)
    resid = resid - design @ beta / np.sqrt(wts)
    return float(np.sqrt(np.sum(wts * resid**2) / np.sum(wts)))


def strip_extent(chain, ell, threshold=0.2):
    """Support length along v and phase slope of the strip (or its copies) before L2.

    Measured on the brightest column.  The strip is flat-topped along v, so
    a threshold well above the weak higher fan-out orders picks out the
    copies alone.  The total phase excursion across the support is
    slope * length.
    """
    v, block = chain.copies_plane(chain.strip(ell))
    col = block[:, int(np.argmax(np.sum(np.abs(block) ** 2, axis=0)))]
    inten = np.abs(col) ** 2
    sel = np.flatnonzero(inten > threshold * inten.max())
    length = float(v[sel[-1]] - v[sel[0]] + (v[1] - v[0]))
    phase = np.unwrap(np.angle(col[sel[0]:sel[-1] + 1]))
    wts = inten[sel[0]:sel[-1] + 1]
    slope = np.polyfit(v[sel[0]:sel[-1] + 1], phase, 1, w=np.sqrt(wts))[0]
    return length, float(slope)


def element_masks(chain):
    """Thickness maps (metres, float32) of R1 and R2 on their sampling grids, with metadata."""
    geom = chain.geom
    x, y = grid_coords(chain.n, chain.pitch)
    z1 = np.nan_to_num(thickness_r1(geom, x, y), nan=0.0)
    pitch2 = chain.wavelength * geom.f / (chain.n * chain.pitch)
    u, v = grid_coords(chain.n, pitch2)
    z2 = thickness_r2(geom, u, v)
    meta = lambda pitch, what: {"pitch_m": pitch, "wavelength_m": chain.wavelength, "description": what}
    return {
        "r1": (z1.astype(np.float32), meta(chain.pitch, "unwrapper R1 optical thickness, includes lens f")),
        "r2": (z2.astype(np.float32), meta(pitch2, "phase corrector R2 optical thickness, includes lens f")),
    }
