"""
Sampled scalar fields and the propagation steps used by the sorter.

Grids are square-pixelled and centred: pixel (j, i) sits at
x = (i - N//2) * pitch, y = (j - N//2) * pitch.  All transforms use the
same centring so that two Fourier transforms map x -> -x exactly on the grid.
"""
from dataclasses import dataclass, replace

import numpy as np

from ..errors import DomainError, SamplingError

WAVELENGTH = 633e-9


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: np.ndarray
    pitch: float
    wavelength: float = WAVELENGTH

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=complex)
        if g.ndim != 2:
            raise DomainError("field grid must be 2-D")
        if self.pitch <= 0 or self.wavelength <= 0:
            raise DomainError("pitch and wavelength must be positive")
        object.__setattr__(self, "grid", g)

    @property
    def shape(self):
        return self.grid.shape

    @property
    def k(self):
        return 2 * np.pi / self.wavelength

    def coords(self):
        """(x, y) coordinate arrays broadcastable to the grid."""
        ny, nx = self.shape
        x = (np.arange(nx) - nx // 2) * self.pitch
        y = (np.arange(ny) - ny // 2) * self.pitch
        return x[None, :], y[:, None]

    def power(self):
        return float(np.sum(np.abs(self.grid) ** 2) * self.pitch**2)

    def intensity(self):
        return np.abs(self.grid) ** 2

    def with_grid(self, grid, pitch=None):
        return replace(self, grid=grid, pitch=self.pitch if pitch is None else pitch)

    def apply_phase(self, phase):
        return self.with_grid(self.grid * np.exp(1j * phase))


def grid_coords(n, pitch):
    x = (np.arange(n) - n // 2) * pitch
    return x[None, :], x[:, None]


def make_oam_field(ell, waist, n=1024, pitch=10e-6, wavelength=WAVELENGTH):
    """Doughnut beam r exp(-r^2/w^2) exp(i l phi) with unit power.

    The envelope is the same for every l, so sorter behaviour depends on the
    azimuthal phase alone.  Raises SamplingError when the phase winding has
    fewer than 8 pixels per 2 pi cycle on the circle r = waist.
    """
    if waist <= 0:
        raise DomainError("waist must be positive")
    if ell != 0 and 2 * np.pi * waist / pitch / abs(ell) < 8:
        raise SamplingError(
            f"l={ell} winds faster than 8 pixels per cycle at r={waist} m with pitch {pitch} m"
        )
    x, y = grid_coords(n, pitch)
    r = np.hypot(x, y)
    phi = np.arctan2(y, x)
    grid = (r / waist) * np.exp(-((r / waist) ** 2)) * np.exp(1j * ell * phi)
    field = ScalarField(grid, pitch, wavelength)
    return field.with_grid(grid / np.sqrt(field.power()))


def _ft2(a):
    return np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(a), norm="ortho"))


def max_angular_spectrum_distance(n, pitch, wavelength):
    """Largest distance for which the transfer function is Nyquist sampled."""
    ratio = wavelength / (2 * pitch)
    if ratio >= 1:
        return 0.0
    return n * pitch**2 / wavelength * np.sqrt(1 - ratio**2)


def propagate(field, distance):
    """Angular-spectrum propagation over ``distance`` (metres).

    Evanescent components are dropped.  Raises SamplingError beyond the
    distance at which the transfer-function phase stops being resolved.
    """
    if distance == 0:
        return field
    n = max(field.shape)
    limit = max_angular_spectrum_distance(n, field.pitch, field.wavelength)
    if abs(distance) > limit:
        raise SamplingError(
            f"distance {distance} m exceeds angular-spectrum limit {limit:.4g} m for this grid"
        )
    ny, nx = field.shape
    fx = np.fft.fftfreq(nx, field.pitch)[None, :]
    fy = np.fft.fftfreq(ny, field.pitch)[:, None]
    arg = 1.0 / field.wavelength**2 - fx**2 - fy**2
    kz = 2 * np.pi * np.sqrt(np.clip(arg, 0, None))
    transfer = np.where(arg > 0, np.exp(1j * kz * distance), 0)
    return field.with_grid(np.fft.ifft2(np.fft.fft2(field.grid) * transfer))


def lens_ft(field, f):
    """Optical Fourier transform of an f-f lens system.

    The output pitch is wavelength * f / (N * pitch); power is conserved and
    the 1/i prefactor of the Fraunhofer integral is kept.
    """
    ny, nx = field.shape
    if nx != ny:
        raise DomainError("lens_ft expects a square grid")
    out_pitch = field.wavelength * f / (nx * field.pitch)
    return field.with_grid(-1j * (field.pitch / out_pitch) * _ft2(field.grid), pitch=out_pitch)


def fresnel_propagate(field, distance):
    """Single-transform Fresnel propagation over a long distance.

    Output pitch is wavelength * distance / (N * pitch).  Exact for the
    paraxial kernel; the input chirp must be sampled, which holds when the
    field is confined to |x| <= wavelength * distance / (2 * pitch).
    """
    ny, nx = field.shape
    if nx != ny:
        raise DomainError("fresnel_propagate expects a square grid")
    k = field.k
    x, y = field.coords()
    chirp_in = np.exp(1j * k * (x**2 + y**2) / (2 * distance))
    out_pitch = field.wavelength * distance / (nx * field.pitch)
    u, v = grid_coords(nx, out_pitch)
    chirp_out = np.exp(1j * k * (u**2 + v**2) / (2 * distance))
    scale = field.pitch / out_pitch
    grid = -1j * scale * np.exp(1j * k * distance) * chirp_out * _ft2(field.grid * chirp_in)
    return field.with_grid(grid, pitch=out_pitch)


def thin_lens_phase(field, f):
    x, y = field.coords()
    return -field.k * (x**2 + y**2) / (2 * f)
