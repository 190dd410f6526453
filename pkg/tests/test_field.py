import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oam_direct.errors import DomainError, SamplingError
from oam_direct.optics.field import (ScalarField, fresnel_propagate, grid_coords, lens_ft, make_oam_field,
                                     max_angular_spectrum_distance, propagate, thin_lens_phase)


def gaussian(w0, n=256, pitch=20e-6):
    x, y = grid_coords(n, pitch)
    return ScalarField(np.exp(-(x**2 + y**2) / w0**2), pitch)


def second_moment_waist(field):
    x, _ = field.coords()
    inten = field.intensity()
    return 2 * np.sqrt(np.sum(inten * x**2) / inten.sum())


def test_field_validation():
    with pytest.raises(DomainError):
        ScalarField(np.zeros(4), 1e-5)
    with pytest.raises(DomainError):
        ScalarField(np.zeros((4, 4)), -1.0)


def test_oam_field_unit_power():
    assert make_oam_field(3, 1e-3, 256, 20e-6).power() == pytest.approx(1.0)


@pytest.mark.parametrize("ell", [-13, -1, 0, 2, 13])
def test_phase_winding(ell):
    field = make_oam_field(ell, 1.5e-3, 512, 10e-6)
    phi = np.linspace(0, 2 * np.pi, 721)[:-1]
    n = field.shape[0]
    rad = 1.5e-3 / 10e-6
    cols = np.round(n // 2 + rad * np.cos(phi)).astype(int)
    rows = np.round(n // 2 + rad * np.sin(phi)).astype(int)
    ph = np.angle(field.grid[rows, cols])
    winding = np.sum(np.angle(np.exp(1j * np.diff(np.r_[ph, ph[0]])))) / (2 * np.pi)
    assert round(winding) == ell


def test_highest_mode_sampled_at_defaults():
    make_oam_field(13, 1.5e-3, 1024, 10e-6)
    with pytest.raises(SamplingError):
        make_oam_field(200, 1.5e-3, 1024, 10e-6)


@settings(max_examples=10, deadline=None)
@given(st.floats(-0.05, 0.05))
def test_propagation_conserves_power(z):
    field = make_oam_field(2, 0.6e-3, 256, 20e-6)
    assert propagate(field, z).power() == pytest.approx(field.power(), rel=1e-9)


def test_zero_distance_is_identity():
    field = make_oam_field(1, 0.6e-3, 128, 20e-6)
    assert propagate(field, 0) is field


def test_propagation_limit():
    field = gaussian(1e-3)
    limit = max_angular_spectrum_distance(256, 20e-6, field.wavelength)
    with pytest.raises(SamplingError):
        propagate(field, 1.01 * limit)


def test_two_lens_transforms_flip_coordinates():
    rng = np.random.default_rng(0)
    grid = rng.normal(size=(64, 64)) + 1j * rng.normal(size=(64, 64))
    field = ScalarField(grid, 20e-6)
    twice = lens_ft(lens_ft(field, 0.1), 0.1)
    flipped = -np.roll(grid[::-1, ::-1], 1, axis=(0, 1))
    np.testing.assert_allclose(twice.grid, flipped, atol=1e-12)
    assert twice.pitch == pytest.approx(field.pitch)


def test_lens_ft_conserves_power_and_focuses():
    w0, f = 1e-3, 0.3
    field = gaussian(w0)
    out = lens_ft(field, f)
    assert out.power() == pytest.approx(field.power(), rel=1e-12)
    assert second_moment_waist(out) == pytest.approx(field.wavelength * f / (np.pi * w0), rel=0.02)


def test_fresnel_matches_angular_spectrum():
    field = gaussian(0.5e-3, n=256, pitch=20e-6)
    z = 0.15
    a = propagate(field, z)
    b = fresnel_propagate(field, z)
    assert b.power() == pytest.approx(field.power(), rel=1e-9)
    assert second_moment_waist(b) == pytest.approx(second_moment_waist(a), rel=0.02)


def test_thin_lens_then_fresnel_is_focus():
    w0, f = 1e-3, 0.3
    field = gaussian(w0)
    focused = fresnel_propagate(field.apply_phase(thin_lens_phase(field, f)), f)
    assert second_moment_waist(focused) == pytest.approx(field.wavelength * f / (np.pi * w0), rel=0.02)
