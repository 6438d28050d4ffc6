import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import i0e

from csipriv.channel_sim import ArrayGeometry, Scene, synthesize_csi
from csipriv.features import TapWindow
from csipriv.obfuscation import apply, draw_sequence
from csipriv.triangulation import (AoAEstimate, aoa_likelihood, aoa_log_likelihood,
                                   azimuth_covariance, estimate_aoas, kappa_heuristic, locate,
                                   log_i0, root_music, signed_azimuth)
from oracles import grid_music, steering

WAVELENGTH = 299_792_458.0 / 1.272e9


def two_array_scene(n_arrays=2):
    arrays = [ArrayGeometry((4.0, -2.0), (0.0, 1.0), 2, 4, WAVELENGTH / 2),
              ArrayGeometry((-2.0, 4.0), (1.0, 0.0), 2, 4, WAVELENGTH / 2)][:n_arrays]
    return Scene(arrays=arrays, scatterers=np.zeros((0, 2)), trajectory=np.zeros((1, 2)),
                 timestamps=np.zeros(1), carrier_wavelength=WAVELENGTH, bandwidth_hz=50e6,
                 noise_std=0.0, n_sub=64, area=(0.0, 8.0, 0.0, 8.0), timing_offset_taps=30.0,
                 bounce_attenuation=0.5)


def test_azimuth_covariance(rng):
    h = rng.standard_normal((2, 2, 4, 64)) + 1j * rng.standard_normal((2, 2, 4, 64))
    r = azimuth_covariance(h, 1)
    assert r.shape == (4, 4)
    assert np.abs(r - r.conj().T).max() < 1e-12
    assert abs(np.trace(r).real - np.sum(np.abs(h[1]) ** 2)) < 1e-9
    one = h[:, :1, :, :1]
    r1 = azimuth_covariance(one, 0)
    assert np.allclose(r1, np.outer(one[0, 0, :, 0], one[0, 0, :, 0].conj()))
    with pytest.raises(IndexError):
        azimuth_covariance(h, 2)


def test_root_music_broadside_and_thirty():
    a = steering(4, 0.5, 0.0)
    assert abs(root_music(np.outer(a, a.conj()) + 1e-6 * np.eye(4), 0.5)) < 1e-6
    theta = math.radians(30)
    a = steering(4, 0.5, theta)
    r = np.outer(a, a.conj()) + 1e-6 * np.eye(4)
    est = root_music(r, 0.5)
    assert abs(math.degrees(est) - 30) < 0.1
    assert abs(est - grid_music(r, 0.5)) < 1e-6


def test_root_music_errors():
    with pytest.raises(ValueError, match="no dominant source"):
        root_music(np.eye(4), 0.5)
    with pytest.raises(ValueError):
        root_music(np.ones((1, 1)), 0.5)
    with pytest.raises(ValueError):
        root_music(np.eye(4), 0.0)


def test_kappa_heuristic_endpoints():
    w = TapWindow(27, 40)
    td = np.zeros((1, 1, 2, 64), dtype=complex)
    td[..., 30] = 1.0
    csi = np.fft.ifft(td, axis=-1) * 64
    assert kappa_heuristic(csi, 0, w) == pytest.approx(50.0)
    assert kappa_heuristic(np.zeros((1, 1, 2, 64)), 0, w) == 0.0
    td[..., 5] = 1.0
    csi = np.fft.ifft(td, axis=-1) * 64
    assert kappa_heuristic(csi, 0, w) == pytest.approx(12.5)


def test_log_i0_accuracy():
    for k in [1e-3, 0.5, 1.0, 10.0, 49.9, 120.0, 300.0, 500.0]:
        ref = math.log(i0e(k)) + k
        assert abs(log_i0(k)[0] - ref) <= 1e-10 * abs(ref) + 1e-14


def test_likelihood_uniform_when_kappa_zero():
    scene = two_array_scene()
    est = [(AoAEstimate(0.3, 0.0), scene.arrays[0]), (AoAEstimate(-1.0, 0.0), scene.arrays[1])]
    pts = np.array([[1.0, 2.0], [7.0, 3.0], [4.0, 4.0]])
    assert np.allclose(aoa_likelihood(pts, est), (1 / (2 * math.pi)) ** 2)
    with pytest.raises(ValueError):
        aoa_likelihood(pts, [])


def test_likelihood_peaks_along_bearing():
    arr = two_array_scene().arrays[0]
    alpha = 0.4
    est = [(AoAEstimate(alpha, 10.0), arr)]
    direction = np.array([-math.sin(alpha), math.cos(alpha)])
    on_ray = np.asarray(arr.position) + 3.0 * direction
    assert signed_azimuth(on_ray, arr) == pytest.approx(alpha)
    values = [aoa_likelihood(np.asarray(arr.position) + 3.0 * np.array(
        [-math.sin(alpha + d), math.cos(alpha + d)]), est) for d in (-1e-4, 0.0, 1e-4)]
    assert values[1] >= max(values[0], values[2])
    assert abs(values[2] - values[0]) < 1e-6 * values[1]


def test_two_array_argmax_at_intersection():
    scene = two_array_scene()
    target = np.array([5.3, 2.9])
    est = [(AoAEstimate(float(signed_azimuth(target, a)), 10.0), a) for a in scene.arrays]
    gx, gy = np.meshgrid(np.linspace(0, 8, 801), np.linspace(0, 8, 801), indexing="ij")
    ll = aoa_log_likelihood(np.stack([gx, gy], -1), est)
    k = np.unravel_index(np.argmax(ll), ll.shape)
    assert np.hypot(gx[k] - target[0], gy[k] - target[1]) < 0.1


def test_locate_los_and_obfuscated(rng):
    scene = two_array_scene()
    w = TapWindow(27, 40)
    errs, errs_obf = [], []
    for i in range(10):
        ue = rng.uniform(0.5, 7.5, 2)
        h = synthesize_csi(scene, ue)
        fix = locate(h, scene, w)
        assert fix.informative
        errs.append(np.linalg.norm(fix.position - ue))
        ho = apply(draw_sequence(16, 64, i), h)
        for (e, arr), (eo, _) in zip(estimate_aoas(h, scene, w), estimate_aoas(ho, scene, w)):
            assert abs(math.degrees(e.azimuth - eo.azimuth)) < 2.0
            assert abs(math.degrees(e.azimuth - signed_azimuth(ue, arr))) < 0.5
        errs_obf.append(np.linalg.norm(locate(ho, scene, w).position - ue))
    assert max(errs) < 0.1 and max(errs_obf) < 0.1


def test_locate_errors_and_uninformative():
    with pytest.raises(ValueError):
        locate(np.ones((1, 2, 4, 64)), two_array_scene(1))
    fix = locate(np.zeros((2, 2, 4, 64), dtype=complex), two_array_scene())
    assert not fix.informative
    assert np.allclose(fix.position, [4.0, 4.0])


def test_locate_is_deterministic(rng):
    scene = two_array_scene()
    h = synthesize_csi(scene, (2.0, 6.0))
    assert np.array_equal(locate(h, scene).position, locate(h, scene).position)


@settings(max_examples=30, deadline=None)
@given(st.floats(-1.3, 1.3), st.floats(0.01, 100.0))
def test_property_root_music_scale_invariant(theta, scale):
    a = steering(4, 0.5, theta)
    r = np.outer(a, a.conj()) + 1e-6 * np.eye(4)
    # the source root is a double root, located only to about sqrt(machine eps)
    assert abs(root_music(scale * r, 0.5) - root_music(r, 0.5)) < 1e-7


@settings(max_examples=30, deadline=None)
@given(st.floats(-math.pi, math.pi), st.floats(0.5, 7.5), st.floats(0.5, 7.5))
def test_property_likelihood_rotation_invariant(phi, x, y):
    c, s = math.cos(phi), math.sin(phi)
    rot = np.array([[c, -s], [s, c]])
    scene = two_array_scene()
    est = [(AoAEstimate(0.2, 8.0), scene.arrays[0]), (AoAEstimate(-0.5, 3.0), scene.arrays[1])]
    rotated = [(e, ArrayGeometry(tuple(rot @ a.position), tuple(rot @ a.normal), a.rows, a.cols,
                                 a.element_spacing)) for e, a in est]
    p = np.array([x, y])
    a, b = aoa_likelihood(p, est), aoa_likelihood(rot @ p, rotated)
    assert a > 0 and abs(a - b) <= 1e-9 * a
