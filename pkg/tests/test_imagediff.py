"""Image-difference measures: MSE and the perceptual band-contrast measure.

Oracles: hand-computed MSE arithmetic; identity inputs give exactly zero;
the perceptual measure is symmetric, bounded in [0, 1], and monotone in
perturbation amplitude.
"""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from visfid.imagediff import (VDP, ViewParams, band_peak_frequencies,
                              bm_measure, csf, mse, perceptual_diff,
                              summarize_diff)
from visfid.render import GrayImage


def checker(n=64, period=8, lo=0.2, hi=0.8):
    y, x = np.mgrid[0:n, 0:n]
    px = np.where(((x // period) + (y // period)) % 2 == 0, lo, hi)
    return GrayImage(px.astype(np.float64))


class TestMse:
    def test_hand_computed(self):
        a = GrayImage(np.array([[0.0, 0.5], [1.0, 0.25]]))
        b = GrayImage(np.array([[0.1, 0.5], [0.8, 0.25]]))
        want = (0.1**2 + 0.2**2) / 4
        assert mse(a, b) == pytest.approx(want, abs=1e-15)

    def test_identity_zero(self):
        a = checker()
        assert mse(a, a) == 0.0
        assert mse(a, a, normalized=True) == 0.0

    def test_symmetry(self):
        a, b = checker(lo=0.1), checker(lo=0.3)
        assert mse(a, b) == mse(b, a)

    def test_size_mismatch_rejected(self):
        with pytest.raises(Exception):
            mse(GrayImage(np.zeros((4, 4))), GrayImage(np.zeros((4, 5))))


class TestViewParams:
    def test_default_pixels_per_degree(self):
        # 0.345 m over 1024 px at 0.7 m: 1 deg subtends
        # 2*0.7*tan(0.5 deg) m = that many pixels
        per_deg_m = 2 * 0.7 * np.tan(np.deg2rad(0.5))
        want = per_deg_m / (0.345 / 1024)
        assert ViewParams().pixels_per_degree == pytest.approx(want, rel=0.05)

    def test_band_frequencies_halve(self):
        vp = ViewParams()
        freqs = band_peak_frequencies(vp.pixels_per_degree)
        assert len(freqs) == VDP.n_bands
        ratios = np.diff(np.log2(freqs))
        assert np.allclose(ratios, -1.0, atol=1e-12)
        assert freqs[0] == pytest.approx(vp.pixels_per_degree / 2 / 2, rel=1e-12)

    def test_csf_peak_at_four_cpd(self):
        # w(f) = (f/4) exp(1 - f/4) peaks at f = 4 with value 1
        assert csf(4.0) == pytest.approx(1.0, abs=1e-12)
        grid = np.linspace(0.1, 40, 2000)
        assert abs(grid[np.argmax(csf(grid))] - 4.0) < 0.05


class TestPerceptual:
    def test_identity_is_zero(self):
        a = checker()
        assert bm_measure(a, a) == 0.0

    def test_bounded_and_symmetric(self):
        a, b = checker(lo=0.1, hi=0.9), checker(lo=0.3, hi=0.7)
        d_ab = bm_measure(a, b)
        d_ba = bm_measure(b, a)
        assert 0.0 <= d_ab <= 1.0
        assert d_ab == pytest.approx(d_ba, rel=1e-12)
        assert d_ab > 0

    def test_monotone_in_amplitude(self):
        rng = np.random.default_rng(3)
        base = checker()
        noise = rng.standard_normal(base.pixels.shape)
        vals = []
        for amp in (0.01, 0.03, 0.1):
            perturbed = GrayImage(np.clip(base.pixels + amp * noise, 0.0, 1.0))
            vals.append(bm_measure(base, perturbed))
        assert vals[0] < vals[1] < vals[2]

    def test_diff_map_shape(self):
        a, b = checker(lo=0.1), checker(lo=0.2)
        dm = perceptual_diff(a, b)
        assert dm.values.shape == a.pixels.shape
        assert np.all(dm.values >= 0) and np.all(dm.values <= 1)
        assert summarize_diff(dm) == pytest.approx(float(dm.values.mean()))

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 10_000), amp=st.floats(0.0, 0.5))
    def test_always_in_unit_interval(self, seed, amp):
        rng = np.random.default_rng(seed)
        a = GrayImage(rng.random((32, 32)))
        b = GrayImage(np.clip(a.pixels + amp * rng.standard_normal((32, 32)), 0, 1))
        assert 0.0 <= bm_measure(a, b) <= 1.0
