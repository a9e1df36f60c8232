import math

import numpy as np
import pytest

from lapepi.errors import ShapeError
from lapepi.lightfield import Colorspace, LightField4D
from lapepi.metrics import (
    EvalReport,
    ViewScore,
    evaluate,
    input_lattice,
    is_identical,
    psnr,
    ssim,
    ssim_map,
    synthesized_mask,
)


def reflect_index(i, n):
    period = 2 * n
    i = i % period
    return i if i < n else period - 1 - i


def psnr_direct(a, b, peak=1.0):
    total = 0.0
    for i in range(a.shape[0]):
        for j in range(a.shape[1]):
            total += (a[i, j] - b[i, j]) ** 2
    return 10.0 * math.log10(peak ** 2 / (total / a.size))


def ssim_direct(a, b, peak=1.0):
    """Per-pixel SSIM by explicit weighted sums over reflected 11x11 windows."""
    x = np.arange(11) - 5
    g = np.exp(-x ** 2 / (2 * 1.5 ** 2))
    w = np.outer(g, g) / np.outer(g, g).sum()
    c1, c2 = (0.01 * peak) ** 2, (0.03 * peak) ** 2
    h, wd = a.shape
    out = np.zeros((h, wd))
    for i in range(h):
        for j in range(wd):
            rows = [reflect_index(i + k, h) for k in range(-5, 6)]
            cols = [reflect_index(j + k, wd) for k in range(-5, 6)]
            pa, pb = a[np.ix_(rows, cols)], b[np.ix_(rows, cols)]
            ma, mb = np.sum(w * pa), np.sum(w * pb)
            va = np.sum(w * (pa - ma) ** 2)
            vb = np.sum(w * (pb - mb) ** 2)
            cov = np.sum(w * (pa - ma) * (pb - mb))
            out[i, j] = (2 * ma * mb + c1) * (2 * cov + c2) / ((ma ** 2 + mb ** 2 + c1) * (va + vb + c2))
    return out


def image_pair(shape=(14, 17), seed=0):
    rng = np.random.default_rng(seed)
    a = rng.random(shape)
    b = np.clip(a + rng.normal(scale=0.05, size=shape), 0, 1)
    return a, b


class TestPsnr:
    def test_matches_direct_sum(self):
        a, b = image_pair()
        assert psnr(a, b) == pytest.approx(psnr_direct(a, b), abs=1e-10)
        assert psnr(255 * a, 255 * b, peak=255.0) == pytest.approx(psnr_direct(a, b), abs=1e-10)

    def test_closed_form(self):
        a = np.full((8, 8), 0.3)
        assert psnr(a, a + 0.1) == pytest.approx(20.0, abs=1e-10)

    def test_symmetric(self):
        a, b = image_pair(seed=1)
        assert psnr(a, b) == psnr(b, a)

    def test_identical_is_infinite(self):
        a, _ = image_pair()
        value = psnr(a, a)
        assert math.isinf(value) and is_identical(value)
        assert not is_identical(30.0)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            psnr(np.zeros((3, 3)), np.zeros((3, 4)))


class TestSsim:
    @pytest.mark.parametrize("shape, seed", [((14, 17), 0), ((11, 11), 2), ((20, 12), 3)])
    def test_matches_direct_windows(self, shape, seed):
        a, b = image_pair(shape, seed)
        np.testing.assert_allclose(ssim_map(a, b), ssim_direct(a, b), atol=1e-10, rtol=0)
        assert ssim(a, b) == pytest.approx(ssim_direct(a, b).mean(), abs=1e-10)

    def test_self_similarity(self):
        a, _ = image_pair()
        assert ssim(a, a) == pytest.approx(1.0, abs=1e-12)

    def test_symmetric(self):
        a, b = image_pair(seed=4)
        assert ssim(a, b) == pytest.approx(ssim(b, a), abs=1e-14)

    def test_degrades_with_noise(self):
        a, b = image_pair(seed=5)
        c = np.clip(a + np.random.default_rng(6).normal(scale=0.2, size=a.shape), 0, 1)
        assert ssim(a, c) < ssim(a, b) < 1.0

    def test_too_small(self):
        with pytest.raises(ShapeError):
            ssim(np.zeros((10, 20)), np.zeros((10, 20)))


class TestMasks:
    def test_4d_lattice(self):
        assert input_lattice(7, 7, 3) == {(t, s) for t in (0, 3, 6) for s in (0, 3, 6)}
        assert len(synthesized_mask(7, 7, 3)) == 40

    def test_3d_lattice(self):
        assert synthesized_mask(1, 7, 3) == [(0, 1), (0, 2), (0, 4), (0, 5)]


class TestEvaluate:
    def _lfs(self, n_v=12, seed=0):
        rng = np.random.default_rng(seed)
        truth = rng.random((1, 3, n_v, 12, 1))
        recon = truth.copy()
        recon[0, 1] = np.clip(recon[0, 1] + 0.01, 0, 1)
        return LightField4D(recon, Colorspace.LUMA), LightField4D(truth, Colorspace.LUMA)

    def test_per_view_scores(self):
        recon, truth = self._lfs()
        report = evaluate(recon, truth)
        assert [(v.t, v.s) for v in report.views] == [(0, 0), (0, 1), (0, 2)]
        assert is_identical(report.views[0].psnr_db)
        assert report.views[1].psnr_db == pytest.approx(psnr_direct(recon.samples[0, 1, ..., 0],
                                                                    truth.samples[0, 1, ..., 0]), abs=1e-10)
        assert report.views[2].ssim == pytest.approx(1.0)

    def test_mask_and_small_views(self):
        recon, truth = self._lfs(n_v=1)
        report = evaluate(recon, truth, mask=[(0, 1)])
        assert len(report.views) == 1 and math.isnan(report.views[0].ssim)

    def test_csv(self, tmp_path):
        report = EvalReport([ViewScore(0, 1, 31.25, 0.9), ViewScore(0, 2, math.inf, 1.0)])
        text = report.to_csv(tmp_path / "e.csv")
        assert text == "view_t,view_s,psnr,ssim\n0,1,31.25,0.9\n0,2,identical,1\n"
        assert (tmp_path / "e.csv").read_text() == text
        assert "mean_psnr=identical" in report.summary()

    def test_rgb_is_scored_on_luma(self):
        rng = np.random.default_rng(7)
        rgb = rng.random((1, 2, 12, 12, 3))
        other = rgb.copy()
        other[..., 0], other[..., 1] = rgb[..., 1], rgb[..., 0]  # swap R and G
        a, b = LightField4D(rgb), LightField4D(other)
        y_a = rgb @ np.array([0.299, 0.587, 0.114])
        y_b = other @ np.array([0.299, 0.587, 0.114])
        report = evaluate(a, b)
        assert report.views[0].psnr_db == pytest.approx(psnr_direct(y_a[0, 0], y_b[0, 0]), abs=1e-10)

    def test_shape_mismatch(self):
        recon, truth = self._lfs()
        with pytest.raises(ShapeError):
            evaluate(recon, LightField4D(truth.samples[:, :2], Colorspace.LUMA))
