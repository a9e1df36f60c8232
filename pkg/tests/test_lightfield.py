import json

import numpy as np
import pytest

from lapepi._io import read_png, write_png
from lapepi.errors import ColorspaceError, ManifestError, ShapeError
from lapepi.lightfield import (
    Axis,
    Colorspace,
    Epi,
    LightField4D,
    angular_decimate,
    decimated_size,
    extract_epi,
    insert_epi,
    load_lightfield,
    luma,
    rgb_to_ycbcr,
    save_lightfield,
    upsampled_size,
    ycbcr_to_rgb,
)


def _lf(n_t=2, n_s=3, n_v=4, n_u=5, c=3, seed=0):
    rng = np.random.default_rng(seed)
    cs = Colorspace.RGB if c == 3 else Colorspace.LUMA
    return LightField4D(rng.random((n_t, n_s, n_v, n_u, c)), cs)


class TestLightField4D:
    def test_grid_properties(self):
        lf = _lf()
        assert lf.grid == (2, 3)
        assert (lf.n_v, lf.n_u, lf.channels) == (4, 5, 3)

    def test_four_dimensional_input_gets_channel_axis(self):
        lf = LightField4D(np.zeros((2, 2, 3, 3)), Colorspace.LUMA)
        assert lf.samples.shape == (2, 2, 3, 3, 1)

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            LightField4D(np.full((1, 1, 2, 2, 1), 1.5), Colorspace.LUMA)

    def test_rejects_wrong_channel_count(self):
        with pytest.raises(ShapeError):
            LightField4D(np.zeros((1, 1, 2, 2, 3)), Colorspace.LUMA)

    def test_rejects_nan(self):
        a = np.zeros((1, 1, 2, 2, 1))
        a[0, 0, 0, 0, 0] = np.nan
        with pytest.raises(ValueError):
            LightField4D(a, Colorspace.LUMA)


class TestColour:
    def test_ycbcr_round_trip(self):
        lf = _lf(seed=3)
        back = ycbcr_to_rgb(rgb_to_ycbcr(lf))
        # clamping only bites for colours outside the YCbCr unit cube
        inside = np.all((rgb_to_ycbcr(lf).samples > 0) & (rgb_to_ycbcr(lf).samples < 1), axis=-1)
        np.testing.assert_allclose(back.samples[inside], lf.samples[inside], atol=1e-12)

    def test_grey_has_neutral_chroma(self):
        g = np.full((1, 1, 2, 2, 3), 0.4)
        ycc = rgb_to_ycbcr(LightField4D(g, Colorspace.RGB)).samples
        np.testing.assert_allclose(ycc[..., 0], 0.4, atol=1e-15)
        np.testing.assert_allclose(ycc[..., 1:], 0.5, atol=1e-15)

    def test_luma_weights(self):
        px = np.zeros((1, 1, 1, 3, 3))
        px[0, 0, 0, 0] = [1, 0, 0]
        px[0, 0, 0, 1] = [0, 1, 0]
        px[0, 0, 0, 2] = [0, 0, 1]
        y = luma(LightField4D(px, Colorspace.RGB)).samples[0, 0, 0, :, 0]
        np.testing.assert_allclose(y, [0.299, 0.587, 0.114])

    def test_wrong_colorspace_raises(self):
        with pytest.raises(ColorspaceError):
            ycbcr_to_rgb(_lf())


class TestEpiSlicing:
    def test_us_epi_indexing(self):
        lf = _lf()
        epi = extract_epi(lf, Axis.US, fixed_spatial=2, fixed_angular=1, channel=1)
        assert epi.shape == (3, 5)
        np.testing.assert_array_equal(epi.data, lf.samples[1, :, 2, :, 1])

    def test_vt_epi_indexing(self):
        lf = _lf()
        epi = extract_epi(lf, Axis.VT, fixed_spatial=4, fixed_angular=0)
        assert epi.shape == (2, 4)
        np.testing.assert_array_equal(epi.data, lf.samples[:, 0, :, 4, 0])

    def test_insert_then_extract(self):
        lf = _lf()
        new = Epi(np.full((3, 5), 0.25))
        out = insert_epi(lf, new, Axis.US, 1, 0)
        np.testing.assert_array_equal(extract_epi(out, Axis.US, 1, 0).data, new.data)
        # the original is untouched unless inplace is requested
        assert not np.array_equal(extract_epi(lf, Axis.US, 1, 0).data, new.data)

    def test_insert_shape_mismatch(self):
        with pytest.raises(ShapeError):
            insert_epi(_lf(), Epi(np.zeros((2, 5))), Axis.US, 0, 0)

    def test_index_out_of_range(self):
        with pytest.raises(IndexError):
            extract_epi(_lf(), Axis.US, 9, 0)


class TestAngularSizes:
    def test_decimate_keeps_every_rate_th_row(self):
        data = np.arange(31 * 4, dtype=float).reshape(31, 4) / 200
        out = angular_decimate(Epi(data), 3)
        assert out.n_a == 11
        np.testing.assert_array_equal(out.data, data[::3])

    def test_indivisible_rate(self):
        with pytest.raises(ShapeError):
            angular_decimate(Epi(np.zeros((8, 4))), 3)

    @pytest.mark.parametrize("n, rate", [(3, 3), (11, 3), (25, 8), (2, 2)])
    def test_size_laws_invert(self, n, rate):
        assert decimated_size(upsampled_size(n, rate), rate) == n


class TestDiskFormat:
    def test_save_load_round_trip_luma(self, tmp_path):
        lf = _lf(c=1)
        save_lightfield(lf, tmp_path / "lf")
        back = load_lightfield(tmp_path / "lf")
        assert back.colorspace is Colorspace.LUMA
        np.testing.assert_allclose(back.samples, lf.samples, atol=0.5 / 255 + 1e-12)

    def test_missing_view(self, tmp_path):
        save_lightfield(_lf(c=1), tmp_path)
        (tmp_path / "view_01_02.png").unlink()
        with pytest.raises(ManifestError, match=r"missing view \(1,2\)"):
            load_lightfield(tmp_path)

    def test_inconsistent_sizes(self, tmp_path):
        save_lightfield(_lf(c=1), tmp_path)
        write_png(tmp_path / "view_00_01.png", np.zeros((3, 3)))
        with pytest.raises(ShapeError, match="inconsistent spatial size"):
            load_lightfield(tmp_path)

    def test_malformed_manifest(self, tmp_path):
        (tmp_path / "manifest.json").write_text(json.dumps({"rows": 1}))
        with pytest.raises(ManifestError):
            load_lightfield(tmp_path)

    def test_sixteen_bit_png(self, tmp_path):
        a = np.linspace(0, 1, 20).reshape(4, 5)
        write_png(tmp_path / "a.png", a, bits=16)
        np.testing.assert_allclose(read_png(tmp_path / "a.png", "L"), a, atol=0.5 / 65535 + 1e-12)
