"""
Tests for the TNSR1 tensor format, weight manifests and PNM images.
"""
import struct

import numpy as np
import pytest

from hireslab.models.image import ImageBuffer
from hireslab.utils.errors import DimensionError, PreconditionError, TensorFormatError
from hireslab.utils.image_io import decode_pnm, encode_pnm, read_image, write_image
from hireslab.utils.tensor_io import (
    decode_tensor,
    encode_tensor,
    load_weight_manifest,
    read_tensor,
    save_weight_manifest,
    write_tensor,
)


class TestTensorFormat:

    def test_header_layout(self):
        payload = encode_tensor(np.zeros((2, 3), dtype=np.float32))
        assert payload[:4] == b"TNSR"
        assert payload[4:8] == bytes([1, 0, 2, 0])
        assert struct.unpack_from("<2I", payload, 8) == (2, 3)
        assert len(payload) == 8 + 8 + 6 * 4

    def test_file_preserves_dtype_and_values(self, tmp_path, rng):
        array = rng.normal(size=(3, 1, 2))
        read = read_tensor(write_tensor(tmp_path / "t.tnsr", array))
        assert read.dtype == np.float64
        np.testing.assert_array_equal(read, array)

    def test_scalar_tensor(self):
        assert decode_tensor(encode_tensor(np.array(2.5))).shape == ()

    def test_rejects_integer_arrays(self):
        with pytest.raises(TensorFormatError):
            encode_tensor(np.arange(3))

    @pytest.mark.parametrize("index,value", [(0, ord("X")), (4, 2), (5, 7), (7, 1)])
    def test_rejects_corrupt_header(self, index, value):
        payload = bytearray(encode_tensor(np.ones(2)))
        payload[index] = value
        with pytest.raises(TensorFormatError):
            decode_tensor(bytes(payload))

    def test_rejects_truncated_payload(self):
        with pytest.raises(TensorFormatError):
            decode_tensor(encode_tensor(np.ones(4))[:-1])


class TestWeightManifest:

    def test_save_and_load(self, tmp_path):
        tensors = {"a.weight": np.ones((2, 2)), "b": np.zeros(3, dtype=np.float32)}
        save_weight_manifest(tmp_path, tensors, metadata={"note": "x"})
        arrays, metadata = load_weight_manifest(tmp_path)
        assert metadata == {"note": "x"}
        assert set(arrays) == {"a.weight", "b"}
        assert arrays["b"].dtype == np.float32

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(TensorFormatError):
            load_weight_manifest(tmp_path)


class TestPnm:

    def test_rgb_header(self):
        payload = encode_pnm(ImageBuffer.blank(2, 3, value=1.0))
        assert payload.startswith(b"P6\n3 2\n255\n")
        assert len(payload) == len(b"P6\n3 2\n255\n") + 18

    def test_gray_file(self, tmp_path):
        img = ImageBuffer(np.array([[0.0, 1.0], [0.5, 0.25]]))
        read = read_image(write_image(tmp_path / "g.pgm", img))
        assert read.channels == 1
        np.testing.assert_array_equal(read.data[:, :, 0], np.round(img.data[:, :, 0] * 255) / 255)

    def test_header_comments_skipped(self):
        img = decode_pnm(b"P5\n# made by hand\n2 1\n255\n\x00\xff")
        np.testing.assert_array_equal(img.data[0, :, 0], [0.0, 1.0])

    def test_unsupported_magic(self):
        with pytest.raises(TensorFormatError):
            decode_pnm(b"P3\n1 1\n255\n0 0 0")

    def test_unsupported_maxval(self):
        with pytest.raises(TensorFormatError):
            decode_pnm(b"P5\n1 1\n65535\n\x00\x00")


class TestImageBuffer:

    def test_values_must_be_in_range(self):
        with pytest.raises(PreconditionError):
            ImageBuffer(np.full((2, 2), 1.5))

    def test_channels_checked(self):
        with pytest.raises(DimensionError):
            ImageBuffer(np.zeros((2, 2, 2)))

    def test_gray_to_rgb(self):
        rgb = ImageBuffer(np.full((2, 2), 0.5)).to_channels(3)
        assert rgb.channels == 3
        assert np.all(rgb.data == 0.5)
