import struct

import numpy as np
import pytest

from funmix import io as fio
from funmix.simulate import DatasetBundle, generate_dc1
from helpers import synth_library


class TestMatrixFormat:
    def test_header_and_column_major_payload(self, tmp_path):
        path = tmp_path / "m.fumx"
        fio.write_matrix(path, np.array([[1.0, 2.0], [3.0, 4.0]]))
        raw = path.read_bytes()
        assert len(raw) == 24 + 8 * 4
        magic, version, rows, cols = struct.unpack_from("<4sIQQ", raw)
        assert magic == b"FUMX" and version == 1 and rows == 2 and cols == 2
        values = struct.unpack_from("<4d", raw, 24)
        assert values == (1.0, 3.0, 2.0, 4.0)

    def test_round_trip_bit_identical(self, tmp_path):
        rng = np.random.default_rng(0)
        M = rng.normal(size=(7, 5))
        path = tmp_path / "m.fumx"
        fio.write_matrix(path, M)
        back = fio.read_matrix(path)
        assert back.shape == M.shape
        assert M.astype("<f8").tobytes(order="F") == back.astype("<f8").tobytes(order="F")

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "m.fumx"
        fio.write_matrix(path, np.ones((2, 2)))
        raw = bytearray(path.read_bytes())
        raw[:4] = b"XXXX"
        path.write_bytes(bytes(raw))
        with pytest.raises(fio.BadMagicError):
            fio.read_matrix(path)

    def test_bad_version(self, tmp_path):
        path = tmp_path / "m.fumx"
        fio.write_matrix(path, np.ones((2, 2)))
        raw = bytearray(path.read_bytes())
        raw[4:8] = struct.pack("<I", 9)
        path.write_bytes(bytes(raw))
        with pytest.raises(fio.UnsupportedVersionError):
            fio.read_matrix(path)

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "m.fumx"
        fio.write_matrix(path, np.ones((3, 3)))
        raw = path.read_bytes()
        path.write_bytes(raw[:-8])
        with pytest.raises(fio.TruncatedFileError):
            fio.read_matrix(path)

    def test_truncated_header(self, tmp_path):
        path = tmp_path / "m.fumx"
        path.write_bytes(b"FUMX\x01")
        with pytest.raises(fio.TruncatedFileError):
            fio.read_matrix(path)

    def test_trailing_bytes(self, tmp_path):
        path = tmp_path / "m.fumx"
        fio.write_matrix(path, np.ones((2, 2)))
        path.write_bytes(path.read_bytes() + b"extra")
        with pytest.raises(fio.MatrixFormatError, match="trailing"):
            fio.read_matrix(path)

    def test_dimension_overflow(self, tmp_path):
        path = tmp_path / "m.fumx"
        path.write_bytes(struct.pack("<4sIQQ", b"FUMX", 1, 2**40, 2**40))
        with pytest.raises(fio.DimensionOverflowError):
            fio.read_matrix(path)

    def test_zero_dimension_header(self, tmp_path):
        path = tmp_path / "m.fumx"
        path.write_bytes(struct.pack("<4sIQQ", b"FUMX", 1, 0, 4))
        with pytest.raises(fio.MatrixFormatError, match="empty"):
            fio.read_matrix(path)

    def test_non_finite_payload_rejected(self, tmp_path):
        path = tmp_path / "m.fumx"
        payload = struct.pack("<4sIQQ", b"FUMX", 1, 1, 1) + struct.pack("<d", np.nan)
        path.write_bytes(payload)
        with pytest.raises(fio.MatrixFormatError, match="non-finite"):
            fio.read_matrix(path)

    def test_empty_matrix_write_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            fio.write_matrix(tmp_path / "m.fumx", np.empty((0, 3)))


class TestCsvImport:
    def test_reads_row_major_fixture(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("3,2\n1.0,2.0\n3.0,4.0\n5.0,6.0\n")
        M = fio.read_csv_matrix(path)
        np.testing.assert_array_equal(M, [[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])

    def test_values_may_wrap_lines(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("2,2\n1.0\n2.0, 3.0\n4.0\n")
        np.testing.assert_array_equal(fio.read_csv_matrix(path), [[1.0, 2.0], [3.0, 4.0]])

    def test_bad_header(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("hello\n1.0\n")
        with pytest.raises(fio.MatrixFormatError, match="header"):
            fio.read_csv_matrix(path)

    def test_wrong_value_count(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("2,2\n1.0,2.0,3.0\n")
        with pytest.raises(fio.MatrixFormatError, match="expected 4"):
            fio.read_csv_matrix(path)


class TestBundles:
    @pytest.fixture()
    def bundle(self):
        D = synth_library(20, 12, seed=3)
        return generate_dc1(10, 2, D, atom_indices=[1, 6], seed=4)

    def test_round_trip_bit_exact(self, tmp_path, bundle):
        fio.write_bundle(tmp_path / "b", bundle)
        back = fio.read_bundle(tmp_path / "b")
        for field in ("Y", "D", "A_true", "E_true"):
            a, b = getattr(bundle, field), getattr(back, field)
            assert a.tobytes(order="F") == b.tobytes(order="F")
        assert back.meta["kind"] == "dc1"
        assert back.meta["n"] == 100
        assert back.meta["atom_indices"] == [1, 6]

    def test_optional_matrices_may_be_absent(self, tmp_path, bundle):
        stripped = DatasetBundle(Y=bundle.Y, D=bundle.D, meta=dict(bundle.meta))
        fio.write_bundle(tmp_path / "b", stripped)
        back = fio.read_bundle(tmp_path / "b")
        assert back.A_true is None and back.E_true is None

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(fio.ManifestError, match="manifest"):
            fio.read_bundle(tmp_path)

    def test_missing_referenced_file(self, tmp_path, bundle):
        fio.write_bundle(tmp_path / "b", bundle)
        (tmp_path / "b" / "A_true.fumx").unlink()
        with pytest.raises(fio.ManifestError, match="missing file"):
            fio.read_bundle(tmp_path / "b")

    def test_recorded_dims_must_match_files(self, tmp_path, bundle):
        fio.write_bundle(tmp_path / "b", bundle)
        manifest = (tmp_path / "b" / "manifest.txt").read_text()
        (tmp_path / "b" / "manifest.txt").write_text(manifest.replace("n = 100", "n = 99"))
        with pytest.raises(fio.ManifestError, match="manifest records"):
            fio.read_bundle(tmp_path / "b")

    def test_malformed_manifest_line(self, tmp_path, bundle):
        fio.write_bundle(tmp_path / "b", bundle)
        path = tmp_path / "b" / "manifest.txt"
        path.write_text(path.read_text() + "not a key value line\n")
        with pytest.raises(fio.ManifestError, match="key = value"):
            fio.read_bundle(tmp_path / "b")
