import numpy as np
import pytest

from qfcsim import timetags
from qfcsim.source import EmitterParams, generate_stream


@pytest.fixture
def stream():
    p = EmitterParams(mode="pulsed", contaminant_ratio=0.5)
    return generate_stream(p, 2e-4, 42)


def _quantized(s):
    return np.rint(s.time_ns * 1e3) / 1e3


def test_binary_round_trip(tmp_path, stream):
    a = tmp_path / "a.tt"
    b = tmp_path / "b.tt"
    timetags.write_binary(stream, a)
    back = timetags.read_binary(a)
    assert back.seed == 42 and back.params_hash == stream.params_hash
    assert back.duration_s == stream.duration_s
    assert np.array_equal(back.time_ns, _quantized(stream))
    assert np.array_equal(back.wavelength_nm, stream.wavelength_nm)
    assert np.array_equal(back.origin, stream.origin)
    timetags.write_binary(back, b)
    assert a.read_bytes() == b.read_bytes()


def test_csv_round_trip(tmp_path, stream):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    timetags.write_csv(stream, a)
    back = timetags.read_csv(a)
    assert np.array_equal(back.wavelength_nm, stream.wavelength_nm)
    assert np.array_equal(back.time_ns, _quantized(stream))
    timetags.write_csv(back, b)
    assert a.read_text() == b.read_text()


def test_binary_and_csv_agree(tmp_path, stream):
    timetags.write_binary(stream, tmp_path / "a.tt")
    timetags.write_csv(stream, tmp_path / "a.csv")
    x, y = timetags.read_binary(tmp_path / "a.tt"), timetags.read_csv(tmp_path / "a.csv")
    assert np.array_equal(x.time_ns, y.time_ns) and np.array_equal(x.origin, y.origin)


def test_record_layout(tmp_path, stream):
    path = tmp_path / "a.tt"
    timetags.write_binary(stream, path)
    assert path.stat().st_size == 52 + 17 * len(stream)


def test_bad_magic(tmp_path):
    path = tmp_path / "bad.tt"
    path.write_bytes(b"\0" * 64)
    with pytest.raises(ValueError, match="magic"):
        timetags.read_binary(path)
