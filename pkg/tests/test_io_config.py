import io
import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from precaug.config import config_from_echo, load_config, parse_grid
from precaug.errors import ConfigError, NonFinite, ParseError
from precaug.harness import CurvePoint, ErrorCurve
from precaug.io import load_matrix, read_curve_csv, save_matrix, write_curve_csv


def test_csv_identity(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("1,0\n0,1\n")
    np.testing.assert_array_equal(load_matrix(p), np.eye(2))


def test_csv_header(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("a,b,c,d\n1,2,3,4\n5,6,7,8\n9,10,11,12\n")
    x = load_matrix(p)
    assert x.shape == (4, 3)
    np.testing.assert_array_equal(x[:, 1], [5, 6, 7, 8])


def test_csv_errors_carry_location(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("1,2\n3,oops\n")
    with pytest.raises(ParseError) as err:
        load_matrix(p)
    assert (err.value.row, err.value.column) == (2, 2)
    p.write_text("1,2\n3\n")
    with pytest.raises(ParseError, match="row 2"):
        load_matrix(p)
    p.write_text("1,2\nnan,4\n")
    with pytest.raises(NonFinite):
        load_matrix(p)


def test_bin_layout(tmp_path):
    p = tmp_path / "x.bin"
    x = np.arange(6.0).reshape(2, 3)
    save_matrix(p, x)
    raw = p.read_bytes()
    assert raw[:4] == b"PMX1"
    assert struct.unpack("<II", raw[4:12]) == (2, 3)
    # sample-major: first sample is column 0
    assert struct.unpack("<2d", raw[12:28]) == (0.0, 3.0)


def test_bin_rejects_bad_files(tmp_path):
    p = tmp_path / "x.bin"
    p.write_bytes(b"NOPE" + struct.pack("<II", 1, 1) + b"\0" * 8)
    with pytest.raises(ParseError, match="magic"):
        load_matrix(p)
    p.write_bytes(b"PMX1" + struct.pack("<II", 2, 2) + b"\0" * 8)
    with pytest.raises(ParseError):
        load_matrix(p)
    p.write_bytes(b"PMX1" + struct.pack("<II", 1, 1) + struct.pack("<d", float("inf")))
    with pytest.raises(NonFinite):
        load_matrix(p)


finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 6)), elements=finite))
def test_round_trips_are_bit_exact(tmp_path_factory, x):
    d = tmp_path_factory.mktemp("rt")
    for name in ("m.bin", "m.csv"):
        save_matrix(d / name, x)
        back = load_matrix(d / name)
        assert back.tobytes() == np.ascontiguousarray(x).tobytes()


def test_curve_csv_format():
    curve = ErrorCurve("lambda", [CurvePoint(0.1, 1 / 3, None, 0.5, "x"), CurvePoint(0.2, error="Boom: no")])
    buf = io.StringIO()
    write_curve_csv(curve, buf, ["seed=1"])
    lines = buf.getvalue().splitlines()
    assert lines[0] == "# seed=1"
    assert lines[1] == "hyperparam,estimate,oracle,proxy,flags"
    assert lines[2] == "0.10000000000000001,0.33333333333333331,,0.5,x"
    assert lines[3].startswith("0.20000000000000001,,,,error:")
    rows = read_curve_csv(buf.getvalue())
    assert float(rows[0]["estimate"]) == 1 / 3


def test_grids():
    assert parse_grid("0.1, 0.2,0.5") == (0.1, 0.2, 0.5)
    g = parse_grid("logspace(-3, 0, 4)")
    assert g == pytest.approx((1e-3, 1e-2, 1e-1, 1.0))
    assert parse_grid("linspace(0,0.9,10)")[-1] == pytest.approx(0.9)
    for bad in ("", "a,b", "logspace(1,2,0)", "logspace(x,2,3)"):
        with pytest.raises(ConfigError):
            parse_grid(bad)


def test_config_file_and_overrides(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("# comment\nlambda = 0.5\nseed=3  # trailing\n\nsigma.kind=ar1\n")
    cfg = load_config(p, ["seed=4", "eta=auto"])
    assert cfg.get("lambda") == 0.5 and cfg.get("seed") == 4 and cfg.get("eta") == "auto"
    assert cfg.prefixed("sigma") == {"kind": "ar1"}


@pytest.mark.parametrize("item", ["lamda=1", "seed=x", "mode=weird", "noequals", "sigma.kind=circle"])
def test_config_errors(item):
    with pytest.raises(ConfigError):
        load_config(None, [item])


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.cfg")


def test_echo_round_trip():
    cfg = load_config(None, ["lambda_grid=logspace(-3,0,5)", "scheme.cov=0.25", "refine=yes"])
    cfg.resolve("eta", 0.012345678901234567, "auto")
    again = config_from_echo("\n".join("# " + line for line in cfg.echo()) + "\nhyperparam,estimate\n1,2\n")
    assert again.values == cfg.values
