import json

import numpy as np
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from blowuplab.io import (
    read_csv,
    read_frame,
    sha256_file,
    to_jsonable,
    write_csv,
    write_frame,
    write_frames,
    write_report,
)
from blowuplab.profiles import ModelParams
from blowuplab.simvars import SelfSimFrame, ball_grid

finite = st.floats(allow_nan=False, allow_infinity=False)


@given(arrays(np.float64, st.tuples(st.integers(1, 20), st.just(3)), elements=finite))
def test_csv_round_trip_is_bit_exact(tmp_path_factory, rows):
    path = tmp_path_factory.mktemp("csv") / "t.csv"
    write_csv(path, ["a", "b", "c"], rows, {"k": 1})
    meta, cols, back = read_csv(path)
    assert meta == {"k": 1} and cols == ["a", "b", "c"]
    np.testing.assert_array_equal(back, rows)


def test_frame_round_trip(tmp_path, rng):
    P = ModelParams(3, 2.0)
    y = ball_grid(P, 50)
    fr = SelfSimFrame(y, rng.normal(size=50), rng.normal(size=50), 1.25, P)
    back = read_frame(write_frame(tmp_path / "f.csv", fr))
    np.testing.assert_array_equal(back.w, fr.w)
    np.testing.assert_array_equal(back.ws, fr.ws)
    np.testing.assert_array_equal(back.grid, fr.grid)
    assert back.s == fr.s and back.params == P and back.radius == 1.0


def test_write_frames_index(tmp_path, rng):
    P = ModelParams()
    y = ball_grid(P, 20)
    frames = [SelfSimFrame(y, rng.normal(size=20), 0 * y, s, P) for s in (0.0, 0.5)]
    index = json.loads(write_frames(tmp_path / "fr", frames).read_text())
    assert [f["s"] for f in index["frames"]] == [0.0, 0.5]
    assert all((tmp_path / "fr" / f["file"]).exists() for f in index["frames"])


def test_reports_and_jsonable(tmp_path):
    rep = {"x": np.float64(1.5), "flag": np.bool_(True), "bad": float("nan"), "v": np.arange(3)}
    js, md = write_report(tmp_path / "r", "title", rep)
    loaded = json.loads(js.read_text())
    assert loaded == {"bad": "nan", "flag": True, "v": [0, 1, 2], "x": 1.5}
    assert md.read_text().startswith("# title")
    assert to_jsonable((1, 2)) == [1, 2]


def test_hash_is_content_hash(tmp_path):
    a = write_csv(tmp_path / "a.csv", ["x"], [[1.0]])
    b = write_csv(tmp_path / "b.csv", ["x"], [[1.0]])
    assert sha256_file(a) == sha256_file(b)
