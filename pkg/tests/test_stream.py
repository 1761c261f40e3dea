import io
import json

import numpy as np
import pytest

from streamwaic.engine import waic_finalize, waic_init, waic_update
from streamwaic.exceptions import IntegrityError, NumericalError, StreamFormatError
from streamwaic.partition import consecutive_blocks, save_partition
from streamwaic.predictive import MARGINAL, PredictiveConfig
from streamwaic.stream import StreamWriter, ingest_stream, iter_stream, resume_stream


def write(tmp_path, text, name="h.txt"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_two_zero_lines(tmp_path):
    result = ingest_stream(write(tmp_path, "0\n0\n"), {"M": 1})
    assert result.waic == 0.0 and result.S == 2


def test_header_alone_sets_shape(tmp_path):
    result = ingest_stream(write(tmp_path, "waic-stream v1 M=2 mode=conditional\n0,1\n1,0\n"))
    assert result.M == 2 and result.S == 2


def test_short_line_reports_its_number(tmp_path):
    path = write(tmp_path, "waic-stream v1 M=3 mode=conditional\n0,0,0\n1,2\n")
    with pytest.raises(StreamFormatError, match="line 3"):
        ingest_stream(path)


def test_non_numeric_value(tmp_path):
    with pytest.raises(StreamFormatError, match="line 2"):
        ingest_stream(write(tmp_path, "0\nabc\n"), {"M": 1})


def test_header_disagreeing_with_metadata(tmp_path):
    path = write(tmp_path, "waic-stream v1 M=3 mode=conditional\n0,0,0\n0,0,0\n")
    with pytest.raises(IntegrityError):
        ingest_stream(path, {"M": 2})


def test_missing_shape_information(tmp_path):
    with pytest.raises(StreamFormatError):
        ingest_stream(write(tmp_path, "0\n0\n"))


def test_nan_value_reports_line(tmp_path):
    with pytest.raises(NumericalError, match="line 3"):
        ingest_stream(write(tmp_path, "0\n0\nnan\n"), {"M": 1})


def test_partition_file_as_metadata(tmp_path):
    part = consecutive_blocks([f"y[{t}]" for t in range(1, 7)], 2)
    save_partition(part, tmp_path / "part.json")
    path = write(tmp_path, "0,1,2\n2,1,0\n")
    assert ingest_stream(path, tmp_path / "part.json").M == 3


def test_marginal_lines_hold_four_blocks(tmp_path):
    rng = np.random.default_rng(0)
    rows = rng.normal(size=(10, 4, 3))
    buf = io.StringIO()
    sink = StreamWriter(buf, 3, MARGINAL)
    state = waic_init(3, PredictiveConfig(MARGINAL, 40))
    for row in rows:
        sink(row)
        state = waic_update(state, row)
    path = write(tmp_path, buf.getvalue())
    meta = tmp_path / "meta.json"
    meta.write_text(json.dumps({"M": 3, "mode": "marginal", "K": 40}))
    replay = ingest_stream(path, meta)
    assert replay.to_dict() == waic_finalize(state).to_dict()


def test_resume_from_state(tmp_path):
    rng = np.random.default_rng(1)
    rows = rng.normal(size=(30, 2))
    state = waic_init(2)
    for row in rows[:10]:
        state = waic_update(state, row)
    buf = io.StringIO()
    sink = StreamWriter(buf, 2, "conditional")
    for row in rows[10:]:
        sink(row)
    resumed = resume_stream(state, write(tmp_path, buf.getvalue()))
    straight = waic_init(2)
    for row in rows:
        straight = waic_update(straight, row)
    assert waic_finalize(resumed).to_dict() == waic_finalize(straight).to_dict()


def test_header_only_on_first_line():
    lines = ["0", "waic-stream v1 M=1 mode=conditional", "0"]
    with pytest.raises(StreamFormatError, match="line 2"):
        list(iter_stream(lines, M=1))


def test_values_round_trip_bit_for_bit():
    values = np.array([[0.1, -1e-300, 123456.789e10, -0.0]])
    buf = io.StringIO()
    StreamWriter(buf, 4, "conditional")(values)
    (_, h), = iter_stream(buf.getvalue().splitlines())
    assert h.tobytes() == values.tobytes()
