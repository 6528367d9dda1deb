import json
import math
from pathlib import Path

import numpy as np

from loggpctl.harness.export import csv_header, dumps_json, read_run_csv, write_json, write_run_csv
from loggpctl.harness.trial import RunLog

GOLDEN = Path(__file__).parent / "data" / "golden_run.csv"
NAN = float("nan")


def hand_log():
    log = RunLog.allocate("gp", 0, 1, 2, 2)
    rows = [
        dict(t=0.0, q=(0.1, -0.2), qdot=(0.5, 0.25), qddot=(1.0, -1.0), q_ref=(0.1, -0.2), p=(0.1, -0.2),
             p_ref=(0.1, -0.2), u=(3.0, -4.5), u_ctc=(6.0, -4.0), u_pd=(-3.0, -0.5), u_ff=(0.0, 0.0),
             y=(NAN, NAN), f=(1.5, 2.0), lat_update=NAN, lat_predict=NAN),
        dict(t=0.005, q=(0.1025, -0.19875), qdot=(0.505, 0.245), qddot=(1e-6, -40.0), q_ref=(0.1, -0.2),
             p=(0.1025, -0.19875), p_ref=(0.1, -0.2), u=(40.0, -40.0), u_ctc=(6.000001, -160.0),
             u_pd=(-3.0, -0.5), u_ff=(1.25, -0.125), y=(1.5, 2.0), f=(1.5, 2.0), lat_update=0.001,
             lat_predict=0.0002),
    ]
    for k, row in enumerate(rows):
        for name, value in row.items():
            getattr(log, name)[k] = value
    return log


def test_header_order():
    assert csv_header(1) == ["t", "q_1", "qdot_1", "qddot_1", "q_ref_1", "p_1", "p_ref_1", "u_1", "u_ctc_1",
                             "u_pd_1", "u_ff_1", "y_1", "f_1", "lat_update", "lat_predict"]
    assert len(csv_header(2)) == 1 + 12 * 2 + 2


def test_golden_csv(tmp_path):
    path = write_run_csv(hand_log(), tmp_path / "run.csv")
    assert path.read_bytes() == GOLDEN.read_bytes()


def test_csv_round_trip_is_exact(tmp_path, rng):
    log = RunLog.allocate("low", 3, 4, 25, 2)
    for name in ("t", "q", "qdot", "u", "y", "lat_update"):
        arr = getattr(log, name)
        arr[...] = rng.normal(size=arr.shape) * 10.0 ** rng.integers(-8, 8, size=arr.shape)
    a = write_run_csv(log, tmp_path / "a.csv")
    header, table = read_run_csv(a)
    assert header == csv_header(2) and table.shape == (25, 27)
    np.testing.assert_array_equal(table[:, 0], log.t)
    np.testing.assert_array_equal(table[:, 1:3], log.q)
    assert np.isnan(table[:, 5:7]).all()  # qddot left unset
    b = write_run_csv(log, tmp_path / "b.csv")
    assert a.read_bytes() == b.read_bytes()


def test_empty_log(tmp_path):
    path = write_run_csv(RunLog.allocate("low", 0, 0, 0, 2), tmp_path / "e.csv")
    assert path.read_text() == ",".join(csv_header(2)) + "\n"


def test_json_is_sorted_and_nan_free(tmp_path):
    payload = {"b": [np.float64(1.5), float("inf")], "a": {"z": np.int64(3), "y": NAN, "x": np.bool_(True)}}
    text = dumps_json(payload)
    assert json.loads(text) == {"a": {"x": True, "y": None, "z": 3}, "b": [1.5, None]}
    assert text.index('"a"') < text.index('"b"') and text.endswith("\n")
    assert write_json(payload, tmp_path / "s.json").read_text() == text
    assert not math.isnan(json.loads(text)["b"][0])
