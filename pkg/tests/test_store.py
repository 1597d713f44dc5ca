import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from loggas.errors import UnsortedInput
from loggas.pointconf import PointConfiguration, Window
from loggas.store import (
    STORE_ENV,
    config_from_obj,
    config_to_json,
    open_store,
    read_configs,
    resolve_store_path,
    write_configs,
    write_store,
)


class TestConfigRecords:
    @given(st.lists(st.floats(-10, 10), max_size=20).map(sorted))
    def test_round_trip(self, pts):
        c = PointConfiguration(pts, Window(-10, 10))
        back = config_from_obj(json.loads(config_to_json(c)))
        assert np.array_equal(back.points, c.points)
        assert back.carrier == c.carrier

    def test_unsorted_rejected(self):
        with pytest.raises(UnsortedInput):
            config_from_obj({"carrier": [-1, 1], "points": [0.5, 0.1]})

    @pytest.mark.parametrize("obj", [{"points": [0.0]}, {"carrier": [0, 1], "points": [[0.1]]}, {"carrier": 3, "points": []}])
    def test_malformed(self, obj):
        with pytest.raises(ValueError):
            config_from_obj(obj)

    def test_file_reports_line(self, tmp_path):
        path = tmp_path / "c.jsonl"
        path.write_text('{"carrier": [-1, 1], "points": [0.1]}\n\n{"carrier": [-1, 1], "points": [0.3, 0.2]}\n')
        with pytest.raises(UnsortedInput, match=":3:"):
            read_configs(path)

    def test_provenance_header_skipped(self, tmp_path):
        path = tmp_path / "c.jsonl"
        path.write_text('{"provenance": {"seed": 1}}\n{"carrier": [-1, 1], "points": [0.1]}\n')
        (c,) = read_configs(path)
        assert c.points.tolist() == [0.1]

    def test_write_read(self, tmp_path):
        cs = [PointConfiguration([-0.25, 0.5], Window.centered(1)), PointConfiguration([], Window.centered(2))]
        write_configs(tmp_path / "c.jsonl", cs)
        back = read_configs(tmp_path / "c.jsonl")
        assert [b.points.tolist() for b in back] == [c.points.tolist() for c in cs]


class TestStore:
    def test_samples_round_trip(self, tmp_path):
        x = np.sort(np.random.default_rng(0).normal(scale=0.5, size=(3, 400)), axis=1)
        write_store(tmp_path / "s", {"kind": "beta"}, samples=x)
        st_ = open_store(tmp_path / "s")
        assert np.array_equal(st_.samples(), x)
        assert st_.manifest["files"] == ["samples.npy"]
        assert "code_version" in st_.manifest

    def test_poisson_windows_restricted(self, tmp_path):
        cs = [PointConfiguration([-3.5, -0.5, 0.5, 2.0], Window.centered(4))]
        write_store(tmp_path / "p", {"kind": "poisson"}, configs=cs)
        (w,) = open_store(tmp_path / "p").windows(1)
        assert w.carrier == Window.centered(1)
        assert w.points.tolist() == [-0.5, 0.5]

    def test_env_fallback(self, tmp_path, monkeypatch):
        monkeypatch.setenv(STORE_ENV, str(tmp_path))
        assert resolve_store_path(None) == tmp_path
        assert resolve_store_path("elsewhere").name == "elsewhere"

    def test_missing(self, monkeypatch):
        monkeypatch.delenv(STORE_ENV, raising=False)
        with pytest.raises(FileNotFoundError):
            resolve_store_path(None)
