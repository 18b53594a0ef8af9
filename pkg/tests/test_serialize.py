import numpy as np

from backflow_lab import InfoSeries, TimeGrid, Trajectory
from backflow_lab.serialize import (
    complex_matrix_to_json,
    fmt,
    info_series_csv,
    json_to_complex_matrix,
    trajectory_csv,
    write_json_atomic,
    write_text_atomic,
)


class TestFormatting:
    def test_repr_faithful_floats(self):
        x = 0.1 + 0.2
        assert float(fmt(x)) == x

    def test_none_is_empty(self):
        assert fmt(None) == ""

    def test_booleans(self):
        assert fmt(True) == "true" and fmt(False) == "false"


class TestComplexMatrixJson:
    def test_round_trip(self):
        rng = np.random.default_rng(9)
        m = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        back = json_to_complex_matrix(complex_matrix_to_json(m))
        assert np.array_equal(back, m)

    def test_pair_layout(self):
        data = complex_matrix_to_json(np.array([[1 + 2j]]))
        assert data == [[[1.0, 2.0]]]


class TestCsv:
    def test_quantum_trajectory_header_and_rows(self):
        grid = TimeGrid.uniform(0.5, 1.0)
        states = np.array([np.eye(2) / 2] * 3, dtype=complex)
        text = trajectory_csv(Trajectory(grid, states, "quantum"))
        lines = text.strip().split("\n")
        assert lines[0].startswith("t,rho_00_re,rho_00_im")
        assert len(lines) == 4

    def test_classical_trajectory(self):
        grid = TimeGrid.uniform(0.5, 1.0)
        states = np.array([[0.25, 0.75]] * 3)
        text = trajectory_csv(Trajectory(grid, states, "classical"))
        assert text.startswith("t,p_0,p_1\n")

    def test_info_series_skip_flag(self):
        grid = TimeGrid.uniform(0.5, 1.0)
        series = InfoSeries(grid, np.array([1.0, 2.0, 3.0]), "kl", ((0.4, 0.6),))
        lines = info_series_csv(series).strip().split("\n")
        assert lines[0] == "t,value,skipped"
        assert lines[2].endswith("true")
        assert lines[1].endswith("false")


class TestAtomicWrites:
    def test_no_partial_files(self, tmp_path):
        target = tmp_path / "out.json"
        write_json_atomic(str(target), {"a": 1.0})
        assert target.exists()
        leftovers = [p for p in tmp_path.iterdir() if p.suffix == ".tmp"]
        assert leftovers == []

    def test_overwrite_is_clean(self, tmp_path):
        target = tmp_path / "out.txt"
        write_text_atomic(str(target), "one\n")
        write_text_atomic(str(target), "two\n")
        assert target.read_text() == "two\n"
