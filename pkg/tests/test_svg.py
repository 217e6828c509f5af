import math

import pytest

from msk_pinn import svg


class TestLineChart:
    def test_writes_well_formed_document(self, tmp_path):
        path = tmp_path / "chart.svg"
        svg.line_chart(path, [("a", [0, 1, 2], [1.0, 4.0, 2.0])],
                       "title", "x", "y")
        text = path.read_text()
        assert text.startswith("<svg ")
        assert text.rstrip().endswith("</svg>")
        assert "<polyline" in text and "title" in text

    def test_embedded_data_round_trip(self, tmp_path):
        path = tmp_path / "chart.svg"
        xs, ys = [0.0, 0.5, 1.0], [0.123456789, -2.5, 7.0]
        svg.line_chart(path, [("s", xs, ys)], "t", "x", "y")
        rows = svg.read_chart_data(path)
        assert rows == [("s", x, y) for x, y in zip(xs, ys)]

    def test_byte_identical_rewrite(self, tmp_path):
        series = [("a", [0, 1], [2.0, 3.0]), ("b", [0, 1], [1.0, 0.5])]
        svg.line_chart(tmp_path / "one.svg", series, "t", "x", "y")
        svg.line_chart(tmp_path / "two.svg", series, "t", "x", "y")
        assert (tmp_path / "one.svg").read_bytes() == (tmp_path / "two.svg").read_bytes()

    def test_constant_series_plots(self, tmp_path):
        svg.line_chart(tmp_path / "c.svg", [("flat", [0, 1, 2], [5.0, 5.0, 5.0])],
                       "t", "x", "y")
        assert svg.read_chart_data(tmp_path / "c.svg")[0][2] == 5.0

    def test_length_mismatch(self, tmp_path):
        with pytest.raises(svg.SvgError, match="has 2 x but 3 y"):
            svg.line_chart(tmp_path / "x.svg", [("s", [0, 1], [1, 2, 3])],
                           "t", "x", "y")

    def test_non_finite_rejected(self, tmp_path):
        with pytest.raises(svg.SvgError, match="non-finite"):
            svg.line_chart(tmp_path / "x.svg", [("s", [0, 1], [1.0, math.nan])],
                           "t", "x", "y")

    def test_empty_rejected(self, tmp_path):
        with pytest.raises(svg.SvgError, match="no data"):
            svg.line_chart(tmp_path / "x.svg", [("s", [], [])], "t", "x", "y")
