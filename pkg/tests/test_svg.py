import math
import xml.etree.ElementTree as ET

from dagkernels.svg import line_chart, write_chart


def test_chart_is_valid_xml():
    s = line_chart({"a <1>": ([1, 10, 100], [1.0, 0.1, 0.01]), "b & c": ([1, 10], [0.5, 0.4])},
                   title="t", xlabel="m", ylabel="residual", logx=True, logy=True,
                   bands={"a <1>": ([0.5, 0.05, 0.005], [2, 0.2, 0.02])})
    root = ET.fromstring(s)
    assert root.tag.endswith("svg")
    texts = [e.text for e in root.iter() if e.tag.endswith("text")]
    assert "a <1>" in texts and "b & c" in texts


def test_chart_skips_bad_points(tmp_path):
    s = line_chart({"x": ([0, 1, 2], [math.nan, -1.0, 2.0])}, logy=True)
    ET.fromstring(s)
    p = tmp_path / "c.svg"
    write_chart(p, {"x": ([1, 2], [3, 4])})
    ET.parse(p)


def test_empty_chart():
    ET.fromstring(line_chart({}))
