import xml.etree.ElementTree as ET

import numpy as np
import pytest

from dpot.errors import UnsupportedDimensionError
from dpot.plot import PAD, SCALE, partition, region_areas, render_partition_svg
from dpot.transport import NnTransport, find_center, psi_from_center

SVG = "{http://www.w3.org/2000/svg}"


def canvas(xy):
    # triangle (0,0), (1,0), (0.5, sqrt(3)/2) drawn with y pointing down
    x, y = xy
    return PAD + SCALE * x, PAD + SCALE * (np.sqrt(3) / 2 - y)


def test_zero_psi_centroid_and_equal_areas(tmp_path):
    t = NnTransport(np.zeros(3))
    areas = region_areas(t)
    np.testing.assert_allclose(areas, np.sqrt(3) / 12, rtol=1e-12)
    for _, (p, q) in partition(t).boundaries:
        assert np.allclose(p, 1 / 3) or np.allclose(q, 1 / 3)
    path = tmp_path / "y.svg"
    render_partition_svg(t, path)
    root = ET.parse(path).getroot()
    c = root.find(f"{SVG}circle")
    assert (float(c.get("cx")), float(c.get("cy"))) == pytest.approx(canvas((0.5, np.sqrt(3) / 6)), abs=1e-6)
    assert len(root.findall(f"{SVG}line")) == 3
    assert root.get("version") == "1.1"


def test_center_from_solved_offsets(tmp_path):
    B = np.array([[0.0, 0.5, 0.3], [0.2, 0.0, 0.4], [0.1, 0.6, 0.0]])
    z = find_center(B).z
    t = psi_from_center(z)
    path = tmp_path / "c.svg"
    render_partition_svg(t, path)
    c = ET.parse(path).getroot().find(f"{SVG}circle")
    # barycentric image of z under e1 -> (0,0), e2 -> (1,0), e3 -> (0.5, sqrt(3)/2)
    xy = (z[1] + 0.5 * z[2], np.sqrt(3) / 2 * z[2])
    assert (float(c.get("cx")), float(c.get("cy"))) == pytest.approx(canvas(xy), abs=1e-6)
    # each boundary runs from the center to the triangle edge
    for _, (p, q) in partition(t).boundaries:
        assert np.allclose(p, z, atol=1e-12) or np.allclose(q, z, atol=1e-12)


def test_areas_cover_triangle():
    rng = np.random.default_rng(0)
    for _ in range(20):
        t = NnTransport(rng.uniform(-0.8, 0.8, 3))
        assert region_areas(t).sum() == pytest.approx(np.sqrt(3) / 4, rel=1e-12)


def test_byte_deterministic(tmp_path):
    t = NnTransport([0.0, 0.13, -0.2])
    a, b = tmp_path / "a.svg", tmp_path / "b.svg"
    render_partition_svg(t, a, "x & y")
    render_partition_svg(t, b, "x & y")
    assert a.read_bytes() == b.read_bytes()
    ET.parse(a)


def test_wrong_dimension(tmp_path):
    with pytest.raises(UnsupportedDimensionError):
        render_partition_svg(NnTransport(np.zeros(4)), tmp_path / "x.svg")
