import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from extremal.field import FieldError, ScalarField
from extremal.overlay import encode_png, export_overlay_svg, parse_overlay_svg, path_data

BASE = ScalarField(np.linspace(0, 1, 40 * 30).reshape(30, 40))


def test_empty_layers_give_raster_only():
    svg = export_overlay_svg(BASE)
    assert "<image" in svg and parse_overlay_svg(svg) == []
    assert export_overlay_svg(BASE, {}) == svg


def test_one_ring_gives_one_path():
    ring = np.array([[5, 5], [10, 5], [10, 10], [5, 10]])
    paths = parse_overlay_svg(export_overlay_svg(BASE, {"ring": [(ring, True)]}))
    assert [c for c, _ in paths] == ["ring"]
    assert np.array_equal(paths[0][1], ring)


def test_layer_order_is_fixed():
    p = np.array([[1, 1], [2, 2]])
    svg = export_overlay_svg(BASE, {"loop": [p], "ring": [p], "open-contour": [p, p]})
    assert [c for c, _ in parse_overlay_svg(svg)] == ["open-contour", "open-contour", "ring", "loop"]


@given(arrays(float, st.tuples(st.integers(1, 20), st.just(2)),
              elements=st.floats(0, 29, allow_nan=False, width=32)), st.booleans())
def test_round_trip_is_exact(poly, closed):
    (cls, back), = parse_overlay_svg(export_overlay_svg(BASE, {"closed-contour": [(poly, closed)]}))
    assert cls == "closed-contour"
    assert np.array_equal(back, poly)


def test_errors():
    with pytest.raises(FieldError):
        export_overlay_svg(BASE, {"blobs": []})
    with pytest.raises(FieldError):
        export_overlay_svg(BASE, {"ring": [np.array([[0, 0], [40, 3]])]})


def test_path_data_and_png():
    assert path_data([[1, 2], [3.5, 4]], closed=True) == "M 1 2 L 3.5 4 Z"
    assert path_data(np.zeros((0, 2))) == ""
    png = encode_png(np.zeros((3, 5)))
    assert png.startswith(b"\x89PNG") and png[16:24] == b"\x00\x00\x00\x05\x00\x00\x00\x03"
