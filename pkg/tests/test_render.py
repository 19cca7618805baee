import xml.etree.ElementTree as ET

import pytest

from weep.render import render_histogram, render_mask, render_weep_plot
from weep.tile_store import SlideBag, TileRecord

SVG = "{http://www.w3.org/2000/svg}"


def grid_bag(cells):
    return SlideBag("S", tuple(TileRecord(f"{x}:{y}", x, y, 0.5) for x, y in cells))


def test_mask_2x2_golden():
    bag = grid_bag([(0, 0), (1, 0), (0, 1), (1, 1)])
    assert render_mask(bag, {"0:0", "1:1"}) == b"P2\n2 2\n255\n255 128\n128 255\n"


def test_mask_empty_selection():
    bag = grid_bag([(0, 0), (1, 0), (0, 1), (1, 1)])
    assert render_mask(bag, set()) == b"P2\n2 2\n255\n128 128\n128 128\n"


def test_mask_hole_stays_background():
    bag = grid_bag([(0, 0), (2, 0)])
    assert render_mask(bag, {"0:0"}) == b"P2\n3 1\n255\n255 0 128\n"


def test_mask_unknown_tile():
    with pytest.raises(ValueError):
        render_mask(grid_bag([(0, 0)]), {"9:9"})


def test_mask_size_and_counts(rng):
    cells = {(int(x), int(y)) for x, y in rng.integers(0, 12, size=(60, 2))}
    bag = grid_bag(sorted(cells))
    sel = {t.tile_id for t in bag.tiles[::3]}
    out = render_mask(bag, sel)
    tokens = out.split()
    w, h = int(tokens[1]), int(tokens[2])
    pixels = [int(v) for v in tokens[4:]]
    assert len(pixels) == w * h
    assert pixels.count(255) == len(sel)
    assert pixels.count(128) == len(cells) - len(sel)
    assert set(pixels) <= {0, 128, 255}
    assert render_mask(bag, sel) == out


def test_weep_plot_structure():
    svg = render_weep_plot([("S1", [0.825, 0.7, 0.5, 0.2])], 0.5)
    root = ET.fromstring(svg)
    lines = root.findall(f".//{SVG}polyline")
    assert len(lines) == 1
    assert len(lines[0].get("points").split()) == 4
    rules = [e for e in root.iter(f"{SVG}line") if e.get("class") == "threshold"]
    assert len(rules) == 1 and rules[0].get("y1") == rules[0].get("y2")


def test_weep_plot_counts_and_highlight():
    traj = [("A", [0.9, 0.4]), ("B", [0.8, 0.6, 0.3]), ("C", [0.7, 0.45])]
    svg = render_weep_plot(traj, 0.5, highlight=["B"], n_tiles={"A": 10})
    root = ET.fromstring(svg)
    lines = root.findall(f".//{SVG}polyline")
    assert len(lines) == 3
    hl = [e for e in lines if "highlight" in e.get("class")]
    assert [e.get("data-slide") for e in hl] == ["B"] and hl[0].get("stroke") == "#000000"
    assert svg == render_weep_plot(traj, 0.5, highlight=["B"], n_tiles={"A": 10})
    # A has 10 tiles, so its single removal sits at 10% of the axis
    a = next(e for e in lines if e.get("data-slide") == "A")
    xs = [float(p.split(",")[0]) for p in a.get("points").split()]
    assert xs[1] - xs[0] == pytest.approx((640 - 64 - 24) * 0.1, abs=1e-3)


def test_weep_plot_empty():
    with pytest.raises(ValueError):
        render_weep_plot([], 0.5)


def test_histogram_svg():
    one = render_histogram([(0.0, 5.0, 5), (5.0, 10.0, 0)])
    assert len(ET.fromstring(one).findall(f".//{SVG}rect")) == 1
    uniform = render_histogram([(5.0 * i, 5.0 * i + 5, 3) for i in range(20)])
    rects = ET.fromstring(uniform).findall(f".//{SVG}rect")
    assert len(rects) == 20 and len({r.get("height") for r in rects}) == 1
    assert uniform == render_histogram([(5.0 * i, 5.0 * i + 5, 3) for i in range(20)])
    assert "%" in uniform
    with pytest.raises(ValueError):
        render_histogram([])
