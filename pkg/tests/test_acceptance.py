"""Exit criteria for the toolkit, one test per criterion.

Each test prints a ``PASS``/``FAIL`` line with the measured quantity.
"""

import filecmp
import math
import os
import subprocess
import sys
import time
import xml.etree.ElementTree as ET
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from weep.aggregate import (
    AttentionWeightedScore,
    Mean,
    Median,
    Percentile,
    attention_pool,
    percentile,
    sigmoid,
)
from weep.cohort import summarize_percents
from weep.render import render_histogram, render_mask, render_weep_plot
from weep.selection import RankMetric, brute_force_prefix, rank_tiles, weep_select
from weep.threshold import youden_threshold
from weep.tile_store import AttentionParams, SlideBag, TileRecord
from conftest import make_bag
from oracles import youden_exhaustive


@pytest.fixture
def verdict(capsys):
    def emit(number, name, ok, detail=""):
        with capsys.disabled():
            print(f"\n[criterion {number:2d}] {'PASS' if ok else 'FAIL'}  {name}  {detail}")
        return ok

    return emit


def random_bag(rng, n_max=64):
    n = int(rng.integers(1, n_max + 1))
    return make_bag(rng.uniform(size=n), rng.uniform(size=n))


def test_01_oracle_equivalence(verdict):
    rng = np.random.default_rng(1)
    specs = [Mean(), Median(), Percentile(0.75), AttentionWeightedScore()]
    mismatches, exhausted = 0, 0
    start = time.perf_counter()
    for _ in range(10_000):
        bag = random_bag(rng)
        spec = specs[int(rng.integers(len(specs)))]
        metric = RankMetric.SCORE if rng.uniform() < 0.5 else RankMetric.ATTENTION
        o = float(rng.uniform(0.0, 1.0))
        r = weep_select(bag, spec, metric, o)
        k, ex = brute_force_prefix(bag, spec, metric, o)
        prefix = tuple(t.tile_id for t in rank_tiles(bag, metric)[:k])
        if r.selected != prefix or r.exhausted != ex:
            mismatches += 1
        exhausted += ex
    elapsed = time.perf_counter() - start
    ok = mismatches == 0 and exhausted > 0 and elapsed < 60
    verdict(1, "oracle equivalence", ok, f"mismatches={mismatches} exhausted_cases={exhausted} runtime={elapsed:.1f}s")
    assert ok


def test_02_worked_trajectory(verdict):
    r = weep_select(make_bag([0.9, 0.8, 0.6, 0.2]), Percentile(0.75), RankMetric.SCORE, 0.5)
    err = max(abs(a - b) for a, b in zip(r.trajectory, [0.825, 0.7, 0.5, 0.2]))
    ok = len(r.trajectory) == 4 and err <= 1e-12 and r.percent_selected == 75.0
    verdict(2, "worked trajectory", ok, f"trajectory={list(r.trajectory)} max_err={err:.1e} percent={r.percent_selected}")
    assert ok


def test_03_percentile_reference(verdict):
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 1001))
        v = rng.uniform(-10, 10, size=n)
        p = float(rng.choice([0.25, 0.5, 0.75, 0.9]))
        ref = float(np.quantile(v, p, method="linear"))
        worst = max(worst, abs(percentile(v.tolist(), p) - ref))
    ok = worst <= 1e-12
    verdict(3, "percentile vs numpy.quantile(linear)", ok, f"max_abs_err={worst:.2e}")
    assert ok


def test_04_youden_exhaustive(verdict):
    rng = np.random.default_rng(4)
    bad = 0
    for i in range(1000):
        n = int(rng.integers(2, 201))
        y = [0, 1] + rng.integers(0, 2, size=n - 2).tolist()
        # every other instance on a coarse grid so J ties are common
        s = rng.integers(0, 10, size=n) / 10 if i % 2 else rng.uniform(size=n)
        s = s.tolist()
        t, sens, spec = youden_exhaustive(s, y)
        got = youden_threshold(s, y)
        if got.value != t or Fraction(got.sensitivity) != Fraction(float(sens)) or Fraction(got.specificity) != Fraction(float(spec)):
            bad += 1
    ex1 = youden_threshold([0.1, 0.2, 0.7, 0.9], [0, 0, 1, 1])
    ex2 = youden_threshold([0.1, 0.6, 0.4, 0.8], [0, 0, 1, 1])
    hand = (ex1.value, ex1.j) == (0.7, 1.0) and (ex2.value, ex2.sensitivity) == (0.4, 1.0)
    ok = bad == 0 and hand
    verdict(4, "Youden vs exhaustive search", ok, f"mismatches={bad} hand_examples={'ok' if hand else 'wrong'}")
    assert ok


def test_05_attention_pooling(verdict):
    rng = np.random.default_rng(5)
    sum_err, perm_err, positive = 0.0, 0.0, True
    for _ in range(1000):
        n, d, k = int(rng.integers(1, 33)), int(rng.integers(1, 17)), int(rng.integers(1, 9))
        params = AttentionParams(V=rng.normal(size=(k, d)), w=rng.normal(size=k), c=rng.normal(size=d), b=rng.normal())
        H = rng.normal(size=(n, d))
        a, p = attention_pool(H, params)
        perm = rng.permutation(n)
        a2, p2 = attention_pool(H[perm], params)
        sum_err = max(sum_err, abs(a.sum() - 1.0))
        perm_err = max(perm_err, abs(p - p2))
        positive &= bool(np.all(a > 0))
    closed = True
    for _ in range(100):
        d, k = int(rng.integers(1, 17)), int(rng.integers(1, 9))
        params = AttentionParams(V=rng.normal(size=(k, d)), w=rng.normal(size=k), c=rng.normal(size=d), b=rng.normal())
        h = rng.normal(size=d)
        expected = sigmoid(float(params.c @ h) + params.b)
        a1, p1 = attention_pool(h[None, :], params)
        n = int(rng.integers(2, 33))
        an, pn = attention_pool(np.tile(h, (n, 1)), params)
        closed &= a1.tolist() == [1.0] and p1 == expected and bool(np.all(an == 1.0 / n)) and pn == expected
    ok = sum_err <= 1e-9 and perm_err <= 1e-12 and positive and closed
    verdict(5, "attention pooling", ok, f"max|sum-1|={sum_err:.1e} max|dP|perm={perm_err:.1e} closed_forms={'ok' if closed else 'wrong'}")
    assert ok


def test_06_monotone_percentile_trajectories(verdict):
    rng = np.random.default_rng(6)
    violations = 0
    for i in range(10_000):
        bag = random_bag(rng)
        spec = [Median(), Percentile(0.75), Percentile(float(rng.uniform(0.01, 1.0)))][i % 3]
        o = 0.0 if i % 2 else float(rng.uniform())
        traj = weep_select(bag, spec, RankMetric.SCORE, o).trajectory
        violations += any(b > a for a, b in zip(traj, traj[1:]))
    ok = violations == 0
    verdict(6, "monotone percentile trajectories", ok, f"violations={violations}/10000")
    assert ok


def test_07_non_monotone_attention(verdict):
    bag = make_bag([0.5, 0.9, 0.2], [10, 5, 1])
    r = weep_select(bag, AttentionWeightedScore(), RankMetric.ATTENTION, 0.5)
    t = r.trajectory
    ok = len(r.selected) == 2 and t[1] > t[0] and abs(t[0] - 0.60625) <= 1e-12 and abs(t[1] - 4.7 / 6) <= 1e-12
    verdict(7, "non-monotone attention trajectory", ok, f"trajectory={[round(x, 5) for x in t]} selected={len(r.selected)}")
    assert ok


def test_08_cohort_statistics(verdict):
    s = summarize_percents([10.0, 20.0, 30.0])
    example = s.mean_percent == 20.0 and abs(s.ci_low - 8.684) <= 1e-3 and abs(s.ci_high - 31.316) <= 1e-3
    s4 = summarize_percents([10.0, 20.0, 30.0] * 4)
    ratio = (s4.ci_high - s4.ci_low) / (s.ci_high - s.ci_low)
    halves = abs(ratio - 0.5) / 0.5 <= 1e-9
    ok = example and halves
    verdict(
        8,
        "cohort statistics",
        ok,
        f"mean={s.mean_percent} ci=[{s.ci_low:.3f}, {s.ci_high:.3f}] ({'ok' if example else 'wrong'}); "
        f"width ratio after 4x duplication={ratio:.6f} (required 0.5 +/- 1e-9 rel)",
    )
    assert example, "summarize([10, 20, 30]) does not give mean 20, CI [8.684, 31.316]"
    assert halves, f"CI width ratio {ratio!r} is not 0.5 within 1e-9 relative"


def test_09_format_goldens(verdict):
    bag = SlideBag("S", tuple(TileRecord(f"{x}:{y}", x, y, 0.5) for y in range(2) for x in range(2)))
    mask_ok = render_mask(bag, {"0:0", "1:1"}) == b"P2\n2 2\n255\n255 128\n128 255\n"
    traj = [("A", [0.825, 0.7, 0.5, 0.2]), ("B", [0.9, 0.3]), ("C", [0.6, 0.55, 0.52, 0.4])]
    bins = [(5.0 * i, 5.0 * i + 5, i % 4) for i in range(20)]
    plots = [
        (render_weep_plot(traj, 0.5, ["B"]), render_weep_plot(traj, 0.5, ["B"])),
        (render_histogram(bins), render_histogram(bins)),
    ]
    identical = all(a == b for a, b in plots)
    well_formed = True
    for a, _ in plots:
        try:
            ET.fromstring(a)
        except ET.ParseError:
            well_formed = False
    ok = mask_ok and identical and well_formed
    verdict(9, "format goldens", ok, f"mask={'ok' if mask_ok else 'wrong'} svg_identical={identical} svg_xml={well_formed}")
    assert ok


def _pipeline(out: Path) -> float:
    cmd = [
        sys.executable, "-m", "weep", "pipeline", "--simulate", "--seed", "42",
        "--n-slides", "200", "--pos-alpha", "8", "--pos-beta", "2", "--neg-alpha", "2", "--neg-beta", "8",
        "--out", str(out),
    ]
    start = time.perf_counter()
    proc = subprocess.run(cmd, capture_output=True, text=True, env={**os.environ, "PYTHONHASHSEED": "random"})
    elapsed = time.perf_counter() - start
    assert proc.returncode == 0, proc.stderr
    return elapsed


def _same_tree(a: Path, b: Path) -> bool:
    names_a = sorted(p.name for p in a.iterdir())
    names_b = sorted(p.name for p in b.iterdir())
    if names_a != names_b:
        return False
    _, mismatch, errors = filecmp.cmpfiles(a, b, names_a, shallow=False)
    return not mismatch and not errors


def test_10_end_to_end(verdict, tmp_path):
    import csv

    t1 = _pipeline(tmp_path / "run1")
    t2 = _pipeline(tmp_path / "run2")
    with open(tmp_path / "run1" / "threshold.csv") as fh:
        j = float(next(csv.DictReader(fh))["j"])
    with open(tmp_path / "run1" / "slides.csv") as fh:
        slides = list(csv.DictReader(fh))
    positives = [r for r in slides if float(r["initial_p"]) >= float(r["threshold"])]
    nonempty = all(int(r["n_selected"]) > 0 for r in positives)
    same = _same_tree(tmp_path / "run1", tmp_path / "run2")
    ok = max(t1, t2) < 30 and j > 0.8 and nonempty and len(positives) > 0 and same
    verdict(
        10,
        "end-to-end pipeline",
        ok,
        f"runtime={max(t1, t2):.1f}s J={j:.4f} predicted_positive={len(positives)} nonempty={nonempty} identical_trees={same}",
    )
    assert ok
