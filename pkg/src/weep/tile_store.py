"""Tile tables, slide labels, slide score tables and attention-head parameters.

All readers take an open text stream and return immutable values. Every
validation failure raises :class:`DataError` carrying the offending line
number (1-based, the header is line 1) or field name.

File formats (comma separated, UTF-8, ``.`` as decimal point)::

    tiles.csv         slide_id,tile_id,grid_x,grid_y,score[,attention]
    labels.csv        slide_id,label
    features.csv      slide_id,tile_id,f0,...,f{d-1}
    slide_scores.csv  slide_id,score

``tile_id`` may be omitted (column absent or cell empty); it then defaults
to ``"{grid_x}:{grid_y}"``.

Attention parameters are a JSON object ``{"V": [[...]], "w": [...],
"c": [...], "b": 0.0}`` with ``V`` of shape k x d, ``w`` of length k,
``c`` of length d and a scalar ``b``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, replace
from typing import IO, Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "DataError",
    "TileRecord",
    "SlideBag",
    "AttentionParams",
    "parse_tile_table",
    "parse_features",
    "attach_features",
    "parse_labels",
    "parse_slide_scores",
    "parse_attention_params",
    "serialize_tile_table",
    "serialize_features",
    "serialize_labels",
    "serialize_slide_scores",
    "serialize_attention_params",
    "format_float",
]


class DataError(ValueError):
    """Invalid input data. The message names the line or field at fault."""

    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        self.line = line
        self.source = source
        prefix = ""
        if source is not None:
            prefix += f"{source}:"
        if line is not None:
            prefix += f"line {line}: "
        elif prefix:
            prefix += " "
        super().__init__(prefix + message)


@dataclass(frozen=True)
class TileRecord:
    tile_id: str
    grid_x: int
    grid_y: int
    score: float
    attention_raw: float | None = None
    features: tuple[float, ...] | None = None

    def __post_init__(self):
        if not (0.0 <= self.score <= 1.0):
            raise DataError(f"tile {self.tile_id!r}: score {self.score!r} outside [0, 1]")
        if self.grid_x < 0 or self.grid_y < 0:
            raise DataError(f"tile {self.tile_id!r}: negative grid position")
        if self.attention_raw is not None and not (
            math.isfinite(self.attention_raw) and self.attention_raw >= 0.0
        ):
            raise DataError(
                f"tile {self.tile_id!r}: attention {self.attention_raw!r} must be finite and >= 0"
            )


@dataclass(frozen=True)
class SlideBag:
    """All tiles of one slide (the MIL bag) with an optional binary label."""

    slide_id: str
    tiles: tuple[TileRecord, ...]
    label: int | None = None

    def __post_init__(self):
        if not isinstance(self.tiles, tuple):
            object.__setattr__(self, "tiles", tuple(self.tiles))
        if not self.tiles:
            raise DataError(f"slide {self.slide_id!r} has no tiles")
        if self.label is not None and self.label not in (0, 1):
            raise DataError(f"slide {self.slide_id!r}: label {self.label!r} not in {{0, 1}}")
        ids = set()
        cells = set()
        dims = set()
        for t in self.tiles:
            if t.tile_id in ids:
                raise DataError(f"slide {self.slide_id!r}: duplicate tile_id {t.tile_id!r}")
            if (t.grid_x, t.grid_y) in cells:
                raise DataError(
                    f"slide {self.slide_id!r}: duplicate grid cell ({t.grid_x}, {t.grid_y})"
                )
            ids.add(t.tile_id)
            cells.add((t.grid_x, t.grid_y))
            if t.features is not None:
                dims.add(len(t.features))
        if len(dims) > 1:
            raise DataError(f"slide {self.slide_id!r}: inconsistent feature dimensions {sorted(dims)}")

    @property
    def n(self) -> int:
        return len(self.tiles)

    def tile(self, tile_id: str) -> TileRecord:
        for t in self.tiles:
            if t.tile_id == tile_id:
                return t
        raise KeyError(tile_id)

    def with_tiles(self, tiles: Iterable[TileRecord]) -> "SlideBag":
        return replace(self, tiles=tuple(tiles))


@dataclass(frozen=True, eq=False)
class AttentionParams:
    """Weights of an attention pooling head (inference only).

    ``V`` (k x d) projects features, ``w`` (k) scores the tanh projection,
    ``c`` (d) and ``b`` form the logistic classifier on the pooled vector.
    Arrays are stored read-only.
    """

    V: np.ndarray
    w: np.ndarray
    c: np.ndarray
    b: float

    def __post_init__(self):
        V = np.array(self.V, dtype=float)
        w = np.array(self.w, dtype=float)
        c = np.array(self.c, dtype=float)
        if V.ndim != 2 or V.shape[0] < 1 or V.shape[1] < 1:
            raise DataError(f"V: expected a non-empty k x d matrix, got shape {V.shape}")
        if w.ndim != 1 or w.shape[0] != V.shape[0]:
            raise DataError(f"w: length {w.size} does not match k={V.shape[0]} rows of V")
        if c.ndim != 1 or c.shape[0] != V.shape[1]:
            raise DataError(f"c: length {c.size} does not match d={V.shape[1]} columns of V")
        b = float(self.b)
        for name, arr in (("V", V), ("w", w), ("c", c), ("b", np.array([b]))):
            if not np.all(np.isfinite(arr)):
                raise DataError(f"{name}: non-finite entry")
        for arr in (V, w, c):
            arr.setflags(write=False)
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "b", b)

    @property
    def k(self) -> int:
        return self.V.shape[0]

    @property
    def d(self) -> int:
        return self.V.shape[1]


def format_float(x: float) -> str:
    """Shortest decimal text that parses back to the identical double."""
    return repr(float(x))


def _reader(stream: IO[str], required: Sequence[str], source: str):
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise DataError("empty table, expected a header row", line=1, source=source) from None
    header = [h.strip() for h in header]
    missing = [c for c in required if c not in header]
    if missing:
        raise DataError(f"missing required column(s): {', '.join(missing)}", line=1, source=source)
    return header, reader


def _float(cell: str, name: str, line: int, source: str) -> float:
    cell = cell.strip()
    if cell == "":
        raise DataError(f"missing value for {name!r}", line=line, source=source)
    try:
        value = float(cell)
    except ValueError:
        raise DataError(f"non-numeric {name} {cell!r}", line=line, source=source) from None
    if not math.isfinite(value):
        raise DataError(f"non-finite {name} {cell!r}", line=line, source=source)
    return value


def _grid(cell: str, name: str, line: int, source: str) -> int:
    cell = cell.strip()
    try:
        value = int(cell)
    except ValueError:
        raise DataError(f"{name} {cell!r} is not an integer", line=line, source=source) from None
    if value < 0:
        raise DataError(f"{name} {value} is negative", line=line, source=source)
    return value


def parse_tile_table(stream: IO[str], source: str = "tiles") -> list[SlideBag]:
    """Read a tile table into one bag per slide.

    Bags appear in order of first occurrence of their ``slide_id``; tiles keep
    their input order within a slide.
    """
    header, reader = _reader(stream, ["slide_id", "grid_x", "grid_y", "score"], source)
    col = {name: i for i, name in enumerate(header)}
    has_tid = "tile_id" in col
    has_att = "attention" in col

    grouped: dict[str, list[TileRecord]] = {}
    seen_cells: dict[tuple[str, int, int], int] = {}
    seen_ids: dict[tuple[str, str], int] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise DataError(
                f"expected {len(header)} fields, found {len(row)}", line=lineno, source=source
            )
        slide_id = row[col["slide_id"]].strip()
        if not slide_id:
            raise DataError("empty slide_id", line=lineno, source=source)
        gx = _grid(row[col["grid_x"]], "grid_x", lineno, source)
        gy = _grid(row[col["grid_y"]], "grid_y", lineno, source)
        score = _float(row[col["score"]], "score", lineno, source)
        if not 0.0 <= score <= 1.0:
            raise DataError(f"score {score!r} outside [0, 1]", line=lineno, source=source)
        attention = None
        if has_att and row[col["attention"]].strip() != "":
            attention = _float(row[col["attention"]], "attention", lineno, source)
            if attention < 0:
                raise DataError(f"attention {attention!r} is negative", line=lineno, source=source)
        tile_id = row[col["tile_id"]].strip() if has_tid else ""
        if not tile_id:
            tile_id = f"{gx}:{gy}"

        cell = (slide_id, gx, gy)
        if cell in seen_cells:
            raise DataError(
                f"duplicate grid cell ({gx}, {gy}) in slide {slide_id!r} "
                f"(first seen on line {seen_cells[cell]})",
                line=lineno,
                source=source,
            )
        seen_cells[cell] = lineno
        if (slide_id, tile_id) in seen_ids:
            raise DataError(
                f"duplicate tile_id {tile_id!r} in slide {slide_id!r} "
                f"(first seen on line {seen_ids[slide_id, tile_id]})",
                line=lineno,
                source=source,
            )
        seen_ids[slide_id, tile_id] = lineno
        grouped.setdefault(slide_id, []).append(
            TileRecord(tile_id=tile_id, grid_x=gx, grid_y=gy, score=score, attention_raw=attention)
        )

    if not grouped:
        raise DataError("no tile rows", source=source)
    return [SlideBag(slide_id=s, tiles=tuple(ts)) for s, ts in grouped.items()]


def parse_features(stream: IO[str], source: str = "features") -> dict[tuple[str, str], tuple[float, ...]]:
    """Read the wide feature table into ``{(slide_id, tile_id): vector}``."""
    header, reader = _reader(stream, ["slide_id", "tile_id"], source)
    fcols = [h for h in header if h not in ("slide_id", "tile_id")]
    if not fcols:
        raise DataError("no feature columns (expected f0, f1, ...)", line=1, source=source)
    expected = [f"f{i}" for i in range(len(fcols))]
    if fcols != expected:
        raise DataError(f"feature columns must be f0..f{len(fcols) - 1} in order", line=1, source=source)
    i_slide, i_tile = header.index("slide_id"), header.index("tile_id")
    i_feat = [header.index(c) for c in fcols]

    out: dict[tuple[str, str], tuple[float, ...]] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise DataError(
                f"inconsistent feature dimension: expected {len(fcols)} features, "
                f"found {len(row) - 2}",
                line=lineno,
                source=source,
            )
        key = (row[i_slide].strip(), row[i_tile].strip())
        if key in out:
            raise DataError(f"duplicate features for tile {key[1]!r} of slide {key[0]!r}", line=lineno, source=source)
        out[key] = tuple(_float(row[i], header[i], lineno, source) for i in i_feat)
    return out


def attach_features(
    bags: Sequence[SlideBag], features: Mapping[tuple[str, str], Sequence[float]]
) -> list[SlideBag]:
    """Return copies of ``bags`` with feature vectors filled in where available."""
    out = []
    for bag in bags:
        tiles = []
        for t in bag.tiles:
            vec = features.get((bag.slide_id, t.tile_id))
            tiles.append(replace(t, features=tuple(float(v) for v in vec)) if vec is not None else t)
        out.append(bag.with_tiles(tiles))
    return out


def parse_labels(stream: IO[str], source: str = "labels") -> dict[str, int]:
    header, reader = _reader(stream, ["slide_id", "label"], source)
    i_slide, i_label = header.index("slide_id"), header.index("label")
    labels: dict[str, int] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise DataError(f"expected {len(header)} fields, found {len(row)}", line=lineno, source=source)
        slide_id, raw = row[i_slide].strip(), row[i_label].strip()
        if raw not in ("0", "1"):
            raise DataError(f"label {raw!r} for slide {slide_id!r} not in {{0, 1}}", line=lineno, source=source)
        if slide_id in labels:
            raise DataError(f"duplicate slide_id {slide_id!r}", line=lineno, source=source)
        labels[slide_id] = int(raw)
    return labels


def parse_slide_scores(stream: IO[str], source: str = "scores") -> dict[str, float]:
    header, reader = _reader(stream, ["slide_id", "score"], source)
    i_slide, i_score = header.index("slide_id"), header.index("score")
    scores: dict[str, float] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise DataError(f"expected {len(header)} fields, found {len(row)}", line=lineno, source=source)
        slide_id = row[i_slide].strip()
        if slide_id in scores:
            raise DataError(f"duplicate slide_id {slide_id!r}", line=lineno, source=source)
        scores[slide_id] = _float(row[i_score], "score", lineno, source)
    return scores


def parse_attention_params(stream: IO[str], source: str = "params") -> AttentionParams:
    try:
        obj = json.load(stream)
    except json.JSONDecodeError as exc:
        raise DataError(f"invalid JSON: {exc.msg}", line=exc.lineno, source=source) from None
    if not isinstance(obj, dict):
        raise DataError("expected a JSON object with fields V, w, c, b", source=source)
    missing = [k for k in ("V", "w", "c", "b") if k not in obj]
    if missing:
        raise DataError(f"missing field(s): {', '.join(missing)}", source=source)
    V = obj["V"]
    if not isinstance(V, list) or not V or not all(isinstance(r, list) for r in V):
        raise DataError("field V must be a non-empty list of rows", source=source)
    widths = {len(r) for r in V}
    if len(widths) != 1:
        raise DataError(f"field V has ragged rows (lengths {sorted(widths)})", source=source)
    for name in ("w", "c"):
        if not isinstance(obj[name], list):
            raise DataError(f"field {name} must be a list", source=source)
    if isinstance(obj["b"], (list, dict, str, bool)) or obj["b"] is None:
        raise DataError("field b must be a number", source=source)
    try:
        return AttentionParams(V=V, w=obj["w"], c=obj["c"], b=obj["b"])
    except DataError as exc:
        raise DataError(str(exc), source=source) from None
    except (TypeError, ValueError):
        raise DataError("non-numeric entry", source=source) from None


def _write_rows(header: Sequence[str], rows: Iterable[Sequence[object]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def serialize_tile_table(bags: Sequence[SlideBag]) -> str:
    with_att = any(t.attention_raw is not None for b in bags for t in b.tiles)
    header = ["slide_id", "tile_id", "grid_x", "grid_y", "score"] + (["attention"] if with_att else [])
    rows = []
    for bag in bags:
        for t in bag.tiles:
            row = [bag.slide_id, t.tile_id, t.grid_x, t.grid_y, format_float(t.score)]
            if with_att:
                row.append("" if t.attention_raw is None else format_float(t.attention_raw))
            rows.append(row)
    return _write_rows(header, rows)


def serialize_features(bags: Sequence[SlideBag]) -> str:
    dims = {len(t.features) for b in bags for t in b.tiles if t.features is not None}
    if len(dims) != 1:
        raise DataError("features missing or of inconsistent dimension")
    (d,) = dims
    rows = [
        [b.slide_id, t.tile_id, *map(format_float, t.features)]
        for b in bags
        for t in b.tiles
        if t.features is not None
    ]
    return _write_rows(["slide_id", "tile_id", *[f"f{i}" for i in range(d)]], rows)


def serialize_labels(labels: Mapping[str, int]) -> str:
    return _write_rows(["slide_id", "label"], [[s, labels[s]] for s in labels])


def serialize_slide_scores(scores: Mapping[str, float]) -> str:
    return _write_rows(["slide_id", "score"], [[s, format_float(scores[s])] for s in scores])


def serialize_attention_params(params: AttentionParams) -> str:
    obj = {
        "V": params.V.tolist(),
        "w": params.w.tolist(),
        "c": params.c.tolist(),
        "b": params.b,
    }
    return json.dumps(obj, indent=2) + "\n"
