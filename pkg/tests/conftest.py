import io

import numpy as np
import pytest

from weep.tile_store import SlideBag, TileRecord


def make_bag(scores, attention=None, slide_id="S1", ids=None, features=None, label=None):
    """Bag on a single grid row; tile ids default to t00, t01, ..."""
    n = len(scores)
    ids = ids or [f"t{i:02d}" for i in range(n)]
    tiles = []
    for i, s in enumerate(scores):
        tiles.append(
            TileRecord(
                tile_id=ids[i],
                grid_x=i,
                grid_y=0,
                score=float(s),
                attention_raw=None if attention is None else float(attention[i]),
                features=None if features is None else tuple(float(v) for v in features[i]),
            )
        )
    return SlideBag(slide_id, tuple(tiles), label)


def text(s):
    return io.StringIO(s)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
