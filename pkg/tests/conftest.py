import random
from typing import Dict, Optional, Sequence, Tuple

import pytest

from coarse_towers.towers import Tower, make_tower


def build_random_tower(rng: random.Random, bounds: Sequence[Tuple[int, int]]) -> Tower:
    """Germ of height len(bounds) + 1; a level-(k+1) node gets randint(*bounds[k-1]) children."""
    height = len(bounds) + 1
    top = f"{height}:0"
    level: Dict[str, int] = {top: height}
    parent: Dict[str, Optional[str]] = {top: None}
    frontier = [top]
    for lev in range(height - 1, 0, -1):
        lo, hi = bounds[lev - 1]
        nxt = []
        for node in frontier:
            for _ in range(rng.randint(lo, hi)):
                child = f"{lev}:{len(nxt)}"
                level[child] = lev
                parent[child] = node
                nxt.append(child)
        frontier = nxt
    return make_tower(level, parent)


@pytest.fixture
def random_tower():
    return build_random_tower
