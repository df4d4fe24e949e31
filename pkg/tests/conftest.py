import numpy as np
import pytest

from symmin import GridDomain, GridFunction, make_domain


@pytest.fixture
def box2d():
    return make_domain(2, "box", 1.0, 0.25)


@pytest.fixture
def ball2d():
    # 17-cell ball radius inside an 18-cell half box: one padding cell
    return make_domain(2, "ball", 18.0 / 17.0, 1.0 / 17.0, radius=1.0)


@pytest.fixture
def small_ball():
    return make_domain(2, "ball", 1.25, 0.25, radius=1.0)


def random_interior_function(domain: GridDomain, seed: int) -> GridFunction:
    """Dense uniform random values, zeroed on the one-cell rim inside the mask."""
    rng = np.random.default_rng(seed)
    vals = rng.random(domain.grid_shape)
    vals[~interior_mask(domain)] = 0.0
    return GridFunction(domain, vals, nonneg=True)


def interior_mask(domain: GridDomain) -> np.ndarray:
    m = domain.mask.copy()
    shr = m.copy()
    for d in range(domain.dim):
        for s in (1, -1):
            r = np.roll(m, s, axis=d)
            sl = [slice(None)] * domain.dim
            sl[d] = 0 if s == 1 else -1
            r[tuple(sl)] = False
            shr &= r
    return shr


def smooth_bump(domain: GridDomain, center, width, height=1.0) -> GridFunction:
    d2 = sum((c - cc) ** 2 for c, cc in zip(domain.centers, center))
    prof = height * np.clip(1.0 - d2 / width ** 2, 0.0, None) ** 2
    return GridFunction(domain, prof, nonneg=True)
