"""Uniform cell-centered grids, grid functions, quadrature and discrete gradients.

The lattice covers the box [-L, L]^N with cells of side h, so cell centers sit
at (i + 1/2) h - L and the lattice is symmetric about the origin with no cell
centered at 0.  A Ball domain masks the cells whose center radius exceeds R;
masked cells always hold the value 0.  Everything downstream (rearrangement,
energies, optimization) works on these arrays.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

MAGIC = b"SYMF"
FORMAT_VERSION = 1
_SHAPE_TAGS = {"box": 0, "ball": 1}
_TAG_SHAPES = {v: k for k, v in _SHAPE_TAGS.items()}

# slack used when testing |center|^2 <= R^2 so that exact-rim cells are kept
_MASK_EPS = 1e-12


class GridError(ValueError):
    """Raised for invalid domain parameters or inconsistent grid data."""


@dataclass(frozen=True)
class GridDomain:
    """Uniform cell-centered discretization of a box or a centered ball.

    Parameters
    ----------
    dim : int
        Spatial dimension, 2 or 3.
    h : float
        Cell side length, uniform across axes.
    half_extent : float
        Half side L of the bounding box [-L, L]^N; L/h must be an integer.
    shape : str
        "box" or "ball".
    radius : float or None
        Ball radius R with 0 < R <= L; None for boxes.
    """

    dim: int
    h: float
    half_extent: float
    shape: str
    radius: Optional[float] = None

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise GridError(f"dimension must be 2 or 3, got {self.dim}")
        if not (self.h > 0):
            raise GridError(f"spacing h must be positive, got {self.h}")
        ratio = self.half_extent / self.h
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise GridError(
                f"L/h must be a positive integer, got L={self.half_extent}, h={self.h}"
            )
        if self.shape not in ("box", "ball"):
            raise GridError(f"shape must be 'box' or 'ball', got {self.shape!r}")
        if self.shape == "ball":
            if self.radius is None or not (0 < self.radius <= self.half_extent + 1e-12):
                raise GridError(
                    f"ball radius must satisfy 0 < R <= L, got R={self.radius}, L={self.half_extent}"
                )
        elif self.radius is not None:
            raise GridError("box domains take no radius")

    @property
    def cells_per_axis(self) -> int:
        return 2 * int(round(self.half_extent / self.h))

    @property
    def grid_shape(self) -> tuple:
        return (self.cells_per_axis,) * self.dim

    @property
    def cell_count(self) -> int:
        return self.cells_per_axis ** self.dim

    @cached_property
    def axis_centers(self) -> np.ndarray:
        n = self.cells_per_axis
        x = (np.arange(n) + 0.5) * self.h - self.half_extent
        x.setflags(write=False)
        return x

    @cached_property
    def centers(self) -> tuple:
        """Meshgrid of cell-center coordinates, one array per axis."""
        grids = np.meshgrid(*([self.axis_centers] * self.dim), indexing="ij")
        for g in grids:
            g.setflags(write=False)
        return tuple(grids)

    @cached_property
    def radius_sq(self) -> np.ndarray:
        r2 = sum(g ** 2 for g in self.centers)
        r2.setflags(write=False)
        return r2

    @cached_property
    def mask(self) -> np.ndarray:
        """Boolean array, True on active (unmasked) cells."""
        if self.shape == "box":
            m = np.ones(self.grid_shape, dtype=bool)
        else:
            m = self.radius_sq <= self.radius ** 2 + _MASK_EPS
        m.setflags(write=False)
        return m

    @cached_property
    def unmasked_count(self) -> int:
        return int(np.count_nonzero(self.mask))

    @cached_property
    def radial_order(self) -> np.ndarray:
        """Flat indices of unmasked cells sorted by (center radius, lex index).

        This is the assignment order used by the Schwarz symmetrization; the
        lexicographic tie-break makes it a fixed deterministic permutation.
        """
        flat = np.where(self.mask.ravel())[0]
        r2 = self.radius_sq.ravel()[flat]
        order = flat[np.lexsort((flat, r2))]
        order.setflags(write=False)
        return order

    def measure(self) -> float:
        """Total measure h^N * (number of unmasked cells)."""
        return self.h ** self.dim * self.unmasked_count


def make_domain(dim: int, shape: str, half_extent: float, h: float,
                radius: Optional[float] = None) -> GridDomain:
    """Build a GridDomain; shape is "box" or "ball" (ball requires radius)."""
    return GridDomain(dim=dim, h=h, half_extent=half_extent, shape=shape, radius=radius)


@dataclass(frozen=True)
class CellField:
    """One scalar per lattice cell (derived quantities such as |Du| or integrands).

    Unlike GridFunction there is no masked-cells-read-zero contract: a gradient
    field legitimately carries zero-extension trace values on masked cells
    adjacent to the support.
    """

    domain: GridDomain
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != self.domain.grid_shape:
            raise GridError(f"field shape {v.shape} != domain shape {self.domain.grid_shape}")
        if not np.all(np.isfinite(v)):
            raise GridError("field values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class GridFunction:
    """Cell-centered scalar function, zero on masked cells.

    Values are stored immutably; construction enforces finiteness, the
    masked-cells-are-zero invariant, and (optionally) nonnegativity.
    """

    domain: GridDomain
    values: np.ndarray = field(repr=False)
    nonneg: bool = False
    approximate: bool = False

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.shape != self.domain.grid_shape:
            raise GridError(f"values shape {v.shape} != domain shape {self.domain.grid_shape}")
        if not np.all(np.isfinite(v)):
            raise GridError("grid function values must be finite")
        v[~self.domain.mask] = 0.0
        if self.nonneg and np.any(v < 0):
            raise GridError("nonneg flag set but negative values present")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, domain: GridDomain, nonneg: bool = True) -> "GridFunction":
        return cls(domain, np.zeros(domain.grid_shape), nonneg=nonneg)

    @classmethod
    def from_callable(cls, domain: GridDomain, fn, nonneg: bool = False) -> "GridFunction":
        """Sample fn(*coords) at cell centers (masked cells zeroed)."""
        vals = np.asarray(fn(*domain.centers), dtype=np.float64)
        return cls(domain, np.broadcast_to(vals, domain.grid_shape).copy(), nonneg=nonneg)

    def with_values(self, values: np.ndarray, nonneg: Optional[bool] = None) -> "GridFunction":
        return GridFunction(self.domain, values,
                            nonneg=self.nonneg if nonneg is None else nonneg)

    def unmasked(self) -> np.ndarray:
        return self.values[self.domain.mask]


def integrate(f) -> float:
    """Midpoint quadrature h^N * sum of the stored cell values.

    GridFunctions vanish on masked cells by construction, so this is the sum
    over the active domain; gradient-type CellFields additionally contribute
    their zero-extension trace cells, which is what makes the discrete
    Dirichlet energy an honest W_0 energy.  The reduction order is fixed
    (C-order pairwise summation), so results are reproducible bit for bit.
    """
    return float(f.domain.h ** f.domain.dim * np.sum(f.values))


def _forward_shift(values: np.ndarray, d: int) -> np.ndarray:
    """values at cell i+e_d, reading 0 beyond the array."""
    out = np.zeros_like(values)
    src = [slice(None)] * values.ndim
    dst = [slice(None)] * values.ndim
    dst[d] = slice(0, -1)
    src[d] = slice(1, None)
    out[tuple(dst)] = values[tuple(src)]
    return out


def forward_differences(u: GridFunction) -> tuple:
    """Forward difference (u(i+e_d) - u(i))/h per axis, zero extension outside."""
    h = u.domain.h
    return tuple((_forward_shift(u.values, d) - u.values) / h for d in range(u.domain.dim))


def gradient_magnitude(u: GridFunction) -> CellField:
    """|Du| per cell: sqrt of the sum of squared forward differences.

    Evaluated on every lattice cell of the zero-extended function, so cells
    just outside the support (including masked ones) carry the Dirichlet trace
    of the jump to zero.
    """
    acc = np.zeros(u.domain.grid_shape)
    for dd in forward_differences(u):
        acc += dd ** 2
    return CellField(u.domain, np.sqrt(acc))


def lp_norm(f, p: float) -> float:
    """(integral of |f|^p)^(1/p) with midpoint quadrature; requires p >= 1."""
    if p < 1:
        raise GridError(f"p must be >= 1, got {p}")
    hN = f.domain.h ** f.domain.dim
    return float((hN * np.sum(np.abs(f.values) ** p)) ** (1.0 / p))


def grad_lp_norm(u: GridFunction, p: float) -> float:
    """L^p norm of |Du| (the discrete W_0 seminorm)."""
    return lp_norm(gradient_magnitude(u), p)


def w1p_norm(u: GridFunction, p: float) -> float:
    """(||u||_p^p + sum_d ||D_d u||_p^p)^(1/p), the Sobolev norm."""
    if p < 1:
        raise GridError(f"p must be >= 1, got {p}")
    hN = u.domain.h ** u.domain.dim
    total = hN * np.sum(np.abs(u.values) ** p)
    for dd in forward_differences(u):
        total += hN * np.sum(np.abs(dd) ** p)
    return float(total ** (1.0 / p))


# ---------------------------------------------------------------------------
# binary grid-function format and CSV export


def save_grid_function(u: GridFunction, path) -> None:
    """Write the SYMF binary format (little-endian, row-major float64)."""
    dom = u.domain
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<BBB", FORMAT_VERSION, dom.dim, _SHAPE_TAGS[dom.shape]))
        fh.write(struct.pack("<ddd", dom.h, dom.half_extent,
                             dom.radius if dom.radius is not None else 0.0))
        fh.write(struct.pack("<Q", dom.cell_count))
        fh.write(np.ascontiguousarray(u.values, dtype="<f8").tobytes())


def load_grid_function(path, nonneg: bool = False) -> GridFunction:
    """Read the SYMF binary format; raises GridError with the bad offset."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 4 or raw[:4] != MAGIC:
        raise GridError(f"bad magic bytes at offset 0: expected {MAGIC!r}, got {raw[:4]!r}")
    if len(raw) < 39:
        raise GridError(f"truncated header: file has {len(raw)} bytes")
    version, dim, tag = struct.unpack_from("<BBB", raw, 4)
    if version != FORMAT_VERSION:
        raise GridError(f"unsupported format version {version} at offset 4")
    if tag not in _TAG_SHAPES:
        raise GridError(f"unknown shape tag {tag} at offset 6")
    h, L, R = struct.unpack_from("<ddd", raw, 7)
    (count,) = struct.unpack_from("<Q", raw, 31)
    shape = _TAG_SHAPES[tag]
    dom = GridDomain(dim=dim, h=h, half_extent=L, shape=shape,
                     radius=R if shape == "ball" else None)
    if count != dom.cell_count:
        raise GridError(f"cell count {count} at offset 31 != domain cell count {dom.cell_count}")
    need = 39 + 8 * count
    if len(raw) != need:
        raise GridError(f"payload size mismatch: expected {need} bytes, file has {len(raw)}")
    vals = np.frombuffer(raw, dtype="<f8", count=count, offset=39).reshape(dom.grid_shape)
    return GridFunction(dom, vals.copy(), nonneg=nonneg)


def export_csv(u: GridFunction, path) -> None:
    """One line per cell: "i,j[,k],x1,x2[,x3],value" (all cells, row-major)."""
    dom = u.domain
    with open(path, "w") as fh:
        for idx in np.ndindex(*dom.grid_shape):
            coords = [float(dom.axis_centers[i]) for i in idx]
            cols = [str(i) for i in idx] + [format(c, ".17g") for c in coords]
            cols.append(format(float(u.values[idx]), ".17g"))
            fh.write(",".join(cols) + "\n")
