"""Schwarz symmetrization, two-point polarization and polarizer sequences.

Polarization with respect to a closed half-space H containing the origin takes
the max of u and its reflection on H and the min on the complement.  On the
lattice we keep an exact family whose reflections permute cell centers:
axis-aligned planes at integer cell offsets and, in 2D, the 45-degree
diagonals.  Both rearrangements are pure permutations of the stored values
(zero-extension pairs resolve to the identity for nonnegative input), which is
what makes Cavalieri's principle exact in all the tests downstream.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

from .grid import (GridDomain, GridFunction, grad_lp_norm, integrate,
                   lp_norm)


class RearrangeError(ValueError):
    """Raised for inadmissible inputs or ill-formed polarizers."""


@dataclass(frozen=True)
class Polarizer:
    """Closed affine half-space H = {x : a.x <= b} with unit normal a and b > 0.

    b > 0 puts the origin strictly inside H, i.e. H belongs to the family
    whose iterated polarizations approximate the Schwarz symmetrization.
    """

    normal: tuple
    offset: float

    def __post_init__(self):
        a = np.asarray(self.normal, dtype=np.float64)
        norm = float(np.sqrt(np.sum(a ** 2)))
        if abs(norm - 1.0) > 1e-14:
            raise RearrangeError(f"normal must be a unit vector, |a| = {norm!r}")
        if not (self.offset > 0):
            raise RearrangeError(f"offset must be positive (origin interior), got {self.offset}")
        object.__setattr__(self, "normal", tuple(float(c) for c in a))

    def reflect(self, x: np.ndarray) -> np.ndarray:
        """Reflection x_H = x - 2 (a.x - b) a across the boundary plane."""
        a = np.asarray(self.normal)
        return np.asarray(x) - 2.0 * (np.dot(x, a) - self.offset) * a

    def contains(self, x) -> bool:
        return float(np.dot(np.asarray(x), np.asarray(self.normal))) <= self.offset


@dataclass(frozen=True)
class GridExactPolarizer:
    """Lattice-preserving polarizer tied to a domain.

    kind "axis": normal sign*e_axis, plane at sign*x_axis = offset_cells*h.
    kind "diag" (2D only): normal sign*(1, t)/sqrt(2) with t = +1 for
    diag_code 0 and t = -1 for diag_code 1, plane at distance
    offset_cells*h/sqrt(2) from the origin.
    """

    domain: GridDomain
    kind: str
    code: int  # axis index, or diagonal code 0/1
    sign: int
    offset_cells: int

    def __post_init__(self):
        if self.kind not in ("axis", "diag"):
            raise RearrangeError(f"kind must be 'axis' or 'diag', got {self.kind!r}")
        if self.sign not in (-1, 1):
            raise RearrangeError(f"sign must be +-1, got {self.sign}")
        if self.offset_cells < 1:
            raise RearrangeError("offset_cells must be >= 1 (origin strictly interior)")
        if self.kind == "axis" and not (0 <= self.code < self.domain.dim):
            raise RearrangeError(f"axis {self.code} out of range for dim {self.domain.dim}")
        if self.kind == "diag":
            if self.domain.dim != 2:
                raise RearrangeError("diagonal polarizers exist only for N = 2")
            if self.code not in (0, 1):
                raise RearrangeError(f"diagonal code must be 0 or 1, got {self.code}")

    @cached_property
    def polarizer(self) -> Polarizer:
        h = self.domain.h
        if self.kind == "axis":
            a = [0.0] * self.domain.dim
            a[self.code] = float(self.sign)
            return Polarizer(tuple(a), self.offset_cells * h)
        t = 1.0 if self.code == 0 else -1.0
        s = float(self.sign)
        r = 1.0 / np.sqrt(2.0)
        return Polarizer((s * r, s * t * r), self.offset_cells * h / np.sqrt(2.0))

    @cached_property
    def _tables(self) -> tuple:
        """(partner_flat, in_H) arrays; partner -1 where the image leaves the box."""
        dom = self.domain
        n = dom.cells_per_axis
        M = n // 2
        idx = np.indices(dom.grid_shape)
        m, s = self.offset_cells, self.sign
        if self.kind == "axis":
            d = self.code
            target = [idx[k].copy() for k in range(dom.dim)]
            target[d] = 2 * M - 1 - idx[d] + 2 * m * s
            # membership s*(x_d) <= m*h in exact integers: s*(2 i + 1 - 2M) <= 2 m
            in_H = s * (2 * idx[d] + 1 - 2 * M) <= 2 * m
        else:
            i, j = idx[0], idx[1]
            if self.code == 0:
                ti = 2 * M - 1 - j + m * s
                tj = 2 * M - 1 - i + m * s
                in_H = s * (i + j + 1 - 2 * M) <= m
            else:
                ti = j + m * s
                tj = i - m * s
                in_H = s * (i - j) <= m
            target = [ti, tj]
        inside = np.ones(dom.grid_shape, dtype=bool)
        for k in range(dom.dim):
            inside &= (target[k] >= 0) & (target[k] < n)
        flat = np.zeros(dom.grid_shape, dtype=np.int64)
        mult = 1
        for k in reversed(range(dom.dim)):
            flat += np.where(inside, target[k], 0) * mult
            mult *= n
        partner = np.where(inside, flat, -1).ravel()
        partner.setflags(write=False)
        in_H = in_H.copy()
        in_H.setflags(write=False)
        return partner, in_H

    @property
    def normal(self):
        return self.polarizer.normal

    @property
    def offset(self):
        return self.polarizer.offset

    def to_json_item(self) -> dict:
        key = "axis" if self.kind == "axis" else "diag"
        return {key: self.code, "sign": self.sign, "offset_cells": self.offset_cells}


def polarize(u: GridFunction, P) -> GridFunction:
    """Exact two-point rearrangement: max on H, min on the reflected side.

    Pairs whose partner leaves the box resolve against the zero extension; for
    nonnegative u and this polarizer family that is always the identity on the
    stored values, so the value multiset is preserved exactly.  A plain
    Polarizer (no lattice-exactness witness) falls through to the
    interpolating polarize_general.
    """
    if not isinstance(P, GridExactPolarizer):
        return polarize_general(u, P)
    if P.domain is not u.domain and P.domain != u.domain:
        raise RearrangeError("polarizer was built for a different domain")
    if not u.nonneg and np.any(u.values < 0):
        raise RearrangeError("polarization requires nonnegative input")
    partner, in_H = P._tables
    flat = u.values.ravel()
    uref = np.where(partner >= 0, flat[np.where(partner >= 0, partner, 0)], 0.0)
    uref = uref.reshape(u.domain.grid_shape)
    out = np.where(in_H, np.maximum(u.values, uref), np.minimum(u.values, uref))
    return GridFunction(u.domain, out, nonneg=True)


def polarize_general(u: GridFunction, P: Polarizer) -> GridFunction:
    """Polarization for an arbitrary half-space via multilinear interpolation.

    The reflected value is interpolated from the zero-extended lattice, so the
    exact permutation invariants do NOT hold; the result is flagged
    approximate.  At lattice-exact reflections the interpolation weights snap
    to 0/1 and the result agrees with `polarize` bit for bit.
    """
    if not u.nonneg and np.any(u.values < 0):
        raise RearrangeError("polarization requires nonnegative input")
    dom = u.domain
    pts = np.stack([c.ravel() for c in dom.centers], axis=1)
    refl = pts - 2.0 * (pts @ np.asarray(P.normal) - P.offset)[:, None] * np.asarray(P.normal)
    frac = (refl + dom.half_extent) / dom.h - 0.5
    snapped = np.rint(frac)
    frac = np.where(np.abs(frac - snapped) < 1e-9, snapped, frac)
    base = np.floor(frac).astype(np.int64)
    w = frac - base
    n = dom.cells_per_axis
    uref = np.zeros(pts.shape[0])
    for corner in np.ndindex(*(2,) * dom.dim):
        idx = base + np.asarray(corner)
        weight = np.ones(pts.shape[0])
        for d in range(dom.dim):
            weight = weight * np.where(corner[d] == 1, w[:, d], 1.0 - w[:, d])
        ok = np.all((idx >= 0) & (idx < n), axis=1)
        flat = np.zeros(pts.shape[0], dtype=np.int64)
        mult = 1
        for d in reversed(range(dom.dim)):
            flat += np.where(ok, idx[:, d], 0) * mult
            mult *= n
        uref += weight * np.where(ok, u.values.ravel()[flat], 0.0)
    in_H = (pts @ np.asarray(P.normal)) <= P.offset + 1e-15
    in_H = in_H.reshape(dom.grid_shape)
    uref = uref.reshape(dom.grid_shape)
    out = np.where(in_H, np.maximum(u.values, uref), np.minimum(u.values, uref))
    out = np.maximum(out, 0.0)
    return GridFunction(dom, out, nonneg=True, approximate=True)


def schwarz_symmetrize(u: GridFunction) -> GridFunction:
    """Radially decreasing rearrangement by sort-and-assign.

    The multiset of unmasked values is sorted descending and written to cells
    in order of increasing center radius (ties by lexicographic flat index),
    so the operation is an exact permutation: equimeasurable by construction
    and idempotent bit for bit.
    """
    if np.any(u.values < 0):
        raise RearrangeError("Schwarz symmetrization requires nonnegative input")
    dom = u.domain
    vals = np.sort(u.values[dom.mask])[::-1]
    out = np.zeros(dom.grid_shape)
    out.ravel()[dom.radial_order] = vals
    return GridFunction(dom, out, nonneg=True)


def distribution_function(u: GridFunction, t: float) -> float:
    """Measure of the super-level set {u > t} on the active cells."""
    dom = u.domain
    return float(dom.h ** dom.dim * np.count_nonzero(u.values[dom.mask] > t))


@dataclass(frozen=True)
class PolarizerSequence:
    """Reproducible i.i.d. sample from the grid-exact polarizer family."""

    domain: GridDomain
    seed: int
    items: tuple = field(default=())

    def __len__(self):
        return len(self.items)

    def __getitem__(self, k) -> GridExactPolarizer:
        return self.items[k]

    def to_json(self) -> str:
        return json.dumps({"seed": self.seed,
                           "items": [p.to_json_item() for p in self.items]})

    @classmethod
    def from_json(cls, text: str, domain: GridDomain) -> "PolarizerSequence":
        doc = json.loads(text)
        items = []
        for it in doc["items"]:
            if "axis" in it:
                kind, code = "axis", it["axis"]
            else:
                kind, code = "diag", it["diag"]
            items.append(GridExactPolarizer(domain, kind, int(code),
                                            int(it["sign"]), int(it["offset_cells"])))
        return cls(domain=domain, seed=int(doc["seed"]), items=tuple(items))


def _allowed_offsets(domain: GridDomain, kind: str) -> int:
    """Largest offset_cells whose hyperplane still cuts the active region."""
    reach = domain.radius if domain.shape == "ball" else None
    h = domain.h
    if kind == "axis":
        lim = reach if reach is not None else domain.half_extent
        m_max = int(np.ceil(lim / h - 1e-9)) - 1
    else:
        if reach is not None:
            m_max = int(np.ceil(np.sqrt(2.0) * reach / h - 1e-9)) - 1
        else:
            m_max = 2 * (domain.cells_per_axis // 2) - 1
    return m_max


def sample_polarizers(domain: GridDomain, seed: int, count: int) -> PolarizerSequence:
    """Draw `count` grid-exact polarizers i.i.d. from the allowed family.

    Directions are uniform over the 2N axis normals plus, in 2D, the four
    diagonals; offsets are uniform over the integer offsets whose hyperplane
    intersects the active domain.
    """
    if count < 1:
        raise RearrangeError("count must be >= 1")
    axis_max = _allowed_offsets(domain, "axis")
    diag_max = _allowed_offsets(domain, "diag") if domain.dim == 2 else 0
    if axis_max < 1:
        raise RearrangeError("domain too small: no axis hyperplane with b >= h fits")
    directions = [("axis", d, s) for d in range(domain.dim) for s in (1, -1)]
    if domain.dim == 2 and diag_max >= 1:
        directions += [("diag", c, s) for c in (0, 1) for s in (1, -1)]
    rng = np.random.default_rng(seed)
    items = []
    for _ in range(count):
        kind, code, sign = directions[int(rng.integers(0, len(directions)))]
        m_max = axis_max if kind == "axis" else diag_max
        m = int(rng.integers(1, m_max + 1))
        items.append(GridExactPolarizer(domain, kind, code, sign, m))
    return PolarizerSequence(domain=domain, seed=seed, items=tuple(items))


def iterate_polarizations(u: GridFunction, seq: PolarizerSequence, n_max: int,
                          target_tol: float = 0.0, model=None,
                          p: Optional[float] = None):
    """Iterate u -> u^{H_1...H_n}, tracking distance to the symmetrization.

    Returns (u_n, history) where history rows record per step the L^p distance
    to u*, the constraint integral, the p-Dirichlet energy, and the quasi-linear
    energy integral when a model is supplied.  Stops after n_max steps or once
    the distance drops to target_tol times the initial L^p norm.  Polarizers
    are consumed cyclically if n_max exceeds the sequence length.
    """
    if np.any(u.values < 0):
        raise RearrangeError("iterate_polarizations requires nonnegative input")
    if p is None:
        p = model.integrand.p if model is not None else 2.0
    u_star = schwarz_symmetrize(u)
    norm0 = lp_norm(u, p)
    tol_abs = target_tol * norm0

    def row(n, w):
        d = lp_norm(w.with_values(w.values - u_star.values, nonneg=False), p)
        rec = {"step": n, "dist": d, "grad_p": grad_lp_norm(w, p) ** p}
        if model is not None:
            rec["W"] = integrate(model.constraint.G_field(w))
            rec["J"] = integrate(model.integrand.j_field(w))
            rec["Fterm"] = integrate(model.nonlinearity.F_field(w))
        return rec

    history = [row(0, u)]
    current = u
    for n in range(1, n_max + 1):
        if history[-1]["dist"] <= tol_abs:
            break
        current = polarize(current, seq[(n - 1) % len(seq)])
        history.append(row(n, current))
    return current, history
