import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from symmin import (CellField, GridError, GridFunction, export_csv,
                    grad_lp_norm, gradient_magnitude, integrate,
                    load_grid_function, lp_norm, make_domain,
                    save_grid_function)


class TestMakeDomain:
    def test_box_example(self):
        dom = make_domain(2, "box", 1.0, 0.5)
        assert dom.grid_shape == (4, 4)
        assert np.allclose(sorted(dom.axis_centers), [-0.75, -0.25, 0.25, 0.75])

    def test_ball_masking(self):
        dom = make_domain(2, "ball", 1.0, 0.25, radius=1.0)
        assert dom.grid_shape == (8, 8)
        r = np.sqrt(dom.radius_sq)
        assert np.all(r[dom.mask] <= 1.0 + 1e-12)
        assert np.all(r[~dom.mask] > 1.0)

    def test_non_integer_ratio_rejected(self):
        with pytest.raises(GridError):
            make_domain(2, "box", 1.0, 0.3)

    def test_radius_beyond_box_rejected(self):
        with pytest.raises(GridError):
            make_domain(2, "ball", 1.0, 0.25, radius=1.5)

    def test_dimension_restricted(self):
        for bad in (1, 4):
            with pytest.raises(GridError):
                make_domain(bad, "box", 1.0, 0.5)

    def test_no_cell_centered_at_origin(self):
        dom = make_domain(3, "box", 1.0, 0.25)
        assert np.abs(dom.axis_centers).min() > 0


class TestGridFunction:
    def test_masked_cells_forced_to_zero(self, small_ball):
        vals = np.ones(small_ball.grid_shape)
        u = GridFunction(small_ball, vals)
        assert np.all(u.values[~small_ball.mask] == 0.0)

    def test_nonneg_flag_enforced(self, box2d):
        vals = -np.ones(box2d.grid_shape)
        with pytest.raises(GridError):
            GridFunction(box2d, vals, nonneg=True)

    def test_nonfinite_rejected(self, box2d):
        vals = np.ones(box2d.grid_shape)
        vals[0, 0] = np.nan
        with pytest.raises(GridError):
            GridFunction(box2d, vals)

    def test_values_immutable(self, box2d):
        u = GridFunction(box2d, np.ones(box2d.grid_shape))
        with pytest.raises(ValueError):
            u.values[0, 0] = 2.0


class TestIntegrate:
    def test_constant_on_box(self):
        dom = make_domain(2, "box", 1.0, 0.5)
        assert integrate(GridFunction(dom, np.ones(dom.grid_shape))) == pytest.approx(4.0)

    def test_ball_area_against_pi(self):
        dom = make_domain(2, "ball", 1.0, 0.05, radius=1.0)
        ones = GridFunction(dom, np.ones(dom.grid_shape))
        assert abs(integrate(ones) - np.pi) <= 0.15

    def test_zero_field(self, box2d):
        assert integrate(GridFunction.zeros(box2d)) == 0.0

    @given(a=st.floats(-3, 3), b=st.floats(-3, 3), seed=st.integers(0, 100))
    @settings(max_examples=25, deadline=None)
    def test_linearity(self, a, b, seed):
        dom = make_domain(2, "box", 1.0, 0.25)
        rng = np.random.default_rng(seed)
        f = rng.random(dom.grid_shape)
        g = rng.random(dom.grid_shape)
        lhs = integrate(CellField(dom, a * f + b * g))
        rhs = a * integrate(CellField(dom, f)) + b * integrate(CellField(dom, g))
        assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(rhs))

    def test_bit_reproducible(self, box2d):
        rng = np.random.default_rng(7)
        vals = rng.random(box2d.grid_shape)
        u = GridFunction(box2d, vals)
        v = GridFunction(box2d, vals.copy())
        assert integrate(u) == integrate(v)


def _grad_loops(u):
    """Independent loop-based reimplementation of the gradient magnitude."""
    dom = u.domain
    n = dom.cells_per_axis
    out = np.zeros(dom.grid_shape)
    for idx in np.ndindex(*dom.grid_shape):
        acc = 0.0
        for d in range(dom.dim):
            nb = list(idx)
            nb[d] += 1
            val = u.values[tuple(nb)] if nb[d] < n else 0.0
            acc += ((val - u.values[idx]) / dom.h) ** 2
        out[idx] = np.sqrt(acc)
    return out


class TestGradientMagnitude:
    def test_linear_function_has_unit_gradient(self):
        dom = make_domain(2, "box", 1.0, 0.25)
        u = GridFunction(dom, dom.centers[0].copy())
        g = gradient_magnitude(u)
        # interior cells whose forward x-neighbor is interior see exactly 1
        assert np.allclose(g.values[:-1, :-1], 1.0)

    def test_constant_zero_inside_trace_on_boundary(self):
        dom = make_domain(2, "box", 1.0, 0.25)
        c = 3.0
        u = GridFunction(dom, np.full(dom.grid_shape, c))
        g = gradient_magnitude(u).values
        assert np.allclose(g[:-1, :-1], 0.0)
        # last row/column read zero outside: |Du| = c/h on faces, c/h sqrt(2) at corner
        assert g[-1, -1] == pytest.approx(np.sqrt(2) * c / dom.h)
        assert g[-1, 0] == pytest.approx(c / dom.h)

    @given(seed=st.integers(0, 1000))
    @settings(max_examples=20, deadline=None)
    def test_matches_loop_oracle(self, seed):
        dom = make_domain(2, "ball", 1.0, 0.25, radius=0.75)
        rng = np.random.default_rng(seed)
        vals = rng.random(dom.grid_shape)
        vals[~dom.mask] = 0
        u = GridFunction(dom, vals)
        assert np.allclose(gradient_magnitude(u).values, _grad_loops(u), atol=1e-14)


class TestNorms:
    def test_indicator_l1(self):
        dom = make_domain(2, "box", 1.0, 0.25)
        vals = np.zeros(dom.grid_shape)
        vals[2, 2] = vals[3, 3] = vals[4, 4] = 1.0
        assert lp_norm(GridFunction(dom, vals), 1) == pytest.approx(3 * 0.25 ** 2)

    def test_homogeneity(self):
        dom = make_domain(2, "box", 1.0, 0.25)
        rng = np.random.default_rng(1)
        vals = rng.random(dom.grid_shape)
        u = GridFunction(dom, vals)
        cu = GridFunction(dom, 2.5 * vals)
        for p in (1.0, 1.5, 2.0):
            assert lp_norm(cu, p) == pytest.approx(2.5 * lp_norm(u, p), rel=1e-12)

    def test_brute_force_oracle(self):
        dom = make_domain(2, "box", 1.0, 0.25)
        rng = np.random.default_rng(2)
        vals = rng.random(dom.grid_shape)
        u = GridFunction(dom, vals)
        p = 1.5
        brute = (sum(abs(v) ** p for v in vals.ravel()) * dom.h ** 2) ** (1 / p)
        assert lp_norm(u, p) == pytest.approx(brute, rel=1e-12)

    def test_p_below_one_rejected(self, box2d):
        with pytest.raises(GridError):
            lp_norm(GridFunction.zeros(box2d), 0.5)

    def test_grad_norm_consistency(self):
        dom = make_domain(2, "box", 1.0, 0.25)
        rng = np.random.default_rng(3)
        u = GridFunction(dom, rng.random(dom.grid_shape))
        assert grad_lp_norm(u, 2.0) == pytest.approx(
            lp_norm(gradient_magnitude(u), 2.0))


class TestBinaryFormat:
    @given(seed=st.integers(0, 10_000))
    @settings(max_examples=15, deadline=None)
    def test_round_trip_bit_exact(self, seed, tmp_path_factory):
        dom = make_domain(2, "ball", 1.0, 0.25, radius=1.0)
        rng = np.random.default_rng(seed)
        vals = rng.random(dom.grid_shape)
        vals[~dom.mask] = 0
        u = GridFunction(dom, vals)
        path = tmp_path_factory.mktemp("io") / "u.symf"
        save_grid_function(u, path)
        v = load_grid_function(path)
        assert np.array_equal(u.values, v.values)
        assert v.domain == dom

    def test_corrupt_magic_reports_offset(self, tmp_path, box2d):
        path = tmp_path / "u.symf"
        save_grid_function(GridFunction.zeros(box2d), path)
        raw = bytearray(path.read_bytes())
        raw[:4] = b"XXXX"
        path.write_bytes(bytes(raw))
        with pytest.raises(GridError, match="offset 0"):
            load_grid_function(path)

    def test_truncated_payload_rejected(self, tmp_path, box2d):
        path = tmp_path / "u.symf"
        save_grid_function(GridFunction.zeros(box2d), path)
        path.write_bytes(path.read_bytes()[:-9])
        with pytest.raises(GridError, match="size mismatch"):
            load_grid_function(path)

    def test_csv_export(self, tmp_path):
        dom = make_domain(2, "box", 0.5, 0.25)
        u = GridFunction(dom, np.arange(16.0).reshape(4, 4))
        export_csv(u, tmp_path / "u.csv")
        lines = (tmp_path / "u.csv").read_text().strip().splitlines()
        assert len(lines) == 16
        first = lines[0].split(",")
        assert first[0] == "0" and first[1] == "0"
        assert float(first[2]) == pytest.approx(-0.375)
