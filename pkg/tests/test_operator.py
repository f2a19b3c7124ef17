import numpy as np
import pytest

import varlap as vl
from varlap.errors import GridMismatch, PlanMissing, SizeMismatch
from varlap.operator import fit_loglog_slope

from conftest import gaussian_on, tanh_dec_field, tanh_inc_field


def test_alpha2_reduces_to_second_difference():
    # u = x(1-x) has constant second derivative; the alpha = 2 stencil is
    # exact on it, including next to the boundary (u vanishes there)
    g = vl.build_grid(1, 0.0, 1.0, 7)
    x = g.axis_nodes(0)
    u = vl.GridFunction(g, x * (1.0 - x))
    op = vl.VariableOrderOperator(g, vl.OrderField.constant(2.0), mode="direct")
    v = op.apply(u)
    assert np.allclose(v.values[1:-1], 2.0, atol=1e-12)
    assert np.allclose(v.values, 2.0, atol=1e-12)


def test_constant_order_matches_dense_toeplitz():
    g = vl.build_grid(1, 0.0, 1.0, 4)
    op = vl.VariableOrderOperator(g, vl.OrderField.constant(1.5), mode="fast",
                                  rank=1)
    kern = op.constant_order_kernel(1.5)
    table = vl.weights_1d_closed_form(1.5, g.size)
    dense = np.array([[table.value([k - j]) for k in range(4)]
                      for j in range(4)]) * g.h ** -1.5
    rng = np.random.default_rng(0)
    u = rng.standard_normal(4)
    out = vl.apply_constant_order(kern, vl.GridFunction(g, u))
    assert np.allclose(out.values, dense @ u, atol=1e-13)


def test_constant_order_delta_gives_matrix_column():
    g = vl.build_grid(1, 0.0, 1.0, 8)
    op = vl.VariableOrderOperator(g, vl.OrderField.constant(0.7), mode="fast",
                                  rank=1)
    kern = op.constant_order_kernel(0.7)
    table = vl.weights_1d_closed_form(0.7, g.size)
    j = 3
    e = np.zeros(8)
    e[j] = 1.0
    out = vl.apply_constant_order(kern, vl.GridFunction(g, e))
    col = np.array([table.value([i - j]) for i in range(8)]) * g.h ** -0.7
    assert np.allclose(out.values, col, atol=1e-12)


def test_constant_order_2d_alpha2_is_five_point():
    g = vl.build_grid(2, 0.0, 1.0, 15)
    op = vl.VariableOrderOperator(g, vl.OrderField.constant(2.0), mode="fast",
                                  rank=1, quadrature_m=64)
    x = g.axis_nodes(0)
    u2 = np.sin(np.pi * x)[:, None] * np.sin(np.pi * x)[None, :]
    out = vl.apply_constant_order(op.constant_order_kernel(2.0),
                                  vl.GridFunction(g, u2.ravel()))
    pad = np.zeros((17, 17))
    pad[1:-1, 1:-1] = u2
    lap5 = (4.0 * pad[1:-1, 1:-1] - pad[:-2, 1:-1] - pad[2:, 1:-1]
            - pad[1:-1, :-2] - pad[1:-1, 2:]) / g.h**2
    assert np.allclose(out.values_nd, lap5, atol=1e-12)


def test_zero_input_zero_output(grid_2d):
    field = vl.sample_order(tanh_dec_field(), grid_2d)
    op = vl.VariableOrderOperator(grid_2d, field, mode="fast")
    out = op.apply(vl.GridFunction.zeros(grid_2d))
    assert np.all(out.values == 0.0)


def test_fast_collapses_at_chebyshev_node(grid_1d):
    base = vl.OrderField.from_callable(lambda p: np.full(p.shape[0], 0.0),
                                       0.1, 1.9)
    plan = vl.build_plan(0.1, 1.9, 7)
    node = plan.nodes[2]
    field = vl.sample_order(
        vl.OrderField.from_callable(lambda p: np.full(p.shape[0], node),
                                    0.1, 1.9), grid_1d)
    op = vl.VariableOrderOperator(grid_1d, field, mode="fast", plan=plan,
                                  weight_source="fft", quadrature_m=1024)
    const = vl.VariableOrderOperator(
        grid_1d, vl.sample_order(vl.OrderField.constant(node), grid_1d),
        mode="fast", rank=1, weight_source="fft", quadrature_m=1024)
    u = gaussian_on(grid_1d)
    assert np.allclose(op.apply(u).values, const.apply(u).values, atol=1e-12)
    del base


def test_fast_matches_direct_2d():
    g = vl.build_grid(2, -4.0, 4.0, 31)
    field = vl.sample_order(tanh_inc_field(), g)
    u = gaussian_on(g)
    direct = vl.VariableOrderOperator(g, field, mode="direct", quadrature_m=128)
    fast = vl.VariableOrderOperator(g, field, mode="fast", rank=7,
                                    quadrature_m=128)
    vd = direct.apply(u).values
    vf = fast.apply(u).values
    assert np.abs(vf - vd).max() <= 1e-6 * np.abs(vd).max()


def test_linearity(grid_1d):
    field = vl.sample_order(tanh_dec_field(), grid_1d)
    rng = np.random.default_rng(1)
    u = rng.standard_normal(grid_1d.size)
    w = rng.standard_normal(grid_1d.size)
    for mode in ("direct", "fast"):
        op = vl.VariableOrderOperator(grid_1d, field, mode=mode)
        lhs = op._apply_flat(2.5 * u - 1.25 * w)
        rhs = 2.5 * op._apply_flat(u) - 1.25 * op._apply_flat(w)
        scale = max(np.abs(rhs).max(), 1.0)
        assert np.abs(lhs - rhs).max() <= 1e-12 * scale


def test_symmetry_transport_1d():
    # even order field + even input on a symmetric grid -> even output
    g = vl.build_grid(1, -2.0, 2.0, 31)
    field = vl.sample_order(vl.OrderField.from_callable(
        lambda p: 1.0 + 0.5 * np.tanh(np.abs(p[:, 0])), 1.0, 1.5), g)
    x = g.axis_nodes(0)
    u = vl.GridFunction(g, np.cos(x) * np.exp(-x**2))
    op = vl.VariableOrderOperator(g, field, mode="direct")
    v = op.apply(u).values
    assert np.allclose(v, v[::-1], atol=1e-13)


def test_masked_apply_equals_zeroed_unmasked():
    g = vl.build_grid(2, -1.0, 1.0, 15)
    field = vl.sample_order(vl.OrderField.from_callable(
        lambda p: 1.2 + 0.3 * p[:, 0], 0.8, 1.6), g)
    mask = vl.make_mask(g, lambda p: np.sum(p**2, axis=-1) < 0.64)
    rng = np.random.default_rng(2)
    u = rng.standard_normal(g.size)
    masked_op = vl.VariableOrderOperator(g, field, mode="fast", mask=mask)
    plain_op = vl.VariableOrderOperator(g, field, mode="fast")
    u_zeroed = u.copy()
    u_zeroed[~mask.inside] = 0.0
    expect = plain_op._apply_flat(u_zeroed)
    expect[~mask.inside] = 0.0
    assert np.allclose(masked_op._apply_flat(u), expect, atol=0.0)


def test_gaussian_benchmark_value_1d():
    # frozen reference: decreasing tanh profile at h = 1/16 on [-4, 4]
    g = vl.build_grid(1, -4.0, 4.0, 127)
    field = vl.sample_order(tanh_dec_field(), g)
    op = vl.VariableOrderOperator(g, field, mode="direct")
    u = gaussian_on(g)
    exact = vl.gaussian_frac_lap(g.points()[:, 0], field.sampled, 1)
    err = np.abs(op.apply(u).values - exact).max()
    assert err == pytest.approx(7.35e-4, rel=0.10)


def test_dense_sign_structure_1d():
    g = vl.build_grid(1, -1.0, 1.0, 24)
    field = vl.sample_order(vl.OrderField.from_callable(
        lambda p: 1.0 + 0.4 * np.tanh(p[:, 0]), 0.5, 1.5), g)
    op = vl.VariableOrderOperator(g, field, mode="direct")
    mat = op.dense_matrix()
    diag = np.diag(mat)
    off = mat - np.diag(diag)
    assert np.all(diag > 0.0)
    assert np.all(off <= 1e-14)
    assert np.all(mat.sum(axis=1) >= -1e-10 * diag)


def test_grid_mismatch_errors(grid_1d):
    field = vl.sample_order(vl.OrderField.constant(1.0), grid_1d)
    op = vl.VariableOrderOperator(grid_1d, field, mode="fast")
    other = vl.build_grid(1, -4.0, 4.0, 31)
    with pytest.raises(GridMismatch):
        op.apply(vl.GridFunction.zeros(other))
    with pytest.raises(SizeMismatch):
        vl.apply_constant_order(op.constant_order_kernel(1.0),
                                vl.GridFunction.zeros(other))


def test_plan_missing():
    g = vl.build_grid(1, 0.0, 1.0, 7)
    op = vl.VariableOrderOperator(g, vl.OrderField.constant(1.0), mode="direct")
    with pytest.raises(PlanMissing):
        op.apply_fast(vl.GridFunction.zeros(g))


def test_operator_timing_report(grid_1d):
    field = vl.sample_order(tanh_dec_field(), grid_1d)
    op = vl.VariableOrderOperator(grid_1d, field, mode="fast", rank=3)
    rep = vl.operator_timing(op, n_reps=2)
    assert rep["seconds_per_apply"] > 0.0
    assert rep["rank"] == 3


def test_fit_loglog_slope():
    n = np.array([64, 128, 256, 512])
    assert fit_loglog_slope(n, 1e-6 * n**1.2) == pytest.approx(1.2, abs=1e-12)


def test_apply_convergence_order_2(grid_1d):
    # halving h doubles the accuracy order-2 style on the Gaussian
    errs = []
    for n in (63, 127):
        g = vl.build_grid(1, -4.0, 4.0, n)
        field = vl.sample_order(tanh_dec_field(), g)
        op = vl.VariableOrderOperator(g, field, mode="direct")
        u = gaussian_on(g)
        exact = vl.gaussian_frac_lap(g.points()[:, 0], field.sampled, 1)
        errs.append(np.abs(op.apply(u).values - exact).max())
    order = np.log2(errs[0] / errs[1])
    assert order == pytest.approx(2.0, abs=0.1)


def test_rank_loop_cost_ratio():
    # one forward plus r inverse transforms per apply: the rank-7 path stays
    # within a single order of magnitude of the rank-1 path
    g = vl.build_grid(1, -4.0, 4.0, 4095)
    field = vl.sample_order(tanh_dec_field(), g)
    t1 = vl.operator_timing(
        vl.VariableOrderOperator(g, field, mode="fast", rank=1), n_reps=7)
    t7 = vl.operator_timing(
        vl.VariableOrderOperator(g, field, mode="fast", rank=7), n_reps=7)
    assert t7["seconds_per_apply"] / t1["seconds_per_apply"] <= 9.0


def test_rank_certificate_bounds_fast_direct_gap():
    # the measured interpolation error certifies the fast/direct gap up to a
    # modest safety factor and the h^(-alpha_max) scale
    g = vl.build_grid(2, -4.0, 4.0, 31)
    field = vl.sample_order(tanh_inc_field(), g)
    u = gaussian_on(g)
    direct = vl.VariableOrderOperator(g, field, mode="direct", quadrature_m=128)
    ref = direct.apply(u).values
    for eps in (1e-4, 1e-7):
        r, measured = vl.estimate_rank(field.alpha_min, field.alpha_max, g.h,
                                       eps, dim=2)
        fast = vl.VariableOrderOperator(g, field, mode="fast", rank=r,
                                        quadrature_m=128)
        gap = np.abs(fast.apply(u).values - ref).max()
        bound = 10.0 * eps * np.abs(u.values).max() * g.h ** -field.alpha_max
        assert gap <= bound


def test_fast_matches_direct_3d():
    g = vl.build_grid(3, -1.0, 1.0, 7)
    field = vl.sample_order(vl.OrderField.from_callable(
        lambda p: 1.0 + 0.5 * np.tanh(np.sum(p, axis=-1)), 0.4, 1.6), g)
    rng = np.random.default_rng(9)
    u = vl.GridFunction(g, rng.standard_normal(g.size))
    direct = vl.VariableOrderOperator(g, field, mode="direct", quadrature_m=64)
    fast = vl.VariableOrderOperator(g, field, mode="fast", rank=9,
                                    quadrature_m=64)
    vd = direct.apply(u).values
    vf = fast.apply(u).values
    assert np.abs(vf - vd).max() <= 1e-5 * np.abs(vd).max()
