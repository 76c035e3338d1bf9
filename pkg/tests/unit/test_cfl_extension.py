"""
Unit tests for the CFL extension of reduced models.
"""
import numpy as np
import pytest

from romfdtd.fine.fine_system import assemble_fine_system, check_passivity
from romfdtd.grid.yee_grid import cfl_limit
from romfdtd.reduction.cfl_extension import (
    extend_cfl,
    generalized_singular_values,
    model_cfl_limit,
)
from romfdtd.reduction.mor import Projection, ReducedSystem, build_projection, reduce
from tests.conftest import build_random_region, build_region


def toy_model(k):
    n_e, n_h = k.shape
    return ReducedSystem(
        r11=np.eye(n_e),
        r22=np.eye(n_h),
        f11=np.zeros((n_e, n_e)),
        k=np.asarray(k, dtype=float),
        b=np.zeros((n_e + n_h, 1)),
        l=np.zeros((n_e + n_h, 1)),
        s=np.ones((1, 1)),
        dt=1e-12,
        projection=Projection(v1=np.eye(n_e), v2=np.eye(n_h)),
    )


def identity_model(region, dt):
    system = assemble_fine_system(region, dt)
    return reduce(system, Projection.identity(system.n_e, system.n_h))


class TestGeneralizedSingularValues:
    """Test suite for the singular values that set the model limit"""

    def test_zero_coupling(self):
        """Test K = 0 gives zero singular values and an infinite limit"""
        model = toy_model(np.zeros((2, 2)))

        np.testing.assert_array_equal(generalized_singular_values(model), [0.0, 0.0])
        assert model_cfl_limit(model) == np.inf

    def test_vacuum_limit_equals_fine_cfl(self):
        """Test that 2 / s_max reproduces the Yee limit of the fine mesh"""
        region = build_region(width=3, height=2, r=2, dx=2e-3, dy=3e-3)
        system = assemble_fine_system(region, 1e-13)

        assert model_cfl_limit(system) == pytest.approx(cfl_limit(region.hx, region.hy), rel=1e-9)

    def test_material_scaling(self):
        """Test that eps and mu four times larger quarter every s_k"""
        vacuum = assemble_fine_system(build_region(width=3, height=3, r=1), 1e-12)
        loaded = assemble_fine_system(
            build_region(width=3, height=3, r=1, eps_r=4.0, mu_r=4.0), 1e-12
        )

        np.testing.assert_allclose(
            generalized_singular_values(loaded), generalized_singular_values(vacuum) / 4.0,
            rtol=1e-10,
        )


class TestExtendCfl:
    """Test suite for singular-value clipping"""

    def test_hand_computed_clip(self):
        """Test that only the value above 2/dt_target is clipped"""
        model = toy_model(np.diag([1e12, 4e11]))

        extended = extend_cfl(model, 3e-12)

        threshold = 2.0 / 3e-12 * (1 - 1e-6)
        np.testing.assert_allclose(
            generalized_singular_values(extended), [threshold, 4e11], rtol=1e-12
        )
        np.testing.assert_allclose(extended.k, np.diag([threshold, 4e11]), rtol=1e-12, atol=1e-3)
        assert extended.extended_to == 3e-12

    def test_below_limit_returns_same_model(self):
        """Test that nothing changes when every s_k is already small"""
        model = toy_model(np.diag([1e11, 4e10]))

        assert extend_cfl(model, 3e-12) is model

    def test_zero_coupling_untouched(self):
        """Test that K = 0 needs no clipping"""
        model = toy_model(np.zeros((2, 2)))

        assert extend_cfl(model, 1e-9) is model

    def test_idempotent(self, rng):
        """Test that extending twice changes nothing further"""
        region = build_random_region(rng, width=2, height=2, r=2)
        base = cfl_limit(region.hx, region.hy, region.materials)
        model = identity_model(region, 2 * base)

        once = extend_cfl(model, 2 * base)
        twice = extend_cfl(once, 2 * base)

        assert np.max(np.abs(twice.k - once.k)) <= 1e-14 * np.max(np.abs(once.k))

    def test_larger_target_clips_more(self, rng):
        """Test that s_max is nonincreasing in dt_target"""
        region = build_random_region(rng, width=2, height=2, r=2)
        base = cfl_limit(region.hx, region.hy, region.materials)
        model = identity_model(region, base)

        limits = [model_cfl_limit(extend_cfl(model, f * base)) for f in (1.5, 2.0, 3.0)]

        assert limits == sorted(limits)
        for factor, limit in zip((1.5, 2.0, 3.0), limits):
            assert limit >= factor * base

    def test_unclipped_values_unchanged(self, rng):
        """Test that the correction only touches the clipped directions"""
        region = build_random_region(rng, width=2, height=2, r=2)
        base = cfl_limit(region.hx, region.hy, region.materials)
        model = identity_model(region, base)
        dt_target = 2 * base

        before = generalized_singular_values(model)
        after = generalized_singular_values(extend_cfl(model, dt_target))

        threshold = 2.0 / dt_target * (1 - 1e-6)
        np.testing.assert_allclose(
            after, np.minimum(before, threshold), rtol=1e-9, atol=1e-12 * before[0]
        )

    def test_other_blocks_untouched(self, rng):
        """Test that R11, R22, F11, B, L and S are carried over unchanged"""
        region = build_random_region(rng, width=2, height=2, r=2)
        base = cfl_limit(region.hx, region.hy, region.materials)
        system = assemble_fine_system(region, base)
        model = reduce(system, build_projection(system, 40))

        extended = extend_cfl(model, 3 * base)

        for name in ("r11", "r22", "f11", "b", "l", "s"):
            np.testing.assert_array_equal(getattr(extended, name), getattr(model, name))

    @pytest.mark.parametrize("factor", [1.5, 2.0, 3.0])
    def test_extended_model_is_passive(self, factor):
        """Test passivity at 0.99 x the extended step, where the original fails"""
        region = build_region(width=2, height=2, r=2, sigma=0.1)
        base = cfl_limit(region.hx, region.hy, region.materials)
        dt = 0.99 * factor * base
        model = identity_model(region, dt)

        extended = extend_cfl(model, factor * base)

        assert not check_passivity(model, dt).passed
        assert check_passivity(extended, dt).passed

    @pytest.mark.parametrize(
        "dt_target, margin",
        [(0.0, 1e-6), (-1e-12, 1e-6), (1e-12, 1.0), (1e-12, 0.0), (1e-12, -0.1)],
    )
    def test_invalid_arguments_rejected(self, dt_target, margin):
        """Test ValueError on a bad target or margin"""
        with pytest.raises(ValueError):
            extend_cfl(toy_model(np.eye(2)), dt_target, margin)
