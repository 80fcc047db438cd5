import numpy as np
import pytest

from config import settings
from models.domain import Domain
from models.field import ScalarField
from models.geometry import Box, HalfSpace
from models.kernel import KernelMode, KernelSpec, NearRule, Part
from services.cache_service import CacheService
from services.energy_service import CapillarityKind, EnergyService
from services.kernel_service import KernelService
from tests.conftest import SQRT2, interval_interaction
from utils.exceptions import InvalidInputError, NumericalError


class TestSetInteraction:
    def test_adjacent_half_intervals(self, interval):
        E, F = Box((-1.0,), (0.0,)), Box((0.0,), (1.0,))
        value = KernelService.interaction(E, F, KernelSpec(0.25, 1, KernelMode.SET), interval)
        assert value == pytest.approx(8 - 4 * SQRT2, rel=1e-5)

    def test_separated_intervals_match_closed_form(self, interval):
        E, F = Box((-1.0,), (-0.5,)), Box((0.25,), (1.0,))
        for s in (0.1, 0.3, 0.45):
            value = KernelService.interaction(E, F, KernelSpec(s, 1, KernelMode.SET), interval)
            assert value == pytest.approx(interval_interaction(-1.0, -0.5, 0.25, 1.0, s), rel=1e-5)

    def test_increases_with_s(self, interval):
        E, F = Box((-1.0,), (0.0,)), Box((0.0,), (1.0,))
        values = [KernelService.interaction(E, F, KernelSpec(s, 1, KernelMode.SET), interval)
                  for s in (0.1, 0.2, 0.3, 0.4, 0.45)]
        assert all(b > a for a, b in zip(values[:-1], values[1:]))

    @pytest.mark.parametrize("s", [0.1, 0.25, 0.4])
    def test_dilation_scales_by_power(self, interval, s):
        E, F = Box((-1.0,), (0.0,)), Box((0.0,), (1.0,))
        spec = KernelSpec(s, 1, KernelMode.SET)
        base = KernelService.interaction(E, F, spec, interval)
        dilated = KernelService.interaction(E.scaled(2.0), F.scaled(2.0), spec, interval.scaled(2.0))
        assert dilated == pytest.approx(2.0 ** (1 - 2 * s) * base, rel=1e-6)

    def test_dilation_in_the_plane(self, unit_square, left_half_square):
        right = Box((0.5, 0.0), (1.0, 1.0))
        spec = KernelSpec(0.3, 2, KernelMode.SET)
        base = KernelService.interaction(left_half_square, right, spec, unit_square)
        dilated = KernelService.interaction(left_half_square.scaled(3.0), right.scaled(3.0), spec,
                                            unit_square.scaled(3.0))
        assert dilated == pytest.approx(3.0 ** (2 - 2 * 0.3) * base, rel=1e-6)

    def test_symmetric_in_its_arguments(self, unit_square, left_half_square):
        right = Box((0.5, 0.0), (1.0, 1.0))
        spec = KernelSpec(0.3, 2, KernelMode.SET)
        a = KernelService.interaction(left_half_square, right, spec, unit_square)
        b = KernelService.interaction(right, left_half_square, spec, unit_square)
        assert a == b
        assert a > 0

    def test_overlapping_sets_rejected(self, interval):
        with pytest.raises(InvalidInputError):
            KernelService.interaction(Box((-1.0,), (0.5,)), Box((0.0,), (1.0,)),
                                      KernelSpec(0.25, 1, KernelMode.SET), interval)

    def test_rejects_s_at_one_half(self, interval):
        spec = KernelSpec(0.5, 1, KernelMode.SQUARED)
        with pytest.raises(InvalidInputError):
            KernelService.interaction(Box((-1.0,), (0.0,)), Box((0.0,), (1.0,)), spec, interval)


class TestFractionalPerimeter:
    def test_interior_part(self, interval, right_half_line):
        value = KernelService.frac_perimeter(right_half_line, interval, 0.25, Part.INTERIOR)
        assert value == pytest.approx(8 - 4 * SQRT2, rel=1e-5)

    def test_exterior_part_includes_far_tail(self, interval, right_half_line):
        value = KernelService.frac_perimeter(right_half_line, interval, 0.25, Part.EXTERIOR)
        assert value == pytest.approx(8 * SQRT2 - 8, rel=1e-3)

    def test_full_is_interior_plus_exterior(self, interval, right_half_line):
        parts = [KernelService.frac_perimeter(right_half_line, interval, 0.3, p) for p in (Part.INTERIOR,
                                                                                             Part.EXTERIOR)]
        full = KernelService.frac_perimeter(right_half_line, interval, 0.3, Part.FULL)
        assert full == pytest.approx(sum(parts), rel=1e-9)

    def test_complement_in_omega_has_same_interior_perimeter(self, unit_square, left_half_square):
        right = Box((0.5, 0.0), (1.0, 1.0))
        a = KernelService.frac_perimeter(left_half_square, unit_square, 0.25)
        b = KernelService.frac_perimeter(right, unit_square, 0.25)
        assert a == pytest.approx(b, rel=1e-10)

    def test_truncation_lowers_the_value(self, interval, right_half_line):
        full = KernelService.frac_perimeter(right_half_line, interval, 0.25)
        truncated = KernelService.frac_perimeter(right_half_line, interval, 0.25, truncation=0.5)
        assert 0 < truncated < full

    @pytest.mark.parametrize("s", [0.5, 0.75, 0.0])
    def test_rejects_s_outside_range(self, interval, right_half_line, s):
        with pytest.raises(InvalidInputError):
            KernelService.frac_perimeter(right_half_line, interval, s)

    def test_fractional_capillarity(self):
        omega = Domain.box(0.0, 1.0, 256)
        E = Box((0.0,), (0.5,))
        value = EnergyService.capillarity(E, omega, 0.5, CapillarityKind.FRACTIONAL, s=0.25)
        interior = interval_interaction(0.0, 0.5, 0.5, 1.0, 0.25)
        assert interior == pytest.approx(8 * np.sqrt(0.5) - 4)
        assert value == pytest.approx(interior + 0.5 * 4.0, rel=2e-3)

    def test_fractional_capillarity_needs_contained_set(self):
        omega = Domain.box(0.0, 1.0, 64)
        with pytest.raises(InvalidInputError):
            EnergyService.capillarity(Box((0.5,), (1.5,)), omega, 0.5, CapillarityKind.FRACTIONAL, s=0.25)


class TestFieldKernel:
    def test_linear_field_interior(self):
        omega = Domain.box(0.0, 1.0, 1024)
        u = ScalarField(omega.cell_centers()[..., 0], omega)
        s = 0.25
        expected = 2 / ((2 - 2 * s) * (3 - 2 * s))
        assert KernelService.field_kernel(u, omega, s) == pytest.approx(expected, rel=1e-2)

    def test_constant_field_matching_datum_has_no_energy(self, interval):
        u = ScalarField(np.full(256, 0.5), interval, exterior=0.5)
        assert KernelService.field_kernel(u, interval, 0.3, Part.FULL) == pytest.approx(0.0, abs=1e-14)

    def test_indicator_field_counts_ordered_pairs(self, interval, right_half_line):
        # |u_i - u_j|^2 = 4 across the interface, and ordered pairs count each pair twice
        u = ScalarField(np.where(interval.cell_centers()[..., 0] > 0, 1.0, -1.0), interval, exterior=right_half_line)
        k_int, k_ext = KernelService.kernel_parts(u, 0.25, Part.FULL)
        assert k_int == pytest.approx(8 * KernelService.frac_perimeter(right_half_line, interval, 0.25), rel=1e-9)
        ext = KernelService.frac_perimeter(right_half_line, interval, 0.25, Part.EXTERIOR)
        assert k_ext == pytest.approx(8 * ext, rel=1e-9)

    def test_exterior_needs_datum(self, interval):
        u = ScalarField(np.zeros(256), interval)
        with pytest.raises(InvalidInputError):
            KernelService.field_kernel(u, interval, 0.25, Part.EXTERIOR)

    def test_domain_mismatch(self, interval, unit_interval):
        u = ScalarField(np.zeros(256), interval)
        with pytest.raises(InvalidInputError):
            KernelService.field_kernel(u, unit_interval, 0.25)

    @pytest.mark.parametrize("s", [0.25, 0.75])
    def test_gradient_matches_central_differences(self, rng, s):
        omega = Domain.box(-1.0, 1.0, 16)
        u = ScalarField(rng.uniform(-0.9, 0.9, 16), omega, exterior=HalfSpace((-1.0,), 0.0))
        g_int, g_ext = KernelService.kernel_gradient(u, s, Part.FULL)
        grad = g_int + g_ext
        step = 1e-6
        for i in (0, 5, 15):
            up = u.values.copy()
            down = u.values.copy()
            up[i] += step
            down[i] -= step
            plus = sum(KernelService.kernel_parts(u.with_values(up), s, Part.FULL))
            minus = sum(KernelService.kernel_parts(u.with_values(down), s, Part.FULL))
            assert grad[i] == pytest.approx((plus - minus) / (2 * step), rel=1e-5, abs=1e-8)

    def test_bbm_seminorm_of_linear_field(self):
        omega = Domain.box(0.0, 1.0, 512)
        u = ScalarField(omega.cell_centers()[..., 0], omega)
        for s in (0.25, 0.4):
            scaled = (0.5 - s) * KernelService.bbm_seminorm(u, omega, s)
            assert scaled == pytest.approx(1 / (2 - 2 * s), rel=1e-2)

    def test_bbm_rejects_s_at_one_half(self, unit_interval):
        u = ScalarField(np.zeros(256), unit_interval)
        with pytest.raises(InvalidInputError):
            KernelService.bbm_seminorm(u, unit_interval, 0.5)


class TestStencil:
    def test_weights_are_symmetric_and_nonnegative(self):
        stencil = KernelService.compute_stencil((6, 5), (0.2, 0.25), 0.3, NearRule.EXACT)
        assert np.all(stencil >= 0)
        assert np.array_equal(stencil, stencil[::-1, :])
        assert np.array_equal(stencil, stencil[:, ::-1])
        assert stencil[5, 4] == 0.0

    def test_margin_is_capped(self, monkeypatch, unit_square):
        monkeypatch.setattr(settings, "MAX_EXTENDED_CELLS", 10_000)
        pad = KernelService.capped_padding(unit_square)
        assert np.prod([c + 2 * p for c, p in zip(unit_square.cells, pad)]) <= 10_000
        assert all(p < q for p, q in zip(pad, unit_square.padding()))


class TestWeightCache:
    def test_store_and_load(self, tmp_path):
        stencil = np.arange(12.0).reshape(3, 4)
        CacheService.store_stencil("key-a", stencil, 2, 0.25, "exact", str(tmp_path))
        loaded = CacheService.load_stencil("key-a", str(tmp_path))
        assert np.array_equal(loaded, stencil)
        assert CacheService.load_stencil("key-b", str(tmp_path)) is None

    def test_other_version_is_discarded(self, tmp_path, monkeypatch):
        CacheService.store_stencil("key-a", np.ones(5), 1, 0.25, "exact", str(tmp_path))
        monkeypatch.setattr(settings, "TABLE_VERSION", settings.TABLE_VERSION + 1)
        assert CacheService.load_stencil("key-a", str(tmp_path)) is None

    def test_disabled_cache_is_silent(self):
        assert CacheService.load_stencil("anything") is None

    def test_tables_are_reused_from_disk(self, tmp_path, monkeypatch, interval, right_half_line):
        first = KernelService.frac_perimeter(right_half_line, interval, 0.25)
        KernelService.build_table(interval, 0.25, NearRule.EXACT, exterior=False, cache_dir=str(tmp_path))
        KernelService.clear()

        def fail(*args, **kwargs):
            raise NumericalError("stencil recomputed")

        monkeypatch.setattr(KernelService, "compute_stencil", staticmethod(fail))
        table = KernelService.build_table(interval, 0.25, NearRule.EXACT, exterior=False, cache_dir=str(tmp_path))
        assert table.domain == interval
        assert KernelService.frac_perimeter(right_half_line, interval, 0.25) == first
