import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rgflow import lattice
from rgflow.lattice import Kernel, TorusSpec


def even_kernel(spec, values):
    """Symmetrise an arbitrary array into an even kernel."""
    v = np.asarray(values, dtype=float)
    refl = np.roll(np.flip(v, axis=spec.axes), 1, axis=spec.axes)
    return Kernel(spec, 0.5 * (v + refl))


class TestTorusSpec:
    def test_side(self):
        assert TorusSpec(4, 2, 5).M == 32
        assert TorusSpec(2, 4, 2).shape == (16, 16)

    def test_odd_side_rejected(self):
        with pytest.raises(ValueError):
            TorusSpec(1, 3, 1)

    def test_bad_dimension(self):
        with pytest.raises(ValueError):
            TorusSpec(0, 2, 3)

    def test_memory_budget(self):
        with pytest.raises(MemoryError):
            TorusSpec(4, 2, 8)

    def test_centered_boundary_positive(self):
        c = TorusSpec(1, 2, 2).centered()
        assert list(c) == [0, 1, 2, -1]


class TestGreen:
    def test_two_site_inverse(self):
        # oracle: direct inversion of (-Delta + 1) on the two-site torus
        g = lattice.green_kernel(TorusSpec(1, 2, 1), 1.0)
        ref = np.linalg.inv(np.array([[3.0, -2.0], [-2.0, 3.0]]))[0]
        np.testing.assert_allclose(g.values, ref, atol=1e-14)
        np.testing.assert_allclose(g.values, [0.6, 0.4], atol=1e-14)

    def test_stencil_reproduces_delta(self):
        spec = TorusSpec(4, 2, 3)
        g = lattice.green_kernel(spec, 1.0)
        minus_lap = -lattice.laplacian_values(g.values, spec, sign=1)
        np.testing.assert_allclose(minus_lap + g.values, Kernel.delta(spec).values, atol=1e-10)

    def test_permutation_symmetry(self):
        g = lattice.green_kernel(TorusSpec(4, 2, 4), 0.25)
        ref = g.at((1, 2, 0, 0))
        for p in itertools.permutations((1, 2, 0, 0)):
            assert g.at(p) == pytest.approx(ref, rel=1e-12)

    def test_even_and_rotation_invariant(self):
        g = lattice.green_kernel(TorusSpec(4, 2, 3), 0.5)
        assert g.is_even()
        assert g.is_rotation_invariant()

    def test_massless_needs_policy(self):
        with pytest.raises(ValueError, match="massless Green function undefined on torus"):
            lattice.green_kernel(TorusSpec(2, 2, 3), 0.0)

    def test_massless_zero_mode_dropped(self):
        spec = TorusSpec(2, 2, 3)
        g = lattice.green_kernel(spec, 0.0, zero_mode="drop")
        assert abs(g.values.sum()) < 1e-10
        resid = -lattice.laplacian_values(g.values, spec, sign=1) - (Kernel.delta(spec).values - 1.0 / spec.sites)
        assert np.max(np.abs(resid)) < 1e-10


class TestConvolve:
    def test_identity(self):
        spec = TorusSpec(2, 2, 3)
        b = lattice.green_kernel(spec, 1.0)
        np.testing.assert_allclose(lattice.convolve(Kernel.delta(spec), b).values, b.values, atol=1e-14)

    def test_shift_composition(self):
        spec = TorusSpec(1, 2, 2)
        e = Kernel.delta(spec, (1,))
        np.testing.assert_allclose(lattice.convolve(e, e).values, Kernel.delta(spec, (2,)).values, atol=1e-14)

    def test_brute_force_oracle(self):
        spec = TorusSpec(2, 2, 3)
        rng = np.random.default_rng(1)
        a = even_kernel(spec, rng.normal(size=spec.shape))
        b = even_kernel(spec, rng.normal(size=spec.shape))
        M = spec.M
        ref = np.zeros(spec.shape)
        for x in itertools.product(range(M), repeat=2):
            for y in itertools.product(range(M), repeat=2):
                ref[x] += a.values[y] * b.values[(x[0] - y[0]) % M, (x[1] - y[1]) % M]
        out = lattice.convolve(a, b)
        np.testing.assert_allclose(out.values, ref, atol=1e-10)
        assert out.is_even()
        np.testing.assert_allclose(lattice.convolve(b, a).values, out.values, atol=1e-12)

    def test_mismatched_specs(self):
        with pytest.raises(ValueError):
            lattice.convolve(Kernel.delta(TorusSpec(1, 2, 2)), Kernel.delta(TorusSpec(1, 2, 3)))


class TestDifferences:
    def test_constant_in_kernel_of_laplacian(self):
        spec = TorusSpec(2, 2, 3)
        k = Kernel(spec, np.full(spec.shape, 3.5))
        assert np.max(np.abs(lattice.apply_difference(k, "laplacian").values)) == 0

    @pytest.mark.parametrize("sign", [-1, 1])
    def test_second_moment_of_laplacian_delta(self, sign):
        spec = TorusSpec(1, 2, 2)
        lap = lattice.apply_difference(Kernel.delta(spec), "laplacian", sign=sign)
        assert lattice.second_moment(lap) == pytest.approx(2.0 * sign)

    def test_default_sign_gives_minus_two(self):
        lap = lattice.apply_difference(Kernel.delta(TorusSpec(1, 2, 2)), "laplacian")
        assert lattice.second_moment(lap) == pytest.approx(-2.0)

    def test_forward_grad_of_delta(self):
        spec = TorusSpec(2, 6, 1)
        g = lattice.apply_difference(Kernel.delta(spec), "forward_grad", e=1)
        expected = np.zeros(spec.shape)
        expected[0, 0] = -1.0
        expected[spec.index((-1, 0))] = 1.0
        np.testing.assert_array_equal(g.values, expected)

    def test_direction_forms_agree(self):
        spec = TorusSpec(2, 2, 3)
        k = lattice.green_kernel(spec, 1.0)
        a = lattice.apply_difference(k, "forward_grad", e=-2).values
        b = lattice.apply_difference(k, "forward_grad", e=(1, -1)).values
        np.testing.assert_array_equal(a, b)

    def test_bad_direction(self):
        with pytest.raises(ValueError):
            lattice.apply_difference(Kernel.delta(TorusSpec(2, 2, 2)), "forward_grad", e=3)
        with pytest.raises(ValueError):
            lattice.apply_difference(Kernel.delta(TorusSpec(2, 2, 2)), "curl")

    def test_laplacian_matches_symbol(self):
        spec = TorusSpec(2, 2, 3)
        rng = np.random.default_rng(3)
        k = even_kernel(spec, rng.normal(size=spec.shape))
        lap = lattice.apply_difference(k, "laplacian", sign=1).values
        via_fft = np.fft.ifftn(-spec.symbol() * np.fft.fftn(k.values)).real
        np.testing.assert_allclose(lap, via_fft, atol=1e-10)

    def test_grad_square_of_delta(self):
        spec = TorusSpec(2, 2, 3)
        gs = lattice.grad_square(Kernel.delta(spec))
        # origin: 1/2 * 4 directions * 1; each neighbour: 1/2 * 1
        assert gs.at((0, 0)) == pytest.approx(2.0)
        assert gs.at((1, 0)) == pytest.approx(0.5)
        assert gs.values.sum() == pytest.approx(4.0)


class TestMoments:
    def test_delta(self):
        m = lattice.moments(Kernel.delta(TorusSpec(2, 2, 2)))
        assert (m.q1, m.q2, m.q3, m.qss) == (1.0, 1.0, 1.0, 0.0)

    def test_two_sites(self):
        spec = TorusSpec(1, 2, 3)
        k = Kernel.delta(spec, (1,)) + Kernel.delta(spec, (-1,))
        m = lattice.moments(k)
        assert m.q1 == 2.0 and m.q2 == 2.0 and m.qss == 2.0

    def test_rotation_substitution(self):
        g = lattice.green_kernel(TorusSpec(4, 2, 4), 1.0)
        assert lattice.second_moment(g, 1) == pytest.approx(lattice.second_moment(g, 0), rel=1e-10)

    def test_parseval(self):
        g = lattice.green_kernel(TorusSpec(3, 2, 3), 0.3)
        assert lattice.spectral_square_sum(g) == pytest.approx(lattice.moments(g).q2, rel=1e-10)


class TestKernel:
    def test_read_only(self):
        k = Kernel.delta(TorusSpec(1, 2, 2))
        with pytest.raises(ValueError):
            k.values[0] = 2.0

    def test_rejects_nonfinite(self):
        spec = TorusSpec(1, 2, 2)
        with pytest.raises(ValueError):
            Kernel(spec, np.array([np.nan, 0, 0, 0]))

    def test_shape_check(self):
        with pytest.raises(ValueError):
            Kernel(TorusSpec(1, 2, 2), np.zeros(3))

    def test_odd_kernel_not_even(self):
        spec = TorusSpec(1, 2, 3)
        assert not Kernel.delta(spec, (1,)).is_even()


def test_dump_round_trip(tmp_path):
    spec = TorusSpec(2, 2, 3)
    g = lattice.green_kernel(spec, 0.7)
    path, meta = lattice.dump_kernel(tmp_path / "g.rfk", g, 0.7, {"scale": 1})
    assert path.read_bytes().startswith(b"RFK1 2 2 3 0.7\n")
    k, mass = lattice.load_kernel(path)
    assert mass == 0.7
    np.testing.assert_array_equal(k.values, g.values)
    assert '"scale": 1' in meta.read_text()


def test_load_rejects_garbage(tmp_path):
    p = tmp_path / "bad.rfk"
    p.write_bytes(b"NOPE\n")
    with pytest.raises(ValueError):
        lattice.load_kernel(p)


SPEC2 = TorusSpec(2, 2, 3)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, SPEC2.shape, elements=st.floats(-10, 10)), st.sampled_from([-1, 1]))
def test_difference_sums_telescope(values, sign):
    k = even_kernel(SPEC2, values)
    lap = lattice.apply_difference(k, "laplacian", sign=sign)
    assert abs(lap.values.sum()) <= 1e-9 * (1 + np.abs(values).sum())
    for e in (1, -1, 2, -2):
        grad = lattice.apply_difference(k, "forward_grad", e=e)
        assert abs(grad.values.sum()) <= 1e-9 * (1 + np.abs(values).sum())


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, SPEC2.shape, elements=st.floats(-10, 10)), st.sampled_from([-1, 1]))
def test_laplacian_second_moment_identity(values, sign):
    # sum_x (Delta q)(x) x_1^2 = 2 s q^(1), for q supported away from the wrap-around seam
    v = np.zeros(SPEC2.shape)
    inner = np.asarray(values)[:5, :5]
    for x in itertools.product(range(-2, 3), repeat=2):
        v[SPEC2.index(x)] = inner[x[0] + 2, x[1] + 2]
    k = even_kernel(SPEC2, v)
    lap = lattice.apply_difference(k, "laplacian", sign=sign)
    assert lattice.second_moment(lap) == pytest.approx(2 * sign * k.values.sum(), abs=1e-8 * (1 + np.abs(v).sum()))


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, SPEC2.shape, elements=st.floats(-10, 10)))
def test_library_kernels_are_even(values):
    k = even_kernel(SPEC2, values)
    assert k.is_even()
    assert lattice.convolve(k, k).is_even()
    assert lattice.grad_square(k).is_even()
    assert lattice.apply_difference(k, "laplacian").is_even()
