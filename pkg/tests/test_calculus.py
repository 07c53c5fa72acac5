import numpy as np
import pytest
from hypothesis import given, strategies as st

from wco.calculus import (
    change_of_variables,
    compute_h,
    cond_expectation,
    cond_expectation_inv,
    density_mu_sup_w,
    is_dirac_at_zero,
)
from wco.errors import PreconditionError
from wco.operator import WcOperator
from wco.selftest import projection_oracle

from conftest import collapse_instance, diagonal_instance, instances, real_vectors


def test_h_of_multiplication_operator_is_abs_w_squared():
    inst = diagonal_instance([2, 1j, 0, 1 - 1j], mu=np.array([1.0, 2.0, 3.0, 0.5]))
    np.testing.assert_allclose(compute_h(inst).values, [4, 1, 0, 2], rtol=1e-15)


def test_h_collapse_and_matrix_oracle(collapse):
    h = compute_h(collapse).values
    np.testing.assert_array_equal(h, [9.0, 0.0])
    a = WcOperator(collapse).matrix
    np.testing.assert_allclose(np.diag(a.conj().T @ a).real, h, atol=1e-12)


def test_h_zero_weight():
    inst = diagonal_instance([0, 0, 0]).with_symbol([1, 2, 0])
    assert np.all(compute_h(inst).values == 0)


def test_change_of_variables_examples(collapse):
    assert change_of_variables(collapse, 1.0) == pytest.approx(9.0)
    for x0 in range(2):
        chi = np.eye(2)[x0]
        assert change_of_variables(collapse, chi) == pytest.approx(compute_h(collapse).values[x0] * collapse.mu[x0])


def test_change_of_variables_random_eight_atoms():
    rng = np.random.default_rng(3)
    from wco.generators import generate_instance

    inst = generate_instance("random", 8, 3).instance
    f = rng.uniform(0, 5, 8)
    lhs = sum(f[inst.phi[x]] * abs(inst.w[x]) ** 2 * inst.mu[x] for x in range(8))
    h = compute_h(inst).values
    rhs = sum(f[x] * h[x] * inst.mu[x] for x in reversed(range(8)))
    assert change_of_variables(inst, f) == pytest.approx(lhs, rel=1e-12)
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_cond_expectation_identity_symbol():
    inst = diagonal_instance([1, 0, 2j])
    f = np.array([3.0, 4.0, 5.0])
    e = cond_expectation(inst, f)
    np.testing.assert_array_equal(e.values[inst.support], f[inst.support])
    assert list(e.mask) == [False, True, False]


def test_cond_expectation_collapse(collapse):
    e = cond_expectation(collapse, [9.0, 0.0])
    np.testing.assert_allclose(e.values, [1.0, 1.0])
    np.testing.assert_allclose(projection_oracle(collapse, np.array([9.0, 0.0])), [1.0, 1.0])
    assert not e.mask.any()


def test_cond_expectation_of_constant(collapse):
    e = cond_expectation(collapse, 4.5)
    np.testing.assert_allclose(e.values[e.canonical], 4.5)


def test_cond_expectation_inv_examples(collapse):
    g = cond_expectation_inv(collapse, [9.0, 0.0])
    np.testing.assert_allclose(g.values, [1.0, 0.0])
    assert list(g.mask) == [False, True]
    one = cond_expectation_inv(collapse, 1.0)
    np.testing.assert_array_equal(one.values, (compute_h(collapse).values > 0).astype(float))
    diag = diagonal_instance([1, -2, 1j])
    np.testing.assert_allclose(cond_expectation_inv(diag, [1.0, 2.0, 3.0]).values, [1, 2, 3])


def test_density_mu_sup_w_examples(collapse):
    np.testing.assert_allclose(density_mu_sup_w(collapse).values, [3.0, 0.0])
    unimodular = collapse.with_weight([1j, -1])
    np.testing.assert_allclose(density_mu_sup_w(unimodular).values, compute_h(unimodular).values)
    assert np.all(density_mu_sup_w(collapse.with_weight([0, 0])).values == 0)


@pytest.mark.parametrize(
    "m, expected",
    [({0.0: 1.0}, True), ({2.0: 1.0}, False), ({0.0: 0.5, 3.0: 0.5}, False), ([(0.0, 0.25), (0.0, 0.75)], True)],
)
def test_is_dirac_at_zero(m, expected):
    assert is_dirac_at_zero(m) is expected


def test_is_dirac_at_zero_requires_probability():
    with pytest.raises(PreconditionError, match="0.9"):
        is_dirac_at_zero({0.0: 0.9})


@given(instances(), st.data())
def test_change_of_variables_bridge(inst, data):
    f = np.abs(data.draw(real_vectors(inst.n)))
    lhs = np.sum(f[inst.phi] * np.abs(inst.w) ** 2 * inst.mu)
    rhs = np.sum(f * compute_h(inst).values * inst.mu)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


@given(instances())
def test_h_positive_on_image_of_support(inst):
    h = compute_h(inst).values
    assert np.all(h[inst.phi[inst.support]] > 0)


@given(instances(), st.data())
def test_division_by_h_integral(inst, data):
    f = np.abs(data.draw(real_vectors(inst.n)))
    h = compute_h(inst).values
    sup = inst.support
    z = inst.phi[sup]
    lhs = np.sum(f[z] / h[z] * np.abs(inst.w[sup]) ** 2 * inst.mu[sup])
    rhs = np.sum((f * inst.mu)[h > 0])
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-10)


@given(instances(), st.data())
def test_conditioning_against_measurable_functions(inst, data):
    f = data.draw(real_vectors(inst.n))
    g = data.draw(real_vectors(inst.n))
    e = cond_expectation(inst, f).values
    weight = np.abs(inst.w) ** 2 * inst.mu
    lhs = np.sum(g[inst.phi] * f * weight)
    rhs = np.sum(g[inst.phi] * e * weight)
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-9)


@given(instances(), st.data())
def test_bounded_functions_stay_bounded(inst, data):
    f = data.draw(real_vectors(inst.n))
    c = float(np.max(f[inst.support], initial=0.0))
    f = np.where(inst.support, f, c + 100)  # values off the support are irrelevant
    e = cond_expectation(inst, f)
    assert np.all(e.values[e.canonical] <= c + 1e-12 * max(1, abs(c)))
    assert np.all(cond_expectation_inv(inst, f).values <= max(c, 0) + 1e-12 * max(1, abs(c)))


@given(instances(), st.data())
def test_idempotent_and_matches_projection(inst, data):
    f = data.draw(real_vectors(inst.n))
    e = cond_expectation(inst, f)
    ee = cond_expectation(inst, e.values)
    sup = inst.support
    np.testing.assert_allclose(ee.values[sup], e.values[sup], rtol=1e-12, atol=1e-10)
    np.testing.assert_allclose(e.values[sup], projection_oracle(inst, f)[sup].real, atol=1e-10, rtol=1e-10)


@given(instances())
def test_inverse_representative_recomposes(inst):
    f = np.linspace(-1, 2, inst.n)
    g = cond_expectation_inv(inst, f)
    h = compute_h(inst).values
    assert np.all(g.values[h == 0] == 0)
    np.testing.assert_allclose(g.values[inst.phi][inst.support], cond_expectation(inst, f).values[inst.support],
                               atol=1e-12)
