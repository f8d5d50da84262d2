import numpy as np
import pytest

from conftest import random_hermitian
from linalg_core import PsdMatrix
from ness_boson import (
    check_stability,
    continuity_residual,
    boson_balance_residual,
    current_boson,
    current_lambda_boson,
    current_lower_bound_boson,
    evolve_covariance_boson,
    ness_covariance_boson,
    ness_report_boson,
)
from ness_errors import (
    DegenerateChannelsError,
    NumericallyMarginalError,
    StatisticsMismatchError,
    UnstableError,
)
from ness_fermion import SystemSpec, covariance_from_array
from oracles import integrate_covariance


class TestStability:
    def test_clear_margin(self):
        report = check_stability(PsdMatrix(np.eye(2)), PsdMatrix(2.0 * np.eye(2)))
        assert report.stable
        assert report.lambda_min_of_D_minus_A == pytest.approx(1.0)

    def test_equal_rates_unstable(self, scalar_spec):
        spec = scalar_spec(a=1.0, d=1.0, statistics="boson")
        assert not check_stability(spec.A, spec.D).stable
        with pytest.raises(UnstableError) as excinfo:
            ness_covariance_boson(spec)
        assert not isinstance(excinfo.value, NumericallyMarginalError)

    def test_pump_stronger_than_loss(self, scalar_spec):
        with pytest.raises(UnstableError):
            ness_covariance_boson(scalar_spec(a=1.0, d=0.5, statistics="boson"))

    def test_marginal_margin_is_refused(self):
        spec = SystemSpec.from_arrays(np.zeros((2, 2)), np.eye(2), (1.0 + 1e-14) * np.eye(2), statistics="boson")
        report = check_stability(spec.A, spec.D)
        assert not report.stable
        assert report.lambda_min_of_D_minus_A > 0
        with pytest.raises(NumericallyMarginalError):
            ness_covariance_boson(spec)

    def test_one_negative_direction_is_enough(self):
        # trace condition holds but D - A has a negative eigenvalue
        report = check_stability(PsdMatrix(np.diag([2.0, 0.0])), PsdMatrix(np.diag([1.0, 5.0])))
        assert not report.stable
        assert report.lambda_min_of_D_minus_A == pytest.approx(-1.0)


class TestScalarSystems:
    def test_closed_form(self, scalar_spec):
        spec = scalar_spec(a=1.0, d=4.0, h=2.0, statistics="boson")
        Q = ness_covariance_boson(spec)
        assert Q.entries[0, 0].real == pytest.approx(1.0 / 3.0, rel=1e-13)
        J = current_boson(spec, Q)
        assert J == pytest.approx(8.0 / 3.0, rel=1e-13)
        assert current_lower_bound_boson(spec.A, spec.D) == pytest.approx(J, rel=1e-13)

    def test_single_mode_saturates(self, scalar_spec):
        report = ness_report_boson(scalar_spec(a=0.3, d=0.8, statistics="boson"))
        assert report.ratio == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("m", [2, 4, 7])
def test_current_never_below_bound(spec_factory, rng, m):
    for _ in range(10):
        spec = spec_factory(m=m, statistics="boson")
        lam = 10.0 ** rng.uniform(-3.0, 3.0)
        J = current_lambda_boson(spec, lam)
        assert J >= current_lower_bound_boson(spec.A, spec.D) * (1.0 - 1e-9)


def test_stationarity_diagnostics(spec_factory):
    spec = spec_factory(m=5, statistics="boson", h_scale=2.0)
    Q = ness_covariance_boson(spec)
    J = current_boson(spec, Q)
    assert np.linalg.eigvalsh(Q.entries)[0] >= -1e-10
    assert boson_balance_residual(spec, Q) <= 1e-9 * max(1.0, J)
    assert continuity_residual(spec, Q) <= 1e-9 * max(1.0, J)


def test_isotropic_rates_saturate(rng):
    m = 3
    spec = SystemSpec.from_arrays(random_hermitian(rng, m), 0.5 * np.eye(m), 1.5 * np.eye(m), statistics="boson")
    report = ness_report_boson(spec)
    assert report.ratio == pytest.approx(1.0, abs=1e-10)
    assert report.lambda_min_of_D_minus_A == pytest.approx(1.0)
    assert report.to_dict()["statistics"] == "boson"


def test_lower_bound_grows_with_pumping():
    D = PsdMatrix(np.diag([3.0, 2.0]))
    bounds = [current_lower_bound_boson(PsdMatrix(np.diag([a, a])), D) for a in (0.1, 0.5, 1.0, 2.0)]
    assert all(b1 < b2 for b1, b2 in zip(bounds, bounds[1:]))


def test_lower_bound_needs_net_loss():
    with pytest.raises(DegenerateChannelsError):
        current_lower_bound_boson(PsdMatrix(np.eye(2)), PsdMatrix(np.eye(2)))


def test_fermion_system_rejected(spec_factory):
    with pytest.raises(StatisticsMismatchError):
        ness_covariance_boson(spec_factory(m=2))


def test_negative_lambda_rejected(spec_factory):
    with pytest.raises(ValueError):
        current_lambda_boson(spec_factory(m=2, statistics="boson"), -0.1)


class TestEvolution:
    def test_matches_direct_integration(self, spec_factory):
        spec = spec_factory(m=3, statistics="boson")
        Q0 = covariance_from_array(np.diag([2.0, 0.0, 0.5]), statistics="boson")
        Qt = evolve_covariance_boson(spec, Q0, 0.6)
        reference = integrate_covariance(spec.P.entries, spec.H.entries, spec.A.entries, Q0.entries, 0.6)
        np.testing.assert_allclose(Qt.entries, reference, atol=1e-8)

    def test_long_time_reaches_ness(self, spec_factory):
        spec = spec_factory(m=3, statistics="boson")
        Q0 = covariance_from_array(np.zeros((3, 3)), statistics="boson")
        Qt = evolve_covariance_boson(spec, Q0, 800.0)
        np.testing.assert_allclose(Qt.entries, ness_covariance_boson(spec).entries, atol=1e-9)

    def test_zero_time(self, spec_factory):
        spec = spec_factory(m=2, statistics="boson")
        Q0 = covariance_from_array(np.eye(2), statistics="boson")
        assert evolve_covariance_boson(spec, Q0, 0.0) is Q0
