"""Unit tests for lienard_periodic/ode/engine.py."""

from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.integrate import simpson

from lienard_periodic.exceptions import NoCrossing, NumericalError, ValidationError
from lienard_periodic.limit_cycle import PeriodicOrbit
from lienard_periodic.ode import (
    Section,
    integrate,
    integrate_to_section,
    integrate_with_variational,
)
from lienard_periodic.system import Frame, LienardSystem, field_function, jacobian_function
from tests.helpers import vdp


def _rotation(t: float, y: np.ndarray) -> np.ndarray:
    return np.array([y[1], -y[0]])


def _rotation_jacobian(t: float, y: np.ndarray) -> np.ndarray:
    return np.array([[0.0, 1.0], [-1.0, 0.0]])


@pytest.mark.unit
class TestIntegrate:
    """Tests for integrate."""

    def test_exponential_growth(self) -> None:
        """y' = y from 1 reaches e at t = 1."""
        trajectory = integrate(lambda t, y: y, [1.0], 0.0, 1.0, rtol=1e-12, atol=1e-14)
        assert trajectory.final_state[0] == pytest.approx(math.e, rel=1e-10)
        assert trajectory.t1 == pytest.approx(1.0)

    def test_harmonic_closes_after_one_period(self) -> None:
        """The rotation returns to its start after 2 pi."""
        trajectory = integrate(_rotation, [1.0, 0.0], 0.0, 2 * math.pi, rtol=1e-12, atol=1e-14)
        np.testing.assert_allclose(trajectory.final_state, [1.0, 0.0], atol=1e-9)

    def test_dense_output_between_steps(self) -> None:
        """Dense output matches cos t and -sin t at off-grid times."""
        trajectory = integrate(_rotation, [1.0, 0.0], 0.0, 2 * math.pi, rtol=1e-10, atol=1e-12)
        times = np.linspace(0.05, 6.2, 37)
        expected = np.column_stack((np.cos(times), -np.sin(times)))
        np.testing.assert_allclose(trajectory.sample(times), expected, atol=1e-7)

    def test_backward_integration_is_time_ordered(self) -> None:
        """Integrating y' = y to t = -1 gives 1/e and increasing times."""
        trajectory = integrate(lambda t, y: y, [1.0], 0.0, -1.0, rtol=1e-12, atol=1e-14)
        assert trajectory.t0 == pytest.approx(-1.0)
        assert trajectory.t1 == pytest.approx(0.0)
        assert np.all(np.diff(trajectory.times) > 0)
        assert trajectory(-1.0)[0] == pytest.approx(math.exp(-1.0), rel=1e-9)
        assert trajectory(-0.5)[0] == pytest.approx(math.exp(-0.5), rel=1e-7)

    def test_outside_span_raises(self) -> None:
        """Dense output refuses times outside the span."""
        trajectory = integrate(lambda t, y: -y, [1.0], 0.0, 1.0)
        with pytest.raises(ValueError):
            trajectory(1.5)

    def test_blow_up_is_reported(self) -> None:
        """y' = y^2 from 1 blows up at t = 1."""
        with pytest.raises(NumericalError):
            integrate(lambda t, y: y * y, [1.0], 0.0, 2.0)

    def test_non_finite_start(self) -> None:
        """A non-finite initial state is rejected."""
        with pytest.raises(NumericalError):
            integrate(lambda t, y: y, [math.nan], 0.0, 1.0)

    @pytest.mark.parametrize(("rtol", "atol"), [(1e-16, 1e-12), (0.5, 1e-12), (1e-8, 0.0)])
    def test_tolerances_out_of_range(self, rtol: float, atol: float) -> None:
        """Tolerances outside the admissible band raise ValidationError."""
        with pytest.raises(ValidationError):
            integrate(lambda t, y: y, [1.0], 0.0, 1.0, rtol=rtol, atol=atol)

    def test_rejections_are_counted(self) -> None:
        """A huge first step is rejected and recorded."""
        trajectory = integrate(_rotation, [1.0, 0.0], 0.0, 1.0, first_step=1.0, rtol=1e-12, atol=1e-14)
        assert trajectory.rejected_steps >= 1
        assert trajectory.n_steps == len(trajectory.error_estimates)

    def test_tighter_tolerance_never_increases_error(self) -> None:
        """Endpoint error on the rotation is nonincreasing as rtol tightens."""
        t_end = 10.0
        exact = np.array([math.cos(t_end), -math.sin(t_end)])
        errors = []
        for rtol in (1e-4, 1e-5, 1e-6, 1e-7, 1e-8, 1e-9, 1e-10):
            final = integrate(_rotation, [1.0, 0.0], 0.0, t_end, rtol=rtol, atol=rtol).final_state
            errors.append(float(np.max(np.abs(final - exact))))
        assert np.all(np.diff(errors) <= 0.0)
        assert errors[-1] < 1e-8

    def test_grid_nodes_reproduce_samples(self) -> None:
        """Dense output at every accepted node returns the stored state."""
        trajectory = integrate(_rotation, [1.0, 0.0], 0.0, 3.0, rtol=1e-8, atol=1e-10)
        assert np.all(np.diff(trajectory.times) > 0)
        np.testing.assert_allclose(
            trajectory.sample(trajectory.times), trajectory.states, rtol=0, atol=1e-13
        )

    def test_relaxation_oscillator_at_loose_tolerance(self) -> None:
        """Van der Pol at mu = 5 completes at rtol = atol = 1e-3 and self-converges."""
        field = field_function(vdp(5.0), Frame.UV)
        loose = integrate(field, [2.0, 0.0], 0.0, 6.0, rtol=1e-3, atol=1e-3)
        sharp = integrate(field, [2.0, 0.0], 0.0, 6.0, rtol=1e-6, atol=1e-6)
        assert loose.t1 == pytest.approx(6.0)
        assert float(np.max(np.abs(loose.final_state - sharp.final_state))) < 1e-2


@pytest.mark.unit
class TestSections:
    """Tests for Section and integrate_to_section."""

    def test_invalid_direction(self) -> None:
        """direction must be -1, 0 or 1."""
        with pytest.raises(ValidationError):
            Section((0.0, 1.0), direction=2)

    def test_guarded_return_after_one_period(self) -> None:
        """v = 0 with u > 0 is first crossed at t = 2 pi."""
        section = Section.coordinate(1, guard_index=0)
        event = integrate_to_section(
            _rotation, [1.0, 0.0], 0.0, section, 10.0, rtol=1e-12, atol=1e-14
        )
        assert event.t == pytest.approx(2 * math.pi, abs=1e-9)
        assert event.state[0] == pytest.approx(1.0, abs=1e-9)
        assert event.residual < 1e-10
        assert event.trajectory.t1 == pytest.approx(event.t)

    def test_unguarded_crossing_at_half_period(self) -> None:
        """Without a guard the first crossing of v = 0 is at t = pi."""
        event = integrate_to_section(
            _rotation, [1.0, 0.0], 0.0, Section.coordinate(1), 10.0, rtol=1e-12, atol=1e-14
        )
        assert event.t == pytest.approx(math.pi, abs=1e-9)

    def test_direction_filter(self) -> None:
        """Only increasing crossings of u = 0 are kept."""
        section = Section.coordinate(0, direction=1)
        event = integrate_to_section(
            _rotation, [1.0, 0.0], 0.0, section, 10.0, rtol=1e-12, atol=1e-14
        )
        # u = cos t increases through 0 at 3 pi / 2
        assert event.t == pytest.approx(1.5 * math.pi, abs=1e-9)

    def test_no_crossing(self) -> None:
        """Exponential decay never reaches the section."""
        with pytest.raises(NoCrossing):
            integrate_to_section(lambda t, y: -y, [1.0], 0.0, Section((1.0,), offset=1.0), 5.0)

    def test_constant_field_reaches_plane(self) -> None:
        """The field (1, 0) from the origin meets u = 1 at t = 1."""
        event = integrate_to_section(
            lambda t, y: np.array([1.0, 0.0]),
            [0.0, 0.0],
            0.0,
            Section.coordinate(0, value=1.0),
            5.0,
            rtol=1e-12,
            atol=1e-14,
        )
        assert event.t == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(event.state, [1.0, 0.0], atol=1e-12)

    @pytest.mark.parametrize(
        ("direction", "expected"),
        [
            (0, [math.pi * k for k in range(1, 7)]),
            (1, [math.pi + 2 * math.pi * k for k in range(6)]),
            (-1, [2 * math.pi * k for k in range(1, 7)]),
        ],
    )
    def test_restart_from_event_finds_next_crossing(
        self, direction: int, expected: list[float]
    ) -> None:
        """Chained restarts from each event state step to the following crossing."""
        section = Section.coordinate(1, direction=direction)
        t, state = 0.0, np.array([1.0, 0.0])
        times = []
        for _ in range(6):
            event = integrate_to_section(
                _rotation, state, t, section, 10.0, rtol=1e-12, atol=1e-14
            )
            t, state = event.t, event.state
            times.append(t)
        np.testing.assert_allclose(times, expected, atol=1e-8)
        assert all(gap > 3.0 for gap in np.diff([0.0, *times]))

    @pytest.mark.parametrize("nudge", [-1e-15, 1e-15])
    def test_start_just_off_the_section(self, nudge: float) -> None:
        """A start within round-off of v = 0 does not count as a crossing."""
        event = integrate_to_section(
            _rotation,
            [-1.0, nudge],
            math.pi,
            Section.coordinate(1),
            10.0,
            rtol=1e-12,
            atol=1e-14,
        )
        assert event.t == pytest.approx(2 * math.pi, abs=1e-8)

    def test_returns_contract_towards_cycle(self, vdp_orbit: PeriodicOrbit) -> None:
        """Two consecutive returns of Van der Pol from u = 2.5 approach the cycle."""
        system = vdp_orbit.system
        section = Section.coordinate(1, guard_index=0)
        field = field_function(system, Frame.UV)
        first = integrate_to_section(field, [2.5, 0.0], 0.0, section, 50.0)
        second = integrate_to_section(field, first.state, first.t, section, 50.0)
        assert first.t == pytest.approx(vdp_orbit.tau0, rel=0.1)
        distance = abs(first.state[0] - vdp_orbit.a)
        assert abs(second.state[0] - first.state[0]) < distance
        assert distance < 2.5 - vdp_orbit.a


@pytest.mark.unit
class TestVariational:
    """Tests for integrate_with_variational."""

    def test_rotation_fundamental_matrix(self) -> None:
        """The fundamental matrix of the rotation at pi/2 is [[0, 1], [-1, 0]]."""
        result = integrate_with_variational(
            _rotation, _rotation_jacobian, [1.0, 0.0], 0.0, math.pi / 2, rtol=1e-12, atol=1e-14
        )
        np.testing.assert_allclose(
            result.fundamental(math.pi / 2), [[0.0, 1.0], [-1.0, 0.0]], atol=1e-10
        )
        np.testing.assert_allclose(result.state(math.pi / 2), [0.0, -1.0], atol=1e-10)

    def test_identity_at_start(self) -> None:
        """Phi(t0) is the identity."""
        result = integrate_with_variational(
            _rotation, _rotation_jacobian, [1.0, 0.0], 0.0, 1.0
        )
        np.testing.assert_allclose(result.fundamental(0.0), np.eye(2))
        assert result.t0 == 0.0
        assert result.t1 == pytest.approx(1.0)

    def test_empty_span_returns_start_matrix(self) -> None:
        """With t1 = t0 the matrix block is M0 itself."""
        m0 = np.array([[2.0, -1.0], [0.5, 3.0]])
        result = integrate_with_variational(
            _rotation, _rotation_jacobian, [1.0, 0.0], 0.7, 0.7, m0=m0
        )
        np.testing.assert_array_equal(result.fundamental(0.7), m0)
        np.testing.assert_array_equal(result.state(0.7), [1.0, 0.0])

    def test_start_matrix_is_propagated(self) -> None:
        """A non-identity M0 evolves to Phi(t) M0."""
        m0 = np.array([[2.0, -1.0], [0.5, 3.0]])
        t_end = 1.3
        result = integrate_with_variational(
            _rotation, _rotation_jacobian, [1.0, 0.0], 0.0, t_end, rtol=1e-12, atol=1e-14, m0=m0
        )
        c, s = math.cos(t_end), math.sin(t_end)
        phi = np.array([[c, s], [-s, c]])
        np.testing.assert_allclose(result.fundamental(t_end), phi @ m0, atol=1e-10)

    def test_start_matrix_shape_checked(self) -> None:
        """M0 must be square in the state dimension."""
        with pytest.raises(ValidationError):
            integrate_with_variational(
                _rotation, _rotation_jacobian, [1.0, 0.0], 0.0, 1.0, m0=np.eye(3)
            )

    def test_columns_match_finite_differences(self, vdp_orbit: PeriodicOrbit) -> None:
        """Columns of M agree with orbit sensitivities to 1e-6 start offsets."""
        system: LienardSystem = vdp_orbit.system
        field = field_function(system, Frame.FARKAS)
        p0 = np.array([-float(system.F(vdp_orbit.a)), vdp_orbit.a])
        times = np.linspace(0.0, vdp_orbit.tau0, 9)[1:]
        result = integrate_with_variational(
            field,
            jacobian_function(system, Frame.FARKAS),
            p0,
            0.0,
            vdp_orbit.tau0,
            rtol=1e-12,
            atol=1e-14,
        )
        base = integrate(field, p0, 0.0, vdp_orbit.tau0, rtol=1e-12, atol=1e-14).sample(times)
        step = 1e-6
        for column in range(2):
            shifted = p0.copy()
            shifted[column] += step
            moved = integrate(field, shifted, 0.0, vdp_orbit.tau0, rtol=1e-12, atol=1e-14)
            sensitivity = (moved.sample(times) - base) / step
            for k, t in enumerate(times):
                expected = result.fundamental(float(t))[:, column]
                scale = max(float(np.linalg.norm(expected)), 1.0)
                assert np.linalg.norm(sensitivity[k] - expected) <= 1e-4 * scale

    def test_determinant_follows_damping_integral(self, vdp_orbit: PeriodicOrbit) -> None:
        """det M(tau0) = exp(-int f(u0)) along the Van der Pol cycle."""
        system: LienardSystem = vdp_orbit.system
        p0 = np.array([-float(system.F(vdp_orbit.a)), vdp_orbit.a])
        result = integrate_with_variational(
            field_function(system, Frame.FARKAS),
            jacobian_function(system, Frame.FARKAS),
            p0,
            0.0,
            vdp_orbit.tau0,
        )
        grid = np.linspace(0.0, vdp_orbit.tau0, 4001)
        u = np.array([result.state(float(t))[1] for t in grid])
        damping = float(simpson(system.f(u), x=grid))
        determinant = float(np.linalg.det(result.fundamental(vdp_orbit.tau0)))
        assert determinant == pytest.approx(math.exp(-damping), abs=1e-7)
