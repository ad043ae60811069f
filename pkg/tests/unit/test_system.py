"""Unit tests for lienard_periodic/system.py."""

from __future__ import annotations

import math

import numpy as np
import pytest

from lienard_periodic.exceptions import FrameError, ScenarioError, ValidationError
from lienard_periodic.functions import ScalarFunction
from lienard_periodic.ode import integrate
from lienard_periodic.system import (
    CHECK_F_EVEN,
    CHECK_F_UNIQUE_ZERO,
    CHECK_X_G_POSITIVE,
    Frame,
    LienardSystem,
    PhasePoint,
    field_function,
    hypothesis_check,
    jacobian_function,
    system_from_json,
    system_to_json,
    to_frame,
    vector_field,
)

from tests.helpers import cosine_forcing, vdp


@pytest.mark.unit
class TestLienardSystem:
    """Tests for LienardSystem construction."""

    def test_primitives_are_materialized(self, vdp_system: LienardSystem) -> None:
        """F and G vanish at 0 and match the closed forms."""
        assert vdp_system.F(2.0) == pytest.approx(8.0 / 3.0 - 2.0)
        assert vdp_system.G(2.0) == pytest.approx(2.0)
        assert vdp_system.g_prime(0.3) == pytest.approx(1.0)

    def test_epsilon_without_perturbation_rejected(self) -> None:
        """A non-zero epsilon needs a perturbation."""
        base = vdp(1.0)
        with pytest.raises(ValidationError):
            LienardSystem(f=base.f, g=base.g, epsilon=0.1)

    def test_non_positive_tau_rejected(self) -> None:
        """tau must be positive."""
        base = vdp(1.0)
        with pytest.raises(ValidationError):
            LienardSystem(f=base.f, g=base.g, tau=0.0)

    def test_unperturbed_drops_perturbation(self, vdp_system: LienardSystem) -> None:
        """unperturbed() keeps f and g and removes gamma."""
        forced = vdp_system.with_perturbation(cosine_forcing(), 0.1)
        assert forced.is_perturbed
        plain = forced.unperturbed()
        assert not plain.is_perturbed
        assert plain.perturbation is None
        assert plain.f == vdp_system.f


@pytest.mark.unit
class TestFrames:
    """Tests for frame conversion and vector fields."""

    def test_uv_to_farkas(self, vdp_system: LienardSystem) -> None:
        """(2, 0) in uv is (-2/3, 2) in the farkas frame."""
        point = to_frame(vdp_system, PhasePoint((2.0, 0.0)), Frame.FARKAS)
        assert point.frame is Frame.FARKAS
        assert point.state == pytest.approx((-2.0 / 3.0, 2.0))

    def test_uv_to_lienard_plane(self, vdp_system: LienardSystem) -> None:
        """w = u' + F(u)."""
        point = vdp_system.to_frame(PhasePoint((2.0, 1.0)), "lienard_plane")
        assert point.state == pytest.approx((2.0, 1.0 + 2.0 / 3.0))

    def test_round_trip_through_every_frame(self, vdp_system: LienardSystem) -> None:
        """uv -> farkas -> lienard_plane -> uv is the identity."""
        start = PhasePoint((0.7, -1.3))
        point = to_frame(vdp_system, start, Frame.FARKAS)
        point = to_frame(vdp_system, point, Frame.LIENARD_PLANE)
        point = to_frame(vdp_system, point, Frame.UV)
        assert point.state == pytest.approx(start.state)

    def test_unknown_frame_tag(self, vdp_system: LienardSystem) -> None:
        """Unknown tags raise FrameError."""
        with pytest.raises(FrameError):
            to_frame(vdp_system, PhasePoint((0.0, 0.0)), "polar")

    def test_uv_field(self, vdp_system: LienardSystem) -> None:
        """(u, v) = (2, 0) gives (0, -2)."""
        value = vector_field(vdp_system, PhasePoint((2.0, 0.0)), 0.0)
        np.testing.assert_allclose(value, [0.0, -2.0])

    def test_farkas_field(self, vdp_system: LienardSystem) -> None:
        """(-2/3, 2) in the farkas frame gives (g(2), 0)."""
        value = vector_field(vdp_system, PhasePoint((-2.0 / 3.0, 2.0), Frame.FARKAS), 0.0)
        np.testing.assert_allclose(value, [2.0, 0.0], atol=1e-14)

    def test_fields_agree_across_frames(self, vdp_system: LienardSystem) -> None:
        """The u component moves with the same speed in every frame."""
        uv = PhasePoint((1.2, 0.4))
        speed_uv = vector_field(vdp_system, uv, 0.0)[0]
        plane = to_frame(vdp_system, uv, Frame.LIENARD_PLANE)
        farkas = to_frame(vdp_system, uv, Frame.FARKAS)
        assert vector_field(vdp_system, plane, 0.0)[0] == pytest.approx(speed_uv)
        assert vector_field(vdp_system, farkas, 0.0)[1] == pytest.approx(speed_uv)

    def test_perturbation_enters_velocity_equation(self, vdp_system: LienardSystem) -> None:
        """eps*gamma is added to v' in the uv frame."""
        eps = 0.2
        forced = vdp_system.with_perturbation(cosine_forcing(), eps, tau=2 * math.pi)
        rhs = field_function(forced, Frame.UV)
        free = field_function(vdp_system, Frame.UV)
        y = np.array([0.5, 0.1])
        delta = rhs(0.0, y) - free(0.0, y)
        np.testing.assert_allclose(delta, [0.0, eps * 1.0], atol=1e-14)

    @pytest.mark.parametrize("frame", list(Frame))
    def test_jacobian_matches_finite_differences(
        self, frame: Frame, forced_vdp_system: LienardSystem
    ) -> None:
        """Analytic Jacobians agree with central differences."""
        system = forced_vdp_system.with_perturbation(
            forced_vdp_system.perturbation, 0.3, tau=5.0
        )
        rhs = field_function(system, frame, phi=0.4)
        jac = jacobian_function(system, frame, phi=0.4)
        y, t, step = np.array([0.8, -0.6]), 1.1, 1e-6
        numeric = np.column_stack(
            [
                (rhs(t, y + step * e) - rhs(t, y - step * e)) / (2 * step)
                for e in np.eye(2)
            ]
        )
        np.testing.assert_allclose(jac(t, y), numeric, atol=1e-7)


@pytest.mark.unit
class TestFlowInvariants:
    """Properties of the unperturbed flow along integrated trajectories."""

    def test_energy_conserved_without_damping(self) -> None:
        """G(u) + v^2 / 2 stays constant when f = 0."""
        system = LienardSystem(
            f=ScalarFunction.constant(0.0),
            g=ScalarFunction.from_catalog("cubic_stiffness", [1.0, 1.0]),
        )
        trajectory = integrate(field_function(system, Frame.UV), [1.2, 0.0], 0.0, 6.0)
        states = trajectory.sample(np.linspace(0.0, 6.0, 200))
        energy = system.G(states[:, 0]) + 0.5 * states[:, 1] ** 2
        assert float(np.max(np.abs(energy - energy[0]))) < 1e-8

    def test_point_reflection_maps_solutions(self, vdp_system: LienardSystem) -> None:
        """With f even and g odd, (-u, -v) solves the system when (u, v) does."""
        rhs = field_function(vdp_system, Frame.UV)
        forward = integrate(rhs, [0.4, 1.1], 0.0, 5.0, rtol=1e-12, atol=1e-14)
        mirrored = integrate(rhs, [-0.4, -1.1], 0.0, 5.0, rtol=1e-12, atol=1e-14)
        times = np.linspace(0.0, 5.0, 101)
        np.testing.assert_allclose(mirrored.sample(times), -forward.sample(times), atol=1e-10)
        for y in forward.sample(times):
            np.testing.assert_allclose(rhs(0.0, -y), -rhs(0.0, y), atol=1e-10)

    @pytest.mark.parametrize("target", [Frame.LIENARD_PLANE, Frame.FARKAS])
    def test_mapped_trajectory_solves_target_frame(
        self, vdp_system: LienardSystem, target: Frame
    ) -> None:
        """A uv trajectory pushed through to_frame is a trajectory of the target frame."""
        start = PhasePoint((0.4, 1.1))
        times = np.linspace(0.0, 5.0, 101)
        uv = integrate(
            field_function(vdp_system, Frame.UV), start.state, 0.0, 5.0, rtol=1e-12, atol=1e-14
        ).sample(times)
        direct = integrate(
            field_function(vdp_system, target),
            to_frame(vdp_system, start, target).state,
            0.0,
            5.0,
            rtol=1e-12,
            atol=1e-14,
        ).sample(times)
        mapped = np.array(
            [to_frame(vdp_system, PhasePoint((u, v)), target).state for u, v in uv]
        )
        np.testing.assert_allclose(mapped, direct, atol=1e-8)

    def test_mapped_velocity_matches_farkas_field(self, vdp_system: LienardSystem) -> None:
        """Chain-rule velocity of the mapped path equals the farkas field."""
        uv_field = field_function(vdp_system, Frame.UV)
        uv = integrate(uv_field, [0.4, 1.1], 0.0, 5.0).sample(np.linspace(0.0, 5.0, 101))
        for u, v in uv:
            du, dv = uv_field(0.0, np.array([u, v]))
            # x1 = -v - F(u), x2 = u
            velocity = np.array([-dv - float(vdp_system.f(u)) * du, du])
            point = to_frame(vdp_system, PhasePoint((u, v)), Frame.FARKAS)
            deviation = np.max(np.abs(vector_field(vdp_system, point, 0.0) - velocity))
            assert deviation < 1e-9


@pytest.mark.unit
class TestHypothesisCheck:
    """Tests for hypothesis_check."""

    def test_vdp_passes(self, vdp_system: LienardSystem) -> None:
        """Van der Pol satisfies every hypothesis with F vanishing at sqrt(3)."""
        report = hypothesis_check(vdp_system, 3.0)
        assert report.passed
        assert report.symmetric
        assert report.positive_zero_of_F == pytest.approx(math.sqrt(3.0), abs=1e-10)
        assert report.get(CHECK_F_UNIQUE_ZERO).witness == pytest.approx(math.sqrt(3.0))

    def test_odd_damping_fails_evenness(self) -> None:
        """f(u) = u is not even; the witness is u = 1."""
        system = LienardSystem(
            f=ScalarFunction.polynomial([0.0, 1.0]), g=ScalarFunction.polynomial([0.0, 1.0])
        )
        report = hypothesis_check(system, 1.0)
        check = report.get(CHECK_F_EVEN)
        assert not check.passed
        assert check.witness == pytest.approx(1.0)
        assert CHECK_F_EVEN in report.failed
        assert not report.symmetric

    def test_softening_spring_fails_sign_condition(self) -> None:
        """g(u) = u - u^3 has x g(x) < 0 on (1, 2]; the witness is its midpoint."""
        system = LienardSystem(
            f=ScalarFunction.from_catalog("vdp_damping", [1.0]),
            g=ScalarFunction.polynomial([0.0, 1.0, 0.0, -1.0]),
        )
        report = hypothesis_check(system, 2.0)
        check = report.get(CHECK_X_G_POSITIVE)
        assert not check.passed
        witness = check.witness
        assert witness is not None
        assert witness == pytest.approx(1.5, abs=1e-9)
        assert witness * float(system.g(witness)) < 0

    def test_small_radius_misses_zero_of_F(self, vdp_system: LienardSystem) -> None:
        """Below sqrt(3) F has no positive zero and is negative at the boundary."""
        report = hypothesis_check(vdp_system, 1.0)
        assert not report.get(CHECK_F_UNIQUE_ZERO).passed
        assert report.positive_zero_of_F is None
        assert not report.passed

    def test_radius_must_be_positive(self, vdp_system: LienardSystem) -> None:
        """A non-positive radius raises ValueError."""
        with pytest.raises(ValueError):
            hypothesis_check(vdp_system, 0.0)

    def test_get_unknown_check(self, vdp_system: LienardSystem) -> None:
        """Looking up a missing check raises KeyError."""
        with pytest.raises(KeyError):
            hypothesis_check(vdp_system, 3.0).get("bounded")


@pytest.mark.unit
class TestSystemDocuments:
    """Tests for the system JSON document."""

    def test_round_trip(self, forced_vdp_system: LienardSystem) -> None:
        """Serializing and parsing gives an equal system."""
        document = system_to_json(forced_vdp_system)
        assert system_from_json(document) == forced_vdp_system

    def test_unknown_key_names_path(self) -> None:
        """Unknown keys are rejected with their path."""
        document = {"f": {"poly": [0.0]}, "g": {"poly": [0.0, 1.0]}, "damping": 1}
        with pytest.raises(ScenarioError) as excinfo:
            system_from_json(document)
        assert excinfo.value.path == ["damping"]

    def test_epsilon_without_perturbation(self) -> None:
        """A document with epsilon but no perturbation is rejected."""
        document = {"f": {"poly": [0.0]}, "g": {"poly": [0.0, 1.0]}, "epsilon": 0.1}
        with pytest.raises(ScenarioError) as excinfo:
            system_from_json(document)
        assert excinfo.value.path == ["epsilon"]

    def test_non_numeric_coefficient(self) -> None:
        """Booleans are not numbers."""
        document = {"f": {"poly": [True]}, "g": {"poly": [0.0, 1.0]}}
        with pytest.raises(ScenarioError):
            system_from_json(document)
