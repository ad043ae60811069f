"""Unit tests for lienard_periodic/certificate.py."""

from __future__ import annotations

import dataclasses
import math

import numpy as np
import pytest

from lienard_periodic.certificate import (
    CERTIFICATE_CSV_HEADER,
    REASON_AMPLITUDE,
    REASON_MULTIPLIER,
    REASON_PERIOD,
    REASON_PHASE,
    EstimateConstants,
    certificate_to_csv_row,
    certify,
    closed_form_q,
    compute_constants,
    epsilon_bound,
    q_constants,
    sup_norm,
)
from lienard_periodic.exceptions import OrbitOutsideS
from lienard_periodic.floquet import FloquetData
from lienard_periodic.functions import ScalarFunction
from lienard_periodic.limit_cycle import PeriodicOrbit
from lienard_periodic.perturbed import solve_perturbed
from lienard_periodic.system import LienardSystem

from tests.helpers import unit_push


def _constants(**overrides: float) -> EstimateConstants:
    values = {
        "g0": 3.0,
        "g1": 1.0,
        "g2": 0.0,
        "f1": 8.0,
        "f2": 6.0,
        "q0": 1.0,
        "q1": 0.0,
        "q2": 0.0,
        "K": 10.0,
        "K_inv": 10.0,
        "P": 3.0,
        "r": 3.0,
        "sigma": 0.5,
        "tau0": 2.0,
        "a": 2.0,
        "rho2": 0.1,
    }
    values.update(overrides)
    return EstimateConstants(**values)


@pytest.fixture(scope="module")
def vdp_constants(
    vdp_system: LienardSystem, vdp_orbit: PeriodicOrbit, vdp_floquet: FloquetData
) -> EstimateConstants:
    """Constants of the mu = 1 cycle over S(3)."""
    return compute_constants(vdp_system, vdp_orbit, vdp_floquet, 3.0)


@pytest.mark.unit
class TestSupNorm:
    """Tests for sup_norm."""

    def test_interior_maximum_is_refined(self) -> None:
        """The peak of 1 - (x - 0.3)^2 sits between samples."""
        value = sup_norm(lambda x: 1.0 - (x - 0.3) ** 2, -1.0, 1.0, n_samples=8)
        assert value == pytest.approx(1.0, abs=1e-10)

    def test_endpoint_maximum(self) -> None:
        """|x^3| on [-1, 2] peaks at the right end."""
        assert sup_norm(lambda x: x**3, -1.0, 2.0) == pytest.approx(8.0)


@pytest.mark.unit
class TestComputeConstants:
    """Tests for compute_constants on Van der Pol."""

    def test_polynomial_sup_norms(self, vdp_constants: EstimateConstants) -> None:
        """g0 = 3, g1 = 1, g2 = 0, f1 = 8, f2 = 6 over [-3, 3]."""
        assert vdp_constants.g0 == pytest.approx(3.0)
        assert vdp_constants.g1 == pytest.approx(1.0)
        assert vdp_constants.g2 == pytest.approx(0.0)
        assert vdp_constants.f1 == pytest.approx(8.0)
        assert vdp_constants.f2 == pytest.approx(6.0)

    def test_unperturbed_q_constants_vanish(self, vdp_constants: EstimateConstants) -> None:
        """Without a perturbation q0 = q1 = q2 = 0."""
        assert (vdp_constants.q0, vdp_constants.q1, vdp_constants.q2) == (0.0, 0.0, 0.0)
        assert vdp_constants.closed_form_q is None

    def test_path_constants(
        self, vdp_constants: EstimateConstants, vdp_orbit: PeriodicOrbit
    ) -> None:
        """K dominates |I| = 2 and P is the peak speed of p."""
        assert math.isfinite(vdp_constants.K) and vdp_constants.K >= 2.0
        assert math.isfinite(vdp_constants.K_inv) and vdp_constants.K_inv >= 2.0
        times, states = vdp_orbit.sample(4096)
        speed = np.hypot(states[:, 0], states[:, 1])
        assert vdp_constants.P == pytest.approx(float(np.max(speed)), rel=1e-4)
        assert vdp_constants.K_half == pytest.approx(0.5 * vdp_constants.K)

    def test_geometry_is_carried(self, vdp_constants: EstimateConstants) -> None:
        """sigma = r - max radius lies in (0, r)."""
        assert 0.0 < vdp_constants.sigma < vdp_constants.r

    def test_larger_disk_never_shrinks_constants(
        self,
        vdp_system: LienardSystem,
        vdp_orbit: PeriodicOrbit,
        vdp_floquet: FloquetData,
        vdp_constants: EstimateConstants,
    ) -> None:
        """Enlarging r to 4 keeps every sup norm at least as large."""
        wider = compute_constants(vdp_system, vdp_orbit, vdp_floquet, 4.0)
        for name in ("g0", "g1", "g2", "f1", "f2"):
            assert getattr(wider, name) >= getattr(vdp_constants, name)
        assert wider.sigma == pytest.approx(vdp_constants.sigma + 1.0)

    def test_orbit_outside_disk(
        self, vdp_system: LienardSystem, vdp_orbit: PeriodicOrbit, vdp_floquet: FloquetData
    ) -> None:
        """r = 2 does not contain the cycle."""
        with pytest.raises(OrbitOutsideS):
            compute_constants(vdp_system, vdp_orbit, vdp_floquet, 2.0)

    def test_to_dict_reports_k_half(self, vdp_constants: EstimateConstants) -> None:
        """P and K/2 are reported side by side."""
        data = vdp_constants.to_dict()
        assert data["K_half"] == pytest.approx(0.5 * data["K"])
        assert "closed_form_q" not in data


@pytest.mark.unit
class TestQConstants:
    """Tests for the perturbation constants."""

    def test_constant_push(self, vdp_system: LienardSystem) -> None:
        """gamma = 1 gives q0 = 1, q1 = 0, q2 = 0."""
        system = vdp_system.with_perturbation(unit_push(), 0.0)
        assert q_constants(system, 3.0) == pytest.approx((1.0, 0.0, 0.0))

    def test_cosine_forcing(self, forced_vdp_system: LienardSystem) -> None:
        """cos(2 pi s) gives q0 = 1, q1 = 0, q2 = 2 pi."""
        q0, q1, q2 = q_constants(forced_vdp_system, 3.0)
        assert q0 == pytest.approx(1.0)
        assert q1 == 0.0
        assert q2 == pytest.approx(2 * math.pi)

    def test_closed_form_matches_grid(self) -> None:
        """The closed form of cos(2 pi s) agrees with the grid values."""
        closed = closed_form_q(ScalarFunction.from_catalog("cos", [1.0, 2 * math.pi, 0.0]))
        assert closed["q0"] == pytest.approx(1.0)
        assert closed["q1"] == 0.0
        assert closed["q2"] == pytest.approx(2 * math.pi, rel=1e-9)


@pytest.mark.unit
class TestCertify:
    """Tests for certify and epsilon_bound."""

    def test_unperturbed_point_is_certified(self) -> None:
        """eps = 0, h = 0, tau = tau0, phi = 0 passes when condition10 holds."""
        constants = _constants()
        certificate = certify(constants, 0.0, 0.0, constants.tau0, 0.0, True)
        assert certificate.verdict
        assert certificate.reasons == ()
        assert certificate.lhs == 0.0
        assert certificate.rhs > 0.0

    def test_amplitude_inequality(self) -> None:
        """(3/2) g0 |eps| = 2 rhs fails the amplitude inequality."""
        constants = _constants()
        rhs = constants.sigma * math.exp(-1.5 * constants.g1 * constants.tau0)
        epsilon = 2 * rhs / (1.5 * constants.g0)
        certificate = certify(constants, epsilon, 0.0, constants.tau0, 0.0, True)
        assert not certificate.verdict
        assert certificate.reasons == (REASON_AMPLITUDE,)
        assert certificate.lhs == pytest.approx(2 * certificate.rhs)

    def test_negative_shift_counts_by_magnitude(self) -> None:
        """|h| enters the inequality."""
        constants = _constants()
        certificate = certify(constants, 0.0, -1.0, constants.tau0, 0.0, True)
        assert REASON_AMPLITUDE in certificate.reasons

    def test_period_window(self) -> None:
        """|tau - tau0| must stay below tau0 / 2."""
        constants = _constants()
        certificate = certify(constants, 0.0, 0.0, 1.5 * constants.tau0, 0.0, True)
        assert certificate.reasons == (REASON_PERIOD,)
        low, high = certificate.tau_window
        assert low < constants.tau0 < high
        assert certificate.tau1 < 0.5 * constants.tau0

    def test_phase_bound(self) -> None:
        """phi must stay below tau0 / 2."""
        constants = _constants()
        certificate = certify(constants, 0.0, 0.0, constants.tau0, constants.tau0, True)
        assert certificate.reasons == (REASON_PHASE,)
        assert certificate.phi_bound == pytest.approx(0.5 * constants.tau0)

    def test_multiplier_condition(self) -> None:
        """A failing condition10 is reported."""
        constants = _constants()
        certificate = certify(constants, 0.0, 0.0, constants.tau0, 0.0, False)
        assert certificate.reasons == (REASON_MULTIPLIER,)

    def test_epsilon_bound_formula(self) -> None:
        """epsilon0 = 2 sigma exp(-3/2 g1 tau0) / (3 g0) and sits on the boundary."""
        constants = _constants()
        epsilon0 = epsilon_bound(constants)
        assert epsilon0 == pytest.approx(2 * 0.5 * math.exp(-3.0) / 9.0)
        inside = certify(constants, 0.99 * epsilon0, 0.0, constants.tau0, 0.0, True)
        outside = certify(constants, 1.01 * epsilon0, 0.0, constants.tau0, 0.0, True)
        assert inside.verdict and not outside.verdict

    def test_epsilon_bound_without_restoring_force(self) -> None:
        """g0 = 0 leaves epsilon unbounded."""
        assert epsilon_bound(_constants(g0=0.0)) == math.inf

    def test_vdp_epsilon_bound(self, vdp_constants: EstimateConstants) -> None:
        """epsilon0 = 2 sigma exp(-1.5 tau0) / 9 for mu = 1 over S(3)."""
        expected = 2 * vdp_constants.sigma * math.exp(-1.5 * vdp_constants.tau0) / 9
        assert epsilon_bound(vdp_constants) == pytest.approx(expected)
        assert 0.0 < expected < 1e-4

    def test_inequality_lhs_and_row(self) -> None:
        """The lhs helper and the CSV row follow the recorded numbers."""
        constants = _constants()
        certificate = certify(constants, 0.01, 0.0, constants.tau0, 0.0, True)
        assert certificate.inequality_lhs(-0.01, 0.2) == pytest.approx(0.045 + 0.2)
        row = certificate_to_csv_row(certificate)
        assert len(row) == len(CERTIFICATE_CSV_HEADER)
        assert row[8] == str(certificate.verdict).lower()
        assert certificate.to_dict()["constants"]["g0"] == 3.0

    def test_constants_are_frozen(self) -> None:
        """Constants are immutable."""
        constants = _constants()
        with pytest.raises(dataclasses.FrozenInstanceError):
            constants.g0 = 1.0  # type: ignore[misc]


@pytest.mark.unit
class TestEmpiricalSoundness:
    """Perturbed solves below the certified bound."""

    def test_solves_below_epsilon_bound(
        self,
        forced_vdp_system: LienardSystem,
        vdp_orbit: PeriodicOrbit,
        vdp_floquet: FloquetData,
    ) -> None:
        """Every eps in (0, epsilon0) converges to a closed orbit."""
        constants = compute_constants(forced_vdp_system, vdp_orbit, vdp_floquet, 3.0)
        epsilon0 = epsilon_bound(constants)
        assert epsilon0 > 0
        for fraction in (0.25, 0.5, 0.99):
            solution = solve_perturbed(
                forced_vdp_system, vdp_orbit, vdp_floquet, fraction * epsilon0
            )
            assert solution.residual < 1e-9

    def test_inequality_sides_from_exported_constants(
        self, vdp_constants: EstimateConstants
    ) -> None:
        """The recorded lhs and rhs follow from the exported numbers by hand."""
        data = vdp_constants.to_dict()
        epsilon, h = 1e-6, 2e-6
        certificate = certify(vdp_constants, epsilon, h, data["tau0"], 0.0, True)
        rhs = data["sigma"] * math.exp(-1.5 * data["g1"] * data["tau0"])
        lhs = 1.5 * data["g0"] * epsilon + h
        assert certificate.rhs == pytest.approx(rhs, rel=1e-12)
        assert certificate.lhs == pytest.approx(lhs, rel=1e-12)
