import numpy as np
import pytest

from conftest import bloch_state_matrix, dephasing_apply
from qmetro.bounds import ExtensionStep, extension_bound, rgnks_violated_bound, unital_gauge
from qmetro.channel_model import (
    DephasingFamily,
    NotApplicableError,
    random_dephasing_family,
    x_rotation_dephasing,
)
from qmetro.fisher_info import qfi_bloch
from qmetro.protocols import (
    ControlSequence,
    no_control_fixed_point,
    qec_analytic,
    qec_repetition_sim,
    repeated_measurement,
    simulate_sequence,
    spam_fi,
    sql_asymptotic,
    sql_control_ptm,
    sql_protocol,
)
from qmetro.qubit_core import (
    X,
    Y,
    Z,
    BlochState,
    DomainError,
    PauliTransferMap,
    ptm_from_kraus,
    random_cptp_kraus,
    random_unital_ptm,
)

ZERO = np.zeros((2, 2))
POLE = BlochState([0.0, 0.0, 1.0], np.zeros(3))


class TestSimulateSequence:
    def test_parameter_independent(self):
        fam = DephasingFamily(0.2, 0.0, ZERO, ZERO)
        res = simulate_sequence(fam, ControlSequence.identity(), POLE, 50)
        assert res.qfi_or_fi == 0.0
        assert np.allclose(res.terminal.dv, 0)

    def test_example_family_saturation(self):
        # identity controls on the X-rotation + dephasing family: the transverse
        # derivative saturates at -2/(2p) and the QFI approaches 1/p^2
        fam = x_rotation_dephasing(0.1)
        res = simulate_sequence(fam, ControlSequence.identity(), POLE, 400)
        assert np.isclose(res.terminal.dv[1], -10.0, atol=1e-8)
        assert np.isclose(res.qfi_or_fi, 100.0, rtol=1e-6)
        assert np.isclose(res.qfi_or_fi, no_control_fixed_point(fam), rtol=1e-6)

    def test_sql_ansatz_terminal_z(self):
        # consistent closed form: z_n -> exp(-(1-p) w / (2p)) z0 + O(1/sqrt(n))
        fam = x_rotation_dephasing(0.1)
        w, n = 0.01, 40_000
        res = sql_protocol(fam, n, w)
        target = np.exp(-(1 - fam.p) * w / (2 * fam.p))
        assert abs(res.terminal.v[2] - target) < 5.0 / np.sqrt(n)

    def test_trajectory_recording(self):
        fam = x_rotation_dephasing(0.1)
        res = simulate_sequence(fam, ControlSequence.identity(), POLE, 5, record_trajectory=True)
        assert len(res.trajectory) == 6
        assert np.allclose(res.trajectory[0].v, POLE.v)

    def test_matches_density_matrix_oracle(self, rng):
        # dense 2x2 propagation at finite theta, Richardson finite differences
        for _ in range(1000):
            fam = random_dephasing_family(rng)
            n = int(rng.integers(1, 15))
            controls = []
            affine = []
            for _ in range(n):
                if rng.uniform() < 0.5:
                    ptm = random_unital_ptm(rng)
                else:
                    ptm = ptm_from_kraus(random_cptp_kraus(rng))
                controls.append(ptm)
                affine.append(ptm)
            direction = rng.normal(size=3)
            direction /= np.linalg.norm(direction)
            v0 = direction * rng.uniform() ** (1 / 3)
            seq = ControlSequence(controls, constant=False)
            res = simulate_sequence(fam, seq, BlochState(v0, np.zeros(3)), n)

            def propagate(theta):
                rho = bloch_state_matrix(v0)
                for ptm in affine:
                    rho = dephasing_apply(fam, theta, rho)
                    rho = ptm.apply_hermitian(rho)
                return rho

            def bloch_of(rho):
                return np.array([np.trace(rho @ s).real for s in (X, Y, Z)])

            h = 1e-5
            coarse = (bloch_of(propagate(h)) - bloch_of(propagate(-h))) / (2 * h)
            fine = (bloch_of(propagate(h / 2)) - bloch_of(propagate(-h / 2))) / h
            dv_fd = (4 * fine - coarse) / 3
            v_fd = bloch_of(propagate(0.0))
            assert np.allclose(res.terminal.v, v_fd, atol=1e-10)
            assert np.allclose(res.terminal.dv, dv_fd, atol=1e-6)
            assert np.isclose(res.qfi_or_fi, qfi_bloch((v_fd, dv_fd)), atol=1e-6)


class TestControlSequence:
    def test_rejects_non_cptp_map(self):
        from qmetro.qubit_core import ValidationError

        inflation = PauliTransferMap(np.zeros(3), 1.5 * np.eye(3))
        with pytest.raises(ValidationError):
            ControlSequence(inflation)

    def test_per_step_length_enforced(self):
        fam = x_rotation_dephasing(0.1)
        seq = ControlSequence([PauliTransferMap.identity()] * 3, constant=False)
        with pytest.raises(Exception):
            simulate_sequence(fam, seq, POLE, 5)


class TestBlochKernel:
    def test_channel_kernel_matches_analytic(self):
        # X-rotation composed with depolarizing: T = lam I, dT = [2 e_x]_x lam I
        from qmetro.channel_model import depolarizing_kraus, rotated_family
        from qmetro.protocols import BlochKernel

        lam = 0.5
        ch = rotated_family(depolarizing_kraus(lam), X)
        kernel = BlochKernel.from_channel(ch)
        cross_x = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, -2.0], [0.0, 2.0, 0.0]])
        assert np.allclose(kernel.T, lam * np.eye(3), atol=1e-12)
        assert np.allclose(kernel.t, 0, atol=1e-12)
        assert np.allclose(kernel.dT, cross_x * lam, atol=1e-12)
        assert np.allclose(kernel.dt, 0, atol=1e-12)

    def test_family_and_channel_kernels_agree(self, rng):
        from qmetro.channel_model import dephasing_channel
        from qmetro.protocols import BlochKernel

        for _ in range(50):
            fam = random_dephasing_family(rng)
            a = BlochKernel.from_family(fam)
            b = BlochKernel.from_channel(dephasing_channel(fam))
            assert np.allclose(a.T, b.T, atol=1e-10)
            assert np.allclose(a.dT, b.dT, atol=1e-10)
            assert np.allclose(a.t, b.t, atol=1e-10)
            assert np.allclose(a.dt, b.dt, atol=1e-10)


class TestSqlProtocol:
    def test_slope_near_asymptote(self):
        fam = x_rotation_dephasing(0.1)
        n = 20_000
        res = sql_protocol(fam, n, 0.01)
        assert np.isclose(res.qfi_or_fi / n, sql_asymptotic(fam, 0.01), rtol=0.01)

    def test_variant_without_signal_rejected(self):
        fam = DephasingFamily(0.1, 0.0, X, ZERO)
        with pytest.raises(NotApplicableError):
            sql_protocol(fam, 100, 0.01, variant="g1x")
        with pytest.raises(NotApplicableError):
            sql_asymptotic(fam, 0.01, variant="g0y")

    def test_g1_variant_slope(self):
        fam = DephasingFamily(0.1, 0.0, ZERO, X)
        n = 50_000
        res = sql_protocol(fam, n, 0.01, variant="g1x")
        asym = sql_asymptotic(fam, 0.01, variant="g1x")
        assert np.isclose(res.qfi_or_fi / n, asym, rtol=0.02)
        # w -> 0 approaches p/(1-p) Tr(G1 X)^2
        assert np.isclose(
            sql_asymptotic(fam, 1e-6, variant="g1x"), 0.1 / 0.9 * 4.0, rtol=1e-4
        )

    def test_asymptotic_values(self):
        fam = x_rotation_dephasing(0.1)
        assert np.isclose(sql_asymptotic(fam, 0.01), 34.40429672013252)
        assert np.isclose(sql_asymptotic(fam, 1e-7), 36.0, rtol=1e-5)
        assert sql_asymptotic(fam, 0.01, z0=1e-4) < 1e-6

    def test_convergence_rate_envelope(self):
        # gap |F/n - asymptote| decays like 1/sqrt(n) for a generic family
        # (the X-rotation example family has extra symmetry and decays like 1/n)
        fam = DephasingFamily(0.1, 1.0, X + 2.0 * Z, 0.5 * Y + Z)
        asym = sql_asymptotic(fam, 0.01)
        ns = [1000, 10_000, 100_000]
        gaps = [abs(sql_protocol(fam, n, 0.01).qfi_or_fi / n - asym) for n in ns]
        assert gaps[0] > gaps[1] > gaps[2]
        slope = np.polyfit(np.log(ns), np.log(gaps), 1)[0]
        assert -0.6 <= slope <= -0.4

    def test_example_family_fast_convergence(self):
        fam = x_rotation_dephasing(0.1)
        asym = sql_asymptotic(fam, 0.01)
        ns = [1000, 10_000, 100_000]
        gaps = [abs(sql_protocol(fam, n, 0.01).qfi_or_fi / n - asym) for n in ns]
        assert gaps[0] > gaps[1] > gaps[2]
        slope = np.polyfit(np.log(ns), np.log(gaps), 1)[0]
        assert slope <= -0.4  # at least the square-root envelope; here ~ -1


class TestRepeatedMeasurement:
    def test_optimal_interval_is_six(self):
        fam = x_rotation_dephasing(0.1)
        per_step = {
            k: repeated_measurement(fam, k, k).qfi_or_fi / k for k in range(1, 21)
        }
        assert max(per_step, key=per_step.get) == 6

    def test_single_step_fi(self):
        fam = x_rotation_dephasing(0.1)
        res = repeated_measurement(fam, 1, 1)
        assert np.isclose(res.qfi_or_fi, 4.0)

    def test_parameter_independent(self):
        fam = DephasingFamily(0.2, 0.0, ZERO, ZERO)
        assert repeated_measurement(fam, 60, 6).qfi_or_fi == 0.0

    def test_remainder_recorded(self):
        fam = x_rotation_dephasing(0.1)
        res = repeated_measurement(fam, 20, 6)
        assert res.meta["blocks"] == 3 and res.meta["remainder"] == 2


class TestSpamFi:
    def test_maximal_noise(self):
        fam = x_rotation_dephasing(0.1)
        assert spam_fi(fam, 100, 0.01, 0.5) == 0.0

    def test_ideal_readout_below_qfi(self):
        fam = x_rotation_dephasing(0.1)
        n = 2000
        fi = spam_fi(fam, n, 0.01, 0.0)
        qfi = sql_protocol(fam, n, 0.01).qfi_or_fi
        assert fi <= qfi + 1e-9
        assert fi > 0.8 * qfi  # the Z readout captures most of the signal here

    def test_noisy_beats_noiseless_repeated_at_large_n(self):
        fam = x_rotation_dephasing(0.1)
        n = 3000
        assert spam_fi(fam, n, 0.01, 0.02) > repeated_measurement(fam, n, 6).qfi_or_fi

    def test_q_outside_range(self):
        with pytest.raises(DomainError):
            spam_fi(x_rotation_dephasing(0.1), 10, 0.01, 0.7)


class TestQec:
    def test_heisenberg_values(self):
        assert np.isclose(qec_repetition_sim(0.1, 10).qfi_or_fi, 256.0, rtol=1e-6)
        assert np.isclose(qec_repetition_sim(0.1, 1).qfi_or_fi, 2.56, rtol=1e-6)

    def test_half_probability_kills_signal(self):
        for n in (1, 5, 20):
            assert qec_repetition_sim(0.5, n).qfi_or_fi < 1e-10

    def test_analytic_formula(self):
        assert np.isclose(qec_analytic(0.1, 100), 25600.0, rtol=1e-14)
        assert qec_analytic(0.5, 7) == 0.0
        assert qec_analytic(0.3, 0) == 0.0

    def test_sim_matches_analytic_grid(self):
        for p in (0.05, 0.25, 0.4):
            for n in (3, 17, 60):
                sim = qec_repetition_sim(p, n).qfi_or_fi
                assert np.isclose(sim, qec_analytic(p, n), rtol=1e-6)


class TestCeilings:
    def test_derivative_ceiling_rgnks_violated(self, rng):
        # G0, G1 prop Z: ||dv_n||^2 <= (Tr(G- Z)^2 + 4 pdot^2) / (4 p^2 (1-p)^2)
        for _ in range(1000):
            p = rng.uniform(0.05, 0.5)
            fam = DephasingFamily(p, rng.normal(), rng.normal() * Z, rng.normal() * Z)
            cap = rgnks_violated_bound(fam) / 4.0
            n = int(rng.integers(1, 60))
            controls = [ptm_from_kraus(random_cptp_kraus(rng)) for _ in range(n)]
            direction = rng.normal(size=3)
            direction /= np.linalg.norm(direction)
            v0 = BlochState(direction * rng.uniform() ** (1 / 3), np.zeros(3))
            res = simulate_sequence(fam, ControlSequence(controls, constant=False), v0, n)
            assert res.terminal.dv @ res.terminal.dv <= cap + 1e-9

    def test_qfi_ceiling_rgnks_violated_unital(self, rng):
        for _ in range(100):
            p = rng.uniform(0.05, 0.5)
            fam = DephasingFamily(p, rng.normal(), rng.normal() * Z, rng.normal() * Z)
            cap = rgnks_violated_bound(fam)
            n = int(rng.integers(1, 60))
            controls = [random_unital_ptm(rng) for _ in range(n)]
            direction = rng.normal(size=3)
            direction /= np.linalg.norm(direction)
            v0 = BlochState(direction * rng.uniform() ** (1 / 3), np.zeros(3))
            res = simulate_sequence(fam, ControlSequence(controls, constant=False), v0, n)
            assert res.qfi_or_fi <= cap + 1e-9

    def test_protocol_never_exceeds_extension_bound(self, rng):
        fam = x_rotation_dephasing(0.1)
        for n in (5, 20, 60):
            control = sql_control_ptm("g0x", np.sqrt(0.01 / n))
            steps = [ExtensionStep(control, unital_gauge(fam))] * n
            total = extension_bound(fam, steps).total
            assert sql_protocol(fam, n, 0.01).qfi_or_fi <= total + 1e-9
