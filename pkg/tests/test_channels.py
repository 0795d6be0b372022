import math

import numpy as np
import pytest

from lrusim.channels import (
    NoiseModel,
    ResetChannel,
    StepTooLargeError,
    apply_feedback_measurement,
    born_probabilities,
    dissipation_jump_step,
    local_thermal_weights,
    measurement_times,
    noise_jump_operators,
    sample_thermal_initial,
)
from lrusim.lattice import LatticeSpec, build_site_operator, realize_disorder
from lrusim.propagator import StateVector


class _FixedUniform:
    """Minimal rng stub with a predetermined uniform draw."""

    def __init__(self, value):
        self.value = value

    def uniform(self, lo, hi):
        return lo + self.value * (hi - lo)


class TestMeasurementTimes:
    def test_periodic_progression(self):
        chan = ResetChannel("periodic_feedback", rate=1.0)
        times = measurement_times(chan, t_max=3.5, rng=_FixedUniform(0.2))
        assert np.allclose(times, [0.2, 1.2, 2.2, 3.2])

    def test_zero_rate_empty(self, rng):
        chan = ResetChannel("periodic_feedback", rate=0.0)
        assert measurement_times(chan, 10.0, rng).size == 0
        chan = ResetChannel("random_feedback", rate=0.0)
        assert measurement_times(chan, 10.0, rng, dt=0.1).size == 0

    def test_random_event_count_statistics(self, rng):
        # rate * t_max = 10: the mean count over many draws is 10 +- 0.3
        chan = ResetChannel("random_feedback", rate=1.0)
        n_draws = 10_000
        counts = np.empty(n_draws)
        for k in range(n_draws):
            counts[k] = measurement_times(chan, 10.0, rng, dt=0.01).size
        assert abs(counts.mean() - 10.0) < 0.3

    def test_random_needs_dt(self, rng):
        chan = ResetChannel("random_feedback", rate=1.0)
        with pytest.raises(ValueError):
            measurement_times(chan, 10.0, rng)

    def test_dissipation_has_no_times(self, rng):
        chan = ResetChannel("dissipation", rate=1.0)
        with pytest.raises(ValueError):
            measurement_times(chan, 10.0, rng)


class TestFeedbackMeasurement:
    def test_deterministic_projection(self, rng):
        spec = LatticeSpec(2, 1.0, 1.0, 0.1)
        psi = StateVector.basis_state(spec, [0, 2])
        out, outcome = apply_feedback_measurement(psi, spec, 2, rng)
        assert outcome == 2
        expected = StateVector.basis_state(spec, [0, 0]).amplitudes
        assert np.abs(out.amplitudes - expected).max() < 1e-12

    def test_superposition_both_branches_reset(self, rng):
        spec = LatticeSpec(2, 1.0, 1.0, 0.1)
        a = StateVector.basis_state(spec, [0, 1]).amplitudes
        b = StateVector.basis_state(spec, [0, 0]).amplitudes
        psi = StateVector((a + b) / np.sqrt(2))
        seen = set()
        for _ in range(200):
            out, outcome = apply_feedback_measurement(psi, spec, 2, rng)
            seen.add(outcome)
            # either way the measured site ends in |0>
            probs = born_probabilities(out.amplitudes, spec, 2)
            assert probs[0] == pytest.approx(1.0, abs=1e-12)
            assert abs(out.norm() - 1.0) < 1e-12
        assert seen == {0, 1}

    def test_born_statistics(self, rng):
        spec = LatticeSpec(2, 1.0, 1.0, 0.1)
        amp = rng.normal(size=9) + 1j * rng.normal(size=9)
        psi = StateVector(amp / np.linalg.norm(amp))
        probs = born_probabilities(psi.amplitudes, spec, 2)
        n_samples = 100_000
        counts = np.zeros(3)
        for _ in range(n_samples):
            _, outcome = apply_feedback_measurement(psi, spec, 2, rng)
            counts[outcome] += 1
        freq = counts / n_samples
        sigma = np.sqrt(probs * (1 - probs) / n_samples)
        assert np.all(np.abs(freq - probs) < 3.5 * sigma + 1e-12)

    def test_measured_site_occupation_is_zero(self, rng):
        spec = LatticeSpec(3, 2.0, 1.5, 0.2, 0.5)
        amp = rng.normal(size=27) + 1j * rng.normal(size=27)
        psi = StateVector(amp / np.linalg.norm(amp))
        number = build_site_operator(spec, 3, "number").dense()
        out, _ = apply_feedback_measurement(psi, spec, 3, rng)
        occ = np.vdot(out.amplitudes, number @ out.amplitudes).real
        assert occ == pytest.approx(0.0, abs=1e-12)


class TestNoiseOperators:
    def test_empty_for_trivial_model(self):
        spec = LatticeSpec(2, 1.0, 1.0, 0.1)
        assert noise_jump_operators(NoiseModel(), spec) == []

    def test_operator_count(self):
        spec = LatticeSpec(3, 1.0, 1.0, 0.1)
        ops = noise_jump_operators(NoiseModel(relaxation_rate=0.1, dephasing_rate=0.2), spec)
        assert len(ops) == 6

    def test_dephasing_amplitude_carries_factor_two(self):
        kappa = 0.13
        spec = LatticeSpec(1, 1.0, 1.0, 0.0)
        ops = noise_jump_operators(NoiseModel(dephasing_rate=kappa), spec)
        assert len(ops) == 1
        element = ops[0].dense()[1, 1]
        assert abs(element) ** 2 == pytest.approx(2 * kappa, rel=1e-12)


class TestJumpStep:
    def test_no_rates_pure_unitary(self, rng):
        spec = LatticeSpec(1, 2.0, 1.0, 0.0)
        psi = StateVector.basis_state(spec, [1])
        phase = np.exp(-1j * 0.3)
        out = dissipation_jump_step(psi, [], lambda a: phase * a, 0.1, rng)
        assert np.abs(out.amplitudes - phase * psi.amplitudes).max() < 1e-12

    def test_vacuum_never_jumps(self, rng):
        spec = LatticeSpec(2, 1.0, 1.0, 0.1)
        gamma = 0.5
        ops = noise_jump_operators(NoiseModel(relaxation_rate=gamma), spec)
        psi = StateVector.basis_state(spec, [0, 0])
        for _ in range(100):
            out = dissipation_jump_step(psi, ops, lambda a: a, 0.05, rng)
            assert np.abs(out.amplitudes - psi.amplitudes).max() < 1e-12

    def test_survival_matches_exponential_decay(self, rng):
        # |1> with jump sqrt(gamma) a: survival after t is e^{-gamma t}
        gamma = 0.8
        spec = LatticeSpec(1, 0.0, 1.0, 0.0)
        op = build_site_operator(spec, 1, "annihilation")
        op.data = op.data * math.sqrt(gamma)
        dt = 0.02
        n_steps = 40
        t = dt * n_steps
        n_traj = 6000
        decay_factor = np.exp(-0.5 * gamma * dt)  # exact no-jump half-rate
        survived = 0
        base = StateVector.basis_state(spec, [1])
        for _ in range(n_traj):
            psi = StateVector(base.amplitudes.copy())
            alive = True
            for _ in range(n_steps):
                before = psi.amplitudes.copy()
                psi = dissipation_jump_step(
                    psi, [op], lambda a: decay_factor * a, dt, rng
                )
                if abs(psi.amplitudes[0]) > 0.5:  # jumped to |0>
                    alive = False
                    break
            if alive:
                survived += 1
        p = math.exp(-gamma * t)
        se = math.sqrt(p * (1 - p) / n_traj)
        assert abs(survived / n_traj - p) < 2.5 * se + 5e-3

    def test_probability_budget_first_order(self, rng):
        # sum dp_k + ||no-jump branch||^2 = 1 within O(dt^2)
        spec = LatticeSpec(2, 1.0, 1.0, 0.1)
        ops = noise_jump_operators(NoiseModel(relaxation_rate=0.3, dephasing_rate=0.2), spec)
        dense_ops = [o.dense() for o in ops]
        decay = sum(o.conj().T @ o for o in dense_ops)
        evals, vecs = np.linalg.eigh(decay)
        for dt in (0.01, 0.003):
            for _ in range(20):
                amp = rng.normal(size=9) + 1j * rng.normal(size=9)
                amp /= np.linalg.norm(amp)
                dp = sum(dt * np.linalg.norm(o @ amp) ** 2 for o in dense_ops)
                no_jump = vecs @ (np.exp(-0.5 * dt * evals) * (vecs.conj().T @ amp))
                budget = dp + np.linalg.norm(no_jump) ** 2
                assert abs(budget - 1.0) < 10 * dt**2

    def test_too_large_dt_raises(self, rng):
        spec = LatticeSpec(1, 0.0, 1.0, 0.0)
        op = build_site_operator(spec, 1, "annihilation")
        op.data = op.data * 10.0
        psi = StateVector.basis_state(spec, [2])
        with pytest.raises(StepTooLargeError):
            dissipation_jump_step(psi, [op], lambda a: a, 0.1, rng)


class TestThermalSampling:
    def test_zero_temperature_all_ground(self, rng):
        spec = LatticeSpec.from_mhz(3, 7500, 250, 5, 100)
        real = realize_disorder(spec, 3)
        coding = np.array([0, 0, 1.0])
        psi = sample_thermal_initial(real, NoiseModel(), coding, rng)
        expected = StateVector.basis_state(spec, [2, 0, 0])
        assert np.abs(psi.amplitudes - expected.amplitudes).max() < 1e-12

    def test_boltzmann_ratio_at_100mk(self, rng):
        # 7.5 GHz at 100 mK: P1/P0 = exp(-3.6) within sampling error
        spec = LatticeSpec.from_mhz(2, 7500, 250, 0)
        real = realize_disorder(spec, 0)
        model = NoiseModel(temperature=0.1)
        weights = local_thermal_weights(real.omegas[1], real.anharmonicities[1], 0.1)
        ratio = weights[1] / weights[0]
        assert ratio == pytest.approx(math.exp(-3.5995), rel=1e-3)
        coding = np.array([1.0, 0, 0])
        n_samples = 100_000
        counts = np.zeros(3)
        for _ in range(n_samples):
            psi = sample_thermal_initial(real, model, coding, rng)
            idx = int(np.argmax(np.abs(psi.amplitudes)))
            counts[idx % 3] += 1
        freq = counts / n_samples
        sigma = np.sqrt(weights * (1 - weights) / n_samples)
        assert np.all(np.abs(freq - weights) < 3.5 * sigma + 1e-12)

    def test_weights_normalized_after_truncation(self):
        weights = local_thermal_weights(47000.0, 1570.0, 0.25)
        assert weights.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(weights >= 0)

    def test_product_form_no_correlations(self, rng):
        spec = LatticeSpec.from_mhz(3, 7500, 250, 0, 100)
        real = realize_disorder(spec, 8)
        model = NoiseModel(temperature=0.35)  # hotter for more excitation
        coding = np.array([1.0, 0, 0])
        n_samples = 20_000
        n2 = np.empty(n_samples)
        n3 = np.empty(n_samples)
        for k in range(n_samples):
            psi = sample_thermal_initial(real, model, coding, rng)
            idx = int(np.argmax(np.abs(psi.amplitudes)))
            n3[k] = idx % 3
            n2[k] = (idx // 3) % 3
        corr = np.corrcoef(n2, n3)[0, 1]
        assert abs(corr) < 4.0 / math.sqrt(n_samples)

    def test_negative_temperature_rejected(self):
        with pytest.raises(ValueError):
            NoiseModel(temperature=-1.0)
