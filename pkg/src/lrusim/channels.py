"""Reset channels, background noise operators and thermal initial states.

The reset acts on the last site of the chain: either a projective feedback
measurement that maps any outcome |n> to |0> (applied periodically or at
random times), or an engineered dissipation jump operator sqrt(Gamma) a_L.
Background noise enters as per-site relaxation and dephasing jump
operators; non-zero temperature enters only through the sampled initial
state of the idle sites.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lattice import DisorderRealization, LatticeSpec, OperatorMatrix, build_site_operator
from .propagator import StateVector
from .units import thermal_exponent

CHANNEL_KINDS = ("periodic_feedback", "random_feedback", "dissipation")

#: Born-rule support cutoff: outcomes below this probability are excluded.
PROJECTION_EPS = 1e-15


class StepTooLargeError(Exception):
    """Total jump probability in one step reached one; reduce dt."""


@dataclass(frozen=True)
class ResetChannel:
    """Reset mechanism at one site (by default the last)."""

    kind: str
    rate: float
    site: int | None = None  # None means the last site

    def __post_init__(self):
        if self.kind not in CHANNEL_KINDS:
            raise ValueError(f"unknown channel kind {self.kind!r}")
        if self.rate < 0:
            raise ValueError("rate must be non-negative")

    def site_index(self, spec: LatticeSpec) -> int:
        site = self.site if self.site is not None else spec.length
        if not 1 <= site <= spec.length:
            raise ValueError(f"site {site} outside 1..{spec.length}")
        return site

    @property
    def is_feedback(self) -> bool:
        return self.kind in ("periodic_feedback", "random_feedback")


@dataclass(frozen=True)
class NoiseModel:
    """Background noise rates and temperature.

    relaxation_rate is 1/T1 of a single transmon, dephasing_rate is 1/T_phi;
    temperature (kelvin) only shapes the initial Gibbs sampling of the idle
    sites, zero meaning ground-state initialization.
    """

    relaxation_rate: float = 0.0
    dephasing_rate: float = 0.0
    temperature: float = 0.0

    def __post_init__(self):
        if min(self.relaxation_rate, self.dephasing_rate, self.temperature) < 0:
            raise ValueError("noise rates and temperature must be non-negative")

    @property
    def is_trivial(self) -> bool:
        return self.relaxation_rate == 0 and self.dephasing_rate == 0 and self.temperature == 0


def measurement_times(channel: ResetChannel, t_max: float, rng: np.random.Generator,
                      dt: float | None = None) -> np.ndarray:
    """Event times of the feedback measurements in [0, t_max].

    Periodic: t0 + k/rate with t0 uniform on [0, 1/rate) -- the first
    measurement time is random because the leakage creation time is unknown.
    Random: one Bernoulli draw per step of size dt with p = rate*dt, which
    realizes a Poisson process of the given rate for small dt.
    """
    if not channel.is_feedback:
        raise ValueError("measurement times are defined for feedback channels only")
    if channel.rate == 0:
        return np.empty(0)
    if channel.kind == "periodic_feedback":
        period = 1.0 / channel.rate
        t0 = rng.uniform(0.0, period)
        return np.arange(t0, t_max + 1e-12 * max(t_max, 1.0), period)
    if dt is None:
        raise ValueError("random feedback needs the step size dt")
    p = channel.rate * dt
    if p >= 1:
        raise StepTooLargeError(f"rate*dt = {p:.3f} >= 1")
    n_steps = int(math.floor(t_max / dt))
    hits = rng.random(n_steps) < p
    return (np.nonzero(hits)[0] + 1.0) * dt


def born_probabilities(amplitudes: np.ndarray, spec: LatticeSpec, site: int) -> np.ndarray:
    """Probabilities of the local occupation outcomes at `site` (1-based)."""
    d, L = spec.local_dim, spec.length
    shaped = amplitudes.reshape((d ** (site - 1), d, d ** (L - site)))
    probs = np.einsum("anb,anb->n", shaped, shaped.conj()).real
    total = probs.sum()
    if total <= 0:
        raise ValueError("cannot measure a zero state")
    return probs / total


def apply_feedback_measurement(psi: StateVector, spec: LatticeSpec, site: int,
                               rng: np.random.Generator) -> tuple[StateVector, int]:
    """Projective number measurement at `site` followed by the reset |n> -> |0>.

    The outcome is sampled from the Born probabilities; outcomes with
    probability below PROJECTION_EPS are excluded from the sampling support.
    The returned state is normalized and has the measured site in |0>.
    """
    amp = psi.amplitudes
    probs = born_probabilities(amp, spec, site)
    support = probs > PROJECTION_EPS
    probs = np.where(support, probs, 0.0)
    probs /= probs.sum()
    outcome = int(np.searchsorted(np.cumsum(probs), rng.random(), side="right"))
    outcome = min(outcome, spec.local_dim - 1)

    d, L = spec.local_dim, spec.length
    shaped = amp.reshape((d ** (site - 1), d, d ** (L - site)))
    new = np.zeros_like(shaped)
    new[:, 0, :] = shaped[:, outcome, :]
    new_amp = new.reshape(-1)
    return StateVector(new_amp / np.linalg.norm(new_amp)), outcome


def noise_jump_operators(model: NoiseModel, spec: LatticeSpec) -> list[OperatorMatrix]:
    """Per-site Lindblad jump operators for relaxation and dephasing.

    Relaxation: sqrt(gamma) a_l. Dephasing: sqrt(2 kappa) n_l -- the factor
    of two comes from mapping qubit sigma_z dephasing onto the transmon
    number operator. Returns 2L operators when both rates are positive.
    """
    ops: list[OperatorMatrix] = []
    if model.relaxation_rate > 0:
        root = math.sqrt(model.relaxation_rate)
        for site in range(1, spec.length + 1):
            op = build_site_operator(spec, site, "annihilation")
            op.data = op.data * root
            ops.append(op)
    if model.dephasing_rate > 0:
        root = math.sqrt(2.0 * model.dephasing_rate)
        for site in range(1, spec.length + 1):
            op = build_site_operator(spec, site, "number")
            op.data = op.data * root
            op.hermitian = True
            ops.append(op)
    return ops


def dissipation_jump_step(psi: StateVector, jump_ops, no_jump_step, dt: float,
                          rng: np.random.Generator) -> StateVector:
    """One first-order trajectory step with candidate quantum jumps.

    With probability dp_k = dt * ||L_k psi||^2 the normalized jump
    L_k psi / ||L_k psi|| is applied; otherwise the state evolves under the
    no-jump effective Hamiltonian (callable `no_jump_step`, which should
    return the unnormalized exp(-i H_eff dt) psi) and is renormalized.
    A single uniform decides both whether and which jump fires.
    """
    amp = psi.amplitudes
    jumped = [np.asarray(op.data @ amp) for op in jump_ops]
    dp = np.array([dt * np.vdot(j, j).real for j in jumped])
    total = dp.sum()
    if total >= 1.0:
        raise StepTooLargeError(f"total jump probability {total:.3f} >= 1")
    r = rng.random()
    if r < total:
        k = int(np.searchsorted(np.cumsum(dp), r, side="right"))
        k = min(k, len(jumped) - 1)
        out = jumped[k]
        return StateVector(out / np.linalg.norm(out))
    out = np.asarray(no_jump_step(amp))
    return StateVector(out / np.linalg.norm(out))


def local_thermal_weights(omega: float, anharmonicity: float, temperature: float,
                          d: int = 3) -> np.ndarray:
    """Boltzmann weights of the local levels n = 0..d-1, renormalized.

    Level energies are omega*n - (U/2) n (n-1), the J = 0 on-site spectrum.
    """
    n = np.arange(d, dtype=float)
    energies = omega * n - 0.5 * anharmonicity * n * (n - 1.0)
    if temperature == 0:
        weights = np.zeros(d)
        weights[0] = 1.0
        return weights
    exponents = np.array([thermal_exponent(e, temperature) for e in energies])
    exponents -= exponents.min()
    weights = np.exp(-exponents)
    return weights / weights.sum()


def sample_thermal_initial(real: DisorderRealization, model: NoiseModel,
                           coding_state, rng: np.random.Generator) -> StateVector:
    """Initial chain state: coding state on site 1, Gibbs-sampled idle sites.

    Sites 2..L are drawn independently from the J = 0 Boltzmann weights of
    their local levels (truncated at n = d-1 and renormalized); each call
    returns one sampled product eigenstate, not the averaged Gibbs state.
    """
    spec = real.spec
    coding = np.asarray(coding_state, dtype=complex).ravel()
    if coding.size != spec.local_dim:
        raise ValueError("coding state must be a single-site vector")
    locals_ = [coding / np.linalg.norm(coding)]
    for site in range(2, spec.length + 1):
        weights = local_thermal_weights(
            real.omegas[site - 1], real.anharmonicities[site - 1],
            model.temperature, spec.local_dim,
        )
        level = int(np.searchsorted(np.cumsum(weights), rng.random(), side="right"))
        level = min(level, spec.local_dim - 1)
        vec = np.zeros(spec.local_dim, dtype=complex)
        vec[level] = 1.0
        locals_.append(vec)
    return StateVector.product_state(locals_)
