"""Stochastic trajectory ensembles and the dense master-equation oracle.

Each trajectory draws its own disorder realization and thermal initial
state, evolves under the chain Hamiltonian with the reset channel and
background noise, and reports leakage/occupation/coherence series on a
common observable grid. Ensembles average trajectories and attach
standard errors.

The default integrator is event-driven: between feedback measurements and
observable grid points the state advances with the cached exact
eigendecomposition of the (generally non-Hermitian) no-jump Hamiltonian,
and quantum jumps are located by the norm-threshold (waiting-time) rule,
which is step-size free. A literal first-order per-step mode
(method="per_step") exists for validation against the channel contract;
it is what the spec of the jump step describes, but needs dt small against
every jump rate, which is wasteful at high reset rates.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .channels import (
    NoiseModel,
    ResetChannel,
    StepTooLargeError,
    dissipation_jump_step,
    local_thermal_weights,
    noise_jump_operators,
    sample_thermal_initial,
)
from .lattice import (
    DisorderRealization,
    LatticeSpec,
    build_bose_hubbard,
    build_site_operator,
    realize_disorder,
)
from .propagator import EXACT_DIM_LIMIT, StateVector

#: Per-chunk trajectory count, shrunk for large dimensions so the cached
#: eigendecompositions stay within a fixed memory budget. Chunk boundaries
#: depend only on the configuration, never on the worker count.
_CHUNK_ENTRY_BUDGET = 4_000_000


CODING_STATES = {
    "ket0": np.array([1.0, 0.0, 0.0], dtype=complex),
    "ket1": np.array([0.0, 1.0, 0.0], dtype=complex),
    "ket2": np.array([0.0, 0.0, 1.0], dtype=complex),
    "plus": np.array([1.0, 1.0, 0.0], dtype=complex) / math.sqrt(2.0),
}

_TIME_EPS = 1e-9


@dataclass(frozen=True)
class SimulationConfig:
    """Full description of one ensemble run."""

    lattice: LatticeSpec
    channel: ResetChannel | None
    t_max: float
    dt: float
    n_trajectories: int
    noise: NoiseModel | None = None
    initial_coding_state: str = "ket2"
    master_seed: int = 0
    observable_stride: int = 1

    def __post_init__(self):
        if self.t_max <= 0 or self.dt <= 0:
            raise ValueError("t_max and dt must be positive")
        if self.n_trajectories < 1:
            raise ValueError("need at least one trajectory")
        if self.observable_stride < 1:
            raise ValueError("observable_stride must be >= 1")
        if self.initial_coding_state not in CODING_STATES:
            raise ValueError(f"unknown coding state {self.initial_coding_state!r}")
        if self.lattice.local_dim != 3:
            raise ValueError("the engine is written for qutrit chains")

    @property
    def observable_dt(self) -> float:
        return self.observable_stride * self.dt

    @property
    def time_grid(self) -> np.ndarray:
        n = max(1, round(self.t_max / self.observable_dt))
        return np.arange(n + 1) * self.observable_dt

    def coding_vector(self) -> np.ndarray:
        base = CODING_STATES[self.initial_coding_state]
        if self.lattice.local_dim == base.size:
            return base.copy()
        vec = np.zeros(self.lattice.local_dim, dtype=complex)
        vec[: base.size] = base
        return vec


@dataclass
class TrajectoryResult:
    """Observable series of a single trajectory."""

    time_grid: np.ndarray
    leakage_total: np.ndarray
    leakage_site1: np.ndarray
    occupation_site1: np.ndarray
    coherence_site1: np.ndarray  # complex


@dataclass
class EnsembleObservables:
    """Trajectory-averaged series with standard errors of the mean.

    `coherence_site1` is the plain complex ensemble mean; with per-trajectory
    disorder its phase spread hides the physical decoherence, so
    `coherence_envelope_site1` additionally averages the per-trajectory
    envelope 2|<0|rho_1|1>|, which is what a per-realization experiment
    records and what T2 fits should use.
    """

    time_grid: np.ndarray
    leakage_total: np.ndarray
    leakage_total_se: np.ndarray
    leakage_site1: np.ndarray
    leakage_site1_se: np.ndarray
    occupation_site1: np.ndarray
    occupation_site1_se: np.ndarray
    coherence_site1: np.ndarray  # complex mean
    coherence_site1_se: np.ndarray
    coherence_envelope_site1: np.ndarray
    coherence_envelope_site1_se: np.ndarray
    n_trajectories_used: int


@dataclass
class ModelSeries:
    """Deterministic observable series (master equation or effective model)."""

    time_grid: np.ndarray
    leakage_total: np.ndarray
    leakage_site1: np.ndarray
    occupation_site1: np.ndarray
    coherence_site1: np.ndarray


# ---------------------------------------------------------------------------
# per-trajectory randomness


def _disorder_seed(master_seed: int, index: int) -> int:
    return int(np.random.SeedSequence([master_seed, index, 0]).generate_state(1, np.uint64)[0])


def _stream(master_seed: int, index: int, purpose: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([master_seed, index, purpose]))


# ---------------------------------------------------------------------------
# observables on raw amplitude batches


def _diagonals(spec: LatticeSpec):
    d, L = spec.local_dim, spec.length
    n_local = np.arange(d, dtype=float)
    leak_local = n_local * (n_local - 1.0) / 2.0
    shape = [d] * L
    leak_total = np.zeros(shape)
    for site in range(L):
        view = [1] * L
        view[site] = d
        leak_total = leak_total + leak_local.reshape(view)
    view = [1] * L
    view[0] = d
    leak_site1 = np.broadcast_to(leak_local.reshape(view), shape).copy()
    n_site1 = np.broadcast_to(n_local.reshape(view), shape).copy()
    return leak_total.ravel(), leak_site1.ravel(), n_site1.ravel()


def _batch_observables(psi: np.ndarray, diags, d: int):
    """Return (leak_total, leak_site1, occ_site1, coherence) for (B, dim) states."""
    norms = np.einsum("bi,bi->b", psi, psi.conj()).real
    norms = np.where(norms > 0, norms, 1.0)
    probs = (psi.real**2 + psi.imag**2) / norms[:, None]
    leak_total = probs @ diags[0]
    leak_site1 = probs @ diags[1]
    occ_site1 = probs @ diags[2]
    shaped = psi.reshape(psi.shape[0], d, -1)
    coh = np.einsum("br,br->b", shaped[:, 0, :], shaped[:, 1, :].conj()) / norms
    return leak_total, leak_site1, occ_site1, coh


# ---------------------------------------------------------------------------
# the batched event-driven engine


class _ChunkEngine:
    """Evolves one chunk of trajectories in lockstep."""

    def __init__(self, config: SimulationConfig, indices, method: str):
        self.config = config
        self.indices = list(indices)
        self.method = method
        spec = config.lattice
        self.spec = spec
        self.dim = spec.dimension
        if self.dim > EXACT_DIM_LIMIT:
            raise ValueError(
                f"trajectory engine supports dimensions up to {EXACT_DIM_LIMIT}"
            )
        self.batch = len(self.indices)
        self.channel = config.channel
        self.noise = config.noise or NoiseModel()
        self.site = self.channel.site_index(spec) if self.channel else spec.length

        self._build_jump_operators()
        self._build_states_and_hamiltonians()
        self._init_channel_schedule()
        self._init_thresholds()

    # -- setup ------------------------------------------------------------

    def _build_jump_operators(self):
        ops = [op.dense() for op in noise_jump_operators(self.noise, self.spec)]
        if self.channel is not None and self.channel.kind == "dissipation" and self.channel.rate > 0:
            a_last = build_site_operator(self.spec, self.site, "annihilation").dense()
            ops.append(math.sqrt(self.channel.rate) * a_last)
        self.jump_ops = ops
        self.has_jumps = bool(ops)

    def _build_states_and_hamiltonians(self):
        cfg, spec = self.config, self.spec
        dim, B = self.dim, self.batch
        hams = np.empty((B, dim, dim), dtype=complex)
        psi = np.empty((B, dim), dtype=complex)
        coding = cfg.coding_vector()

        self.realizations: list[DisorderRealization] = []
        for row, idx in enumerate(self.indices):
            real = realize_disorder(spec, _disorder_seed(cfg.master_seed, idx))
            self.realizations.append(real)
            hams[row] = build_bose_hubbard(real).dense()
            rng_th = _stream(cfg.master_seed, idx, 1)
            psi[row] = sample_thermal_initial(real, self.noise, coding, rng_th).amplitudes

        if self.jump_ops:
            for op in self.jump_ops:
                ldl = op.conj().T @ op
                hams -= 0.5j * ldl[None, :, :]
        self.hermitian = not self.jump_ops

        if self.hermitian:
            evals, vecs = np.linalg.eigh(hams)
            self.evals = evals.astype(complex)
            self.vecs = vecs
            self.vinv = vecs.conj().transpose(0, 2, 1)
        else:
            evals, vecs = np.linalg.eig(hams)
            self.evals = evals
            self.vecs = vecs
            self.vinv = np.linalg.inv(vecs)
        self.psi = psi
        self.t_cur = np.zeros(B)
        self._u_fixed = None
        self._u_fixed_tau = None

    def _init_channel_schedule(self):
        cfg = self.config
        B = self.batch
        self.next_meas = np.full(B, math.inf)
        self.meas_rngs = [None] * B
        self.period = None
        if self.channel is None or not self.channel.is_feedback or self.channel.rate == 0:
            return
        if self.channel.kind == "periodic_feedback":
            self.period = 1.0 / self.channel.rate
            for row, idx in enumerate(self.indices):
                rng = _stream(cfg.master_seed, idx, 2)
                self.meas_rngs[row] = rng
                self.next_meas[row] = rng.uniform(0.0, self.period)
        else:
            p = self.channel.rate * cfg.dt
            if p >= 1:
                raise StepTooLargeError(f"rate*dt = {p:.3f} >= 1")
            for row, idx in enumerate(self.indices):
                rng = _stream(cfg.master_seed, idx, 2)
                self.meas_rngs[row] = rng
                self.next_meas[row] = self._draw_random_gap(rng) + 0.0

    def _draw_random_gap(self, rng) -> float:
        """Steps-to-next-event of the per-dt Bernoulli process, as a time."""
        p = self.channel.rate * self.config.dt
        u = rng.random()
        k = 1 + int(math.floor(math.log1p(-u) / math.log1p(-p)))
        return k * self.config.dt

    def _init_thresholds(self):
        cfg = self.config
        self.jump_rngs = [
            _stream(cfg.master_seed, idx, 3) if self.has_jumps else None
            for idx in self.indices
        ]
        if self.has_jumps:
            self.thresholds = np.array([rng.random() for rng in self.jump_rngs])
        else:
            self.thresholds = np.zeros(self.batch)

    # -- evolution primitives ---------------------------------------------

    def _evolve_rows(self, rows: np.ndarray, taus: np.ndarray):
        """Advance the given rows by per-row durations (states only)."""
        if rows.size == 0:
            return
        whole = rows.size == self.batch
        if self.period is not None and np.allclose(
            taus, self.period, rtol=0, atol=1e-6 * self.period
        ):
            if self._u_fixed is None:
                phases = np.exp(-1j * self.evals * self.period)
                self._u_fixed = self.vecs @ (phases[:, :, None] * self.vinv)
            u = self._u_fixed if whole else self._u_fixed[rows]
            out = np.matmul(u, self.psi[rows, :, None])[:, :, 0]
            if whole:
                self.psi = out
            else:
                self.psi[rows] = out
            return
        if whole:
            coeff = np.matmul(self.vinv, self.psi[:, :, None])[:, :, 0]
            coeff *= np.exp(-1j * self.evals * taus[:, None])
            self.psi = np.matmul(self.vecs, coeff[:, :, None])[:, :, 0]
            return
        coeff = np.matmul(self.vinv[rows], self.psi[rows, :, None])[:, :, 0]
        coeff *= np.exp(-1j * self.evals[rows] * taus[:, None])
        self.psi[rows] = np.matmul(self.vecs[rows], coeff[:, :, None])[:, :, 0]

    def _advance_to(self, rows: np.ndarray, targets: np.ndarray):
        """Advance rows to absolute times, resolving jumps on the way."""
        taus = targets - self.t_cur[rows]
        taus = np.where(taus > 0, taus, 0.0)
        if not self.has_jumps:
            self._evolve_rows(rows, taus)
            self.t_cur[rows] = targets
            return
        anchors = self.psi[rows].copy()
        t_from = self.t_cur[rows].copy()
        self._evolve_rows(rows, taus)
        self.t_cur[rows] = targets
        norms = np.einsum("bi,bi->b", self.psi[rows], self.psi[rows].conj()).real
        crossed = norms < self.thresholds[rows]
        for local in np.nonzero(crossed)[0]:
            row = int(rows[local])
            self._resolve_jumps(row, anchors[local], float(t_from[local]), float(targets[local]))

    def _resolve_jumps(self, row: int, anchor: np.ndarray, t_from: float, t_to: float):
        """Waiting-time jump resolution for one trajectory on [t_from, t_to]."""
        rng = self.jump_rngs[row]
        vecs, vinv, evals = self.vecs[row], self.vinv[row], self.evals[row]
        psi0 = anchor
        while True:
            c0 = vinv @ psi0
            span = t_to - t_from

            def norm_at(tau):
                amp = vecs @ (np.exp(-1j * evals * tau) * c0)
                return float(np.vdot(amp, amp).real), amp

            n_end, amp_end = norm_at(span)
            if n_end >= self.thresholds[row]:
                self.psi[row] = amp_end
                self.t_cur[row] = t_to
                return
            lo, hi = 0.0, span
            for _ in range(90):
                mid = 0.5 * (lo + hi)
                n_mid, _ = norm_at(mid)
                if n_mid < self.thresholds[row]:
                    hi = mid
                else:
                    lo = mid
            t_star = 0.5 * (lo + hi)
            _, amp_star = norm_at(t_star)
            weights = np.array([np.linalg.norm(op @ amp_star) ** 2 for op in self.jump_ops])
            total = weights.sum()
            if total <= 0:
                # norm loss without any open jump channel cannot happen for
                # the diagonal dissipators used here; guard anyway
                self.psi[row] = amp_end
                self.t_cur[row] = t_to
                return
            pick = int(np.searchsorted(np.cumsum(weights / total), rng.random(), side="right"))
            pick = min(pick, len(self.jump_ops) - 1)
            jumped = self.jump_ops[pick] @ amp_star
            psi0 = jumped / np.linalg.norm(jumped)
            self.thresholds[row] = rng.random()
            t_from = t_from + t_star

    # -- feedback measurements ---------------------------------------------

    def _measure_rows(self, rows: np.ndarray):
        if rows.size == 0:
            return
        d, L, site = self.spec.local_dim, self.spec.length, self.site
        pre = d ** (site - 1)
        post = d ** (L - site)
        sub = self.psi[rows].reshape(rows.size, pre, d, post)
        probs = np.einsum("band,band->bn", sub, sub.conj()).real
        totals = probs.sum(axis=1)
        probs = probs / totals[:, None]
        draws = np.array([self.meas_rngs[int(r)].random() for r in rows])
        cums = np.cumsum(probs, axis=1)
        outcomes = (draws[:, None] > cums).sum(axis=1)
        outcomes = np.minimum(outcomes, d - 1)
        picked = sub[np.arange(rows.size), :, outcomes, :]
        new = np.zeros_like(sub)
        new[:, :, 0, :] = picked
        # preserve the pre-measurement norm so waiting-time bookkeeping
        # keeps tracking only the non-Hermitian (dissipative) norm loss
        before = np.sqrt(totals)
        after = np.sqrt(np.einsum("band,band->b", new, new.conj()).real)
        scale = np.where(after > 0, before / np.maximum(after, 1e-300), 0.0)
        self.psi[rows] = (new * scale[:, None, None, None]).reshape(rows.size, -1)

    def _schedule_next_measurement(self, rows: np.ndarray):
        if self.period is not None:
            self.next_meas[rows] += self.period
            return
        for r in rows:
            self.next_meas[int(r)] += self._draw_random_gap(self.meas_rngs[int(r)])

    # -- main loops ---------------------------------------------------------

    def run(self):
        if self.method == "per_step":
            return self._run_per_step()
        grid = self.config.time_grid
        diags = _diagonals(self.spec)
        out = {name: np.empty((self.batch, grid.size)) for name in
               ("leakage_total", "leakage_site1", "occupation_site1", "envelope")}
        coh = np.empty((self.batch, grid.size), dtype=complex)
        self._record(0, grid[0], out, coh, diags)
        all_rows = np.arange(self.batch)
        for g in range(1, grid.size):
            t_goal = grid[g]
            while True:
                pending = self.next_meas <= t_goal + _TIME_EPS * max(t_goal, 1.0)
                if not pending.any():
                    break
                rows = np.nonzero(pending)[0]
                self._advance_to(rows, self.next_meas[rows])
                self._measure_rows(rows)
                self._schedule_next_measurement(rows)
            self._advance_to(all_rows, np.full(self.batch, t_goal))
            self._record(g, t_goal, out, coh, diags)
        return out, coh

    def _record(self, g: int, t: float, out, coh, diags):
        lt, l1, n1, c = _batch_observables(self.psi, diags, self.spec.local_dim)
        out["leakage_total"][:, g] = lt
        out["leakage_site1"][:, g] = l1
        out["occupation_site1"][:, g] = n1
        out["envelope"][:, g] = 2.0 * np.abs(c)
        coh[:, g] = c

    # -- literal first-order stepping (validation path) ---------------------

    def _run_per_step(self):
        cfg = self.config
        grid = cfg.time_grid
        diags = _diagonals(self.spec)
        out = {name: np.empty((self.batch, grid.size)) for name in
               ("leakage_total", "leakage_site1", "occupation_site1", "envelope")}
        coh = np.empty((self.batch, grid.size), dtype=complex)
        n_steps = round(grid[-1] / cfg.dt)

        from .lattice import OperatorMatrix

        ops = [OperatorMatrix(data=op, dimension=self.dim, hermitian=False)
               for op in self.jump_ops]
        phases = np.exp(-1j * self.evals * cfg.dt)
        self._record(0, 0.0, out, coh, diags)
        for row in range(self.batch):
            vecs, vinv = self.vecs[row], self.vinv[row]
            step_phases = phases[row]
            rng = self.jump_rngs[row] or _stream(cfg.master_seed, self.indices[row], 3)

            def no_jump(amp, _v=vecs, _vi=vinv, _p=step_phases):
                return _v @ (_p * (_vi @ amp))

            psi = StateVector(self.psi[row])
            if self.has_jumps:
                psi = psi.normalized()
            t = 0.0
            g = 1
            for k in range(1, n_steps + 1):
                if self.has_jumps:
                    psi = dissipation_jump_step(psi, ops, no_jump, cfg.dt, rng)
                else:
                    psi = StateVector(no_jump(psi.amplitudes))
                t = k * cfg.dt
                while self.next_meas[row] <= t + _TIME_EPS:
                    self.psi[row] = psi.amplitudes
                    self._measure_rows(np.array([row]))
                    psi = StateVector(self.psi[row]).normalized()
                    self._schedule_next_measurement(np.array([row]))
                if g < grid.size and abs(t - grid[g]) < cfg.dt / 2:
                    self.psi[row] = psi.amplitudes
                    self._record_row(row, g, out, coh, diags)
                    g += 1
            self.psi[row] = psi.amplitudes
        return out, coh

    def _record_row(self, row: int, g: int, out, coh, diags):
        lt, l1, n1, c = _batch_observables(self.psi[row:row + 1], diags, self.spec.local_dim)
        out["leakage_total"][row, g] = lt[0]
        out["leakage_site1"][row, g] = l1[0]
        out["occupation_site1"][row, g] = n1[0]
        out["envelope"][row, g] = 2.0 * abs(c[0])
        coh[row, g] = c[0]


# ---------------------------------------------------------------------------
# public entry points


def _chunk_size(dim: int) -> int:
    return max(1, min(256, _CHUNK_ENTRY_BUDGET // (dim * dim)))


def run_trajectory(config: SimulationConfig, index: int, method: str = "auto") -> TrajectoryResult:
    """Run one trajectory; deterministic in (master_seed, index)."""
    engine = _ChunkEngine(config, [index], _resolve_method(method))
    out, coh = engine.run()
    return TrajectoryResult(
        time_grid=config.time_grid,
        leakage_total=out["leakage_total"][0],
        leakage_site1=out["leakage_site1"][0],
        occupation_site1=out["occupation_site1"][0],
        coherence_site1=coh[0],
    )


def _resolve_method(method: str) -> str:
    if method not in ("auto", "norm_threshold", "per_step"):
        raise ValueError(f"unknown method {method!r}")
    return "per_step" if method == "per_step" else "norm_threshold"


def run_ensemble(config: SimulationConfig, n_threads: int = 1,
                 method: str = "auto") -> EnsembleObservables:
    """Average config.n_trajectories independent trajectories.

    Chunking (and therefore every random draw) depends only on the
    configuration; the thread count changes the execution schedule but not
    the result, and accumulation runs in fixed trajectory order.
    """
    method = _resolve_method(method)
    n = config.n_trajectories
    size = _chunk_size(config.lattice.dimension)
    chunks = [list(range(start, min(start + size, n))) for start in range(0, n, size)]

    def work(indices):
        return _ChunkEngine(config, indices, method).run()

    if n_threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            results = list(pool.map(work, chunks))
    else:
        results = [work(c) for c in chunks]

    grid = config.time_grid
    real_parts = {name: np.concatenate([r[0][name] for r in results], axis=0)
                  for name in ("leakage_total", "leakage_site1", "occupation_site1", "envelope")}
    coh = np.concatenate([r[1] for r in results], axis=0)

    def mean_se(stack):
        mean = stack.mean(axis=0)
        if stack.shape[0] > 1:
            se = stack.std(axis=0, ddof=1) / math.sqrt(stack.shape[0])
        else:
            se = np.zeros_like(mean)
        return mean, se

    lt, lt_se = mean_se(real_parts["leakage_total"])
    l1, l1_se = mean_se(real_parts["leakage_site1"])
    n1, n1_se = mean_se(real_parts["occupation_site1"])
    env, env_se = mean_se(real_parts["envelope"])
    coh_mean = coh.mean(axis=0)
    if n > 1:
        spread = (np.abs(coh - coh_mean[None, :]) ** 2).sum(axis=0) / (n - 1)
        coh_se = np.sqrt(spread / n)
    else:
        coh_se = np.zeros(grid.size)
    return EnsembleObservables(
        time_grid=grid,
        leakage_total=lt, leakage_total_se=lt_se,
        leakage_site1=l1, leakage_site1_se=l1_se,
        occupation_site1=n1, occupation_site1_se=n1_se,
        coherence_site1=coh_mean, coherence_site1_se=coh_se,
        coherence_envelope_site1=env, coherence_envelope_site1_se=env_se,
        n_trajectories_used=n,
    )


# ---------------------------------------------------------------------------
# dense master-equation oracle


def _gibbs_density(real: DisorderRealization, noise: NoiseModel) -> np.ndarray:
    spec = real.spec
    rho = np.array([[1.0]], dtype=complex)
    for site in range(2, spec.length + 1):
        weights = local_thermal_weights(
            real.omegas[site - 1], real.anharmonicities[site - 1],
            noise.temperature, spec.local_dim,
        )
        rho = np.kron(rho, np.diag(weights).astype(complex))
    return rho


def solve_master_dense(config: SimulationConfig, t_grid=None,
                       rtol: float = 1e-9, atol: float = 1e-11) -> ModelSeries:
    """Integrate the Lindblad master equation for one disorder realization.

    Intended as a small-system oracle (the density matrix is dense). The
    disorder is drawn once from the master seed, so quantitative comparison
    against a trajectory ensemble -- which redraws disorder per trajectory --
    is meaningful at zero disorder. Feedback channels enter through the
    projector dissipator of randomly timed measurements; engineered
    dissipation and background noise through their standard jump operators.
    """
    spec = config.lattice
    if spec.dimension**2 > 1_000_000:
        raise ValueError("density-matrix oracle limited to dimension^2 <= 1e6")
    grid = np.asarray(config.time_grid if t_grid is None else t_grid, dtype=float)
    noise = config.noise or NoiseModel()
    real = realize_disorder(spec, _disorder_seed(config.master_seed, 0))
    ham = build_bose_hubbard(real).dense()

    jump_ops = [op.dense() for op in noise_jump_operators(noise, spec)]
    projectors = []
    rate_fb = 0.0
    if config.channel is not None and config.channel.rate > 0:
        site = config.channel.site_index(spec)
        if config.channel.kind == "dissipation":
            a_last = build_site_operator(spec, site, "annihilation").dense()
            jump_ops.append(math.sqrt(config.channel.rate) * a_last)
        else:
            rate_fb = config.channel.rate
            d, L = spec.local_dim, spec.length
            for n in range(d):
                local = np.zeros((d, d), dtype=complex)
                local[0, n] = 1.0
                proj = np.kron(
                    np.kron(np.eye(d ** (site - 1)), local), np.eye(d ** (L - site))
                )
                projectors.append(proj)

    coding = config.coding_vector()
    rho0 = np.kron(np.outer(coding, coding.conj()), _gibbs_density(real, noise))
    dim = spec.dimension
    lindblad_pairs = [(op, op.conj().T @ op) for op in jump_ops]

    def rhs(_t, flat):
        rho = flat.reshape(dim, dim)
        drho = -1j * (ham @ rho - rho @ ham)
        for op, ldl in lindblad_pairs:
            drho += op @ rho @ op.conj().T - 0.5 * (ldl @ rho + rho @ ldl)
        if rate_fb > 0:
            kick = sum(p @ rho @ p.conj().T for p in projectors)
            drho += rate_fb * (kick - rho)
        return drho.ravel()

    sol = solve_ivp(rhs, (grid[0], grid[-1]), rho0.ravel(), t_eval=grid,
                    method="DOP853", rtol=rtol, atol=atol)
    if not sol.success:
        raise RuntimeError(f"master-equation integration failed: {sol.message}")

    from .observables import leakage_population, site1_coherence, site_occupations

    lt = np.empty(grid.size)
    l1 = np.empty(grid.size)
    n1 = np.empty(grid.size)
    coh = np.empty(grid.size, dtype=complex)
    for k in range(grid.size):
        rho = sol.y[:, k].reshape(dim, dim)
        rho = 0.5 * (rho + rho.conj().T)
        lt[k] = leakage_population(rho, spec.local_dim)
        l1[k] = leakage_population(rho, spec.local_dim, sites=[1])
        n1[k] = site_occupations(rho, spec.local_dim)[0]
        coh[k] = site1_coherence(rho, spec.local_dim)
    return ModelSeries(time_grid=grid, leakage_total=lt, leakage_site1=l1,
                       occupation_site1=n1, coherence_site1=coh)
