"""Brute-force full-Hilbert-space simulator certifying the block reduction.

Everything here works in the 2^(N+1)-dimensional tensor-product space of
the N sites plus the sink, with operators assembled from Kronecker
products.  It deliberately shares no operator-construction code with the
block modules: the two paths can only agree if both transcribe the master
equation correctly.  Runtime is a non-goal; the cap N <= 6 keeps dense
matrices at 128x128.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad, solve_ivp

from .errors import DimensionCap
from .model import (
    ChainModel,
    DephasingSchedule,
    accumulated_dephasing,
    dephasing_rate,
    energy_shift,
)

MAX_ORACLE_SITES = 6

# qubit basis (|g>, |e>)
_SZ = np.array([[-1.0, 0.0], [0.0, 1.0]], dtype=complex)
_SP = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)   # |e><g|
_SM = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)   # |g><e|
_I2 = np.eye(2, dtype=complex)


def _embed(op: np.ndarray, pos: int, n_factors: int) -> np.ndarray:
    """Kronecker-embed a single-qubit operator at factor position pos."""
    out = np.array([[1.0 + 0.0j]])
    for k in range(n_factors):
        out = np.kron(out, op if k == pos else _I2)
    return out


def _check_cap(n_sites: int) -> None:
    if n_sites > MAX_ORACLE_SITES:
        raise DimensionCap(f"oracle capped at {MAX_ORACLE_SITES} sites, got {n_sites}")


def full_hamiltonian(model: ChainModel) -> np.ndarray:
    """Chain Hamiltonian on the full space; the sink carries no term."""
    _check_cap(model.n_sites)
    n = model.n_sites
    nf = n + 1
    h = np.zeros((2 ** nf, 2 ** nf), dtype=complex)
    for i in range(n):
        h += 0.5 * model.omega[i] * _embed(_SZ, i, nf)
    for i in range(n - 1):
        sp_i = _embed(_SP, i, nf)
        sm_n = _embed(_SM, i + 1, nf)
        hop = sp_i @ sm_n
        h += model.lam[i] * (hop + hop.conj().T)
    return h


class FullRHS:
    """Literal transcription of the master equation on the full space.

    Per site: kappa_i (2 sm rho sp - sp sm rho - rho sp sm)
            + gamma_i(t) (sz rho sz - rho) - i s_i(t) [sz, rho];
    sink:     kappa_sink (2 A rho A+ - A+A rho - rho A+A)
    with A = sp_sink sm_N, plus -i[H, rho].  The dissipator gain terms are
    kept explicitly, so the map is trace preserving.
    """

    def __init__(self, model: ChainModel, scheds):
        _check_cap(model.n_sites)
        scheds = tuple(scheds)
        if len(scheds) != model.n_sites:
            raise ValueError(f"expected {model.n_sites} schedules, got {len(scheds)}")
        self.model = model
        self.scheds = scheds
        n = model.n_sites
        nf = n + 1
        self.dim = 2 ** nf
        self.h = full_hamiltonian(model)
        self.sz = [_embed(_SZ, i, nf) for i in range(n)]
        self.sm = [_embed(_SM, i, nf) for i in range(n)]
        self.sp = [_embed(_SP, i, nf) for i in range(n)]
        self.num = [p @ m for p, m in zip(self.sp, self.sm)]   # sp sm = |e><e|_i
        self.jump = _embed(_SP, n, nf) @ _embed(_SM, n - 1, nf)
        self.jump_dag = self.jump.conj().T
        self.jump_sq = self.jump_dag @ self.jump

    def __call__(self, t: float, rho: np.ndarray) -> np.ndarray:
        model = self.model
        out = -1j * (self.h @ rho - rho @ self.h)
        for i in range(model.n_sites):
            k = model.kappa[i]
            if k != 0.0:
                out += k * (2.0 * (self.sm[i] @ rho @ self.sp[i])
                            - self.num[i] @ rho - rho @ self.num[i])
            g = dephasing_rate(t, self.scheds[i])
            if g != 0.0:
                out += g * (self.sz[i] @ rho @ self.sz[i] - rho)
            s = energy_shift(t, self.scheds[i])
            if s != 0.0:
                out += -1j * s * (self.sz[i] @ rho - rho @ self.sz[i])
        ks = model.kappa_sink
        if ks != 0.0:
            out += ks * (2.0 * (self.jump @ rho @ self.jump_dag)
                         - self.jump_sq @ rho - rho @ self.jump_sq)
        return out

    def vector_field(self, t: float, v: np.ndarray) -> np.ndarray:
        d = self.dim
        return self(t, v.reshape(d, d)).ravel()


def full_rhs(rho: np.ndarray, t: float, model: ChainModel, scheds) -> np.ndarray:
    """One-shot evaluation of the full-space master equation."""
    return FullRHS(model, scheds)(t, rho)


def single_excitation_indices(n_sites: int) -> list[int]:
    """Full-space basis indices of {site 1 excited, ..., site N, sink}."""
    return [1 << (n_sites + 1 - i) for i in range(1, n_sites + 1)] + [1]


def ground_index() -> int:
    return 0


def extract_block(rho_full: np.ndarray, n_sites: int) -> np.ndarray:
    """Single-excitation submatrix of a full-space state."""
    idx = single_excitation_indices(n_sites)
    return rho_full[np.ix_(idx, idx)]


def initial_full_state(n_sites: int) -> np.ndarray:
    """Excitation on site 1, all other qubits and the sink in the ground state."""
    _check_cap(n_sites)
    dim = 2 ** (n_sites + 1)
    rho = np.zeros((dim, dim), dtype=complex)
    i = 1 << n_sites
    rho[i, i] = 1.0
    return rho


def integrate_full(model: ChainModel, scheds, rho0: np.ndarray, t_eval,
                   rel_tol: float = 1e-10, abs_tol: float = 1e-12,
                   max_step: float | None = None) -> np.ndarray:
    """Propagate a full-space state, returning states at the requested times.

    Uses scipy's embedded RK45 so the integration machinery is independent
    of the block stepper as well.  The step ceiling defaults to a
    hundredth of the fastest control period, matching the block side's
    anti-aliasing guard.
    """
    rhs = FullRHS(model, scheds)
    t_eval = np.asarray(t_eval, dtype=float)
    if max_step is None:
        j_max = max((s.J for s in rhs.scheds), default=0.0)
        max_step = 0.01 / j_max if j_max > 0 else 0.1
    sol = solve_ivp(rhs.vector_field, (t_eval[0], t_eval[-1]),
                    np.asarray(rho0, dtype=complex).ravel(),
                    method="RK45", t_eval=t_eval,
                    rtol=rel_tol, atol=abs_tol, max_step=max_step)
    if not sol.success:
        raise RuntimeError(f"full-space integration failed: {sol.message}")
    d = rhs.dim
    return sol.y.T.reshape(-1, d, d)


def validate_reduction(model: ChainModel, scheds, t_end: float = 50.0,
                       n_checkpoints: int = 26, rel_tol: float = 1e-11,
                       abs_tol: float = 1e-13) -> float:
    """Max-norm deviation between the block state and the full-space oracle.

    Both representations start from the excitation-on-site-1 state and are
    integrated independently; the result is the maximum over checkpoints
    of max|rho_block - rho_full restricted to the block|.
    """
    from .integrator import IntegratorConfig, integrate
    from .model import initial_block_state

    checkpoints = np.linspace(0.0, t_end, n_checkpoints)
    cfg = IntegratorConfig(rel_tol=rel_tol, abs_tol=abs_tol, t_max=t_end,
                           residual_eps=0.0)
    traj = integrate(model, scheds, cfg, record="states",
                     rho0=initial_block_state(model.n_sites),
                     checkpoints=checkpoints[1:])
    full_states = integrate_full(model, scheds, initial_full_state(model.n_sites),
                                 checkpoints, rel_tol=rel_tol, abs_tol=abs_tol)

    block_by_time = {round(t, 12): s for t, s in zip(traj.state_times, traj.states)}
    dev = 0.0
    for t, rho_full in zip(checkpoints, full_states):
        key = round(float(t), 12)
        if key not in block_by_time:
            raise RuntimeError(f"block integration missed checkpoint t={t}")
        diff = np.max(np.abs(block_by_time[key] - extract_block(rho_full, model.n_sites)))
        dev = max(dev, float(diff))
    return dev


# ---------------------------------------------------------------------------
# validation suite (backend of the CLI `validate` command)

@dataclass
class CheckResult:
    name: str
    value: float
    threshold: float
    passed: bool

    def line(self) -> str:
        return (f"{'PASS' if self.passed else 'FAIL'}  {self.name}: "
                f"{self.value:.3e} (threshold {self.threshold:.0e})")


def reduction_cases(level: str = "full"):
    """Named (model, schedules) pairs covering the benchmark parameter sets.

    ``fast`` returns the two-site set only; ``full`` adds the three-site
    variants of all three benchmark parameter families.
    """
    ctl = dict(J=10.0, theta=0.8)
    cases = [
        ("two-site benchmark set, N=2",
         ChainModel(omega=(1.0, 1.0), lam=(0.3,), kappa=(0.1, 0.1), kappa_sink=0.6),
         (DephasingSchedule(0.1, **ctl),) * 2),
    ]
    if level == "fast":
        return cases
    cases += [
        ("two-site benchmark set extended, N=3",
         ChainModel(omega=(1.0,) * 3, lam=(0.3,) * 2, kappa=(0.1,) * 3, kappa_sink=0.6),
         (DephasingSchedule(0.1, **ctl),) * 3),
        ("length-sweep set, N=2",
         ChainModel(omega=(2.0, 2.0), lam=(0.1,), kappa=(0.1, 0.1), kappa_sink=0.6),
         (DephasingSchedule(0.2, **ctl),) * 2),
        ("length-sweep set, N=3",
         ChainModel(omega=(2.0,) * 3, lam=(0.1,) * 2, kappa=(0.1,) * 3, kappa_sink=0.6),
         (DephasingSchedule(0.2, **ctl),) * 3),
        ("detuned-middle set, N=2",
         ChainModel(omega=(0.5, 2.0), lam=(0.2,), kappa=(0.05, 0.05), kappa_sink=0.6),
         (DephasingSchedule(0.0),
          DephasingSchedule(0.5, include_shift=False, **ctl))),
        ("detuned-middle set, N=3",
         ChainModel(omega=(0.5, 2.0, 0.5), lam=(0.2, 0.2), kappa=(0.05,) * 3,
                    kappa_sink=0.6),
         (DephasingSchedule(0.0),
          DephasingSchedule(0.5, include_shift=False, **ctl),
          DephasingSchedule(0.0))),
    ]
    return cases


def _check_rate_identity() -> CheckResult:
    # at theta = pi/4 the rate collapses to (pi J / 2) tan(pi J t)
    sched = DephasingSchedule(0.0, 7.3, math.pi / 4)
    rng = np.random.default_rng(1234)
    worst = 0.0
    n = 0
    while n < 100:
        t = float(rng.uniform(0.0, 2.0 / sched.J))
        u = math.pi * sched.J * t
        if abs(math.cos(u)) < 1e-3:
            continue
        n += 1
        simplified = 0.5 * math.pi * sched.J * math.tan(u)
        worst = max(worst, abs(dephasing_rate(t, sched) - simplified)
                    / max(1.0, abs(simplified)))
    return CheckResult("rate formula vs tan identity at theta=pi/4", worst, 1e-10,
                       worst <= 1e-10)


def _check_accumulated_quadrature() -> CheckResult:
    sched = DephasingSchedule(0.1, 10.0, 0.8)
    worst = 0.0
    for t_end in (0.05, 0.13, 0.2):
        num, _ = quad(lambda t: dephasing_rate(t, sched), 0.0, t_end,
                      limit=400, epsabs=1e-12, epsrel=1e-12)
        worst = max(worst, abs(num - accumulated_dephasing(t_end, sched)))
    return CheckResult("accumulated dephasing vs quadrature", worst, 1e-8,
                       worst <= 1e-8)


def _check_cascade() -> CheckResult:
    from .integrator import IntegratorConfig, integrate

    model = ChainModel(omega=(1.0,), lam=(), kappa=(0.1,), kappa_sink=0.6)
    cfg = IntegratorConfig()
    traj = integrate(model, (DephasingSchedule(0.0),), cfg)
    rate = 2.0 * (0.1 + 0.6)
    exact = (0.6 / 0.7) * (1.0 - np.exp(-rate * traj.times))
    worst = float(np.max(np.abs(traj.p_sink - exact)))
    return CheckResult("one-site cascade vs closed form", worst, 1e-7, worst <= 1e-7)


def _qubit_coherence(sched: DephasingSchedule, omega: float = 1.0):
    """Full-space ground/excited coherence of a single dephased site."""
    model = ChainModel(omega=(omega,), lam=(), kappa=(0.0,), kappa_sink=0.0)
    psi = np.zeros(4, dtype=complex)
    psi[0] = psi[2] = 1.0 / math.sqrt(2.0)   # (|G> + |site 1>)/sqrt(2)
    rho0 = np.outer(psi, psi.conj())
    ts = np.linspace(0.0, 1.0, 101)
    states = integrate_full(model, (sched,), rho0, ts)
    return ts, states[:, 2, 0]


def _check_coherence_magnitude() -> CheckResult:
    sched = DephasingSchedule(0.1, 10.0, 0.8)
    ts, coh = _qubit_coherence(sched)
    exact = 0.5 * np.exp(-2.0 * np.array([accumulated_dephasing(t, sched) for t in ts]))
    worst = float(np.max(np.abs(np.abs(coh[1:]) - exact[1:]) / exact[1:]))
    return CheckResult("qubit coherence magnitude vs exp(-2 Gamma)", worst, 1e-6,
                       worst <= 1e-6)


def _check_coherence_phase() -> CheckResult:
    # phase of rho_{1,G} must be -omega t - 2 * integral of s; pins the
    # sign of the -i s(t) [sigma_z, rho] term
    omega = 1.0
    sched = DephasingSchedule(0.1, 10.0, 0.8)
    ts, coh = _qubit_coherence(sched, omega=omega)
    worst = 0.0
    for t, c in zip(ts[1:], coh[1:]):
        s_int, _ = quad(lambda u: energy_shift(u, sched), 0.0, float(t),
                        limit=800, epsabs=1e-12, epsrel=1e-12)
        expected = -omega * t - 2.0 * s_int
        delta = np.angle(c * np.exp(-1j * expected))
        worst = max(worst, abs(float(delta)))
    return CheckResult("qubit coherence phase (shift sign convention)", worst, 1e-6,
                       worst <= 1e-6)


def _reduction_check(case) -> CheckResult:
    label, model, scheds = case
    dev = validate_reduction(model, scheds)
    return CheckResult(f"block vs full-space reduction, {label}", dev, 1e-8,
                       dev <= 1e-8)


def run_validation(level: str = "fast", workers: int | None = None) -> list[CheckResult]:
    """Closed-form checks plus block-vs-full reduction at benchmark sets.

    The reduction cases are independent and run on a small process pool
    (capped at 4 workers) since each takes tens of seconds.
    """
    import os
    from concurrent.futures import ProcessPoolExecutor

    if level not in ("fast", "full"):
        raise ValueError(f"unknown validation level {level!r}")
    results = [
        _check_rate_identity(),
        _check_accumulated_quadrature(),
        _check_cascade(),
        _check_coherence_magnitude(),
        _check_coherence_phase(),
    ]
    cases = reduction_cases(level)
    if workers is None:
        workers = min(4, os.cpu_count() or 1)
    if workers > 1 and len(cases) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results.extend(pool.map(_reduction_check, cases))
    else:
        results.extend(_reduction_check(c) for c in cases)
    return results
