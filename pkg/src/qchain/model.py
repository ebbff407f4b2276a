"""Chain description, dephasing schedules, and the controlled-rate formulas.

A chain of N two-level sites is described by site energies omega_i,
nearest-neighbour couplings lam_i, local dissipation rates kappa_i and an
incoherent transfer rate kappa_sink from site N into a trapping sink.
All rates and energies are angular frequencies in units of a common
reference (hbar = 1); time is in inverse reference-frequency units.

States live in the single-excitation sector: an (N+1) x (N+1) complex
Hermitian matrix over the basis {site 1 excited, ..., site N excited,
sink excited}.  The shared ground state never builds coherence with this
sector, so its population is tracked implicitly as 1 - trace(rho).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import SingularSchedule

# Refuse rate evaluation closer to a denominator zero than this; the pole
# is reachable only for theta = pi/4 (mod pi/2) at odd multiples of 1/(2J).
DENOMINATOR_FLOOR = 1e-12


@dataclass(frozen=True)
class ChainModel:
    """Static description of a dissipative chain terminated by a sink.

    omega, lam and kappa have lengths N, N-1 and N.  Dissipation is
    Markovian, so every kappa_i and kappa_sink must be non-negative;
    site energies and couplings are unconstrained reals.
    """

    omega: tuple[float, ...]
    lam: tuple[float, ...]
    kappa: tuple[float, ...]
    kappa_sink: float

    def __post_init__(self):
        object.__setattr__(self, "omega", tuple(float(x) for x in self.omega))
        object.__setattr__(self, "lam", tuple(float(x) for x in self.lam))
        object.__setattr__(self, "kappa", tuple(float(x) for x in self.kappa))
        object.__setattr__(self, "kappa_sink", float(self.kappa_sink))
        n = len(self.omega)
        if n < 1:
            raise ValueError("chain needs at least one site")
        if len(self.lam) != n - 1:
            raise ValueError(f"expected {n - 1} couplings for {n} sites, got {len(self.lam)}")
        if len(self.kappa) != n:
            raise ValueError(f"expected {n} dissipation rates, got {len(self.kappa)}")
        if any(k < 0 for k in self.kappa):
            raise ValueError("dissipation rates must be non-negative")
        if self.kappa_sink < 0:
            raise ValueError("sink rate must be non-negative")

    @property
    def n_sites(self) -> int:
        return len(self.omega)


@dataclass(frozen=True)
class DephasingSchedule:
    """Per-site dephasing control: baseline rate plus a tunable oscillatory part.

    gamma0 is the uncontrolled environmental rate.  J and theta set the
    control: J = 0 switches it off, leaving gamma(t) = gamma0 and zero
    energy shift.  For suitable (J, theta) the instantaneous rate goes
    negative on part of each period, the signature of memory effects.

    include_shift toggles the control-induced energy shift s(t) that
    accompanies the rate modulation.  When identical schedules act on
    every site the shift is common mode and has no effect on populations;
    on a single site of a chain it integrates to a phase kick of pi/2 per
    control period regardless of theta, which freezes transport.  The
    single-site dephasing-assisted-transport preset therefore runs with
    the shift disabled (see sweep.preset_fig4).
    """

    gamma0: float
    J: float = 0.0
    theta: float = 0.0
    include_shift: bool = True

    def __post_init__(self):
        object.__setattr__(self, "gamma0", float(self.gamma0))
        object.__setattr__(self, "J", float(self.J))
        object.__setattr__(self, "theta", float(self.theta))
        object.__setattr__(self, "include_shift", bool(self.include_shift))
        if self.gamma0 < 0:
            raise ValueError("baseline dephasing rate must be non-negative")
        if self.J < 0:
            raise ValueError("control frequency must be non-negative")


def _control_terms(t: float, J: float, sin_sq_2theta: float, cos_4theta: float,
                   cos_2theta: float) -> tuple[float, float]:
    """Oscillatory rate increment and energy shift sharing one denominator."""
    s = math.sin(math.pi * J * t)
    den = 3.0 + 2.0 * cos_4theta * s * s + math.cos(2.0 * math.pi * J * t)
    if abs(den) <= DENOMINATOR_FLOOR:
        raise SingularSchedule(t)
    osc = math.pi * J * sin_sq_2theta * math.sin(2.0 * math.pi * J * t) / den
    return osc, 2.0 * math.pi * J * cos_2theta / den


def dephasing_rate(t: float, sched: DephasingSchedule) -> float:
    """Instantaneous dephasing rate gamma(t); may be negative for J > 0."""
    if sched.J == 0.0:
        return sched.gamma0
    sin_2t = math.sin(2.0 * sched.theta)
    osc, _ = _control_terms(t, sched.J, sin_2t * sin_2t,
                            math.cos(4.0 * sched.theta), math.cos(2.0 * sched.theta))
    return sched.gamma0 + osc


def energy_shift(t: float, sched: DephasingSchedule) -> float:
    """Control-induced energy shift s(t); zero for J = 0 or a disabled shift."""
    if sched.J == 0.0 or not sched.include_shift:
        return 0.0
    sin_2t = math.sin(2.0 * sched.theta)
    _, shift = _control_terms(t, sched.J, sin_2t * sin_2t,
                              math.cos(4.0 * sched.theta), math.cos(2.0 * sched.theta))
    return shift


def accumulated_dephasing(t: float, sched: DephasingSchedule) -> float:
    """Closed-form integral of gamma over [0, t].

    Equals gamma0*t - ln(1 - sin^2(2*theta) sin^2(pi*J*t)) / 4; the log
    term vanishes at every t = k/J, so the accumulated exponent returns
    exactly to the Markovian value once per control period.
    """
    if sched.J == 0.0:
        return sched.gamma0 * t
    s = math.sin(2.0 * sched.theta) * math.sin(math.pi * sched.J * t)
    arg = 1.0 - s * s
    if arg <= 0.25 * DENOMINATOR_FLOOR:
        raise SingularSchedule(t)
    return sched.gamma0 * t - 0.25 * math.log(arg)


def pole_time(sched: DephasingSchedule) -> float | None:
    """First time at which the schedule denominator vanishes, or None.

    The denominator reaches 4*(1 - sin^2(2*theta)) at its minimum, so a
    pole exists only when theta sits at pi/4 (mod pi/2) to within float
    resolution, and then first occurs at t = 1/(2J).
    """
    if sched.J == 0.0:
        return None
    s = math.sin(2.0 * sched.theta)
    if 4.0 * (1.0 - s * s) > DENOMINATOR_FLOOR:
        return None
    return 0.5 / sched.J


def initial_block_state(n_sites: int) -> np.ndarray:
    """Excitation on site 1, everything else (and the sink) in the ground state."""
    rho = np.zeros((n_sites + 1, n_sites + 1), dtype=complex)
    rho[0, 0] = 1.0
    return rho


def hermitize(rho: np.ndarray) -> np.ndarray:
    """Project onto the Hermitian part, (rho + rho^dagger) / 2."""
    return 0.5 * (rho + rho.conj().T)


@dataclass
class Trajectory:
    """Observables recorded at the accepted steps of one integration.

    populations holds the N site populations per record; p_sink the sink
    population; trace the total block population (chain + sink).  states
    is filled only when full matrices were requested, at the times listed
    in state_times.
    """

    times: np.ndarray
    p_sink: np.ndarray
    populations: np.ndarray
    trace: np.ndarray
    terminal_flag: str
    n_steps: int
    n_rejected: int
    states: list[np.ndarray] | None = None
    state_times: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def residual(self) -> np.ndarray:
        """Excitation still in the chain: trace(rho) - p_sink."""
        return self.trace - self.p_sink
