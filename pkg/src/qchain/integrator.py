"""Adaptive propagation of the block state and efficiency extraction.

The stepper is an embedded Dormand-Prince 4(5) pair with per-element
error control.  For J > 0 the dephasing rate oscillates with period 1/J,
typically orders of magnitude faster than the transport timescales, so
the step ceiling defaults to a hundredth of that period; a fixed step
would either waste work or alias the oscillation.

Integration stops once the excitation left in the chain,
R(t) = trace(rho) - p_sink, drops below residual_eps.  The remaining
excitation either dissipates or reaches the sink, so the asymptotic sink
population is bracketed by [p_sink, p_sink + R]; the midpoint is reported
with uncertainty R/2.
"""

from dataclasses import dataclass

import numpy as np

from . import _stepper
from .errors import NotConverged, SingularSchedule, StepSizeUnderflow
from .liouvillian import BlockRHS
from .model import DENOMINATOR_FLOOR, ChainModel, Trajectory, initial_block_state

STEP_FLOOR = 1e-14

# Dormand-Prince 4(5) tableau; the fifth-order solution is propagated and
# E holds the difference to the embedded fourth-order weights.  Complex
# dtype keeps the stage combinations on the fast BLAS path.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    np.array([], dtype=complex),
    np.array([1 / 5], dtype=complex),
    np.array([3 / 40, 9 / 40], dtype=complex),
    np.array([44 / 45, -56 / 15, 32 / 9], dtype=complex),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729], dtype=complex),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
             dtype=complex),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
             dtype=complex),
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0],
              dtype=complex)
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525,
               -1 / 40], dtype=complex)

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0


@dataclass(frozen=True)
class IntegratorConfig:
    """Error control and stopping parameters.

    max_step = None resolves to 0.01/J for the fastest schedule when any
    J > 0, else 0.1.  residual_eps is the stopping threshold on the
    excitation still in the chain; t_max is the hard cap.
    """

    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_step: float | None = None
    t_max: float = 500.0
    residual_eps: float = 1e-6
    hermitize_every_step: bool = True

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_step is not None and self.max_step <= 0:
            raise ValueError("max_step must be positive")
        if self.t_max <= 0:
            raise ValueError("t_max must be positive")
        if self.residual_eps < 0:
            raise ValueError("residual_eps must be non-negative")


def resolve_max_step(config: IntegratorConfig, scheds) -> float:
    if config.max_step is not None:
        return config.max_step
    j_max = max((s.J for s in scheds), default=0.0)
    return 0.01 / j_max if j_max > 0 else 0.1


def _error_norm(err: np.ndarray, scale: np.ndarray) -> float:
    q = np.abs(err)
    q /= scale
    return float(np.sqrt(q.dot(q) / q.size))


def _initial_step(rhs, t0, y0, f0, rel_tol, abs_tol, max_step):
    scale = abs_tol + rel_tol * np.abs(y0)
    d0 = float(np.sqrt(np.mean(np.abs(y0 / scale) ** 2)))
    d1 = float(np.sqrt(np.mean(np.abs(f0 / scale) ** 2)))
    if d0 < 1e-5 or d1 < 1e-5:
        h = 1e-6
    else:
        h = 0.01 * d0 / d1
    return min(h, max_step)


def _step_dp45(rhs, t, y, h, k):
    """One trial step; returns the 5th-order solution and the error vector.

    k is a preallocated (7, n) complex stage buffer.
    """
    k[0] = rhs(t, y)
    for i in range(1, 7):
        z = _A[i] @ k[:i]
        z *= h
        z += y
        k[i] = rhs(t + _C[i] * h, z)
    y_new = _B @ k
    y_new *= h
    y_new += y
    err = _E @ k
    err *= h
    return y_new, err


def integrate(model: ChainModel, scheds, config: IntegratorConfig | None = None,
              record: str = "observables", rho0: np.ndarray | None = None,
              checkpoints=None) -> Trajectory:
    """Propagate the block state from t = 0 under the full master equation.

    The initial state is the excitation on site 1 unless rho0 overrides
    it.  After every accepted step the state is re-Hermitized as
    (rho + rho^dagger)/2 and the observables recorded.  With
    record="states" full density matrices are kept: at every accepted
    step, or only at the requested checkpoint times when checkpoints is
    given (the stepper lands on those times exactly).

    Trace and populations behave classically (monotone trace loss,
    monotone sink gain), but intermediate states need not be positive
    semidefinite: during negative-rate windows the local master equation
    amplifies coherences, which is the model's genuine non-Markovian
    dynamics rather than integration error.

    Raises StepSizeUnderflow if error control pushes the step below
    1e-14, and propagates SingularSchedule from the rate evaluation.
    """
    if config is None:
        config = IntegratorConfig()
    rhs = BlockRHS(model, scheds)
    d = rhs.dim
    if rho0 is None:
        rho0 = initial_block_state(model.n_sites)
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.shape != (d, d):
        raise ValueError(f"initial state must be {d}x{d}")
    keep_states = record == "states"
    if record not in ("observables", "states"):
        raise ValueError(f"unknown record mode {record!r}")

    max_step = resolve_max_step(config, scheds)
    checkpoint_set = set()
    if checkpoints is not None:
        checkpoint_set = {float(c) for c in checkpoints if 0.0 < float(c) <= config.t_max}
    landings = sorted(checkpoint_set | {config.t_max})
    at_checkpoints_only = keep_states and checkpoints is not None

    t = 0.0
    y = rho0.ravel().copy()
    diag_idx = np.arange(d) * d + np.arange(d)

    times = [0.0]
    traces = []
    p_sinks = []
    pops = []
    states: list[np.ndarray] = []
    state_times: list[float] = []

    def record_obs(vec):
        diag = vec[diag_idx].real
        traces.append(float(diag.sum()))
        p_sinks.append(float(diag[-1]))
        pops.append(diag[:-1].copy())

    record_obs(y)
    if keep_states:
        states.append(rho0.copy())
        state_times.append(0.0)

    f0 = rhs(t, y)
    h = _initial_step(rhs, t, y, f0, config.rel_tol, config.abs_tol, max_step)
    h = max(h, STEP_FLOOR)

    n_steps = 0
    n_rejected = 0
    terminal = "t_max"
    land_i = 0

    use_kernel = _stepper.HAVE_NUMBA
    kernel_args = rhs.kernel_args() if use_kernel else None
    stage_buf = None if use_kernel else np.empty((7, y.size), dtype=complex)
    while t < config.t_max:
        while land_i < len(landings) and landings[land_i] <= t:
            land_i += 1
        target = landings[land_i] if land_i < len(landings) else config.t_max
        if h < STEP_FLOOR:
            raise StepSizeUnderflow(f"step size {h:.3e} below floor at t={t:.6g}")
        h_try = min(h, max_step, target - t)
        landed = h_try >= target - t

        if use_kernel:
            status, t_fail, y_new, err_norm = _stepper.dp45_trial(
                *kernel_args, DENOMINATOR_FLOOR, t, h_try, y,
                config.rel_tol, config.abs_tol)
            if status != 0:
                raise SingularSchedule(t_fail)
        else:
            y_new, err = _step_dp45(rhs, t, y, h_try, stage_buf)
            scale = np.maximum(np.abs(y), np.abs(y_new))
            scale *= config.rel_tol
            scale += config.abs_tol
            err_norm = _error_norm(err, scale)

        if err_norm <= 1.0:
            t = target if landed else t + h_try
            if config.hermitize_every_step:
                m = y_new.reshape(d, d)
                m = 0.5 * (m + m.conj().T)
                y = m.ravel()
            else:
                y = y_new
            n_steps += 1
            times.append(t)
            record_obs(y)
            if keep_states and (not at_checkpoints_only or t in checkpoint_set):
                states.append(y.reshape(d, d).copy())
                state_times.append(t)
            if traces[-1] - p_sinks[-1] < config.residual_eps:
                terminal = "converged"
                break
            factor = _MAX_FACTOR if err_norm == 0.0 else min(
                _MAX_FACTOR, max(_MIN_FACTOR, _SAFETY * err_norm ** -0.2))
        else:
            n_rejected += 1
            factor = max(_MIN_FACTOR, _SAFETY * err_norm ** -0.2)
        # grow from the controller's intended step, not a landing-clipped
        # one, so checkpoint hops do not collapse the step size
        h = max(h_try, min(h, max_step)) * factor

    return Trajectory(
        times=np.asarray(times),
        p_sink=np.asarray(p_sinks),
        populations=np.asarray(pops),
        trace=np.asarray(traces),
        terminal_flag=terminal,
        n_steps=n_steps,
        n_rejected=n_rejected,
        states=states if keep_states else None,
        state_times=np.asarray(state_times) if keep_states else None,
    )


def efficiency(traj: Trajectory, config: IntegratorConfig) -> tuple[float, float]:
    """Asymptotic sink population with a rigorous half-bracket uncertainty.

    Requires a trajectory stopped by the residual criterion; the true
    limit lies in [p_sink(t_end), p_sink(t_end) + R(t_end)].
    """
    if traj.terminal_flag != "converged":
        raise NotConverged(
            f"residual {traj.residual[-1]:.3e} still above {config.residual_eps:.3e} "
            f"at t_max={traj.times[-1]:.6g}; raise t_max")
    r = float(traj.trace[-1] - traj.p_sink[-1])
    return float(traj.p_sink[-1]) + 0.5 * r, 0.5 * r
