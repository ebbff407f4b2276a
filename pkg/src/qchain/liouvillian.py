"""Master-equation right-hand side on the single-excitation block.

The coherent part is the tridiagonal chain Hamiltonian restricted to the
block; local dissipation appears as pure loss (its gain term refills the
ground state, which lies outside the block), dephasing and the control
shift act through the site operators Z_i = 2|i><i| - 1, and the sink is
fed incoherently from site N through the jump |S><N|.

Two equivalent evaluation paths are provided: ``apply_rhs`` is a direct
matrix-form transcription used as the readable reference, and ``BlockRHS``
precomputes the constant superoperator plus one oscillatory dephasing and
shift superoperator per distinct (J, theta) control, which is what the
integrator calls in its inner loop.
"""

import math
from dataclasses import dataclass

import numpy as np

from .model import ChainModel, DephasingSchedule, _control_terms, dephasing_rate, energy_shift


@dataclass(frozen=True)
class BlockOperators:
    """Block-restricted operators: Hamiltonian, site projectors, sink jump."""

    h_block: np.ndarray
    site_projectors: tuple[np.ndarray, ...]
    sink_jump: np.ndarray


def build_block_operators(model: ChainModel) -> BlockOperators:
    """Assemble the (N+1)-dimensional block operators for a chain.

    The diagonal of h_block at site j is omega_j/2 minus half the sum of
    all other site energies (the block eigenvalue of the sigma_z sum); the
    sink row carries no Hamiltonian term beyond the common -sum(omega)/2
    offset and is populated only through the incoherent jump.
    """
    n = model.n_sites
    d = n + 1
    half_sum = 0.5 * sum(model.omega)
    h = np.zeros((d, d), dtype=complex)
    for j in range(n):
        h[j, j] = model.omega[j] - half_sum
    h[n, n] = -half_sum
    for i, lam in enumerate(model.lam):
        h[i, i + 1] = lam
        h[i + 1, i] = lam
    projectors = []
    for i in range(n):
        p = np.zeros((d, d), dtype=complex)
        p[i, i] = 1.0
        projectors.append(p)
    jump = np.zeros((d, d), dtype=complex)
    jump[n, n - 1] = 1.0
    return BlockOperators(h_block=h, site_projectors=tuple(projectors), sink_jump=jump)


def _check_schedules(model: ChainModel, scheds) -> tuple[DephasingSchedule, ...]:
    scheds = tuple(scheds)
    if len(scheds) != model.n_sites:
        raise ValueError(f"expected {model.n_sites} schedules, got {len(scheds)}")
    return scheds


def apply_rhs(rho: np.ndarray, t: float, model: ChainModel, scheds) -> np.ndarray:
    """Time derivative of the block state: matrix-form reference evaluation.

    Terms, in order: -i[H, rho]; dissipation loss -kappa_i {P_i, rho}
    (the 2 sigma- rho sigma+ gain leaves the block and shows up only as
    trace loss); dephasing gamma_i(t) (Z_i rho Z_i - rho); control shift
    -i s_i(t) [Z_i, rho]; sink kappa_sink (2 A rho A+ - {A+A, rho}).
    The explicit factor 2 on the sandwich terms follows the rate
    convention used throughout.
    """
    scheds = _check_schedules(model, scheds)
    ops = build_block_operators(model)
    n = model.n_sites
    h = ops.h_block
    out = -1j * (h @ rho - rho @ h)
    for i in range(n):
        p = ops.site_projectors[i]
        if model.kappa[i] != 0.0:
            out -= model.kappa[i] * (p @ rho + rho @ p)
        g = dephasing_rate(t, scheds[i])
        s = energy_shift(t, scheds[i])
        if g != 0.0 or s != 0.0:
            z = 2.0 * p - np.eye(n + 1)
            if g != 0.0:
                out += g * (z @ rho @ z - rho)
            if s != 0.0:
                out += -1j * s * (z @ rho - rho @ z)
    if model.kappa_sink != 0.0:
        a = ops.sink_jump
        pn = ops.site_projectors[n - 1]
        out += model.kappa_sink * (2.0 * (a @ rho @ a.conj().T) - pn @ rho - rho @ pn)
    return out


def _anticommutator_superop(p: np.ndarray, eye: np.ndarray) -> np.ndarray:
    # row-major vec: vec(A rho B) = kron(A, B.T) vec(rho)
    return np.kron(p, eye) + np.kron(eye, p.T)


class BlockRHS:
    """Prepared fast evaluator for the block master equation.

    Baseline dephasing rates and all time-independent terms are folded
    into one constant superoperator; schedules with J > 0 are grouped by
    (J, theta) since their oscillatory rate increment and shift are the
    same function of time for every site in the group.
    """

    def __init__(self, model: ChainModel, scheds):
        scheds = _check_schedules(model, scheds)
        self.model = model
        self.scheds = scheds
        ops = build_block_operators(model)
        n = model.n_sites
        d = n + 1
        self.dim = d
        eye = np.eye(d, dtype=complex)
        eye_super = np.eye(d * d, dtype=complex)

        h = ops.h_block
        const = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
        for i in range(n):
            if model.kappa[i] != 0.0:
                const -= model.kappa[i] * _anticommutator_superop(ops.site_projectors[i], eye)
        if model.kappa_sink != 0.0:
            a = ops.sink_jump
            pn = ops.site_projectors[n - 1]
            const += model.kappa_sink * (2.0 * np.kron(a, a.conj())
                                         - _anticommutator_superop(pn, eye))

        groups: dict[tuple[float, float], dict] = {}
        for i, sched in enumerate(scheds):
            z = 2.0 * ops.site_projectors[i] - eye
            deph = np.kron(z, z.T) - eye_super
            if sched.gamma0 != 0.0:
                const += sched.gamma0 * deph
            if sched.J == 0.0:
                continue
            key = (sched.J, sched.theta, sched.include_shift)
            entry = groups.setdefault(key, {"deph": np.zeros_like(const),
                                            "shift": np.zeros_like(const)})
            entry["deph"] += deph
            entry["shift"] += -1j * (np.kron(z, eye) - np.kron(eye, z))

        self._const = const
        self._kernel_args = None
        self._groups = []
        for (J, theta, with_shift), entry in sorted(groups.items()):
            sin_2t = math.sin(2.0 * theta)
            shift_active = with_shift and math.cos(2.0 * theta) != 0.0
            self._groups.append((
                J,
                sin_2t * sin_2t,
                math.cos(4.0 * theta),
                math.cos(2.0 * theta),
                entry["deph"] if sin_2t != 0.0 else None,
                entry["shift"] if shift_active else None,
            ))

    def __call__(self, t: float, v: np.ndarray) -> np.ndarray:
        """Derivative of the row-major vectorised state."""
        out = self._const @ v
        for J, sin_sq, cos4, cos2, deph, shift in self._groups:
            osc, s = _control_terms(t, J, sin_sq, cos4, cos2)
            if deph is not None:
                out += osc * (deph @ v)
            if shift is not None:
                out += s * (shift @ v)
        return out

    def matrix(self, t: float) -> np.ndarray:
        """Full superoperator L(t), mainly for inspection and testing."""
        out = self._const.copy()
        for J, sin_sq, cos4, cos2, deph, shift in self._groups:
            osc, s = _control_terms(t, J, sin_sq, cos4, cos2)
            if deph is not None:
                out += osc * deph
            if shift is not None:
                out += s * shift
        return out

    def kernel_args(self) -> tuple:
        """Flat array form of the superoperator terms for the compiled stepper."""
        if self._kernel_args is None:
            n = self.dim * self.dim
            n_groups = len(self._groups)
            dephs = np.zeros((n_groups, n, n), dtype=complex)
            shifts = np.zeros((n_groups, n, n), dtype=complex)
            params = np.zeros((n_groups, 5))
            use_deph = np.zeros(n_groups, dtype=np.bool_)
            use_shift = np.zeros(n_groups, dtype=np.bool_)
            for g, (J, sin_sq, cos4, cos2, deph, shift) in enumerate(self._groups):
                params[g] = (math.pi * J, 2.0 * math.pi * J, math.pi * J * sin_sq,
                             cos4, 2.0 * math.pi * J * cos2)
                if deph is not None:
                    dephs[g] = deph
                    use_deph[g] = True
                if shift is not None:
                    shifts[g] = shift
                    use_shift[g] = True
            self._kernel_args = (self._const, dephs, shifts, params,
                                 use_deph, use_shift)
        return self._kernel_args
