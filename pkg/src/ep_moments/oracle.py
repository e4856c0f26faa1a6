"""Brute-force ground truth: truncated-Fock-space integration of the full
master equation (quantum jumps included) and moment extraction.

The density matrix is stored dense (dim x dim) and the generator applied as
a map; the superoperator is never materialized. Fixed-step RK4 keeps the
trajectory deterministic, and a step-halving self-check quantifies the time
discretization error. Trace, Hermiticity, positivity, and truncation-layer
population are asserted at every sample, so a run that completes is a run
whose numbers can be trusted.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from .model import QuadraticSystem, validate
from .moments import EvolutionMatrix, MomentIndex, propagate_moments
from .nhh import LatticeModel

__all__ = [
    "FockSpace", "DensityMatrix", "SimConfig", "Trajectory", "build_space",
    "coherent_state", "lindblad_rhs", "integrate", "moment_trajectory",
    "verify_moments", "step_halving_deviation", "VerificationReport",
    "report_to_json", "moments_to_csv", "moments_from_csv",
]

DIM_GUARDRAIL = 4096
TRACE_TOL = 1e-8
HERM_TOL = 1e-10
POSITIVITY_FLOOR = -1e-8


class FockSpace:
    """Truncated product Fock space with dense per-mode ladder operators."""

    def __init__(self, n_modes: int, cutoff: int):
        if n_modes < 1 or cutoff < 1:
            raise ValueError("need n_modes >= 1 and cutoff >= 1")
        dim = (cutoff + 1) ** n_modes
        if dim > DIM_GUARDRAIL:
            raise ValueError(f"dimension {dim} exceeds guardrail {DIM_GUARDRAIL}")
        self.n_modes = n_modes
        self.cutoff = cutoff
        self.dim = dim
        single = np.diag(np.sqrt(np.arange(1, cutoff + 1)), k=1).astype(complex)
        eye = np.eye(cutoff + 1, dtype=complex)
        ops = []
        for mode in range(n_modes):
            op = np.array([[1.0 + 0j]])
            for slot in range(n_modes):
                op = np.kron(op, single if slot == mode else eye)
            op.setflags(write=False)
            ops.append(op)
        self.annihilation = tuple(ops)
        # states with any mode at max occupation: the truncation boundary
        occ = np.indices((cutoff + 1,) * n_modes).reshape(n_modes, -1)
        self.boundary_mask = np.any(occ == cutoff, axis=0)

    def operator(self, index: MomentIndex) -> np.ndarray:
        """Dense operator for a moment label, factors applied left to right."""
        if index.max_mode() > self.n_modes:
            raise ValueError(f"moment {index.label()!r} references a mode beyond "
                             f"n_modes={self.n_modes}")
        out = np.eye(self.dim, dtype=complex)
        for mode, dagger in index.factors:
            a = self.annihilation[mode - 1]
            out = out @ (a.conj().T if dagger else a)
        return out


def build_space(n_modes: int, cutoff: int) -> FockSpace:
    return FockSpace(n_modes, cutoff)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    rho: np.ndarray
    space: FockSpace

    def __post_init__(self):
        rho = np.array(self.rho, dtype=complex)
        if rho.shape != (self.space.dim, self.space.dim):
            raise ValueError("density matrix shape does not match the space")
        if np.max(np.abs(rho - rho.conj().T)) > HERM_TOL:
            raise ValueError("density matrix is not Hermitian")
        trace = float(np.trace(rho).real)
        if abs(trace - 1.0) > TRACE_TOL:
            raise ValueError(f"density matrix trace {trace} is not 1")
        if float(np.min(np.linalg.eigvalsh((rho + rho.conj().T) / 2))) < POSITIVITY_FLOOR:
            raise ValueError("density matrix has a significantly negative eigenvalue")
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)


@dataclass(frozen=True)
class SimConfig:
    dt: float
    t_max: float
    leakage_tol: float = 1e-8
    cutoff: int = 8

    def __post_init__(self):
        if self.dt <= 0 or self.t_max < 0:
            raise ValueError("need dt > 0 and t_max >= 0")


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: tuple[DensityMatrix, ...]
    space: FockSpace


def coherent_state(alphas, space: FockSpace) -> DensityMatrix:
    """Tensor product of truncated, renormalized coherent states."""
    alphas = np.asarray(alphas, dtype=complex)
    if alphas.shape != (space.n_modes,):
        raise ValueError(f"need {space.n_modes} amplitudes")
    for alpha in alphas:
        if abs(alpha) ** 2 > space.cutoff / 4:
            raise ValueError(f"amplitude {alpha} too large for cutoff {space.cutoff} "
                             "(need |alpha|^2 <= cutoff/4)")
    levels = np.arange(space.cutoff + 1)
    psi = np.array([1.0 + 0j])
    log_fact = np.cumsum(np.concatenate(([0.0], np.log(np.arange(1, space.cutoff + 1)))))
    for alpha in alphas:
        if alpha == 0:
            mode = np.zeros(space.cutoff + 1, complex)
            mode[0] = 1.0
        else:
            mode = alpha ** levels * np.exp(-0.5 * log_fact)
            mode /= np.linalg.norm(mode)
        psi = np.kron(psi, mode)
    return DensityMatrix(np.outer(psi, psi.conj()), space)


# ---------------------------------------------------------------------------
# Generator
# ---------------------------------------------------------------------------

def _generator_terms(system, space: FockSpace) -> tuple[np.ndarray, np.ndarray]:
    """Effective Hamiltonian operator and sandwich coefficient matrix."""
    ops = space.annihilation
    if isinstance(system, LatticeModel):
        if system.n_modes != space.n_modes:
            raise ValueError("lattice mode count does not match the space")
        h_eff = np.zeros((space.dim, space.dim), complex)
        for j in range(system.n_modes):
            for k in range(system.n_modes):
                c = complex(system.nhh_h[j, k])
                if c != 0:
                    h_eff += c * (ops[j].conj().T @ ops[k])
        return h_eff, np.array(system.jump_gamma)
    sys: QuadraticSystem = system
    if sys.n_modes != space.n_modes:
        raise ValueError("system mode count does not match the space")
    report = validate(sys)
    if not report.ok:
        raise ValueError("system failed validation: "
                         + "; ".join(f.message for f in report.findings))
    h_eff = np.zeros((space.dim, space.dim), complex)
    for j in range(sys.n_modes):
        h_eff += sys.detunings[j] * (ops[j].conj().T @ ops[j])
        for k in range(sys.n_modes):
            g = complex(sys.coherent_coupling[j, k])
            if g != 0:
                h_eff += g * (ops[j].conj().T @ ops[k])
            x = complex(sys.squeezing_coupling[j, k])
            if x != 0:
                two_photon = ops[j].conj().T @ ops[k].conj().T
                h_eff += 0.5 * x * two_photon + 0.5 * np.conj(x) * two_photon.conj().T
            gam = complex(sys.decoherence[j, k])
            if gam != 0:
                h_eff += -1j * gam * (ops[j].conj().T @ ops[k])
    return h_eff, np.array(sys.decoherence)


def _rhs(h_eff: np.ndarray, jump: np.ndarray, ops, ops_dag, rho: np.ndarray) -> np.ndarray:
    # valid for Hermitian rho: rho H† = (H rho)†
    k = h_eff @ rho
    out = -1j * (k - k.conj().T)
    if not np.any(jump):
        return out
    lowered = [op @ rho for op in ops]
    for col in range(len(ops)):
        if not np.any(jump[:, col]):
            continue
        v = jump[0, col] * lowered[0]
        for row in range(1, len(ops)):
            if jump[row, col] != 0:
                v = v + jump[row, col] * lowered[row]
        out += 2.0 * (v @ ops_dag[col])
    return out


def lindblad_rhs(system, rho, space: FockSpace) -> np.ndarray:
    """Right-hand side of the master equation,
    -i(H_eff rho - rho H_eff†) + 2 sum_jk Gamma_jk a_j rho a_k†."""
    h_eff, jump = _generator_terms(system, space)
    rho_arr = rho.rho if isinstance(rho, DensityMatrix) else np.asarray(rho, complex)
    if rho_arr.shape != (space.dim, space.dim):
        raise ValueError("density matrix shape does not match the space")
    return _rhs(h_eff, jump, space.annihilation, rho_arr)


def _check_sample(rho: np.ndarray, space: FockSpace, leakage_tol: float, t: float) -> None:
    trace = float(np.trace(rho).real)
    if abs(trace - 1.0) > TRACE_TOL:
        raise ValueError(f"trace drift {abs(trace - 1.0):.3e} at t={t:g}")
    if np.max(np.abs(rho - rho.conj().T)) > HERM_TOL:
        raise ValueError(f"Hermiticity drift at t={t:g}")
    leak = float(np.sum(np.diag(rho).real[space.boundary_mask]))
    if leak > leakage_tol:
        raise ValueError(f"truncation boundary population {leak:.3e} at t={t:g} "
                         f"exceeds {leakage_tol:.1e}; increase the cutoff")
    if float(np.min(np.linalg.eigvalsh((rho + rho.conj().T) / 2))) < POSITIVITY_FLOOR:
        raise ValueError(f"positivity violated at t={t:g}; reduce dt or increase the cutoff")


def integrate(system, rho0: DensityMatrix, config: SimConfig,
              sample_times=None) -> Trajectory:
    """Fixed-step RK4 integration, sampling at the requested times.

    Sample times must be non-decreasing multiples of dt within [0, t_max].
    Invariants (trace, Hermiticity, positivity, boundary leakage) are checked
    at each sample and abort the run when violated.
    """
    space = rho0.space
    if sample_times is None:
        sample_times = np.array([0.0, config.t_max]) if config.t_max > 0 else np.array([0.0])
    times = np.asarray(sample_times, dtype=float)
    if times.size == 0:
        raise ValueError("need at least one sample time")
    if times[0] < 0 or np.any(np.diff(times) < 0) or times[-1] > config.t_max + 1e-12:
        raise ValueError("sample times must be non-decreasing within [0, t_max]")
    steps = np.rint(times / config.dt).astype(int)
    if np.max(np.abs(steps * config.dt - times)) > 1e-9 * max(1.0, config.dt):
        raise ValueError("sample times must be multiples of dt")

    h_eff, jump = _generator_terms(system, space)
    ops = space.annihilation
    dt = config.dt
    rho = np.array(rho0.rho)
    samples: list[DensityMatrix] = []
    sample_iter = iter(list(steps))
    next_sample = next(sample_iter, None)
    step = 0
    while True:
        while next_sample is not None and next_sample == step:
            _check_sample(rho, space, config.leakage_tol, step * dt)
            samples.append(DensityMatrix(rho.copy(), space))
            next_sample = next(sample_iter, None)
        if next_sample is None:
            break
        k1 = _rhs(h_eff, jump, ops, rho)
        k2 = _rhs(h_eff, jump, ops, rho + 0.5 * dt * k1)
        k3 = _rhs(h_eff, jump, ops, rho + 0.5 * dt * k2)
        k4 = _rhs(h_eff, jump, ops, rho + dt * k3)
        rho += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        step += 1
    return Trajectory(times, tuple(samples), space)


def moment_trajectory(traj: Trajectory, indices, space: FockSpace | None = None) -> np.ndarray:
    """Moments Tr(rho(t) * product) for each index; shape (times, moments).
    The operator product uses the exact stored factor order."""
    space = traj.space if space is None else space
    operators = [space.operator(ix) for ix in indices]
    out = np.empty((len(traj.states), len(operators)), dtype=complex)
    for i, state in enumerate(traj.states):
        for q, op in enumerate(operators):
            out[i, q] = np.trace(state.rho @ op)
    return out


def _moments_of(rho: DensityMatrix, indices) -> np.ndarray:
    return np.array([np.trace(rho.rho @ rho.space.operator(ix)) for ix in indices])


@dataclass(frozen=True)
class VerificationReport:
    per_moment_max_dev: dict[str, float]
    tol: float
    passed: bool


def verify_moments(system, rho0: DensityMatrix, m: EvolutionMatrix, times, tol: float,
                   dt: float = 1e-3, leakage_tol: float = 1e-8) -> VerificationReport:
    """Compare oracle moment trajectories against exp(M t) v0.

    v0 is measured from rho0 in the truncated space. Deviations are reported
    per moment label; the run passes when every maximum deviation is at or
    below tol.
    """
    times = np.asarray(times, dtype=float)
    config = SimConfig(dt=dt, t_max=float(times[-1]), leakage_tol=leakage_tol,
                       cutoff=rho0.space.cutoff)
    traj = integrate(system, rho0, config, sample_times=times)
    measured = moment_trajectory(traj, m.basis.entries)
    v0 = _moments_of(rho0, m.basis.entries)
    predicted = propagate_moments(m, v0, times)
    deviations = np.max(np.abs(measured - predicted), axis=0)
    per_moment = {entry.label(): float(dev)
                  for entry, dev in zip(m.basis.entries, deviations)}
    return VerificationReport(per_moment, float(tol),
                              bool(np.all(deviations <= tol)))


def step_halving_deviation(system, rho0: DensityMatrix, config: SimConfig,
                           times, indices) -> float:
    """Max change of sampled moments when the step is halved; bounds the
    time-discretization error of the integrator."""
    coarse = integrate(system, rho0, config, sample_times=times)
    fine_config = SimConfig(config.dt / 2, config.t_max, config.leakage_tol, config.cutoff)
    fine = integrate(system, rho0, fine_config, sample_times=times)
    dev = np.abs(moment_trajectory(coarse, indices) - moment_trajectory(fine, indices))
    return float(np.max(dev))


def report_to_json(report: VerificationReport) -> str:
    return json.dumps({
        "per_moment_max_dev": report.per_moment_max_dev,
        "tol": report.tol,
        "pass": report.passed,
    })


def moments_to_csv(times, values: np.ndarray, labels) -> str:
    """CSV export t, re(...), im(...) per moment label, %.12e formatted."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    header = ["t"]
    for label in labels:
        header += [f"re({label})", f"im({label})"]
    writer.writerow(header)
    for t, row in zip(times, values):
        cells = [f"{t:.12e}"]
        for z in row:
            cells += [f"{z.real:.12e}", f"{z.imag:.12e}"]
        writer.writerow(cells)
    return out.getvalue()


def moments_from_csv(text: str):
    """Inverse of moments_to_csv: (times, values, labels)."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    labels = [cell[3:-1] for cell in header[1::2]]
    times, rows = [], []
    for row in reader:
        times.append(float(row[0]))
        numbers = [float(x) for x in row[1:]]
        rows.append([complex(numbers[i], numbers[i + 1])
                     for i in range(0, len(numbers), 2)])
    return np.array(times), np.array(rows), labels
