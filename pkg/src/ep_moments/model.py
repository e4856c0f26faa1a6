"""Quadratic Liouvillian system descriptions, validation, and symmetry checks.

A system is fixed by rotating-frame detunings, a Hermitian coherent coupling
matrix, a symmetric two-photon (squeezing) coupling matrix, and a Hermitian
decoherence matrix feeding annihilation-operator loss channels. Mapping bare
mode frequencies to rotating-frame detunings is the caller's responsibility.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

EPS_HERM = 1e-12
EPS_PSD = 1e-10


class ModelFormatError(ValueError):
    """Model file cannot be parsed; carries the offending line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


def _frozen_array(values, shape, dtype) -> np.ndarray:
    a = np.array(values, dtype=dtype)
    if a.shape != shape:
        raise ValueError(f"dimension mismatch: expected shape {shape}, got {a.shape}")
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class QuadraticSystem:
    """An n-mode quadratic Liouvillian with loss-type dissipators.

    The generator is
        drho/dt = -i(H_eff rho - rho H_eff†) + 2 sum_jk Gamma_jk a_j rho a_k†,
        H_eff = sum_j d_j a_j†a_j + sum_jk g_jk a_j†a_k
                + (1/2) sum_jk (x_jk a_j†a_k† + h.c.) - i sum_jk Gamma_jk a_j†a_k.
    """

    n_modes: int
    detunings: np.ndarray
    coherent_coupling: np.ndarray
    squeezing_coupling: np.ndarray
    decoherence: np.ndarray

    def __post_init__(self):
        n = self.n_modes
        if not isinstance(n, int) or n < 1:
            raise ValueError("n_modes must be a positive integer")
        object.__setattr__(self, "detunings", _frozen_array(self.detunings, (n,), float))
        for name in ("coherent_coupling", "squeezing_coupling", "decoherence"):
            object.__setattr__(self, name, _frozen_array(getattr(self, name), (n, n), complex))


def zero_system(n_modes: int, detunings=None) -> QuadraticSystem:
    """System with the given detunings and no couplings or decoherence."""
    z = np.zeros((n_modes, n_modes), complex)
    d = np.zeros(n_modes) if detunings is None else detunings
    return QuadraticSystem(n_modes, d, z, z, z)


@dataclass(frozen=True)
class Finding:
    severity: str  # "error" | "warning"
    code: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    findings: tuple[Finding, ...] = field(default_factory=tuple)
    min_decoherence_eigenvalue: float = 0.0


def validate(sys: QuadraticSystem) -> ValidationReport:
    """Check matrix symmetries and reject gain-like decoherence.

    Every problem is reported as a finding; only error-severity findings make
    ok false. Decoherence must be positive semidefinite (eigenvalues above
    -EPS_PSD): gain channels would add a noise vector to the moment equations
    and are unsupported. Complex Hermitian decoherence (Gamma_jk != Gamma_kj,
    the chiral case) is flagged as a warning; its moment dynamics does not
    close and downstream builders raise.
    """
    findings: list[Finding] = []
    g, x, gamma = sys.coherent_coupling, sys.squeezing_coupling, sys.decoherence
    if np.max(np.abs(g - g.conj().T)) > EPS_HERM:
        findings.append(Finding("error", "coherent_not_hermitian",
                                "coherent_coupling is not Hermitian"))
    if np.max(np.abs(x - x.T)) > EPS_HERM:
        findings.append(Finding("error", "squeezing_not_symmetric",
                                "squeezing_coupling is not symmetric"))
    herm_gamma = np.max(np.abs(gamma - gamma.conj().T)) <= EPS_HERM
    if not herm_gamma:
        findings.append(Finding("error", "decoherence_not_hermitian",
                                "decoherence is not Hermitian"))
    min_eig = float(np.min(np.linalg.eigvalsh((gamma + gamma.conj().T) / 2)))
    if min_eig < -EPS_PSD:
        findings.append(Finding("error", "gain_like_decoherence",
                                f"gain-like decoherence: minimum eigenvalue {min_eig:.6g} < 0"))
    if herm_gamma and np.max(np.abs(gamma.imag)) > EPS_HERM:
        findings.append(Finding("warning", "chiral_decoherence",
                                "Gamma_jk != Gamma_kj (chiral case): moment equations "
                                "do not close linearly"))
    ok = not any(f.severity == "error" for f in findings)
    return ValidationReport(ok, tuple(findings), min_eig)


def is_u1_symmetric(sys: QuadraticSystem) -> bool:
    """True iff the generator commutes with a simultaneous phase rotation
    of all modes, i.e. the squeezing block vanishes."""
    return bool(np.max(np.abs(sys.squeezing_coupling)) <= EPS_HERM) if sys.n_modes else True


def check_anti_pt(h: np.ndarray, atol: float = 1e-10) -> bool:
    """True iff P conj(H) P = -H for the mode-reversal permutation P."""
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError("check_anti_pt requires a square matrix")
    flipped = h[::-1, ::-1].conj()
    return bool(np.max(np.abs(flipped + h)) <= atol) if h.size else True


# ---------------------------------------------------------------------------
# Model file format
# ---------------------------------------------------------------------------

_SECTIONS = ("system", "detunings", "coherent", "squeezing", "decoherence")


def _parse_complex(token: str, line: int) -> complex:
    try:
        value = complex(token.replace("i", "j").replace("I", "j"))
    except ValueError:
        raise ModelFormatError(line, f"non-numeric entry {token!r}") from None
    if not (np.isfinite(value.real) and np.isfinite(value.imag)):
        raise ModelFormatError(line, f"non-finite entry {token!r}")
    return value


def parse_model(text: str) -> QuadraticSystem:
    """Parse model-file contents into a QuadraticSystem.

    Sections: [system] with n_modes, [detunings] with whitespace-separated
    reals, and [coherent]/[squeezing]/[decoherence] with one row per line of
    complex entries written as a+bi. Absent sections default to zero.
    """
    section = None
    n_modes = None
    rows: dict[str, list] = {name: [] for name in _SECTIONS[1:]}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0].strip()
        if not stripped:
            continue
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise ModelFormatError(lineno, f"malformed section header {stripped!r}")
            name = stripped[1:-1].strip().lower()
            if name not in _SECTIONS:
                raise ModelFormatError(lineno, f"unknown section {name!r}")
            section = name
            continue
        if section is None:
            raise ModelFormatError(lineno, "content before any section header")
        if section == "system":
            key, sep, value = stripped.partition("=")
            if not sep or key.strip() != "n_modes":
                raise ModelFormatError(lineno, "expected 'n_modes = <int>'")
            try:
                n_modes = int(value.strip())
            except ValueError:
                raise ModelFormatError(lineno, f"non-numeric n_modes {value.strip()!r}") from None
        else:
            entries = [_parse_complex(tok, lineno) for tok in stripped.split()]
            rows[section].append((lineno, entries))
    if n_modes is None:
        raise ModelFormatError(0, "missing [system] section with n_modes")
    if n_modes < 1:
        raise ModelFormatError(0, "n_modes must be positive")

    det = np.zeros(n_modes)
    det_rows = rows["detunings"]
    if det_rows:
        flat = [v for _, entries in det_rows for v in entries]
        if len(flat) != n_modes:
            raise ModelFormatError(det_rows[0][0],
                                   f"expected {n_modes} detunings, got {len(flat)}")
        if any(abs(v.imag) > 0 for v in flat):
            raise ModelFormatError(det_rows[0][0], "detunings must be real")
        det = np.array([v.real for v in flat])

    matrices = {}
    for name in ("coherent", "squeezing", "decoherence"):
        block = rows[name]
        if not block:
            matrices[name] = np.zeros((n_modes, n_modes), complex)
            continue
        if len(block) != n_modes:
            raise ModelFormatError(block[0][0],
                                   f"[{name}] expected {n_modes} rows, got {len(block)}")
        for lineno, entries in block:
            if len(entries) != n_modes:
                raise ModelFormatError(lineno,
                                       f"[{name}] row has {len(entries)} entries, expected {n_modes}")
        matrices[name] = np.array([entries for _, entries in block], complex)

    return QuadraticSystem(n_modes, det, matrices["coherent"],
                           matrices["squeezing"], matrices["decoherence"])


def _format_complex(z: complex) -> str:
    re, im = float(z.real), float(z.imag)
    if im == 0.0:
        return repr(re)
    sign = "+" if im >= 0 else "-"
    return f"{re!r}{sign}{abs(im)!r}i"


def serialize_model(sys: QuadraticSystem) -> str:
    """Render a QuadraticSystem in the model-file format.

    Values use shortest round-trip float representation, so
    parse -> serialize -> parse is bit-exact.
    """
    lines = ["[system]", f"n_modes = {sys.n_modes}", "", "[detunings]",
             " ".join(repr(float(v)) for v in sys.detunings)]
    for name, matrix in (("coherent", sys.coherent_coupling),
                         ("squeezing", sys.squeezing_coupling),
                         ("decoherence", sys.decoherence)):
        lines += ["", f"[{name}]"]
        lines += [" ".join(_format_complex(v) for v in row) for row in matrix]
    return "\n".join(lines) + "\n"
