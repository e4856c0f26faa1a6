"""Non-Hermitian Hamiltonians from moment evolution matrices, and physical
dissipative lattices that realize a target moment dynamics.

Quantizing each reduced moment as a fresh bosonic mode b_j turns a reduced
evolution matrix M into the matrix form H = iM of an NHH over those modes.
Realizing that NHH as an actual Lindblad system requires a jump-coefficient
matrix gamma chosen so the cubic operator terms of the first-moment equation
cancel: gamma_kj = (i/2)(h - h†)_jk, the unique Hermitian choice. The
Hermitian part of h supplies coherent couplings, gamma the dissipative ones;
their interference is what produces asymmetric effective mode coupling.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from xml.etree import ElementTree

import numpy as np

from .ladder import ClosureError
from .model import _format_complex
from .moments import EvolutionMatrix, MomentBasis, MomentIndex, first_order_basis

__all__ = [
    "NhhMatrix", "LatticeModel", "nhh_from_matrix_u1", "nhh_generic",
    "remove_trace", "synthesize_lattice", "first_moment_of_lattice",
    "cubic_cancellation_residual", "build_m_n", "lattice_to_json",
    "lattice_from_json", "adjacency_summary", "lattice_to_graphml",
    "graphml_edges",
]

_GAMMA_HERM_TOL = 1e-12
_PSD_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class NhhMatrix:
    """Matrix form H of an NHH, H_op = b† H b over the basis modes."""

    matrix: np.ndarray
    basis: MomentBasis

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] != len(self.basis):
            raise ValueError("NHH matrix must be square and match its basis")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)


@dataclass(frozen=True, eq=False)
class LatticeModel:
    """Synthesized dissipative lattice: full coupling matrix h (the NHH),
    its Hermitian part, and the Hermitian jump-coefficient matrix gamma."""

    n_modes: int
    hermitian_h: np.ndarray
    nhh_h: np.ndarray
    jump_gamma: np.ndarray
    psd: bool
    min_gamma_eigenvalue: float

    def __post_init__(self):
        for name in ("hermitian_h", "nhh_h", "jump_gamma"):
            m = np.array(getattr(self, name), dtype=complex)
            if m.shape != (self.n_modes, self.n_modes):
                raise ValueError(f"{name} must be {self.n_modes}x{self.n_modes}")
            m.setflags(write=False)
            object.__setattr__(self, name, m)
        g = self.jump_gamma
        if np.max(np.abs(g - g.conj().T)) > _GAMMA_HERM_TOL:
            raise ValueError("jump_gamma must be Hermitian")
        expected = (self.nhh_h + self.nhh_h.conj().T) / 2
        if np.max(np.abs(self.hermitian_h - expected)) > 1e-10:
            raise ValueError("hermitian_h must be the Hermitian part of nhh_h")


def nhh_from_matrix_u1(m: EvolutionMatrix) -> NhhMatrix:
    """H = i M for a reduced (or first-order) matrix of a U(1) system."""
    return NhhMatrix(1j * m.matrix, m.basis)


def _eta(n_modes: int, odd: complex, even: complex) -> np.ndarray:
    return np.diag(np.array([odd, even] * n_modes, dtype=complex))


def nhh_generic(m: EvolutionMatrix) -> NhhMatrix:
    """NHH matrix for an interleaved first-moment matrix:
    H = i eta1 M + i eta2 M† eta3 with the sector projectors
    eta1 = diag(1,0,...), eta2 = diag(0,1,...), eta3 = diag(-1,1,...).

    The annihilation sector of H reproduces i times the annihilation block
    of M. Taken literally, the formula doubles number-operator coefficients
    up to a dropped constant; remove_trace is available when fixtures need
    the traceless form.
    """
    dim = m.dim
    if dim % 2 != 0:
        raise ValueError("interleaved matrix must have even dimension")
    n = dim // 2
    expected = first_order_basis(n, interleaved=True)
    if m.basis.entries != expected.entries:
        raise ValueError("basis is not the interleaved first-moment basis [a1, a1†, ...]")
    eta1 = _eta(n, 1.0, 0.0)
    eta2 = _eta(n, 0.0, 1.0)
    eta3 = _eta(n, -1.0, 1.0)
    h = 1j * eta1 @ m.matrix + 1j * eta2 @ m.matrix.conj().T @ eta3
    return NhhMatrix(h, m.basis)


def remove_trace(h: np.ndarray) -> np.ndarray:
    """Subtract the mean diagonal: h - (tr h / n) I."""
    h = np.asarray(h, dtype=complex)
    return h - (np.trace(h) / h.shape[0]) * np.eye(h.shape[0])


def synthesize_lattice(m: EvolutionMatrix, extra_damping: float = 0.0) -> LatticeModel:
    """Physical lattice whose first moments evolve by M - extra_damping I.

    h = i (M - s I) and gamma_kj = (i/2)(h - h†)_jk, the unique Hermitian
    jump matrix cancelling the cubic terms of the first-moment equation, so
    d<b>/dt = (M - s I)<b> holds exactly. Extra uniform damping s shifts all
    eigenvalues left without moving the EP and raises every gamma eigenvalue
    by s; the psd flag records whether gamma is a valid decoherence matrix
    as built.
    """
    if extra_damping < 0:
        raise ValueError("extra_damping must be non-negative")
    shifted = m.matrix - extra_damping * np.eye(m.dim)
    h = 1j * shifted
    gamma = (0.5j * (h - h.conj().T)).T
    eigs = np.linalg.eigvalsh(gamma)
    min_eig = float(eigs[0])
    return LatticeModel(
        n_modes=m.dim,
        hermitian_h=(h + h.conj().T) / 2,
        nhh_h=h,
        jump_gamma=gamma,
        psd=bool(min_eig >= -_PSD_TOL),
        min_gamma_eigenvalue=min_eig,
    )


def cubic_cancellation_residual(h: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    """Coefficient matrix of the cubic terms b_j† b_m b_k in the
    first-moment equation: -i(h - h†) + 2 gamma^T. Zero iff the moment
    dynamics closes as d<b>/dt = -i h <b>."""
    h = np.asarray(h, dtype=complex)
    gamma = np.asarray(gamma, dtype=complex)
    return -1j * (h - h.conj().T) + 2.0 * gamma.T


def first_moment_of_lattice(lat: LatticeModel, atol: float = 1e-10) -> EvolutionMatrix:
    """First-moment evolution matrix of a lattice via the Heisenberg-picture
    generator; equals -i h once the cubic terms cancel.

    Raises ClosureError when h and jump_gamma are inconsistent (the cubic
    terms survive), in which case no linear first-moment matrix exists.
    """
    residual = cubic_cancellation_residual(lat.nhh_h, lat.jump_gamma)
    worst = float(np.max(np.abs(residual)))
    scale = max(1.0, float(np.max(np.abs(lat.nhh_h))))
    if worst > atol * scale:
        raise ClosureError(
            f"cubic moment terms do not cancel (max residual {worst:.6g}); "
            "jump matrix is inconsistent with the lattice NHH"
        )
    return EvolutionMatrix(-1j * lat.nhh_h, first_order_basis(lat.n_modes))


def build_m_n(n_order: int, gamma: float, gamma12: float, delta: float) -> EvolutionMatrix:
    """Closed-form reduced evolution matrix of the N-fold annihilation
    moments of the dissipatively coupled two-mode system.

    Tridiagonal (N+1)x(N+1): diagonal i(-N+2n)delta - N gamma, row n coupled
    to row n-1 by -n gamma12 and to row n+1 by -(N-n) gamma12. N=1 recovers
    the two-mode first-moment matrix itself.
    """
    if n_order < 1:
        raise ValueError("build_m_n requires N >= 1")
    size = n_order + 1
    m = np.zeros((size, size), dtype=complex)
    for n in range(size):
        m[n, n] = 1j * (-n_order + 2 * n) * delta - n_order * gamma
        if n > 0:
            m[n, n - 1] = -n * gamma12
        if n < n_order:
            m[n, n + 1] = -(n_order - n) * gamma12
    entries = tuple(
        MomentIndex(((1, False),) * (n_order - n) + ((2, False),) * n)
        for n in range(size)
    )
    return EvolutionMatrix(m, MomentBasis(entries, "reduced"))


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------

def _matrix_pairs(m: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def _pairs_matrix(rows: list) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in rows])


def lattice_to_json(lat: LatticeModel) -> str:
    return json.dumps({
        "n_modes": lat.n_modes,
        "h": _matrix_pairs(lat.nhh_h),
        "gamma": _matrix_pairs(lat.jump_gamma),
        "psd": lat.psd,
        "min_gamma_eigenvalue": lat.min_gamma_eigenvalue,
    })


def lattice_from_json(text: str) -> LatticeModel:
    data = json.loads(text)
    h = _pairs_matrix(data["h"])
    return LatticeModel(
        n_modes=int(data["n_modes"]),
        hermitian_h=(h + h.conj().T) / 2,
        nhh_h=h,
        jump_gamma=_pairs_matrix(data["gamma"]),
        psd=bool(data["psd"]),
        min_gamma_eigenvalue=float(data["min_gamma_eigenvalue"]),
    )


def _coupled_pairs(lat: LatticeModel, atol: float = 1e-12):
    for j in range(lat.n_modes):
        for k in range(j + 1, lat.n_modes):
            coh = complex(lat.hermitian_h[j, k])
            dis = complex(lat.jump_gamma[j, k])
            if abs(coh) > atol or abs(dis) > atol:
                yield j, k, coh, dis


def adjacency_summary(lat: LatticeModel) -> str:
    """Human-readable per-mode summary: detuning, loss, and couplings."""
    lines = [f"lattice: {lat.n_modes} modes, "
             f"gamma psd={lat.psd} (min eigenvalue {lat.min_gamma_eigenvalue:.6g})"]
    neighbors: dict[int, list[str]] = {j: [] for j in range(lat.n_modes)}
    for j, k, coh, dis in _coupled_pairs(lat):
        neighbors[j].append(f"{k + 1} (coherent {_format_complex(coh)}, "
                            f"dissipative {_format_complex(dis)})")
        neighbors[k].append(f"{j + 1} (coherent {_format_complex(np.conj(coh))}, "
                            f"dissipative {_format_complex(np.conj(dis))})")
    for j in range(lat.n_modes):
        detuning = float(lat.hermitian_h[j, j].real)
        loss = float(lat.jump_gamma[j, j].real)
        linked = "; ".join(neighbors[j]) if neighbors[j] else "none"
        lines.append(f"mode {j + 1}: detuning {detuning:.6g}, loss {loss:.6g}, "
                     f"neighbors: {linked}")
    return "\n".join(lines) + "\n"


_GRAPHML_NS = "http://graphml.graphdrawing.org/xmlns"


def lattice_to_graphml(lat: LatticeModel) -> str:
    """Coupling graph with complex-valued edge attributes coherent and
    dissipative (formatted as a+bi strings)."""
    root = ElementTree.Element("graphml", xmlns=_GRAPHML_NS)
    for key in ("coherent", "dissipative"):
        ElementTree.SubElement(root, "key", id=key, attrib={
            "for": "edge", "attr.name": key, "attr.type": "string"})
    graph = ElementTree.SubElement(root, "graph", id="lattice", edgedefault="undirected")
    for j in range(lat.n_modes):
        ElementTree.SubElement(graph, "node", id=str(j + 1))
    for j, k, coh, dis in _coupled_pairs(lat):
        edge = ElementTree.SubElement(graph, "edge", source=str(j + 1), target=str(k + 1))
        for key, value in (("coherent", coh), ("dissipative", dis)):
            data = ElementTree.SubElement(edge, "data", key=key)
            data.text = _format_complex(value)
    return ElementTree.tostring(root, encoding="unicode", xml_declaration=True) + "\n"


def graphml_edges(text: str) -> dict[tuple[int, int], dict[str, complex]]:
    """Parse a coupling-graph GraphML back into edge attribute values."""
    root = ElementTree.fromstring(text)
    edges = {}
    for edge in root.iter(f"{{{_GRAPHML_NS}}}edge"):
        source, target = int(edge.get("source")), int(edge.get("target"))
        attrs = {}
        for data in edge.iter(f"{{{_GRAPHML_NS}}}data"):
            attrs[data.get("key")] = complex((data.text or "0").replace("i", "j"))
        edges[(source, target)] = attrs
    return edges
