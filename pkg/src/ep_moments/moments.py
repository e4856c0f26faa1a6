"""Moment evolution matrices: construction, Kronecker-sum composition,
degenerate-product reduction, and linear propagation.

A moment basis is an ordered list of operator-product labels. Products over
distinct modes commute, so labels differing only by the order of
distinct-mode factors denote the same moment; same-mode factor order is
physical and preserved verbatim. The first-moment matrix is produced by
symbolic evaluation of the Heisenberg-picture generator, which doubles as a
closure detector: systems whose cubic terms fail to cancel (gain-like or
chiral decoherence) raise instead of silently returning a wrong matrix.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

import numpy as np

from . import ladder
from .ladder import ClosureError
from .model import QuadraticSystem, is_u1_symmetric, validate

__all__ = [
    "MomentIndex", "MomentBasis", "EvolutionMatrix", "ClosureError",
    "first_moment_matrix", "evolution_matrix", "kronecker_sum",
    "moment_power", "reduce", "propagate_moments", "expm",
    "matrix_to_json", "matrix_from_json",
]

_LABEL_RE = re.compile(r"^a(\d+)(†|')?$")


@dataclass(frozen=True)
class MomentIndex:
    """Ordered product of ladder-operator factors (mode, dagger)."""

    factors: tuple[tuple[int, bool], ...]

    def __post_init__(self):
        if not self.factors:
            raise ValueError("moment index must have at least one factor")
        if any(mode < 1 for mode, _ in self.factors):
            raise ValueError("mode indices are 1-based")

    def label(self) -> str:
        return " ".join(f"a{m}†" if d else f"a{m}" for m, d in self.factors)

    def canonical_key(self) -> tuple[tuple[int, bool], ...]:
        """Stable sort by mode: distinct-mode factors commute, same-mode
        factor order is preserved."""
        return tuple(sorted(self.factors, key=lambda f: f[0]))

    @classmethod
    def from_label(cls, label: str) -> "MomentIndex":
        factors = []
        for token in label.split():
            m = _LABEL_RE.match(token)
            if not m:
                raise ValueError(f"bad moment label token {token!r}")
            factors.append((int(m.group(1)), m.group(2) is not None))
        return cls(tuple(factors))

    def max_mode(self) -> int:
        return max(m for m, _ in self.factors)


@dataclass(frozen=True)
class MomentBasis:
    entries: tuple[MomentIndex, ...]
    kind: str = "full"  # "full" | "reduced"

    def __post_init__(self):
        if self.kind not in ("full", "reduced"):
            raise ValueError(f"unknown basis kind {self.kind!r}")

    def __len__(self) -> int:
        return len(self.entries)

    def labels(self) -> list[str]:
        return [e.label() for e in self.entries]


def first_order_basis(n_modes: int, interleaved: bool = False) -> MomentBasis:
    """[a1..an], or [a1, a1†, ..., an, an†] when interleaved."""
    entries = []
    for mode in range(1, n_modes + 1):
        entries.append(MomentIndex(((mode, False),)))
        if interleaved:
            entries.append(MomentIndex(((mode, True),)))
    return MomentBasis(tuple(entries), "full")


@dataclass(frozen=True, eq=False)
class EvolutionMatrix:
    """Dense complex matrix acting on a moment basis: d<v>/dt = M <v>."""

    matrix: np.ndarray
    basis: MomentBasis

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("evolution matrix must be square")
        if m.shape[0] != len(self.basis):
            raise ValueError("matrix dimension does not match basis length")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def _require_valid(sys: QuadraticSystem) -> None:
    report = validate(sys)
    if not report.ok:
        problems = "; ".join(f.message for f in report.findings if f.severity == "error")
        raise ValueError(f"system failed validation: {problems}")


def evolution_matrix(sys: QuadraticSystem, basis: MomentBasis) -> EvolutionMatrix:
    """Evolution matrix over an arbitrary moment basis by symbolic
    evaluation of the Heisenberg-picture generator.

    Raises ClosureError when the dynamics of some basis moment leaves the
    basis span (residual above 1e-12), e.g. for chiral decoherence or for
    bases whose equations pick up constant source terms.
    """
    _require_valid(sys)
    if any(e.max_mode() > sys.n_modes for e in basis.entries):
        raise ValueError("basis references a mode index beyond n_modes")
    h_c = ladder.coherent_hamiltonian(sys.detunings, sys.coherent_coupling,
                                      sys.squeezing_coupling)
    basis_polys = [ladder.poly(e.factors) for e in basis.entries]
    rows = []
    for entry in basis.entries:
        image = ladder.adjoint_action(ladder.poly(entry.factors), h_c, sys.decoherence)
        rows.append(ladder.express_over_basis(image, basis_polys))
    return EvolutionMatrix(np.array(rows, dtype=complex), basis)


def first_moment_matrix(sys: QuadraticSystem, interleaved: bool = False) -> EvolutionMatrix:
    """Evolution matrix of the first-order field moments.

    Over the basis [a1..an] (U(1) systems) this equals the closed form
    -i diag(d) - i g - Gamma; the interleaved basis [a1, a1†, ...] is
    required for systems with squeezing, whose annihilation and creation
    sectors couple.
    """
    _require_valid(sys)
    if not interleaved and not is_u1_symmetric(sys):
        raise ValueError("non-U(1) systems require the interleaved first-moment basis")
    return evolution_matrix(sys, first_order_basis(sys.n_modes, interleaved))


def kronecker_sum(ma: EvolutionMatrix, mb: EvolutionMatrix) -> EvolutionMatrix:
    """Kronecker sum Ma⊗I + I⊗Mb over the product basis.

    Entry (i, j) of the product basis is the concatenated operator product
    written right-factor-first, so a first-moment vector [a1, a2] squares to
    [a1 a1, a2 a1, a1 a2, a2 a2]. Both inputs must describe moments of the
    same underlying system; this is not checkable from the matrices alone.
    """
    na, nb = ma.dim, mb.dim
    matrix = np.kron(ma.matrix, np.eye(nb)) + np.kron(np.eye(na), mb.matrix)
    entries = tuple(
        MomentIndex(eb.factors + ea.factors)
        for ea in ma.basis.entries
        for eb in mb.basis.entries
    )
    return EvolutionMatrix(matrix, MomentBasis(entries, "full"))


def moment_power(ma: EvolutionMatrix, m: int) -> EvolutionMatrix:
    """m-fold recursive Kronecker sum of ma with itself."""
    if m < 1:
        raise ValueError("moment power requires m >= 1")
    out = ma
    for _ in range(m - 1):
        out = kronecker_sum(out, ma)
    return out


def reduce(m: EvolutionMatrix, atol: float = 1e-12) -> EvolutionMatrix:
    """Merge basis entries that denote the same moment.

    Entries are grouped by canonical key (distinct-mode factors commute);
    the reduced row for a class is any member's row with columns summed over
    each class. Every member must produce the same merged row within atol —
    a mismatch means the degenerate moments do not actually share dynamics
    and the reduction would be wrong (non-closure), which raises ValueError.
    Classes keep first-appearance order and are labeled by their canonical
    (mode-sorted) factor sequence. A matrix with no degenerate entries is
    returned unchanged.
    """
    classes: dict[tuple, int] = {}
    members: list[list[int]] = []
    for idx, entry in enumerate(m.basis.entries):
        key = entry.canonical_key()
        if key in classes:
            members[classes[key]].append(idx)
        else:
            classes[key] = len(members)
            members.append([idx])
    if len(members) == m.dim:
        return m
    n_red = len(members)
    merge = np.zeros((m.dim, n_red))
    for c, idxs in enumerate(members):
        for i in idxs:
            merge[i, c] = 1.0
    merged_rows = m.matrix @ merge  # (N, n_red): each row with columns class-summed
    tol = atol * max(1.0, float(np.max(np.abs(m.matrix))))
    reduced = np.zeros((n_red, n_red), dtype=complex)
    for c, idxs in enumerate(members):
        rep = merged_rows[idxs[0]]
        for i in idxs[1:]:
            deviation = float(np.max(np.abs(merged_rows[i] - rep)))
            if deviation > tol:
                raise ValueError(
                    "reduction inconsistency: rows of degenerate moments "
                    f"{m.basis.entries[idxs[0]].label()!r} and "
                    f"{m.basis.entries[i].label()!r} differ by {deviation:.3e}"
                )
        reduced[c] = rep
    entries = tuple(MomentIndex(key) for key, _ in sorted(classes.items(), key=lambda kv: kv[1]))
    return EvolutionMatrix(reduced, MomentBasis(entries, "reduced"))


# ---------------------------------------------------------------------------
# Propagation
# ---------------------------------------------------------------------------

# Pade-13 scaling-and-squaring; fixed order, robustness over speed.
_PADE13 = (
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0, 129060195264000.0, 10559470521600.0, 670442572800.0,
    33522128640.0, 1323241920.0, 40840800.0, 960960.0, 16380.0, 182.0, 1.0,
)
_THETA13 = 5.371920351148152


def expm(a: np.ndarray) -> np.ndarray:
    """Matrix exponential by scaling and squaring with a degree-13 Pade core."""
    a = np.asarray(a, dtype=complex)
    n = a.shape[0]
    norm = float(np.linalg.norm(a, 1)) if n else 0.0
    s = max(0, int(np.ceil(np.log2(norm / _THETA13)))) if norm > _THETA13 else 0
    a = a / (2.0 ** s)
    ident = np.eye(n, dtype=complex)
    b = _PADE13
    a2 = a @ a
    a4 = a2 @ a2
    a6 = a2 @ a4
    u = a @ (a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2)
             + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * ident)
    v = (a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2)
         + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident)
    r = np.linalg.solve(v - u, v + u)
    for _ in range(s):
        r = r @ r
    return r


def propagate_moments(m: EvolutionMatrix, v0, times) -> np.ndarray:
    """exp(M t) v0 at each requested time; shape (len(times), dim)."""
    v0 = np.asarray(v0, dtype=complex)
    times = np.asarray(times, dtype=float)
    if v0.shape != (m.dim,):
        raise ValueError(f"initial vector has length {v0.shape}, matrix dimension is {m.dim}")
    if times.size and (times[0] < 0 or np.any(np.diff(times) < 0)):
        raise ValueError("times must be non-decreasing and start at t >= 0")
    out = np.empty((times.size, m.dim), dtype=complex)
    for i, t in enumerate(times):
        out[i] = expm(m.matrix * t) @ v0
    return out


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def matrix_to_json(m: EvolutionMatrix) -> str:
    """JSON form: {basis: [labels], matrix: row-major [re, im] pairs}."""
    pairs = [[float(z.real), float(z.imag)] for z in m.matrix.ravel()]
    return json.dumps({"basis": m.basis.labels(), "matrix": pairs})


def matrix_from_json(text: str) -> EvolutionMatrix:
    data = json.loads(text)
    entries = tuple(MomentIndex.from_label(lbl) for lbl in data["basis"])
    n = len(entries)
    flat = np.array([complex(re, im) for re, im in data["matrix"]])
    if flat.size != n * n:
        raise ValueError(f"matrix has {flat.size} entries, expected {n * n}")
    keys = {e.canonical_key() for e in entries}
    kind = "reduced" if len(keys) == n else "full"
    return EvolutionMatrix(flat.reshape(n, n), MomentBasis(entries, kind))
