"""Eigenstructure analysis: eigenvalue clustering, Jordan block detection,
exceptional-point order, closed-form spectra, and parameter sweeps.

Near an exceptional point the eigenvalues are ill-conditioned (a
perturbation of size eps splits an order-k cluster by eps^(1/k)), so
clustering and rank thresholds default to scales that tolerate
double-precision splitting: tol_cluster = 1e-7 ||M||, tol_rank = 1e-9 ||M||.
Jordan structure comes from the Weyr characteristic of the rank sequence
rank((M - lambda I)^k), computed by range iteration with re-orthonormalized
bases rather than explicit matrix powers.
"""

from __future__ import annotations

import cmath
import csv
import io
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

__all__ = [
    "EigenCluster", "EPReport", "SweepTable", "eigen", "multiplicities",
    "ep_order", "analyze", "closed_form_lambda", "sweep", "sweep_to_csv",
    "sweep_from_csv", "ep_report_to_json",
]


def _as_matrix(m) -> np.ndarray:
    a = np.asarray(getattr(m, "matrix", m), dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("expected a square matrix")
    return a


def eigen(m) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues and unit-normalized right eigenvectors (columns)."""
    a = _as_matrix(m)
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    w, v = np.linalg.eig(a)
    norms = np.linalg.norm(v, axis=0)
    norms[norms == 0] = 1.0
    return w, v / norms


@dataclass(frozen=True)
class EigenCluster:
    value: complex
    members: tuple[complex, ...]
    algebraic_multiplicity: int
    geometric_multiplicity: int


@dataclass(frozen=True)
class EPReport:
    clusters: tuple[EigenCluster, ...]
    jordan_block_sizes: tuple[tuple[int, ...], ...]
    ep_orders: tuple[int, ...]
    tol_cluster: float
    tol_rank: float

    def __post_init__(self):
        for cluster, blocks, order in zip(self.clusters, self.jordan_block_sizes,
                                          self.ep_orders):
            if sum(blocks) != cluster.algebraic_multiplicity:
                raise ValueError("Jordan block sizes must sum to the algebraic multiplicity")
            if len(blocks) != cluster.geometric_multiplicity:
                raise ValueError("Jordan block count must equal the geometric multiplicity")
            if order != max(blocks):
                raise ValueError("EP order must be the largest Jordan block")

    def max_order(self) -> int:
        return max(self.ep_orders) if self.ep_orders else 0


def _numerical_rank(a: np.ndarray, tol: float) -> int:
    if a.size == 0:
        return 0
    return int(np.count_nonzero(np.linalg.svd(a, compute_uv=False) > tol))


def _default_tols(a: np.ndarray) -> tuple[float, float]:
    norm = float(np.linalg.norm(a, 2)) if a.size else 1.0
    scale = max(norm, np.finfo(float).tiny)
    return 1e-7 * scale, 1e-9 * scale


def multiplicities(m, tol_cluster: float | None = None,
                   tol_rank: float | None = None) -> list[EigenCluster]:
    """Single-linkage eigenvalue clusters with algebraic and geometric
    multiplicities; geometric = n - rank(M - centroid I)."""
    a = _as_matrix(m)
    default_cluster, default_rank = _default_tols(a)
    tol_cluster = default_cluster if tol_cluster is None else tol_cluster
    tol_rank = default_rank if tol_rank is None else tol_rank
    if tol_cluster <= 0:
        raise ValueError("tol_cluster must be positive")
    w, _ = eigen(a)
    n = a.shape[0]
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(w[i] - w[j]) <= tol_cluster:
                parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    clusters = []
    for idxs in groups.values():
        members = tuple(complex(w[i]) for i in idxs)
        centroid = complex(np.mean([w[i] for i in idxs]))
        geo = n - _numerical_rank(a - centroid * np.eye(n), tol_rank)
        clusters.append(EigenCluster(centroid, members, len(idxs), geo))
    clusters.sort(key=lambda c: (c.value.real, c.value.imag))
    return clusters


def _range_basis(a: np.ndarray, tol: float) -> np.ndarray:
    u, s, _ = np.linalg.svd(a, full_matrices=False)
    return u[:, s > tol]


def ep_order(m, cluster: EigenCluster,
             tol_rank: float | None = None) -> tuple[int, tuple[int, ...]]:
    """EP order and Jordan block sizes for one eigenvalue cluster.

    Computes r_k = rank((M - lambda I)^k) by iterating Q_k = orth(A Q_{k-1})
    until r_k reaches the plateau n - algebraic_multiplicity; the Weyr
    differences r_{k-1} - r_k give the block structure. A rank sequence that
    stalls or drops below the plateau indicates numerical breakdown and
    raises, naming the offending power.
    """
    a = _as_matrix(m)
    n = a.shape[0]
    tol_rank = _default_tols(a)[1] if tol_rank is None else tol_rank
    shifted = a - cluster.value * np.eye(n)
    plateau = n - cluster.algebraic_multiplicity
    ranks = [n]
    q = np.eye(n, dtype=complex)
    while ranks[-1] > plateau:
        q = _range_basis(shifted @ q, tol_rank)
        r = q.shape[1]
        k = len(ranks)
        if r < plateau or r >= ranks[-1]:
            raise ValueError(
                f"rank sequence breakdown at power {k}: rank {r}, "
                f"previous {ranks[-1]}, plateau {plateau}"
            )
        ranks.append(r)
    weyr = [ranks[k - 1] - ranks[k] for k in range(1, len(ranks))]
    order = len(weyr)
    blocks = []
    for size in range(order, 0, -1):
        above = weyr[size] if size < order else 0
        blocks.extend([size] * (weyr[size - 1] - above))
    return order, tuple(blocks)


def analyze(m, tol_cluster: float | None = None,
            tol_rank: float | None = None) -> EPReport:
    """Full EP report: clusters, Jordan blocks, and EP order per cluster."""
    a = _as_matrix(m)
    default_cluster, default_rank = _default_tols(a)
    tol_cluster = default_cluster if tol_cluster is None else tol_cluster
    tol_rank = default_rank if tol_rank is None else tol_rank
    clusters = multiplicities(a, tol_cluster, tol_rank)
    orders, blocks = [], []
    for cluster in clusters:
        order, sizes = ep_order(a, cluster, tol_rank)
        orders.append(order)
        blocks.append(sizes)
    return EPReport(tuple(clusters), tuple(blocks), tuple(orders),
                    tol_cluster, tol_rank)


def closed_form_lambda(n_order: int, n: int, gamma: float, gamma12: float,
                       delta: float) -> tuple[complex, complex]:
    """Eigenvalue pair -N gamma ± (N-2n) sqrt(gamma12^2 - delta^2) of the
    N-fold moment ladder, with the principal complex square root."""
    if not 0 <= n <= n_order:
        raise ValueError("require 0 <= n <= N")
    root = cmath.sqrt(complex(gamma12 * gamma12 - delta * delta))
    shift = (n_order - 2 * n) * root
    base = -n_order * gamma
    return base + shift, base - shift


# ---------------------------------------------------------------------------
# Parameter sweeps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepTable:
    parameter: str
    grid: np.ndarray
    values: tuple  # per grid point: sorted eigenvalue array, or None on error
    errors: tuple  # per grid point: error message, or None

    def rows(self):
        return list(zip(self.grid, self.values))


def _sorted_eigs(a: np.ndarray) -> np.ndarray:
    w, _ = eigen(a)
    return w[np.lexsort((w.imag, w.real))]


def default_workers() -> int:
    raw = os.environ.get("EP_MOMENTS_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def sweep(builder, grid, parameter: str = "param",
          max_workers: int | None = None) -> SweepTable:
    """Eigenvalues of builder(p) over a parameter grid.

    Failures are recorded per grid point without aborting the sweep. Grid
    points are independent and may be evaluated concurrently; results are
    aggregated in grid order either way.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0 or not np.all(np.isfinite(grid)):
        raise ValueError("grid must be non-empty and finite")
    workers = default_workers() if max_workers is None else max(1, max_workers)

    def evaluate(p: float):
        try:
            return _sorted_eigs(_as_matrix(builder(p))), None
        except Exception as exc:  # recorded, not raised
            return None, f"{type(exc).__name__}: {exc}"

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(evaluate, grid))
    else:
        results = [evaluate(p) for p in grid]
    values = tuple(v for v, _ in results)
    errors = tuple(e for _, e in results)
    return SweepTable(parameter, grid, values, errors)


def sweep_to_csv(table: SweepTable) -> str:
    """CSV with header param,re_1,im_1,...,re_N,im_N and %.12e formatting.
    Failed grid points render as nan columns."""
    sizes = {v.size for v in table.values if v is not None}
    if len(sizes) > 1:
        raise ValueError("sweep rows have inconsistent eigenvalue counts")
    width = sizes.pop() if sizes else 0
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    header = ["param"]
    for i in range(1, width + 1):
        header += [f"re_{i}", f"im_{i}"]
    writer.writerow(header)
    for p, v in zip(table.grid, table.values):
        row = [f"{p:.12e}"]
        if v is None:
            row += ["nan", "nan"] * width
        else:
            for z in v:
                row += [f"{z.real:.12e}", f"{z.imag:.12e}"]
        writer.writerow(row)
    return out.getvalue()


def sweep_from_csv(text: str, parameter: str = "param") -> SweepTable:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if not header or header[0] != "param" or (len(header) - 1) % 2 != 0:
        raise ValueError("not a sweep CSV: bad header")
    grid, values, errors = [], [], []
    for row in reader:
        grid.append(float(row[0]))
        numbers = [float(x) for x in row[1:]]
        eigs = np.array([complex(numbers[i], numbers[i + 1])
                         for i in range(0, len(numbers), 2)])
        if np.all(np.isnan(eigs.real)):
            values.append(None)
            errors.append("recorded failure")
        else:
            values.append(eigs)
            errors.append(None)
    return SweepTable(parameter, np.array(grid), tuple(values), tuple(errors))


def ep_report_to_json(report: EPReport) -> str:
    return json.dumps({
        "clusters": [
            {
                "value": [c.value.real, c.value.imag],
                "alg": c.algebraic_multiplicity,
                "geo": c.geometric_multiplicity,
                "blocks": list(blocks),
                "ep_order": order,
            }
            for c, blocks, order in zip(report.clusters, report.jordan_block_sizes,
                                        report.ep_orders)
        ],
        "tolerances": {"cluster": report.tol_cluster, "rank": report.tol_rank},
    })
