"""Command-line surface: validation, moment matrices, spectra, EP reports,
parameter sweeps, lattice synthesis, and oracle verification.

Machine artifacts (JSON/CSV/GraphML) go to --out paths, human summaries to
stdout. Output is deterministic: fixed eigenvalue ordering and %.12e float
formatting. Exit codes: 0 success, 1 usage, 2 validation, 3 numerical
failure, 4 verification failure.
"""

from __future__ import annotations

import argparse
import re
import sys
from pathlib import Path

import numpy as np

from . import moments, nhh, oracle, spectral
from .ladder import ClosureError
from .model import (ModelFormatError, QuadraticSystem, is_u1_symmetric,
                    parse_model, validate)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_VERIFICATION = 4


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _parse_complex_token(token: str) -> complex:
    try:
        return complex(token.strip().replace("i", "j").replace("I", "j"))
    except ValueError:
        raise UsageError(f"bad complex value {token!r}") from None


_OVERRIDE_RE = re.compile(r"^(delta|gamma|g|chi)(\d+(?:,\d+)?)$")


def _apply_override(sys_: QuadraticSystem, key: str, raw: str) -> QuadraticSystem:
    """Return a copy of the system with one parameter replaced.

    Keys: deltaJ (real), gammaJK, gJK (Hermitian partner set to the
    conjugate), chiJK (symmetric partner mirrored). JK is two digits or
    J,K for systems with more than nine modes.
    """
    m = _OVERRIDE_RE.match(key.strip())
    if not m:
        raise UsageError(f"unknown parameter {key!r}")
    name, spec_ = m.groups()
    value = _parse_complex_token(raw)
    indices = [int(p) for p in spec_.split(",")] if "," in spec_ else [int(c) for c in spec_]
    if any(not 1 <= ix <= sys_.n_modes for ix in indices):
        raise UsageError(f"parameter {key!r} is out of range for {sys_.n_modes} modes")
    det = np.array(sys_.detunings)
    g = np.array(sys_.coherent_coupling)
    chi = np.array(sys_.squeezing_coupling)
    gamma = np.array(sys_.decoherence)
    if name == "delta":
        if len(indices) != 1:
            raise UsageError("delta takes a single mode index")
        if value.imag != 0:
            raise UsageError("detunings must be real")
        det[indices[0] - 1] = value.real
    else:
        if len(indices) != 2:
            raise UsageError(f"{name} takes two mode indices")
        j, k = indices[0] - 1, indices[1] - 1
        if name == "gamma":
            gamma[j, k] = value
            gamma[k, j] = np.conj(value)
        elif name == "g":
            g[j, k] = value
            g[k, j] = np.conj(value)
        else:
            chi[j, k] = value
            chi[k, j] = value
    return QuadraticSystem(sys_.n_modes, det, g, chi, gamma)


def _load_system(args) -> QuadraticSystem:
    try:
        text = Path(args.model).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read model file: {exc}") from None
    sys_ = parse_model(text)
    for item in getattr(args, "set", None) or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"override {item!r} is not key=value")
        sys_ = _apply_override(sys_, key, value)
    return sys_


def _require_valid(sys_: QuadraticSystem) -> None:
    report = validate(sys_)
    if not report.ok:
        lines = [f"{f.severity}: [{f.code}] {f.message}" for f in report.findings]
        raise ModelValidationError("\n".join(lines))


class ModelValidationError(ValueError):
    pass


def _order_matrix(sys_: QuadraticSystem, order: int, reduce_basis: bool = True,
                  basis_labels: str | None = None) -> moments.EvolutionMatrix:
    """Reduced (by default) evolution matrix of the order-m annihilation
    moments; --basis builds over an explicit label list instead."""
    _require_valid(sys_)
    if basis_labels is not None:
        entries = tuple(moments.MomentIndex.from_label(part.strip())
                        for part in basis_labels.split(",") if part.strip())
        if not entries:
            raise UsageError("--basis must list at least one moment label")
        return moments.evolution_matrix(sys_, moments.MomentBasis(entries, "full"))
    if order < 1:
        raise UsageError("--order must be >= 1")
    u1 = is_u1_symmetric(sys_)
    if order == 1:
        return moments.first_moment_matrix(sys_, interleaved=not u1)
    if not u1:
        raise ModelValidationError(
            "order > 1 requires a U(1)-symmetric model (annihilation-moment ladder)")
    first = moments.first_moment_matrix(sys_)
    power = moments.moment_power(first, order)
    return moments.reduce(power) if reduce_basis else power


def _write_or_print(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _format_eigs(values) -> str:
    return "\n".join(f"{z.real:+.12e} {z.imag:+.12e}i" for z in values)


def _print_report(report: spectral.EPReport) -> None:
    for cluster, blocks, order in zip(report.clusters, report.jordan_block_sizes,
                                      report.ep_orders):
        print(f"cluster {cluster.value.real:+.12e} {cluster.value.imag:+.12e}i: "
              f"algebraic {cluster.algebraic_multiplicity}, "
              f"geometric {cluster.geometric_multiplicity}, "
              f"blocks {list(blocks)}, ep order {order}")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _cmd_validate(args) -> int:
    sys_ = _load_system(args)
    report = validate(sys_)
    print(f"ok: {report.ok}")
    print(f"min decoherence eigenvalue: {report.min_decoherence_eigenvalue:.12e}")
    for f in report.findings:
        print(f"{f.severity}: [{f.code}] {f.message}")
    return EXIT_OK if report.ok else EXIT_VALIDATION


def _cmd_moments_matrix(args) -> int:
    sys_ = _load_system(args)
    m = _order_matrix(sys_, args.order, reduce_basis=args.reduce, basis_labels=args.basis)
    _write_or_print(moments.matrix_to_json(m), args.out)
    return EXIT_OK


def _cmd_spectrum(args) -> int:
    sys_ = _load_system(args)
    m = _order_matrix(sys_, args.order, basis_labels=args.basis)
    w, _ = spectral.eigen(m.matrix)
    print("eigenvalues:")
    print(_format_eigs(w[np.lexsort((w.imag, w.real))]))
    report = spectral.analyze(m.matrix)
    _print_report(report)
    if args.out:
        Path(args.out).write_text(spectral.ep_report_to_json(report), encoding="utf-8")
    return EXIT_OK


def _cmd_ep_order(args) -> int:
    sys_ = _load_system(args)
    m = _order_matrix(sys_, args.order, basis_labels=args.basis)
    report = spectral.analyze(m.matrix)
    _print_report(report)
    if args.out:
        Path(args.out).write_text(spectral.ep_report_to_json(report), encoding="utf-8")
    return EXIT_OK if report.max_order() >= 2 else EXIT_VERIFICATION


def _cmd_sweep(args) -> int:
    sys_ = _load_system(args)
    if args.steps < 1:
        raise UsageError("--steps must be >= 1")
    grid = np.linspace(args.start, args.stop, args.steps)

    def builder(p: float):
        varied = _apply_override(sys_, args.param, repr(float(p)))
        return _order_matrix(varied, args.order).matrix

    table = spectral.sweep(builder, grid, parameter=args.param,
                           max_workers=spectral.default_workers())
    failures = [(p, e) for p, e in zip(table.grid, table.errors) if e]
    for p, message in failures:
        print(f"warning: sweep point {p:g} failed: {message}", file=sys.stderr)
    _write_or_print(spectral.sweep_to_csv(table), args.out)
    return EXIT_OK if not failures else EXIT_NUMERICAL


def _cmd_design_lattice(args) -> int:
    sys_ = _load_system(args)
    m = _order_matrix(sys_, args.order)
    lattice = nhh.synthesize_lattice(m, extra_damping=args.extra_damping)
    print(nhh.adjacency_summary(lattice), end="")
    if args.out:
        Path(args.out).write_text(nhh.lattice_to_json(lattice), encoding="utf-8")
    if args.graphml:
        Path(args.graphml).write_text(nhh.lattice_to_graphml(lattice), encoding="utf-8")
    return EXIT_OK


def _cmd_verify(args) -> int:
    sys_ = _load_system(args)
    m = _order_matrix(sys_, args.order, basis_labels=args.basis)
    alphas = [_parse_complex_token(tok) for tok in args.alpha.split(",")]
    if len(alphas) != sys_.n_modes:
        raise UsageError(f"--alpha needs {sys_.n_modes} amplitudes")
    space = oracle.build_space(sys_.n_modes, args.cutoff)
    rho0 = oracle.coherent_state(alphas, space)
    n_samples = max(2, min(31, int(round(args.tmax / args.dt)) + 1))
    times = np.round(np.linspace(0.0, args.tmax, n_samples) / args.dt) * args.dt
    report = oracle.verify_moments(sys_, rho0, m, times, args.tol, dt=args.dt,
                                   leakage_tol=args.leakage_tol)
    print(f"pass: {report.passed} (tol {report.tol:.3e})")
    for label, dev in report.per_moment_max_dev.items():
        print(f"max |dev| <{label}>: {dev:.12e}")
    if args.out:
        Path(args.out).write_text(oracle.report_to_json(report), encoding="utf-8")
    return EXIT_OK if report.passed else EXIT_VERIFICATION


def _cmd_mn(args) -> int:
    if args.N < 1:
        raise UsageError("--N must be >= 1")
    m = nhh.build_m_n(args.N, args.gamma, args.gamma12, args.delta)
    w, _ = spectral.eigen(m.matrix)
    print("eigenvalues:")
    print(_format_eigs(w[np.lexsort((w.imag, w.real))]))
    _print_report(spectral.analyze(m.matrix))
    if args.out:
        Path(args.out).write_text(moments.matrix_to_json(m), encoding="utf-8")
    return EXIT_OK


def _build_parser() -> _Parser:
    parser = _Parser(prog="ep-moments",
                     description="Moment evolution matrices of quadratic Liouvillians "
                                 "and their exceptional-point structure.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, model=True, order=False, basis=False, out=True):
        p = sub.add_parser(name)
        p.set_defaults(func=func)
        if model:
            p.add_argument("model", help="model file path")
            p.add_argument("--set", action="append", metavar="KEY=VALUE",
                           help="override a model parameter (deltaJ, gammaJK, gJK, chiJK)")
        if order:
            p.add_argument("--order", type=int, default=1,
                           help="moment order m (annihilation ladder for U(1) models)")
        if basis:
            p.add_argument("--basis", default=None,
                           help="comma-separated moment labels, e.g. 'a1 a1,a1 a2,a2 a2'")
        if out:
            p.add_argument("--out", default=None, help="write machine output here")
        return p

    add("validate", _cmd_validate, out=False)
    p = add("moments-matrix", _cmd_moments_matrix, order=True, basis=True)
    p.add_argument("--reduce", action="store_true",
                   help="merge degenerate moment products")
    add("spectrum", _cmd_spectrum, order=True, basis=True)
    add("ep-order", _cmd_ep_order, order=True, basis=True)
    p = add("sweep", _cmd_sweep, order=True)
    p.add_argument("--param", required=True, help="parameter key, e.g. gamma12")
    p.add_argument("--from", dest="start", type=float, required=True)
    p.add_argument("--to", dest="stop", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    p = add("design-lattice", _cmd_design_lattice, order=True)
    p.add_argument("--extra-damping", type=float, default=0.0)
    p.add_argument("--graphml", default=None, help="write GraphML here")
    p = add("verify", _cmd_verify, order=True, basis=True)
    p.add_argument("--alpha", required=True, help="comma-separated coherent amplitudes")
    p.add_argument("--cutoff", type=int, default=8)
    p.add_argument("--tmax", type=float, default=3.0)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--leakage-tol", type=float, default=1e-8)
    p = add("mn", _cmd_mn, model=False)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--gamma12", type=float, default=1.0)
    p.add_argument("--delta", type=float, default=1.0)
    return parser


def run(argv) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ModelFormatError, ModelValidationError, ValueError) as exc:
        if isinstance(exc, ClosureError):
            print(f"numerical failure: {exc}", file=sys.stderr)
            return EXIT_NUMERICAL
        if isinstance(exc, (ModelFormatError, ModelValidationError)):
            print(f"validation error: {exc}", file=sys.stderr)
            return EXIT_VALIDATION
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except np.linalg.LinAlgError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def main(argv=None) -> int:
    return run(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    raise SystemExit(main())
