"""Symbolic bosonic ladder-operator algebra on dense polynomial dictionaries.

Operators are words: tuples of factors ``(mode, dagger)`` with 1-based mode
indices. A polynomial maps canonical words to complex coefficients. The
canonical word form sorts factors by mode (distinct modes commute) and puts
all creation factors before annihilation factors within a mode, so any two
equal operators hash to the same key. Rewriting uses a a† = a†a + 1.

The word sizes that occur here are tiny (quadratic generators acting on
moment products of a few factors), so the exponential worst case of bosonic
reordering is irrelevant.
"""

from __future__ import annotations

import numpy as np

Factor = tuple[int, bool]
Word = tuple[Factor, ...]
Poly = dict[Word, complex]


def _canonical_terms(word: Word, coeff: complex) -> Poly:
    """Rewrite one word into canonical normal-ordered terms."""
    out: Poly = {}
    stack = [(list(word), coeff)]
    while stack:
        w, c = stack.pop()
        for i in range(len(w) - 1):
            (m1, d1), (m2, d2) = w[i], w[i + 1]
            if m1 > m2:
                w2 = w[:i] + [w[i + 1], w[i]] + w[i + 2 :]
                stack.append((w2, c))
                break
            if m1 == m2 and not d1 and d2:
                # a a† = a† a + 1
                swapped = w[:i] + [w[i + 1], w[i]] + w[i + 2 :]
                contracted = w[:i] + w[i + 2 :]
                stack.append((swapped, c))
                stack.append((contracted, c))
                break
        else:
            key = tuple(w)
            out[key] = out.get(key, 0.0 + 0.0j) + c
    return out


def poly(word: Word, coeff: complex = 1.0) -> Poly:
    """Polynomial with a single (canonicalized) word."""
    return _canonical_terms(word, complex(coeff))


def poly_add(target: Poly, other: Poly, scale: complex = 1.0) -> None:
    """In-place target += scale * other, dropping exact zeros."""
    for w, c in other.items():
        v = target.get(w, 0.0 + 0.0j) + scale * c
        if v == 0:
            target.pop(w, None)
        else:
            target[w] = v


def poly_mul(a: Poly, b: Poly) -> Poly:
    out: Poly = {}
    for wa, ca in a.items():
        for wb, cb in b.items():
            poly_add(out, _canonical_terms(wa + wb, ca * cb))
    return out


def coherent_hamiltonian(detunings, coherent, squeezing) -> Poly:
    """Hermitian quadratic generator as a polynomial.

    H = sum_j d_j a_j†a_j + sum_jk g_jk a_j†a_k
        + (1/2) sum_jk (x_jk a_j†a_k† + conj(x_jk) a_k a_j)
    """
    n = len(detunings)
    h: Poly = {}
    for j in range(1, n + 1):
        poly_add(h, poly(((j, True), (j, False)), detunings[j - 1]))
    for j in range(1, n + 1):
        for k in range(1, n + 1):
            g = complex(coherent[j - 1, k - 1])
            if g != 0:
                poly_add(h, poly(((j, True), (k, False)), g))
            x = complex(squeezing[j - 1, k - 1])
            if x != 0:
                poly_add(h, poly(((j, True), (k, True)), 0.5 * x))
                poly_add(h, poly(((k, False), (j, False)), 0.5 * np.conj(x)))
    return h


def adjoint_action(x: Poly, h_coherent: Poly, decoherence) -> Poly:
    """Heisenberg-picture generator applied to operator x.

    d<x>/dt = <-i(x H_c - H_c x) - (x G + G x) + 2 sum_jk Gamma_jk a_k† x a_j>
    with G = sum_jk Gamma_jk a_j†a_k and the factor-2 sandwich convention.
    """
    n = decoherence.shape[0]
    out: Poly = {}
    poly_add(out, poly_mul(x, h_coherent), -1.0j)
    poly_add(out, poly_mul(h_coherent, x), 1.0j)
    g_poly: Poly = {}
    for j in range(1, n + 1):
        for k in range(1, n + 1):
            c = complex(decoherence[j - 1, k - 1])
            if c != 0:
                poly_add(g_poly, poly(((j, True), (k, False)), c))
    poly_add(out, poly_mul(x, g_poly), -1.0)
    poly_add(out, poly_mul(g_poly, x), -1.0)
    for j in range(1, n + 1):
        for k in range(1, n + 1):
            c = complex(decoherence[j - 1, k - 1])
            if c != 0:
                sandwiched = poly_mul(poly(((k, True),)), poly_mul(x, poly(((j, False),))))
                poly_add(out, sandwiched, 2.0 * c)
    return out


class ClosureError(ValueError):
    """Moment dynamics does not close on the requested operator basis."""


def express_over_basis(target: Poly, basis_polys: list[Poly], atol: float = 1e-12):
    """Coefficients c with target = sum_q c_q * basis_polys[q].

    Solved as a least-squares problem over the union of canonical words;
    a residual above atol (relative to the largest coefficient magnitude)
    raises ClosureError. When basis polynomials are linearly dependent the
    minimum-norm coefficient vector is returned.
    """
    words = set(target)
    for p in basis_polys:
        words.update(p)
    word_list = sorted(words)
    a = np.zeros((len(word_list), len(basis_polys)), dtype=complex)
    b = np.zeros(len(word_list), dtype=complex)
    for i, w in enumerate(word_list):
        b[i] = target.get(w, 0.0)
        for q, p in enumerate(basis_polys):
            a[i, q] = p.get(w, 0.0)
    if len(basis_polys) == 0:
        coeffs = np.zeros(0, dtype=complex)
        residual = b
    else:
        coeffs, *_ = np.linalg.lstsq(a, b, rcond=None)
        residual = b - a @ coeffs
    scale = max(1.0, float(np.max(np.abs(b))) if b.size else 1.0)
    if residual.size and float(np.max(np.abs(residual))) > atol * scale:
        worst = word_list[int(np.argmax(np.abs(residual)))]
        raise ClosureError(
            "operator dynamics leaves the basis span "
            f"(residual {float(np.max(np.abs(residual))):.3e} on word {worst})"
        )
    return coeffs
