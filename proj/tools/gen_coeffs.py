#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Regenerates the exponential-approximation coefficients in src/approx_coefficients.cpp.

The polynomial is the degree-12 least-squares (Legendre / uniform weight)
approximation of exp(u) on [-1, 1], expressed in the monomial basis.
"""
import mpmath as mp

mp.mp.dps = 60
DEGREE = 12


def legendre_projection(fn, degree):
    coeffs = []
    for k in range(degree + 1):
        integral = mp.quad(lambda u: fn(u) * mp.legendre(k, u), [-1, 1])
        coeffs.append((2 * k + 1) / mp.mpf(2) * integral)
    return coeffs


def legendre_to_monomial(leg):
    # P_k as monomial coefficient vectors via Bonnet's recurrence.
    n = len(leg)
    basis = [[mp.mpf(1)] + [mp.mpf(0)] * (n - 1), [mp.mpf(0), mp.mpf(1)] + [mp.mpf(0)] * (n - 2)]
    for k in range(1, n - 1):
        nxt = [mp.mpf(0)] * n
        for i in range(n):
            if i + 1 < n:
                nxt[i + 1] += (2 * k + 1) * basis[k][i] / (k + 1)
            nxt[i] -= k * basis[k - 1][i] / (k + 1)
        basis.append(nxt)
    mono = [mp.mpf(0)] * n
    for k in range(n):
        for i in range(n):
            mono[i] += leg[k] * basis[k][i]
    return mono


def main():
    mono = legendre_to_monomial(legendre_projection(mp.exp, DEGREE))
    print("// degree %d L2 approximation of exp(u) on [-1, 1], monomial basis" % DEGREE)
    for c in mono:
        print("    %s," % mp.nstr(c, 20, min_fixed=-1, max_fixed=-1).replace("e", "e"))
    err = max(abs(mp.exp(u) - sum(c * u**i for i, c in enumerate(mono)))
              for u in mp.linspace(-1, 1, 2001))
    print("// max |exp(u) - p(u)| on grid: %s" % mp.nstr(err, 5))


if __name__ == "__main__":
    main()
