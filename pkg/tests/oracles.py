"""Closed-form outcome laws used as independent oracles.

These are written from the case analysis of each protocol round, not from
the operator algebra in the package, so agreement is a two-route check.
"""

import itertools
import math


def amp2(p, d):
    return 1 - p if d == 0 else p


def bb84_law(p):
    """P(a, b, c, m, d) for a round without an eavesdropper."""
    out = {}
    for a, b, c, m, d in itertools.product((0, 1), repeat=5):
        if b == c:
            out[(a, b, c, m, d)] = amp2(p, d) / 8 * (a == m)
        else:
            out[(a, b, c, m, d)] = amp2(p, d) / 16
    return out


def bb84_eve_law(p):
    """R(a, b, e, f, c, m, d) with an intercept-resend eavesdropper."""
    out = {}
    for a, b, e, f, c, m, d in itertools.product((0, 1), repeat=7):
        w = amp2(p, d)
        if b == c == e:
            r = w / 16 * (a == f) * (a == m)
        elif e == b != c:
            r = w / 32 * (a == f)
        elif b != c == e:
            r = w / 32 * (f == m)
        else:  # b == c != e
            r = w / 64
        out[(a, b, e, f, c, m, d)] = r
    return out


def close(a, b, tol=1e-12):
    return math.isclose(a, b, rel_tol=0, abs_tol=tol)
