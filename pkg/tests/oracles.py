"""Independent reference computations used by the tests.

Symbolic references go through sympy, so they share no code with the
package's own expression engine.
"""

import numpy as np
import sympy as sp

X1, X2, X3 = sp.symbols("x1 x2 x3", real=True)
STATES = (X1, X2, X3)

SYSTEMS = {
    "example1": ((X2, X3**3, sp.Integer(1)), (0, 0, 1), X1),
    "example2": ((X2, X3**3 * X1, sp.Integer(1)), (0, 0, 1), X1),
    "synthetic_a3": ((X2, X3**2, sp.Integer(0)), (0, 0, 1), X1),
}


def lie(vec, a):
    return sp.expand(sum(sp.diff(a, s) * v for s, v in zip(STATES, vec)))


def lf_chain(name, k):
    """[h, L_f h, ..., L_f^{k-1} h] by sympy."""
    f, _, h = SYSTEMS[name]
    out = [h]
    for _ in range(k - 1):
        out.append(lie(f, out[-1]))
    return out


def lg_lf(name, k):
    f, g, h = SYSTEMS[name]
    return lie(g, lf_chain(name, k + 1)[-1])


def numeric(exprs):
    fn = sp.lambdify(STATES, list(exprs), "numpy")

    def ev(X):
        X = np.atleast_2d(X)
        cols = fn(X[:, 0], X[:, 1], X[:, 2])
        return np.column_stack([np.broadcast_to(np.asarray(c, dtype=float), (len(X),)) for c in cols])

    return ev


def brute_modulus(G, P, s):
    """rho(s) = max |dP| over pairs with |dG| <= s, by full enumeration."""
    dG = np.linalg.norm(G[:, None, :] - G[None, :, :], axis=-1)
    dP = np.linalg.norm(P[:, None, :] - P[None, :, :], axis=-1)
    return np.array([dP[dG <= v].max(initial=0.0) for v in s])
