"""Independent reference implementations used by the tests."""

import numpy as np


def se_product(x, y, ls, sv=1.0):
    out = sv
    for a, b, l in zip(x, y, ls):
        out *= np.exp(-0.5 * (a - b) ** 2 / l**2)
    return out


def matern52_product(x, y, ls, sv=1.0, const=1.0):
    out = sv * const
    for a, b, l in zip(x, y, ls):
        r = abs(a - b) / l
        out *= (1 + np.sqrt(5) * r + 5 * r * r / 3) * np.exp(-np.sqrt(5) * r)
    return out


def gp_direct(k, X, y, Xq, noise):
    """Posterior mean/variance by explicit matrix inversion."""
    K = np.array([[k(a, b) for b in X] for a in X]) + noise * np.eye(len(X))
    Kinv = np.linalg.inv(K)
    mean, var = [], []
    for q in Xq:
        ks = np.array([k(a, q) for a in X])
        mean.append(ks @ Kinv @ y)
        var.append(k(q, q) - ks @ Kinv @ ks)
    return np.array(mean), np.maximum(np.array(var), 0.0)


def brute_force_front(F):
    """Indices of rows not dominated by any other row (maximization)."""
    keep = []
    for i in range(len(F)):
        dominated = False
        for j in range(len(F)):
            if j != i and np.all(F[j] >= F[i]) and np.any(F[j] > F[i]):
                dominated = True
                break
        if not dominated:
            keep.append(i)
    return keep
