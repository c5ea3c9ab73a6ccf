"""Independent reference computations.

The Riemannian route works from the metric matrix a_ij(x) through Christoffel
symbols and the Riemann tensor and never touches the spray machinery.  The
finite-difference helpers give derivative values independent of the symbolic
differentiator.
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from . import expr as ex
from .expr import Expr, total
from .geometry import PhasePoint, adjugate, determinant, evaluate_at


def christoffel_exprs(a: Sequence[Sequence[Expr]]) -> list[list[list[Expr]]]:
    """Gamma^i_jk = (1/2) a^il (d_j a_lk + d_k a_lj - d_l a_jk)."""
    n = len(a)
    det = determinant(a)
    adj = adjugate(a)
    inv = [[adj[i][j] / det for j in range(n)] for i in range(n)]
    da = [[[ex.diff(a[i][j], "x", k + 1) for k in range(n)] for j in range(n)] for i in range(n)]
    half = ex.const(0.5)
    return [[[half * total(inv[i][l] * (da[l][k][j] + da[l][j][k] - da[j][k][l]) for l in range(n))
              for k in range(n)] for j in range(n)] for i in range(n)]


def christoffel_spray_exprs(a) -> list[Expr]:
    """G^i = (1/2) Gamma^i_jk y^j y^k."""
    n = len(a)
    gam = christoffel_exprs(a)
    half = ex.const(0.5)
    return [half * total(gam[i][j][k] * ex.y(j + 1) * ex.y(k + 1) for j in range(n) for k in range(n))
            for i in range(n)]


def riemann_exprs(a) -> list[list[list[list[Expr]]]]:
    """R^i_ljk = d_j Gamma^i_kl - d_k Gamma^i_jl + Gamma^i_jm Gamma^m_kl - Gamma^i_km Gamma^m_jl."""
    n = len(a)
    G = christoffel_exprs(a)
    dG = [[[[ex.diff(G[i][j][k], "x", m + 1) for m in range(n)] for k in range(n)] for j in range(n)]
          for i in range(n)]
    out = [[[[None] * n for _ in range(n)] for _ in range(n)] for _ in range(n)]
    for i in range(n):
        for l in range(n):
            for j in range(n):
                for k in range(n):
                    out[i][l][j][k] = (dG[i][k][l][j] - dG[i][j][l][k]
                                       + total(G[i][j][m] * G[m][k][l] - G[i][k][m] * G[m][j][l]
                                               for m in range(n)))
    return out


def riemann_contraction(a, p: PhasePoint) -> np.ndarray:
    """y^l R^i_ljk at ``p``, indexed [i][j][k] (points leading for batches)."""
    R = evaluate_at(riemann_exprs(a), p)
    y = p.y if p.is_batch else p.y[None]
    R = R if p.is_batch else R[None]
    out = np.einsum("ml,miljk->mijk", y, R)
    return out if p.is_batch else out[0]


def central_difference(fun: Callable[[np.ndarray], np.ndarray], z: np.ndarray, k: int, h: float) -> np.ndarray:
    """(f(z + h e_k) - f(z - h e_k)) / 2h along coordinate ``k`` of the last axis."""
    zp = np.array(z, float, copy=True)
    zm = np.array(z, float, copy=True)
    zp[..., k] += h
    zm[..., k] -= h
    return (fun(zp) - fun(zm)) / (2.0 * h)


def fd_gradient(e: Expr, z: np.ndarray, n: int, h: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of ``e`` in all 2n phase coordinates at points z (m, 2n)."""
    def fun(zz):
        return ex.evaluate_many([e], zz[:, :n], zz[:, n:])[0]

    z = np.atleast_2d(z)
    return np.stack([central_difference(fun, z, k, h) for k in range(2 * n)], axis=1)
