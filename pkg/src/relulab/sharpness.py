"""Loss-Hessian actions, sharpness, and the flatness certificate.

The loss Hessian of the half-MSE objective splits into a positive
semidefinite Gauss-Newton part built from per-example gradients of the
network and a residual-weighted part built from per-example Hessians of the
network.  For this architecture the per-example network Hessian is sparse:
with ``z_k = w_k . x - b_k`` and ``1_k = 1{z_k > 0}`` the only nonzero blocks
are the (w_k, v_k) block ``1_k x`` and the (b_k, v_k) entry ``-1_k`` (the
minus tracks the minus in front of the inner bias).  Everything here works
matrix-free through these closed forms; nothing materializes an (m x m)
matrix.

The certificate at the end bounds the weighted path norm of the represented
function by a sharpness expression: with the empirical weight g built from
the training inputs,

    weighted_path_norm <= lambda_max/2 - 1/2 + (R+1) sqrt(2 L)

and the Gauss-Newton eigenvalue separately dominates the one-sided bound
``1 + 2 sum_k |v_k| ||w_k|| gtilde(w_k/||w_k||, b_k/||w_k||)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from relulab.nets import Dataset, TwoLayerNet, forward, loss, param_count, to_reduced_form, weighted_path_norm
from relulab.numerics import power_iteration
from relulab.weights import EmpiricalWeight, tilde_g_empirical

__all__ = [
    "ActivationBoundaryWarning",
    "hessian_vector_product",
    "make_hessian_operator",
    "sharpness",
    "gauss_newton_sharpness",
    "is_stable",
    "term_a_lower_bound",
    "RegularityCertificate",
    "regularity_certificate",
]

_BOUNDARY_ATOL = 1e-12
_CERT_SLACK = 1e-8


class ActivationBoundaryWarning(UserWarning):
    """Some preactivation sits numerically on the ReLU kink; the Hessian
    action proceeds with the inactive-branch convention 1{z > 0}."""


def make_hessian_operator(
    net: TwoLayerNet,
    data: Dataset,
    gauss_newton_only: bool = False,
) -> Callable[[np.ndarray], np.ndarray]:
    """Return a closure computing ``H @ vec`` in the flat parameter layout.

    Activations and residuals are computed once, so repeated applications
    (power iteration) cost two small matrix products each.
    """
    x = data.inputs
    y = data.labels
    n, d = x.shape
    k = net.width
    v = net.v

    z = x @ net.w.T - net.b
    if np.any(np.abs(z) < _BOUNDARY_ATOL):
        warnings.warn(
            "preactivation within 1e-12 of the ReLU kink; using the strict "
            "1{z > 0} branch",
            ActivationBoundaryWarning,
            stacklevel=3,
        )
    act = z > 0.0
    a = np.where(act, z, 0.0)
    r = a @ v + net.beta - y

    if gauss_newton_only:
        res_wx = None
        res_bsum = None
    else:
        ract = r[:, None] * act
        res_wx = ract.T @ x / n      # (K, d): (1/n) sum_i r_i 1_ik x_i
        res_bsum = ract.sum(axis=0) / n  # (K,)

    wd = k * d

    def apply(vec: np.ndarray) -> np.ndarray:
        vw = vec[:wd].reshape(k, d)
        vb = vec[wd : wd + k]
        vv = vec[wd + k : wd + 2 * k]
        vbeta = vec[-1]

        xv = x @ vw.T                       # (n, K)
        core = np.where(act, xv - vb, 0.0)  # 1_ik (x_i . Vw_k - Vb_k)
        s = core @ v + a @ vv + vbeta       # per-example gradient pairing

        sact = s[:, None] * act
        hw = v[:, None] * (sact.T @ x) / n
        hb = -v * (sact.sum(axis=0)) / n
        hv = a.T @ s / n
        hbeta = float(s.mean())

        if not gauss_newton_only:
            hw = hw + vv[:, None] * res_wx
            hb = hb - vv * res_bsum
            hv = hv + core.T @ r / n

        return np.concatenate([hw.ravel(), hb, hv, [hbeta]])

    return apply


def hessian_vector_product(
    net: TwoLayerNet,
    data: Dataset,
    vec: np.ndarray,
    gauss_newton_only: bool = False,
) -> np.ndarray:
    """Exact ``H @ vec`` for the loss Hessian (or its Gauss-Newton part)."""
    vec = np.asarray(vec, dtype=float)
    m = param_count(net.input_dim, net.width)
    if vec.shape != (m,):
        raise ValueError(f"expected flat vector of length {m}, got shape {vec.shape}")
    return make_hessian_operator(net, data, gauss_newton_only)(vec)


def _top_eigenvalue(
    net: TwoLayerNet,
    data: Dataset,
    gauss_newton_only: bool,
    rel_tol: float,
    max_iters: int,
    rng,
) -> float:
    op = make_hessian_operator(net, data, gauss_newton_only)
    m = param_count(net.input_dim, net.width)
    res = power_iteration(op, m, rel_tol=rel_tol, max_iters=max_iters, rng=rng)
    if not res.converged:
        warnings.warn(
            f"power iteration did not reach rel_tol={rel_tol} within "
            f"{max_iters} iterations; returning the last estimate",
            RuntimeWarning,
            stacklevel=3,
        )
    return res.value


def sharpness(
    net: TwoLayerNet,
    data: Dataset,
    rel_tol: float = 1e-8,
    max_iters: int = 2000,
    rng=None,
) -> float:
    """Largest algebraic eigenvalue of the loss Hessian at ``net``."""
    return _top_eigenvalue(net, data, False, rel_tol, max_iters, rng)


def gauss_newton_sharpness(
    net: TwoLayerNet,
    data: Dataset,
    rel_tol: float = 1e-8,
    max_iters: int = 2000,
    rng=None,
) -> float:
    """Largest eigenvalue of the Gauss-Newton part alone (PSD)."""
    return _top_eigenvalue(net, data, True, rel_tol, max_iters, rng)


def is_stable(net: TwoLayerNet, data: Dataset, eta: float, **kwargs) -> bool:
    """Linear-stability test for gradient descent with step size ``eta``:
    sharpness <= 2/eta."""
    if eta <= 0.0:
        raise ValueError(f"step size must be positive, got {eta}")
    return sharpness(net, data, **kwargs) <= 2.0 / eta


def term_a_lower_bound(net: TwoLayerNet, data: Dataset) -> float:
    """One-sided certified lower bound on the Gauss-Newton eigenvalue:
    ``1 + 2 sum_k |v_k| ||w_k|| gtilde_emp(w_k/||w_k||, b_k/||w_k||)``.

    Zero-direction neurons contribute nothing and are skipped.
    """
    norms = np.linalg.norm(net.w, axis=1)
    total = 1.0
    for k in range(net.width):
        nk = norms[k]
        if nk == 0.0 or net.v[k] == 0.0:
            continue
        gt = tilde_g_empirical(data.inputs, net.w[k] / nk, net.b[k] / nk)
        total += 2.0 * abs(net.v[k]) * nk * gt
    return total


@dataclass(frozen=True)
class RegularityCertificate:
    """Numerical certificate tying flatness to weighted-variation smallness.

    ``lhs`` is the weighted path norm of the reduced form under the empirical
    weight; ``rhs`` is ``lambda_max/2 - 1/2 + (R+1) sqrt(2 L)``.  ``holds``
    allows absolute slack 1e-8 for eigenvalue estimation error.
    ``term_a_holds`` records the Gauss-Newton side check.
    """

    lhs: float
    rhs: float
    term_a_bound: float
    lambda_max: float
    gauss_newton_lambda_max: float
    train_loss: float
    holds: bool
    term_a_holds: bool


def regularity_certificate(
    net: TwoLayerNet,
    data: Dataset,
    radius: float = 1.0,
    g: EmpiricalWeight | None = None,
    rel_tol: float = 1e-10,
    max_iters: int = 20000,
    rng=None,
) -> RegularityCertificate:
    """Check the flatness-implies-regularity inequality at ``net``.

    ``g`` must be the :class:`EmpiricalWeight` built from ``data.inputs``
    (that is the distribution the inequality is proved for); omit it and the
    certificate builds one.  The certificate is valid at any twice
    differentiable parameter point, minima included.
    """
    if g is None:
        g = EmpiricalWeight(points=data.inputs)
    if not isinstance(g, EmpiricalWeight):
        raise ValueError("the certificate requires the empirical weight variant")
    if g.points.shape != data.inputs.shape or not np.array_equal(g.points, data.inputs):
        raise ValueError("g must be built from exactly the training inputs")

    rf = to_reduced_form(net, radius)
    lhs = weighted_path_norm(rf, g)
    lam = sharpness(net, data, rel_tol=rel_tol, max_iters=max_iters, rng=rng)
    gn_lam = gauss_newton_sharpness(net, data, rel_tol=rel_tol, max_iters=max_iters, rng=rng)
    train_loss = loss(net, data)
    rhs = 0.5 * lam - 0.5 + (radius + 1.0) * math.sqrt(2.0 * train_loss)
    bound = term_a_lower_bound(net, data)
    return RegularityCertificate(
        lhs=lhs,
        rhs=rhs,
        term_a_bound=bound,
        lambda_max=lam,
        gauss_newton_lambda_max=gn_lam,
        train_loss=train_loss,
        holds=bool(lhs <= rhs + _CERT_SLACK),
        term_a_holds=bool(gn_lam >= bound - _CERT_SLACK),
    )
