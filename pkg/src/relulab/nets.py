"""Two-layer ReLU regression networks and their reduced form.

The model is ``f(x) = sum_k v_k * relu(w_k . x - b_k) + beta`` (note the minus
in front of the inner bias).  Parameters flatten to a single vector in the
fixed layout ``[w row-major, b, v, beta]``; the checkpoint format on disk uses
the same layout behind a small header.

The reduced form rewrites the network as signed atoms on unit directions,
``f(x) = sum_j a_j * relu(u_j . x - t_j) + c . x + c0`` on a ball of radius
``R``, which is the representation the variation seminorms are defined on.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "TwoLayerNet",
    "Dataset",
    "ReducedForm",
    "forward",
    "loss",
    "loss_gradient",
    "pack_params",
    "unpack_params",
    "param_count",
    "kaiming_init",
    "to_reduced_form",
    "evaluate_reduced",
    "path_norm",
    "weighted_path_norm",
    "save_checkpoint",
    "load_checkpoint",
]

_DUPLICATE_ATOL = 1e-12


@dataclass(frozen=True)
class TwoLayerNet:
    """Immutable parameter bundle.  Shapes: w (K, d), b (K,), v (K,)."""

    w: np.ndarray
    b: np.ndarray
    v: np.ndarray
    beta: float

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        b = np.asarray(self.b, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if w.ndim != 2:
            raise ValueError(f"w must be 2-d (K, d), got shape {w.shape}")
        k = w.shape[0]
        if b.shape != (k,) or v.shape != (k,):
            raise ValueError(
                f"inconsistent widths: w has K={k}, b shape {b.shape}, v shape {v.shape}"
            )
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "beta", float(self.beta))

    @property
    def width(self) -> int:
        return self.w.shape[0]

    @property
    def input_dim(self) -> int:
        return self.w.shape[1]


@dataclass(frozen=True)
class Dataset:
    """Regression sample on the closed unit ball.

    ``f0_direction`` optionally records the ground-truth linear target
    ``f0(x) = f0_direction . x`` (a unit vector) and ``noise_sigma`` the label
    noise level, for experiments that need the noiseless reference.
    """

    inputs: np.ndarray
    labels: np.ndarray
    f0_direction: np.ndarray | None = None
    noise_sigma: float | None = None

    def __post_init__(self):
        x = np.asarray(self.inputs, dtype=float)
        y = np.asarray(self.labels, dtype=float)
        if x.ndim != 2:
            raise ValueError(f"inputs must be 2-d (n, d), got shape {x.shape}")
        if y.shape != (x.shape[0],):
            raise ValueError(f"labels shape {y.shape} does not match n={x.shape[0]}")
        if x.shape[0] < 1:
            raise ValueError("dataset must contain at least one point")
        norms = np.linalg.norm(x, axis=1)
        if np.any(norms > 1.0 + 1e-9):
            raise ValueError(
                f"inputs must lie in the closed unit ball, max norm {norms.max()}"
            )
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "labels", y)
        if self.f0_direction is not None:
            w0 = np.asarray(self.f0_direction, dtype=float)
            if w0.shape != (x.shape[1],):
                raise ValueError("f0_direction must be a d-vector")
            object.__setattr__(self, "f0_direction", w0)

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    @property
    def d(self) -> int:
        return self.inputs.shape[1]

    def f0_values(self, x: np.ndarray) -> np.ndarray:
        if self.f0_direction is None:
            raise ValueError("dataset has no ground-truth descriptor")
        return np.asarray(x, dtype=float) @ self.f0_direction


# ---------------------------------------------------------------------------
# forward / loss / gradient
# ---------------------------------------------------------------------------

def forward(net: TwoLayerNet, x: np.ndarray) -> np.ndarray | float:
    """Network values at ``x`` (a single d-vector or an (n, d) batch)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = x[None, :] if single else x
    z = pts @ net.w.T - net.b
    out = np.maximum(z, 0.0) @ net.v + net.beta
    return float(out[0]) if single else out


def loss(net: TwoLayerNet, data: Dataset) -> float:
    """Half mean squared error, L = (1/2n) sum (f(x_i) - y_i)^2."""
    r = forward(net, data.inputs) - data.labels
    return 0.5 * float(np.mean(r * r))


def param_count(d: int, k: int) -> int:
    return k * (d + 2) + 1


def pack_params(net: TwoLayerNet) -> np.ndarray:
    """Flatten to the fixed layout [w row-major, b, v, beta]."""
    return np.concatenate([net.w.ravel(), net.b, net.v, [net.beta]])


def unpack_params(theta: np.ndarray, d: int, k: int) -> TwoLayerNet:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (param_count(d, k),):
        raise ValueError(f"expected {param_count(d, k)} parameters, got shape {theta.shape}")
    w = theta[: k * d].reshape(k, d)
    b = theta[k * d : k * d + k]
    v = theta[k * d + k : k * d + 2 * k]
    return TwoLayerNet(w=w.copy(), b=b.copy(), v=v.copy(), beta=float(theta[-1]))


def _grad_flat(theta: np.ndarray, x: np.ndarray, y: np.ndarray, d: int, k: int):
    """Gradient in flat layout plus the loss value, one forward pass."""
    n = x.shape[0]
    w = theta[: k * d].reshape(k, d)
    b = theta[k * d : k * d + k]
    v = theta[k * d + k : k * d + 2 * k]
    beta = theta[-1]
    z = x @ w.T - b
    act = z > 0.0
    a = np.where(act, z, 0.0)
    r = a @ v + beta - y
    loss_val = 0.5 * float(np.mean(r * r))
    rv = r / n
    # dL/dw_k = (1/n) sum_i r_i v_k 1_ik x_i ; dL/db_k = -(1/n) sum_i r_i v_k 1_ik
    ract = rv[:, None] * act
    col = ract.T @ x            # (K, d): (1/n) sum_i r_i 1_ik x_i
    colsum = ract.sum(axis=0)   # (K,):  (1/n) sum_i r_i 1_ik
    gw = v[:, None] * col
    gb = -v * colsum
    gv = a.T @ rv
    gbeta = float(rv.sum())
    return np.concatenate([gw.ravel(), gb, gv, [gbeta]]), loss_val


def loss_gradient(net: TwoLayerNet, data: Dataset) -> np.ndarray:
    """Exact gradient of :func:`loss` in the flat layout.

    The ReLU derivative is taken as ``1{z > 0}``, so points exactly on an
    activation boundary contribute through the inactive branch.
    """
    theta = pack_params(net)
    g, _ = _grad_flat(theta, data.inputs, data.labels, net.input_dim, net.width)
    return g


def kaiming_init(rng: np.random.Generator, d: int, k: int) -> TwoLayerNet:
    """Fan-in scaled Gaussian init: w ~ N(0, 2/d), b = 0, v ~ N(0, 2/K), beta = 0."""
    if d < 1 or k < 1:
        raise ValueError(f"need d >= 1 and width >= 1, got d={d}, width={k}")
    w = rng.standard_normal((k, d)) * np.sqrt(2.0 / d)
    v = rng.standard_normal(k) * np.sqrt(2.0 / k)
    return TwoLayerNet(w=w, b=np.zeros(k), v=v, beta=0.0)


# ---------------------------------------------------------------------------
# reduced form
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReducedForm:
    """Atoms on unit directions plus an affine remainder, valid on ``B_R``.

    ``f(x) = sum_j a[j] * relu(u[j] . x - t[j]) + c . x + c0`` with
    ``||u[j]|| = 1``, ``|t[j]| <= R``, and pairwise distinct ``(u, t)``.
    """

    a: np.ndarray
    u: np.ndarray
    t: np.ndarray
    c: np.ndarray
    c0: float
    radius: float

    @property
    def n_atoms(self) -> int:
        return self.a.shape[0]


def to_reduced_form(net: TwoLayerNet, radius: float = 1.0) -> ReducedForm:
    """Normalize a network to its reduced form on the ball of radius ``radius``.

    Per neuron with nonzero input weight: ``a = v * ||w||``, ``u = w / ||w||``,
    ``t = b / ||w||`` (positive homogeneity of the ReLU).  Neurons that are
    never active on the ball (``t > R``) are dropped, neurons that are always
    active (``t < -R``) fold into the affine remainder, and zero-direction
    neurons fold their constant value into ``c0``.  Exact-duplicate atoms
    (componentwise within 1e-12) merge by summing coefficients; merged atoms
    with coefficient exactly zero are dropped.
    """
    radius = float(radius)
    if radius <= 0.0:
        raise ValueError(f"radius must be positive, got {radius}")
    d = net.input_dim
    norms = np.linalg.norm(net.w, axis=1)

    c = np.zeros(d)
    c0 = float(net.beta)
    raw_a: list[float] = []
    raw_u: list[np.ndarray] = []
    raw_t: list[float] = []

    for k in range(net.width):
        nk = norms[k]
        if nk == 0.0:
            # Constant neuron: v * relu(-b).
            c0 += net.v[k] * max(-net.b[k], 0.0)
            continue
        u = net.w[k] / nk
        t = net.b[k] / nk
        a = net.v[k] * nk
        if t > radius:
            continue  # never active on the ball
        if t < -radius:
            # Always active: a * (u . x - t) is affine on the ball.
            c += a * u
            c0 -= a * t
            continue
        raw_a.append(a)
        raw_u.append(u)
        raw_t.append(t)

    if not raw_a:
        return ReducedForm(
            a=np.zeros(0), u=np.zeros((0, d)), t=np.zeros(0), c=c, c0=c0, radius=radius
        )

    ua = np.asarray(raw_u)
    ta = np.asarray(raw_t)
    aa = np.asarray(raw_a)

    # Group duplicates: lexicographic sort puts equal (u, t) rows next to each
    # other, then a linear walk merges runs within the tolerance.
    key = np.column_stack([ua, ta])
    order = np.lexsort(key.T[::-1])
    groups: list[list[int]] = []
    for idx in order:
        if groups and np.max(np.abs(key[groups[-1][0]] - key[idx])) <= _DUPLICATE_ATOL:
            groups[-1].append(idx)
        else:
            groups.append([idx])

    # Deterministic output order: first occurrence in the original network.
    groups.sort(key=min)
    out_a, out_u, out_t = [], [], []
    for grp in groups:
        coeff = float(aa[grp].sum())
        if coeff == 0.0:
            continue
        lead = min(grp)
        out_a.append(coeff)
        out_u.append(ua[lead])
        out_t.append(ta[lead])

    return ReducedForm(
        a=np.asarray(out_a),
        u=np.asarray(out_u) if out_u else np.zeros((0, d)),
        t=np.asarray(out_t),
        c=c,
        c0=c0,
        radius=radius,
    )


def evaluate_reduced(rf: ReducedForm, x: np.ndarray) -> np.ndarray | float:
    """Evaluate a reduced form (single point or batch)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = x[None, :] if single else x
    out = pts @ rf.c + rf.c0
    if rf.n_atoms:
        out = out + np.maximum(pts @ rf.u.T - rf.t, 0.0) @ rf.a
    return float(out[0]) if single else out


def path_norm(rf: ReducedForm) -> float:
    """Sum of absolute atom coefficients (the unweighted variation bound)."""
    return float(np.sum(np.abs(rf.a)))


def weighted_path_norm(rf: ReducedForm, g: Callable[[np.ndarray, float], float]) -> float:
    """``sum_j |a_j| g(u_j, t_j)`` for a weight function ``g``."""
    return float(sum(abs(a) * g(u, t) for a, u, t in zip(rf.a, rf.u, rf.t)))


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

_CKPT_HEADER = struct.Struct("<II")  # d, K as little-endian uint32


def save_checkpoint(net: TwoLayerNet, path) -> None:
    """Binary checkpoint: header (d, K) then float64 [w row-major, b, v, beta]."""
    payload = pack_params(net).astype("<f8")
    with open(path, "wb") as fh:
        fh.write(_CKPT_HEADER.pack(net.input_dim, net.width))
        fh.write(payload.tobytes())


def load_checkpoint(path) -> TwoLayerNet:
    with open(path, "rb") as fh:
        header = fh.read(_CKPT_HEADER.size)
        if len(header) != _CKPT_HEADER.size:
            raise ValueError(f"truncated checkpoint header in {path}")
        d, k = _CKPT_HEADER.unpack(header)
        body = fh.read()
    expected = param_count(d, k) * 8
    if len(body) != expected:
        raise ValueError(
            f"checkpoint body has {len(body)} bytes, expected {expected} for d={d}, K={k}"
        )
    theta = np.frombuffer(body, dtype="<f8").astype(float)
    return unpack_params(theta, d, k)
