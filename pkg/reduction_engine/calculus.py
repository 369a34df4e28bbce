#!/usr/bin/env python3
"""
Forward-mode differentiation with dual numbers

A ``Dual`` pairs a value array with a tangent array whose trailing axis runs
over the seeded input directions, so one evaluation of a map yields its full
Jacobian. Either part may itself be a ``Dual``; nesting two levels gives the
Hessian. Model maps are written against the helpers in this module (``stack``,
``matmul``, ``sin`` ...) so the same code runs on floats, arrays and duals of
any nesting depth.
"""

import logging
from dataclasses import dataclass
from typing import Any, Callable, Optional, Sequence

import numpy as np

from .checks import CheckReport
from .errors import DomainError, ParameterError

logger = logging.getLogger(__name__)


class Dual:
    """Value plus tangent; the tangent has one extra trailing axis."""

    __slots__ = ("real", "dual")
    # ndarray operators return NotImplemented so Python falls back to ours
    __array_ufunc__ = None

    def __init__(self, real, dual):
        self.real = real if isinstance(real, Dual) else np.asarray(real, dtype=float)
        self.dual = dual if isinstance(dual, Dual) else np.asarray(dual, dtype=float)

    @property
    def shape(self):
        return self.real.shape

    @property
    def ndim(self) -> int:
        return len(self.shape)

    @property
    def n_tangent(self) -> int:
        return self.dual.shape[-1]

    @property
    def T(self) -> "Dual":
        return transpose(self)

    def __getitem__(self, index) -> "Dual":
        return Dual(self.real[index], self.dual[_tangent_index(index)])

    def __neg__(self) -> "Dual":
        return Dual(-self.real, -self.dual)

    def __add__(self, other) -> "Dual":
        if isinstance(other, Dual):
            return Dual(self.real + other.real, self.dual + other.dual)
        other = np.asarray(other, dtype=float)
        return Dual(
            self.real + other, _broadcast_tangent(self.dual, self.shape, other.shape)
        )

    __radd__ = __add__

    def __sub__(self, other) -> "Dual":
        return self + (-other)

    def __rsub__(self, other) -> "Dual":
        return (-self) + other

    def __mul__(self, other) -> "Dual":
        if isinstance(other, Dual):
            return Dual(
                self.real * other.real,
                _expand(self.real) * other.dual + self.dual * _expand(other.real),
            )
        other = np.asarray(other, dtype=float)
        return Dual(self.real * other, self.dual * other[..., None])

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Dual":
        if isinstance(other, Dual):
            return self * reciprocal(other)
        other = np.asarray(other, dtype=float)
        return Dual(self.real / other, self.dual / other[..., None])

    def __rtruediv__(self, other) -> "Dual":
        return reciprocal(self) * other

    def __pow__(self, exponent: float) -> "Dual":
        if exponent == 2:
            return self * self
        scale = exponent * self.real ** (exponent - 1)
        return Dual(self.real**exponent, _expand(scale) * self.dual)

    def __matmul__(self, other) -> "Dual":
        return matmul(self, other)

    def __rmatmul__(self, other) -> "Dual":
        return matmul(other, self)

    def __repr__(self) -> str:
        return f"Dual(real={self.real!r}, dual={self.dual!r})"


def _tangent_index(index):
    if not isinstance(index, tuple):
        index = (index,)
    if any(item is Ellipsis for item in index):
        return index + (slice(None),)
    return index


def _expand(value):
    if isinstance(value, Dual):
        return value[..., None]
    return np.asarray(value, dtype=float)[..., None]


def _broadcast_tangent(tangent, shape, other_shape):
    full = np.broadcast_shapes(shape, other_shape)
    if full == tuple(shape):
        return tangent
    return tangent + np.zeros(full + (1,))


def shape_of(value: Any):
    return value.shape if isinstance(value, Dual) else np.shape(value)


def ndim_of(value: Any) -> int:
    return len(shape_of(value))


def value(x: Any) -> np.ndarray:
    """Innermost numeric value, whatever the nesting depth."""
    while isinstance(x, Dual):
        x = x.real
    return np.asarray(x, dtype=float)


def lift(x: Any, like: Any):
    """Promote a constant to the dual type of ``like`` with zero tangent."""
    if isinstance(x, Dual) or not isinstance(like, Dual):
        return x if isinstance(x, Dual) else np.asarray(x, dtype=float)
    x = np.asarray(x, dtype=float)
    tangent = lift(np.zeros(x.shape + (like.n_tangent,)), like.dual)
    return Dual(lift(x, like.real), tangent)


def _template(items: Sequence[Any]):
    for item in items:
        if isinstance(item, Dual):
            return item
    return None


def stack(items: Sequence[Any], axis: int = 0):
    """``np.stack`` over mixed constants and duals (non-negative axis only)."""
    template = _template(items)
    if template is None:
        return np.stack([np.asarray(item, dtype=float) for item in items], axis=axis)
    lifted = [lift(item, template) for item in items]
    return Dual(
        stack([item.real for item in lifted], axis),
        stack([item.dual for item in lifted], axis),
    )


def concatenate(items: Sequence[Any], axis: int = 0):
    template = _template(items)
    if template is None:
        return np.concatenate(
            [np.asarray(item, dtype=float) for item in items], axis=axis
        )
    lifted = [lift(item, template) for item in items]
    return Dual(
        concatenate([item.real for item in lifted], axis),
        concatenate([item.dual for item in lifted], axis),
    )


def total(x: Any, axis=None):
    """Sum over value axes (``None`` = all)."""
    if not isinstance(x, Dual):
        return np.sum(x, axis=axis)
    if axis is None:
        axes = tuple(range(x.ndim))
    else:
        axes = tuple(a % x.ndim for a in np.atleast_1d(axis))
    return Dual(total(x.real, axes), total(x.dual, axes))


def transpose(x: Any, axes: Optional[Sequence[int]] = None):
    if not isinstance(x, Dual):
        return np.transpose(x, axes)
    if axes is None:
        axes = tuple(reversed(range(x.ndim)))
    axes = tuple(axes)
    return Dual(transpose(x.real, axes), transpose(x.dual, axes + (x.ndim,)))


def _flat(x: Any) -> bool:
    return not isinstance(x, Dual) or not isinstance(x.real, Dual)


def matmul(a: Any, b: Any):
    """Matrix/vector product for 1-D and 2-D operands."""
    if not isinstance(a, Dual) and not isinstance(b, Dual):
        return np.matmul(a, b)
    if _flat(a) and _flat(b):
        return _matmul_flat(a, b)
    a_ndim, b_ndim = ndim_of(a), ndim_of(b)
    left = a if a_ndim == 2 else a[None, :]
    right = b if b_ndim == 2 else b[:, None]
    product = total(left[:, :, None] * right[None, :, :], axis=1)
    if a_ndim == 1:
        product = product[0]
    if b_ndim == 1:
        product = product[..., 0]
    return product


def _matmul_flat(a: Any, b: Any) -> Dual:
    a_val = a.real if isinstance(a, Dual) else np.asarray(a, dtype=float)
    b_val = b.real if isinstance(b, Dual) else np.asarray(b, dtype=float)
    sa = "ij" if a_val.ndim == 2 else "j"
    sb = "jk" if b_val.ndim == 2 else "j"
    out = sa.replace("j", "") + sb.replace("j", "")
    real = np.einsum(f"{sa},{sb}->{out}", a_val, b_val)
    tangent = 0.0
    if isinstance(b, Dual):
        tangent = tangent + np.einsum(f"{sa},{sb}n->{out}n", a_val, b.dual)
    if isinstance(a, Dual):
        tangent = tangent + np.einsum(f"{sa}n,{sb}->{out}n", a.dual, b_val)
    return Dual(real, tangent)


def inv(matrix: Any):
    """Inverse of a square matrix, differentiated as -A^-1 dA A^-1."""
    if not isinstance(matrix, Dual):
        matrix = np.asarray(matrix, dtype=float)
        if matrix.size == 0:
            return np.zeros(matrix.shape)
        return np.linalg.inv(matrix)
    inverse = inv(matrix.real)
    if _flat(matrix):
        tangent = np.einsum("ij,jkn,kl->iln", inverse, matrix.dual, inverse)
        return Dual(inverse, -tangent)
    left = total(inverse[:, :, None, None] * matrix.dual[None, :, :, :], axis=1)
    tangent = total(left[:, :, None, :] * inverse[None, :, :, None], axis=1)
    return Dual(inverse, -tangent)


def reciprocal(x: Any):
    if not isinstance(x, Dual):
        return 1.0 / np.asarray(x, dtype=float)
    r = reciprocal(x.real)
    return Dual(r, -_expand(r * r) * x.dual)


def _chain(x: Dual, f: Callable, df: Callable) -> Dual:
    return Dual(f(x.real), _expand(df(x.real)) * x.dual)


def sin(x: Any):
    return _chain(x, sin, cos) if isinstance(x, Dual) else np.sin(x)


def cos(x: Any):
    return _chain(x, cos, lambda v: -sin(v)) if isinstance(x, Dual) else np.cos(x)


def exp(x: Any):
    return _chain(x, exp, exp) if isinstance(x, Dual) else np.exp(x)


def log(x: Any):
    return _chain(x, log, reciprocal) if isinstance(x, Dual) else np.log(x)


def sqrt(x: Any):
    if not isinstance(x, Dual):
        return np.sqrt(x)
    root = sqrt(x.real)
    return Dual(root, _expand(0.5 * reciprocal(root)) * x.dual)


def arctan2(y: Any, x: Any):
    if not isinstance(y, Dual) and not isinstance(x, Dual):
        return np.arctan2(y, x)
    template = y if isinstance(y, Dual) else x
    y, x = lift(y, template), lift(x, template)
    r2 = x.real * x.real + y.real * y.real
    return Dual(
        arctan2(y.real, x.real),
        _expand(x.real / r2) * y.dual - _expand(y.real / r2) * x.dual,
    )


def polynomial(s: Any, coefficients: Sequence[float]):
    """Horner evaluation of sum(c_k s^k)."""
    result = coefficients[-1]
    for c in reversed(coefficients[:-1]):
        result = result * s + c
    return result


@dataclass(frozen=True, eq=False)
class Jet2:
    """Value, Jacobian and (optionally) Hessian of a map at a point.

    ``jacobian[..., k]`` is the derivative by input k; ``hessian[..., k, l]``
    the second derivative by inputs k and l.
    """

    value: np.ndarray
    jacobian: np.ndarray
    hessian: Optional[np.ndarray] = None

    def symmetry_residual(self) -> float:
        if self.hessian is None or self.hessian.size == 0:
            return 0.0
        return float(np.max(np.abs(self.hessian - np.swapaxes(self.hessian, -1, -2))))


def seed(point: Any, order: int = 1) -> Dual:
    """Dual variable at ``point`` with one tangent direction per coordinate."""
    point = np.asarray(point, dtype=float)
    n = point.size
    identity = np.eye(n)
    if order == 1:
        return Dual(point, identity)
    return Dual(Dual(point, identity), Dual(identity, np.zeros((n, n, n))))


def evaluate_jet(fn: Callable[[Any], Any], point: Any, order: int = 1) -> Jet2:
    """Evaluate ``fn`` and its derivatives at ``point`` by forward mode."""
    if order not in (1, 2):
        raise ParameterError(f"jet order must be 1 or 2, got {order}")
    point = np.atleast_1d(np.asarray(point, dtype=float))
    if point.ndim != 1:
        raise ParameterError("jet points must be one-dimensional")
    if not np.all(np.isfinite(point)):
        raise DomainError(f"non-finite evaluation point {point}")
    n = point.size
    out = fn(seed(point, order))
    val = value(out)
    if order == 1:
        jacobian = out.dual if isinstance(out, Dual) else np.zeros(val.shape + (n,))
        return Jet2(val, np.asarray(jacobian, dtype=float))
    jacobian = np.zeros(val.shape + (n,))
    hessian = np.zeros(val.shape + (n, n))
    if isinstance(out, Dual):
        if isinstance(out.real, Dual):
            jacobian = out.real.dual
        elif isinstance(out.dual, Dual):
            jacobian = out.dual.real
        if isinstance(out.dual, Dual):
            hessian = out.dual.dual
    return Jet2(val, np.asarray(jacobian, dtype=float), np.asarray(hessian, dtype=float))


def central_difference(fn: Callable[[Any], Any], point: Any, h: float) -> np.ndarray:
    point = np.atleast_1d(np.asarray(point, dtype=float))
    columns = []
    for k in range(point.size):
        step = np.zeros_like(point)
        step[k] = h
        forward = value(fn(point + step))
        backward = value(fn(point - step))
        columns.append((forward - backward) / (2.0 * h))
    return np.stack(columns, axis=-1)


def fd_check(
    fn: Callable[[Any], Any],
    point: Any,
    h: float = 1e-5,
    tolerance: float = 1e-6,
    name: str = "jacobian_fd",
    second_order: bool = False,
) -> CheckReport:
    """Compare dual-number derivatives against central differences.

    The residual is max|J_dual - J_fd| / max(1, max|J_dual|). With
    ``second_order`` the Hessian is checked as well, by differencing the
    dual-number Jacobian.
    """
    if not h > 0:
        raise ParameterError(f"finite-difference step must be positive, got {h}")
    report = CheckReport()
    jet = evaluate_jet(fn, point, order=2 if second_order else 1)
    numeric = central_difference(fn, point, h)
    scale = max(1.0, float(np.max(np.abs(jet.jacobian), initial=0.0)))
    report.record(name, (jet.jacobian - numeric) / scale, tolerance, point)
    if second_order:
        numeric_hessian = central_difference(
            lambda p: evaluate_jet(fn, value(p)).jacobian, point, h
        )
        scale = max(1.0, float(np.max(np.abs(jet.hessian), initial=0.0)))
        report.record(
            f"{name}_hessian", (jet.hessian - numeric_hessian) / scale, tolerance, point
        )
    return report
