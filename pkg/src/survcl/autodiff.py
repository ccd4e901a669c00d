"""Minimal reverse-mode automatic differentiation over float64 numpy arrays.

Operations record onto a :class:`Tape` as they execute, so the recording
order is already a topological order of the computation graph; the backward
pass is a single reverse sweep that visits each node exactly once.

The named ops (``exp``, ``matmul``, ``sum_rows`` ...) also accept plain
ndarrays, in which case they evaluate eagerly with no recording. This lets
the encoder forward pass and the losses share one implementation between
the training path (taped) and evaluation (untaped).

Everything is float64. One scalar loss, many parameters: reverse mode only.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

__all__ = [
    "NonFiniteError",
    "Tape",
    "Tensor",
    "value_of",
    "matmul",
    "transpose",
    "exp",
    "log",
    "sqrt",
    "square",
    "tanh",
    "relu",
    "maximum",
    "power",
    "reduce_sum",
    "reduce_mean",
    "l2_normalize_rows",
]


class NonFiniteError(ArithmeticError):
    """An operation produced a NaN or infinity."""

    def __init__(self, op: str):
        super().__init__(f"non-finite values produced by op '{op}'")
        self.op = op


def _as_value(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


def _check_finite(value: np.ndarray, op: str) -> np.ndarray:
    if not np.all(np.isfinite(value)):
        raise NonFiniteError(op)
    return value


class _quiet(np.errstate):
    """Silence numpy warnings for ops whose non-finite results raise anyway."""

    def __init__(self):
        super().__init__(divide="ignore", invalid="ignore", over="ignore")


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a gradient back down to ``shape`` after numpy broadcasting."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


class Tape:
    """Ordered record of operations; replayed in reverse for adjoints."""

    def __init__(self):
        self._nodes: list[Tensor] = []

    def leaf(self, value) -> "Tensor":
        """Register an input (parameter or data) on the tape."""
        return Tensor(_check_finite(_as_value(value), "leaf"), self)

    def grad(self, output: "Tensor", wrt: Sequence["Tensor"]) -> list[np.ndarray]:
        """Adjoints of a scalar ``output`` with respect to each tensor in ``wrt``."""
        if not isinstance(output, Tensor) or output.tape is not self:
            raise ValueError("output was not recorded on this tape")
        if output.value.shape != ():
            raise ValueError(
                f"grad requires a scalar output, got shape {output.value.shape}"
            )
        for node in self._nodes:
            node.grad = None
        output.grad = np.ones((), dtype=np.float64)
        for node in reversed(self._nodes):
            g = node.grad
            if g is None:
                continue
            for parent, vjp in zip(node._parents, node._vjps):
                contrib = vjp(g)
                parent.grad = contrib if parent.grad is None else parent.grad + contrib
        return [
            w.grad if w.grad is not None else np.zeros_like(w.value) for w in wrt
        ]


class Tensor:
    """A value on a tape plus the recipe for pushing adjoints to its parents."""

    __slots__ = ("value", "grad", "tape", "_parents", "_vjps")

    # make numpy defer to the reflected operators below
    __array_ufunc__ = None

    def __init__(
        self,
        value: np.ndarray,
        tape: Tape,
        parents: tuple["Tensor", ...] = (),
        vjps: tuple[Callable[[np.ndarray], np.ndarray], ...] = (),
    ):
        self.value = value
        self.grad: np.ndarray | None = None
        self.tape = tape
        self._parents = parents
        self._vjps = vjps
        tape._nodes.append(self)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def T(self) -> "Tensor":
        return transpose(self)

    def __repr__(self):
        return f"Tensor(shape={self.value.shape})"

    def __add__(self, other):
        return _add(self, other)

    def __radd__(self, other):
        return _add(self, other)

    def __sub__(self, other):
        return _sub(self, other)

    def __rsub__(self, other):
        return _sub(other, self)

    def __mul__(self, other):
        return _mul(self, other)

    def __rmul__(self, other):
        return _mul(self, other)

    def __truediv__(self, other):
        return _div(self, other)

    def __rtruediv__(self, other):
        return _div(other, self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __neg__(self):
        return _record("neg", -self.value, (self,), (lambda g: -g,))

    def __pow__(self, p):
        return power(self, p)


def value_of(x) -> np.ndarray:
    """The underlying ndarray of a Tensor, or ``x`` itself."""
    return x.value if isinstance(x, Tensor) else _as_value(x)


def _tape_of(*xs) -> Tape:
    tape = None
    for x in xs:
        if isinstance(x, Tensor):
            if tape is None:
                tape = x.tape
            elif x.tape is not tape:
                raise ValueError("operands live on different tapes")
    return tape


def _record(op: str, value: np.ndarray, parents, vjps) -> Tensor:
    tape = _tape_of(*parents)
    pairs = [(p, v) for p, v in zip(parents, vjps) if isinstance(p, Tensor)]
    return Tensor(
        _check_finite(_as_value(value), op),
        tape,
        tuple(p for p, _ in pairs),
        tuple(v for _, v in pairs),
    )


# -- binary arithmetic (broadcasting) --------------------------------------


def _add(a, b):
    av, bv = value_of(a), value_of(b)
    if not isinstance(a, Tensor) and not isinstance(b, Tensor):
        return _check_finite(av + bv, "add")
    return _record(
        "add",
        av + bv,
        (a, b),
        (
            lambda g: _unbroadcast(g, av.shape),
            lambda g: _unbroadcast(g, bv.shape),
        ),
    )


def _sub(a, b):
    av, bv = value_of(a), value_of(b)
    if not isinstance(a, Tensor) and not isinstance(b, Tensor):
        return _check_finite(av - bv, "sub")
    return _record(
        "sub",
        av - bv,
        (a, b),
        (
            lambda g: _unbroadcast(g, av.shape),
            lambda g: _unbroadcast(-g, bv.shape),
        ),
    )


def _mul(a, b):
    av, bv = value_of(a), value_of(b)
    if not isinstance(a, Tensor) and not isinstance(b, Tensor):
        return _check_finite(av * bv, "mul")
    return _record(
        "mul",
        av * bv,
        (a, b),
        (
            lambda g: _unbroadcast(g * bv, av.shape),
            lambda g: _unbroadcast(g * av, bv.shape),
        ),
    )


def _div(a, b):
    av, bv = value_of(a), value_of(b)
    with _quiet():
        out = av / bv
    if not isinstance(a, Tensor) and not isinstance(b, Tensor):
        return _check_finite(out, "div")
    return _record(
        "div",
        out,
        (a, b),
        (
            lambda g: _unbroadcast(g / bv, av.shape),
            lambda g: _unbroadcast(-g * av / (bv * bv), bv.shape),
        ),
    )


# -- linear algebra ---------------------------------------------------------


def matmul(a, b):
    """Matrix product of two 2-D operands."""
    av, bv = value_of(a), value_of(b)
    if av.ndim != 2 or bv.ndim != 2:
        raise ValueError(f"matmul expects 2-D operands, got {av.shape} @ {bv.shape}")
    if av.shape[1] != bv.shape[0]:
        raise ValueError(f"matmul dimension mismatch: {av.shape} @ {bv.shape}")
    if not isinstance(a, Tensor) and not isinstance(b, Tensor):
        return _check_finite(av @ bv, "matmul")
    return _record(
        "matmul",
        av @ bv,
        (a, b),
        (lambda g: g @ bv.T, lambda g: av.T @ g),
    )


def transpose(a):
    av = value_of(a)
    if not isinstance(a, Tensor):
        return av.T
    return _record("transpose", av.T, (a,), (lambda g: g.T,))


# -- elementwise ------------------------------------------------------------


def exp(a):
    av = value_of(a)
    with _quiet():
        y = np.exp(av)
    if not isinstance(a, Tensor):
        return _check_finite(y, "exp")
    return _record("exp", y, (a,), (lambda g: g * y,))


def log(a):
    av = value_of(a)
    with _quiet():
        y = np.log(av)
    if not isinstance(a, Tensor):
        return _check_finite(y, "log")
    return _record("log", y, (a,), (lambda g: g / av,))


def sqrt(a):
    av = value_of(a)
    with _quiet():
        y = np.sqrt(av)
    if not isinstance(a, Tensor):
        return _check_finite(y, "sqrt")
    return _record("sqrt", y, (a,), (lambda g: g * 0.5 / y,))


def square(a):
    return _mul(a, a)


def tanh(a):
    av = value_of(a)
    if not isinstance(a, Tensor):
        return np.tanh(av)
    y = np.tanh(av)
    return _record("tanh", y, (a,), (lambda g: g * (1.0 - y * y),))


def relu(a):
    av = value_of(a)
    if not isinstance(a, Tensor):
        return np.maximum(av, 0.0)
    return _record("relu", np.maximum(av, 0.0), (a,), (lambda g: g * (av > 0.0),))


def maximum(a, floor):
    """Elementwise max(a, floor) with a constant floor; subgradient 0 at the floor."""
    av = value_of(a)
    fv = _as_value(floor)
    if not isinstance(a, Tensor):
        return np.maximum(av, fv)
    return _record(
        "maximum", np.maximum(av, fv), (a,), (lambda g: g * (av > fv),)
    )


def power(a, p):
    """a ** p for a constant exponent p."""
    av = value_of(a)
    p = float(p)
    with _quiet():
        y = av**p
    if not isinstance(a, Tensor):
        return _check_finite(y, "power")
    return _record("power", y, (a,), (lambda g: g * p * av ** (p - 1.0),))


# -- reductions -------------------------------------------------------------


def _expand_reduced(g, shape, axis, keepdims):
    if axis is None:
        return np.broadcast_to(g, shape)
    axes = axis if isinstance(axis, tuple) else (axis,)
    axes = tuple(a % len(shape) for a in axes)
    if not keepdims:
        for a in sorted(axes):
            g = np.expand_dims(g, a)
    return np.broadcast_to(g, shape)


def reduce_sum(a, axis=None, keepdims=False):
    av = value_of(a)
    if not isinstance(a, Tensor):
        return _check_finite(np.sum(av, axis=axis, keepdims=keepdims), "sum")
    shape = av.shape
    return _record(
        "sum",
        np.sum(av, axis=axis, keepdims=keepdims),
        (a,),
        (lambda g: np.ascontiguousarray(_expand_reduced(g, shape, axis, keepdims)),),
    )


def reduce_mean(a, axis=None, keepdims=False):
    av = value_of(a)
    if not isinstance(a, Tensor):
        return _check_finite(np.mean(av, axis=axis, keepdims=keepdims), "mean")
    shape = av.shape
    count = av.size if axis is None else np.prod(
        [shape[ax % len(shape)] for ax in (axis if isinstance(axis, tuple) else (axis,))]
    )
    return _record(
        "mean",
        np.mean(av, axis=axis, keepdims=keepdims),
        (a,),
        (
            lambda g: np.ascontiguousarray(
                _expand_reduced(g, shape, axis, keepdims)
            )
            / count,
        ),
    )


# -- composite --------------------------------------------------------------


def l2_normalize_rows(x, eps: float = 1e-12):
    """Divide each row by max(its euclidean norm, eps).

    Rows with norm above eps end up exactly on the unit sphere; near-zero
    rows come through scaled by 1/eps at most, so a zero row stays zero.
    The floor is applied to the squared norm (max(n, e) == sqrt(max(n^2, e^2))
    for e > 0) to keep sqrt away from zero, where its adjoint diverges.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    sumsq = reduce_sum(square(x), axis=1, keepdims=True)
    return x / sqrt(maximum(sumsq, eps * eps))
