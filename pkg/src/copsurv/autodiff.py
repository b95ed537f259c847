"""Reverse-mode automatic differentiation over dense float64 arrays.

A small tape-based engine in the micrograd tradition, but array-valued: every
operation produces a new :class:`Tensor` that remembers its parents and a
vector-Jacobian product.  ``Tensor.backward()`` walks the graph once in
reverse topological order, accumulating gradients into every tensor created
with ``requires_grad=True``.

Design points that matter for the rest of the package:

* everything is float64; inputs are coerced and checked for NaN/inf on
  construction, so numerical blow-ups surface at the op that caused them;
* elementwise broadcasting is deliberately restricted to scalar-with-tensor
  (plus dedicated row-vector ops for biases / batch statistics);
* domain-restricted ops (``log``, ``div``, ``pow``, ``sqrt``) clamp their
  offending input to ``EPS`` and use sub-gradient 0 in the clamped region,
  so training never produces NaN from a stray boundary value.
"""

from __future__ import annotations

import numpy as np
from scipy import special as _sp

# Domain clamp for log / div / pow / sqrt.
EPS = 1e-12

__all__ = [
    "EPS",
    "Tensor",
    "add_rowvec",
    "mul_rowvec",
    "concat_rows",
    "concat_cols",
    "elementwise",
    "finite_diff_check",
    "zero_grads",
]


def _check_finite(arr: np.ndarray) -> None:
    if not np.all(np.isfinite(arr)):
        raise ValueError("non-finite values (nan or inf) in tensor data")


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a gradient back to ``shape`` (only scalar broadcast is legal)."""
    if g.shape == shape:
        return g
    return np.sum(g).reshape(shape)


def _binary_shapes_ok(a: np.ndarray, b: np.ndarray) -> bool:
    return a.shape == b.shape or a.size == 1 or b.size == 1


class Tensor:
    """A float64 array plus the bookkeeping for reverse-mode differentiation.

    Attributes
    ----------
    data : np.ndarray
        The value, always float64 and C-contiguous.
    grad : np.ndarray or None
        Accumulated gradient of the last ``backward()`` root with respect to
        this tensor.  Repeated backward calls without ``zero_grads`` add up.
    requires_grad : bool
        Leaves created with ``requires_grad=True`` receive gradients; interior
        nodes inherit the flag from their parents.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_vjp")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64, order="C")  # keeps 0-d shape
        _check_finite(arr)
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple = ()
        self._vjp = None

    # -- construction helpers ------------------------------------------------

    @classmethod
    def _from_op(cls, data: np.ndarray, parents: tuple, vjp) -> "Tensor":
        out = cls(data)
        if any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = parents
            out._vjp = vjp
        return out

    @property
    def shape(self) -> tuple:
        return self.data.shape

    def item(self) -> float:
        return float(self.data.reshape(()))

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # -- binary elementwise --------------------------------------------------

    def _coerce(self, other) -> "Tensor":
        if isinstance(other, Tensor):
            return other
        return Tensor(np.asarray(other, dtype=np.float64))

    def _binary(self, other, fwd, vjp_builder) -> "Tensor":
        other = self._coerce(other)
        if not _binary_shapes_ok(self.data, other.data):
            raise ValueError(
                f"shape mismatch {self.data.shape} vs {other.data.shape}; "
                "only scalar-with-tensor broadcast is supported"
            )
        data = fwd(self.data, other.data)
        return Tensor._from_op(data, (self, other), vjp_builder(self, other))

    def __add__(self, other):
        return self._binary(
            other,
            lambda a, b: a + b,
            lambda sa, sb: lambda g: (
                _unbroadcast(g, sa.data.shape),
                _unbroadcast(g, sb.data.shape),
            ),
        )

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(
            other,
            lambda a, b: a - b,
            lambda sa, sb: lambda g: (
                _unbroadcast(g, sa.data.shape),
                _unbroadcast(-g, sb.data.shape),
            ),
        )

    def __rsub__(self, other):
        return self._coerce(other).__sub__(self)

    def __mul__(self, other):
        return self._binary(
            other,
            lambda a, b: a * b,
            lambda sa, sb: lambda g: (
                _unbroadcast(g * sb.data, sa.data.shape),
                _unbroadcast(g * sa.data, sb.data.shape),
            ),
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        if not _binary_shapes_ok(self.data, other.data):
            raise ValueError(
                f"shape mismatch {self.data.shape} vs {other.data.shape}; "
                "only scalar-with-tensor broadcast is supported"
            )
        den = other.data
        small = np.abs(den) < EPS
        safe = np.where(small, np.copysign(EPS, np.where(den == 0.0, 1.0, den)), den)
        data = self.data / safe
        live = ~small  # sub-gradient 0 where the denominator was clamped

        def vjp(g):
            ga = _unbroadcast(g / safe, self.data.shape)
            gb = _unbroadcast(-g * data / safe * live, other.data.shape)
            return ga, gb

        return Tensor._from_op(data, (self, other), vjp)

    def __rtruediv__(self, other):
        return self._coerce(other).__truediv__(self)

    def __neg__(self):
        return Tensor._from_op(-self.data, (self,), lambda g: (-g,))

    def maximum(self, other) -> "Tensor":
        """Elementwise max; gradient goes to the first argument on ties."""
        other = self._coerce(other)
        if not _binary_shapes_ok(self.data, other.data):
            raise ValueError(
                f"shape mismatch {self.data.shape} vs {other.data.shape}; "
                "only scalar-with-tensor broadcast is supported"
            )
        take_a = self.data >= other.data
        data = np.where(take_a, self.data, other.data)

        def vjp(g):
            return (
                _unbroadcast(g * take_a, self.data.shape),
                _unbroadcast(g * ~take_a, other.data.shape),
            )

        return Tensor._from_op(data, (self, other), vjp)

    # -- unary elementwise ---------------------------------------------------

    def _unary(self, data: np.ndarray, grad_local: np.ndarray) -> "Tensor":
        return Tensor._from_op(data, (self,), lambda g: (g * grad_local,))

    def exp(self) -> "Tensor":
        out = np.exp(self.data)
        _check_finite(out)
        return self._unary(out, out)

    def log(self) -> "Tensor":
        safe = np.maximum(self.data, EPS)
        live = self.data >= EPS
        return self._unary(np.log(safe), live / safe)

    def sqrt(self) -> "Tensor":
        safe = np.maximum(self.data, EPS)
        live = self.data >= EPS
        out = np.sqrt(safe)
        return self._unary(out, live * 0.5 / out)

    def sigmoid(self) -> "Tensor":
        x = self.data
        out = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                       np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
        return self._unary(out, out * (1.0 - out))

    def tanh(self) -> "Tensor":
        out = np.tanh(self.data)
        return self._unary(out, 1.0 - out * out)

    def relu(self) -> "Tensor":
        return self._unary(np.maximum(self.data, 0.0), (self.data > 0.0).astype(np.float64))

    def erf(self) -> "Tensor":
        out = _sp.erf(self.data)
        local = (2.0 / np.sqrt(np.pi)) * np.exp(-self.data * self.data)
        return self._unary(out, local)

    def clamp(self, lo: float, hi: float) -> "Tensor":
        out = np.clip(self.data, lo, hi)
        live = ((self.data >= lo) & (self.data <= hi)).astype(np.float64)
        return self._unary(out, live)

    def __pow__(self, p) -> "Tensor":
        p = float(p)
        if p.is_integer() and p >= 0:
            out = self.data ** p
            local = p * self.data ** (p - 1.0) if p != 0.0 else np.zeros_like(self.data)
            return self._unary(out, local)
        if p.is_integer():  # negative integer power: clamp magnitude, keep sign
            base = self.data
            small = np.abs(base) < EPS
            safe = np.where(small, np.copysign(EPS, np.where(base == 0.0, 1.0, base)), base)
            out = safe ** p
            local = p * safe ** (p - 1.0) * ~small
            return self._unary(out, local)
        # fractional power: domain is x > 0, clamp from below
        safe = np.maximum(self.data, EPS)
        live = self.data >= EPS
        out = safe ** p
        return self._unary(out, p * safe ** (p - 1.0) * live)

    # -- linear algebra and structure ----------------------------------------

    def matmul(self, other: "Tensor") -> "Tensor":
        other = self._coerce(other)
        if self.data.ndim != 2 or other.data.ndim != 2:
            raise ValueError(
                f"matmul expects 2-D operands, got {self.data.shape} @ {other.data.shape}"
            )
        if self.data.shape[1] != other.data.shape[0]:
            raise ValueError(
                f"matmul inner dimensions disagree: {self.data.shape} @ {other.data.shape}"
            )
        data = self.data @ other.data

        def vjp(g):
            return g @ other.data.T, self.data.T @ g

        return Tensor._from_op(data, (self, other), vjp)

    __matmul__ = matmul

    def transpose(self) -> "Tensor":
        if self.data.ndim != 2:
            raise ValueError("transpose expects a 2-D tensor")
        return Tensor._from_op(
            np.ascontiguousarray(self.data.T), (self,), lambda g: (g.T,)
        )

    @property
    def T(self) -> "Tensor":
        return self.transpose()

    def sum(self) -> "Tensor":
        return Tensor._from_op(
            np.asarray(np.sum(self.data)),
            (self,),
            lambda g: (np.broadcast_to(g, self.data.shape).copy(),),
        )

    def mean(self) -> "Tensor":
        n = self.data.size
        return Tensor._from_op(
            np.asarray(np.mean(self.data)),
            (self,),
            lambda g: (np.broadcast_to(g / n, self.data.shape).copy(),),
        )

    def slice_rows(self, i0: int, i1: int) -> "Tensor":
        if self.data.ndim != 2:
            raise ValueError("slice_rows expects a 2-D tensor")

        def vjp(g):
            full = np.zeros_like(self.data)
            full[i0:i1] = g
            return (full,)

        return Tensor._from_op(np.ascontiguousarray(self.data[i0:i1]), (self,), vjp)

    def slice_cols(self, j0: int, j1: int) -> "Tensor":
        if self.data.ndim != 2:
            raise ValueError("slice_cols expects a 2-D tensor")

        def vjp(g):
            full = np.zeros_like(self.data)
            full[:, j0:j1] = g
            return (full,)

        return Tensor._from_op(np.ascontiguousarray(self.data[:, j0:j1]), (self,), vjp)

    # -- backward ------------------------------------------------------------

    def backward(self) -> None:
        """Accumulate d(self)/d(leaf) into every requires_grad leaf.

        The root must be a single value (any shape of size 1).  Gradient flow
        uses a per-call buffer, so calling backward twice adds the same
        gradient twice — reset with :func:`zero_grads` between steps.
        """
        if self.data.size != 1:
            raise ValueError(f"backward root must be scalar, got shape {self.data.shape}")

        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))

        flow: dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}
        for node in reversed(topo):
            g = flow.pop(id(node), None)
            if g is None:
                continue
            if node.requires_grad and node._vjp is None:
                # leaf: fold into persistent grad
                node.grad = g if node.grad is None else node.grad + g
            if node._vjp is not None:
                for parent, pg in zip(node._parents, node._vjp(g)):
                    if not parent.requires_grad:
                        continue
                    key = id(parent)
                    if key in flow:
                        flow[key] = flow[key] + pg
                    else:
                        flow[key] = pg


# -- row-vector broadcast helpers (bias add, batch statistics) ----------------


def add_rowvec(a: Tensor, v: Tensor) -> Tensor:
    """``a + v`` where ``a`` is [n, f] and ``v`` is a length-f row vector."""
    vr = v.data.reshape(1, -1)
    if a.data.ndim != 2 or vr.shape[1] != a.data.shape[1]:
        raise ValueError(f"add_rowvec shapes incompatible: {a.data.shape} + {v.data.shape}")

    def vjp(g):
        return g, np.sum(g, axis=0).reshape(v.data.shape)

    return Tensor._from_op(a.data + vr, (a, v), vjp)


def mul_rowvec(a: Tensor, v: Tensor) -> Tensor:
    """``a * v`` with ``v`` broadcast across the rows of ``a``."""
    vr = v.data.reshape(1, -1)
    if a.data.ndim != 2 or vr.shape[1] != a.data.shape[1]:
        raise ValueError(f"mul_rowvec shapes incompatible: {a.data.shape} * {v.data.shape}")

    def vjp(g):
        return g * vr, np.sum(g * a.data, axis=0).reshape(v.data.shape)

    return Tensor._from_op(a.data * vr, (a, v), vjp)


def concat_rows(parts: list) -> Tensor:
    """Stack 2-D tensors along axis 0; backward splits the gradient."""
    if not parts:
        raise ValueError("concat_rows needs at least one tensor")
    data = np.concatenate([p.data for p in parts], axis=0)
    sizes = [p.data.shape[0] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def vjp(g):
        return tuple(g[offsets[i]:offsets[i + 1]] for i in range(len(parts)))

    return Tensor._from_op(data, tuple(parts), vjp)


def concat_cols(parts: list) -> Tensor:
    """Stack 2-D tensors along axis 1; backward splits the gradient."""
    if not parts:
        raise ValueError("concat_cols needs at least one tensor")
    data = np.concatenate([p.data for p in parts], axis=1)
    sizes = [p.data.shape[1] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def vjp(g):
        return tuple(g[:, offsets[i]:offsets[i + 1]] for i in range(len(parts)))

    return Tensor._from_op(data, tuple(parts), vjp)


# -- uniform dispatcher (used heavily by the gradient-check tests) ------------

_UNARY_OPS = {
    "neg": lambda a: -a,
    "exp": lambda a: a.exp(),
    "log": lambda a: a.log(),
    "sqrt": lambda a: a.sqrt(),
    "sigmoid": lambda a: a.sigmoid(),
    "tanh": lambda a: a.tanh(),
    "relu": lambda a: a.relu(),
    "erf": lambda a: a.erf(),
}

_BINARY_OPS = {
    "add": lambda a, b: a + b,
    "sub": lambda a, b: a - b,
    "mul": lambda a, b: a * b,
    "div": lambda a, b: a / b,
    "maximum": lambda a, b: a.maximum(b),
}


def elementwise(op_kind: str, a: Tensor, b=None) -> Tensor:
    """Apply a named elementwise op.

    ``b`` is the second operand for binary ops, the scalar exponent for
    ``pow``, and a ``(lo, hi)`` pair for ``clamp``.
    """
    if op_kind in _UNARY_OPS:
        return _UNARY_OPS[op_kind](a)
    if op_kind in _BINARY_OPS:
        if b is None:
            raise ValueError(f"{op_kind} needs a second operand")
        return _BINARY_OPS[op_kind](a, b)
    if op_kind == "pow":
        return a ** float(b)
    if op_kind == "clamp":
        lo, hi = b
        return a.clamp(lo, hi)
    raise ValueError(f"unknown elementwise op {op_kind!r}")


# -- verification and housekeeping -------------------------------------------


def finite_diff_check(fn, x, step: float = 1e-5) -> float:
    """Compare analytic gradients of ``fn`` against central differences.

    Parameters
    ----------
    fn : callable
        Maps a Tensor to a scalar Tensor.  May close over other tensors.
    x : array_like
        Point at which to differentiate; perturbed one coordinate at a time.
    step : float
        Central difference half-step.

    Returns
    -------
    float
        Worst relative error ``|analytic - central| / max(1, |analytic|)``
        over all coordinates of ``x``.
    """
    xt = Tensor(np.asarray(x, dtype=np.float64), requires_grad=True)
    out = fn(xt)
    if out.data.size != 1:
        raise ValueError("finite_diff_check needs a scalar-valued function")
    out.backward()
    analytic = np.zeros_like(xt.data) if xt.grad is None else xt.grad
    analytic = analytic.reshape(-1)

    flat = xt.data.reshape(-1)
    worst = 0.0
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        f_plus = float(fn(Tensor(xt.data)).data.reshape(()))
        flat[i] = orig - step
        f_minus = float(fn(Tensor(xt.data)).data.reshape(()))
        flat[i] = orig
        central = (f_plus - f_minus) / (2.0 * step)
        err = abs(analytic[i] - central) / max(1.0, abs(analytic[i]))
        if err > worst:
            worst = err
    return worst


def zero_grads(tensors) -> None:
    """Reset accumulated gradients on a collection of tensors."""
    for t in tensors:
        t.grad = None
