"""Dense float64 kernels with a small reverse-mode tape.

Arrays are plain numpy ``float64`` arrays. A :class:`Tape` records every
differentiable kernel applied to :class:`Var` objects and replays them in
reverse to accumulate gradients.

Example::

    tape = Tape()
    x = tape.leaf(np.array([0.5]))
    y = tanh(x)
    tape.backward(sum_all(y))
    x.grad  # 1 - tanh(0.5)**2
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np


class ShapeError(ValueError):
    """Raised when a kernel receives operands of incompatible shape."""

    def __init__(self, kernel: str, *shapes):
        self.kernel = kernel
        self.shapes = shapes
        joined = ", ".join(str(tuple(s)) for s in shapes)
        super().__init__(f"{kernel}: incompatible shapes {joined}")


class NonFiniteError(ArithmeticError):
    pass


class Var:
    """A value on a tape, plus its accumulated gradient after backward."""

    __slots__ = ("value", "grad", "tape", "parents", "backward_fn", "requires_grad")

    def __init__(self, tape, value, parents=(), backward_fn=None, requires_grad=True):
        self.tape = tape
        self.value = value
        self.parents = parents
        self.backward_fn = backward_fn
        self.requires_grad = requires_grad
        self.grad = None

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Var(shape={self.value.shape})"


class Tape:
    """Ordered record of executed kernels.

    A tape is single-owner: build one per forward pass and do not share it
    between threads.
    """

    def __init__(self):
        self.nodes: list[Var] = []

    def leaf(self, value, requires_grad=True) -> Var:
        value = np.asarray(value, dtype=np.float64)
        return Var(self, value, requires_grad=requires_grad)

    def constant(self, value) -> Var:
        return self.leaf(value, requires_grad=False)

    def record(self, value, parents: Sequence[Var], backward_fn: Callable) -> Var:
        needs = any(p.requires_grad for p in parents)
        out = Var(self, value, tuple(parents), backward_fn, requires_grad=needs)
        if needs:
            self.nodes.append(out)
        return out

    def backward(self, out: Var, seed=None) -> None:
        """Accumulate d(out)/d(leaf) into ``.grad`` of every reachable Var."""
        if seed is None:
            if out.value.size != 1:
                raise ShapeError("backward", out.value.shape)
            seed = np.ones_like(out.value)
        out.grad = np.array(seed, dtype=np.float64)
        for node in reversed(self.nodes):
            if node.grad is None:
                continue
            grads = node.backward_fn(node.grad)
            for parent, g in zip(node.parents, grads):
                if g is None or not parent.requires_grad:
                    continue
                if parent.grad is None:
                    parent.grad = np.array(g, dtype=np.float64)
                else:
                    parent.grad = parent.grad + g


def _sum_to_shape(g, shape):
    # undo numpy broadcasting
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def add(a: Var, b: Var) -> Var:
    try:
        value = a.value + b.value
    except ValueError:
        raise ShapeError("add", a.shape, b.shape) from None
    sa, sb = a.shape, b.shape
    return a.tape.record(value, (a, b), lambda g: (_sum_to_shape(g, sa), _sum_to_shape(g, sb)))


def sub(a: Var, b: Var) -> Var:
    try:
        value = a.value - b.value
    except ValueError:
        raise ShapeError("sub", a.shape, b.shape) from None
    sa, sb = a.shape, b.shape
    return a.tape.record(value, (a, b), lambda g: (_sum_to_shape(g, sa), -_sum_to_shape(g, sb)))


def mul(a: Var, b: Var) -> Var:
    try:
        value = a.value * b.value
    except ValueError:
        raise ShapeError("mul", a.shape, b.shape) from None
    av, bv = a.value, b.value
    return a.tape.record(
        value, (a, b),
        lambda g: (_sum_to_shape(g * bv, av.shape), _sum_to_shape(g * av, bv.shape)),
    )


def matmul(a: Var, b: Var) -> Var:
    """Matrix product for 2-D @ 2-D, 2-D @ 1-D and 1-D @ 2-D operands."""
    av, bv = a.value, b.value
    if av.ndim not in (1, 2) or bv.ndim not in (1, 2) or av.shape[-1] != bv.shape[0]:
        raise ShapeError("matmul", av.shape, bv.shape)
    if av.ndim == 1 and bv.ndim == 1:
        raise ShapeError("matmul", av.shape, bv.shape)

    def backward(g):
        if av.ndim == 2 and bv.ndim == 2:
            return g @ bv.T, av.T @ g
        if bv.ndim == 1:
            return np.outer(g, bv), av.T @ g
        return bv @ g, np.outer(av, g)

    return a.tape.record(av @ bv, (a, b), backward)


def matvec(w: Var, x: Var) -> Var:
    if w.value.ndim != 2 or x.value.ndim != 1:
        raise ShapeError("matvec", w.shape, x.shape)
    return matmul(w, x)


def transpose(a: Var) -> Var:
    if a.value.ndim != 2:
        raise ShapeError("transpose", a.shape)
    return a.tape.record(a.value.T, (a,), lambda g: (g.T,))


def tanh(a: Var) -> Var:
    y = np.tanh(a.value)
    return a.tape.record(y, (a,), lambda g: (g * (1.0 - y * y),))


def sigmoid(a: Var) -> Var:
    # split form avoids overflow in exp for large |x|
    x = a.value
    y = np.empty_like(x)
    pos = x >= 0
    y[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    y[~pos] = ex / (1.0 + ex)
    return a.tape.record(y, (a,), lambda g: (g * y * (1.0 - y),))


def concat(parts: Sequence[Var], axis: int = 0) -> Var:
    if not parts:
        raise ShapeError("concat")
    try:
        value = np.concatenate([p.value for p in parts], axis=axis)
    except ValueError:
        raise ShapeError("concat", *(p.shape for p in parts)) from None
    bounds = np.cumsum([p.value.shape[axis] for p in parts])[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=axis))

    return parts[0].tape.record(value, tuple(parts), backward)


def stack(parts: Sequence[Var]) -> Var:
    """Stack equally shaped Vars along a new leading axis."""
    shapes = {p.shape for p in parts}
    if len(shapes) != 1:
        raise ShapeError("stack", *(p.shape for p in parts))
    value = np.stack([p.value for p in parts])
    return parts[0].tape.record(value, tuple(parts), lambda g: tuple(g))


def slice_(a: Var, key) -> Var:
    """Index ``a`` with any numpy key; the backward scatters with add.at."""
    try:
        value = a.value[key]
    except IndexError:
        raise ShapeError("slice", a.shape) from None
    shape = a.shape
    basic = _is_basic(key)

    def backward(g):
        out = np.zeros(shape)
        if basic:
            out[key] = g
        else:
            np.add.at(out, key, g)
        return (out,)

    return a.tape.record(np.array(value), (a,), backward)


def _is_basic(key):
    # basic indexing never repeats an element, so plain assignment scatters
    keys = key if isinstance(key, tuple) else (key,)
    return all(isinstance(k, (slice, int, type(Ellipsis))) for k in keys)


def take_rows(table: Var, ids) -> Var:
    """Gather rows of a 2-D table (embedding lookup)."""
    ids = np.asarray(ids, dtype=np.intp)
    if table.value.ndim != 2:
        raise ShapeError("take_rows", table.shape)
    if ids.size and (ids.min() < 0 or ids.max() >= table.value.shape[0]):
        raise ShapeError("take_rows", table.shape, ids.shape)
    shape = table.shape

    def backward(g):
        out = np.zeros(shape)
        np.add.at(out, ids, g)
        return (out,)

    return table.tape.record(table.value[ids], (table,), backward)


def sum_all(a: Var) -> Var:
    shape = a.shape
    return a.tape.record(np.array(a.value.sum()), (a,), lambda g: (np.full(shape, float(g)),))


def logsumexp_array(x, axis=None, keepdims=False):
    """Max-shifted log-sum-exp over numpy values."""
    x = np.asarray(x, dtype=np.float64)
    m = np.max(x, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    out = np.log(np.sum(np.exp(x - m), axis=axis, keepdims=True)) + m
    if not keepdims:
        out = np.squeeze(out, axis=axis) if axis is not None else out.reshape(())
    return out


def logsumexp(a: Var, axis=None) -> Var:
    x = a.value
    out = logsumexp_array(x, axis=axis, keepdims=True)
    soft = np.exp(x - out)
    value = np.squeeze(out, axis=axis) if axis is not None else out.reshape(())

    def backward(g):
        g = np.expand_dims(g, axis) if axis is not None else g
        return (g * soft,)

    return a.tape.record(value, (a,), backward)


def dropout(a: Var, mask) -> Var:
    """Multiply by a precomputed (already rescaled) mask."""
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape != a.shape:
        raise ShapeError("dropout", a.shape, mask.shape)
    return a.tape.record(a.value * mask, (a,), lambda g: (g * mask,))


def dropout_mask(rng: np.random.Generator, shape, rate: float):
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    keep = rng.random(shape) >= rate
    return keep / (1.0 - rate)


# -- gradient checking -------------------------------------------------------

def grad_check(f: Callable[[Var], Var], point, h: float = 1e-5) -> float:
    """Compare the tape gradient of scalar ``f`` with central differences.

    ``f`` receives a leaf Var on a fresh tape and must return a scalar Var.
    Returns ``max |analytic - numeric| / max(1, |analytic|)`` over coordinates.
    """
    point = np.array(point, dtype=np.float64)
    tape = Tape()
    x = tape.leaf(point)
    out = f(x)
    if not np.all(np.isfinite(out.value)):
        raise NonFiniteError("grad_check: non-finite value at the base point")
    tape.backward(out)
    analytic = x.grad if x.grad is not None else np.zeros_like(point)

    def evaluate(v):
        val = f(Tape().leaf(v)).value
        if not np.all(np.isfinite(val)):
            raise NonFiniteError("grad_check: non-finite value in the h-neighbourhood")
        return float(val)

    numeric = np.zeros_like(point)
    flat = point.reshape(-1)
    num_flat = numeric.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = evaluate(point)
        flat[i] = orig - h
        down = evaluate(point)
        flat[i] = orig
        num_flat[i] = (up - down) / (2.0 * h)
    err = np.abs(analytic - numeric) / np.maximum(1.0, np.abs(analytic))
    return float(err.max()) if err.size else 0.0


# -- seeding and init ---------------------------------------------------------

def seeded_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def uniform_fan_init(rng: np.random.Generator, shape) -> np.ndarray:
    """Uniform in +-sqrt(6 / (fan_in + fan_out)) for a 2-D weight."""
    fan_in, fan_out = shape[0], shape[1]
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


def embedding_init(rng: np.random.Generator, shape) -> np.ndarray:
    """Uniform in +-sqrt(3 / dim), i.e. variance 1/dim per coordinate."""
    bound = np.sqrt(3.0 / shape[-1])
    return rng.uniform(-bound, bound, size=shape)
