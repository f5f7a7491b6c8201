"""Dense tensors with reverse-mode gradients.

A :class:`Tensor` wraps a numpy array. Any op whose inputs require gradients
records a node holding its parents and a backward rule; calling
:meth:`Tensor.backward` on a scalar walks those nodes in reverse topological
order (a :class:`Tape`) and then frees them.
"""

import contextlib
import os

import numpy as np

FLOAT_DTYPES = (np.dtype(np.float32), np.dtype(np.float64))

_state = {
    "grad": True,
    "debug": os.environ.get("CHTSURROGATE_DEBUG", "") not in ("", "0"),
}


def is_grad_enabled():
    return _state["grad"]


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block."""
    prev = _state["grad"]
    _state["grad"] = False
    try:
        yield
    finally:
        _state["grad"] = prev


def set_debug(flag):
    """Turn the per-op finiteness check on or off; returns the old setting."""
    prev = _state["debug"]
    _state["debug"] = bool(flag)
    return prev


def debug_enabled():
    return _state["debug"]


class Tensor:
    """N-d float array with an optional gradient accumulator."""

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "_op", "_freed")

    def __init__(self, data, requires_grad=False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in FLOAT_DTYPES:
            arr = arr.astype(np.float64)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = ()
        self._backward = None
        self._op = None
        self._freed = False

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def is_leaf(self):
        return self._backward is None

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else self.data.item()

    def detach(self):
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{flag})"

    def backward(self):
        """Backpropagate from this scalar into every leaf that requires grad."""
        if self.data.size != 1:
            raise ValueError(f"backward needs a scalar, got shape {self.shape}")
        if self._freed:
            raise RuntimeError("graph already consumed by a previous backward; run a new forward pass")
        if self._backward is None:
            if not self.requires_grad:
                raise RuntimeError("tensor has no recorded operations to differentiate")
            _accumulate(self, np.ones_like(self.data))
            return
        tape = Tape.record(self)
        tape.run(np.ones_like(self.data))
        tape.free()

    # operator sugar; the implementations live in functional
    def __add__(self, other):
        from . import functional as F
        return F.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from . import functional as F
        return F.sub(self, other)

    def __rsub__(self, other):
        from . import functional as F
        return F.sub(other, self)

    def __mul__(self, other):
        from . import functional as F
        return F.mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        from . import functional as F
        return F.mul(self, -1.0)

    def sum(self):
        from . import functional as F
        return F.sum(self)

    def mean(self):
        from . import functional as F
        return F.mean(self)


class Parameter(Tensor):
    """Named model tensor tagged with its role.

    Running batch-norm statistics are parameters for checkpointing purposes
    but never receive gradients and are not regularized.
    """

    ROLES = ("conv-kernel", "bias", "bn-scale", "bn-shift", "bn-running-stat")
    __slots__ = ("name", "role")

    def __init__(self, data, role, name="", dtype=None):
        if role not in self.ROLES:
            raise ValueError(f"unknown parameter role {role!r}")
        super().__init__(data, requires_grad=role != "bn-running-stat", dtype=dtype)
        self.role = role
        self.name = name

    @property
    def trainable(self):
        return self.role != "bn-running-stat"

    def __repr__(self):
        return f"Parameter({self.name!r}, role={self.role}, shape={self.shape})"


def make_node(data, parents, backward, op):
    """Wrap an op result, recording it on the graph when gradients are needed."""
    if _state["debug"] and not np.all(np.isfinite(data)):
        raise FloatingPointError(f"non-finite values produced by {op}")
    needs = _state["grad"] and any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=needs)
    if needs:
        out._parents = tuple(parents)
        out._backward = backward
        out._op = op
    return out


def _accumulate(leaf, g):
    g = np.asarray(g, dtype=leaf.data.dtype)
    if leaf.grad is None:
        leaf.grad = g.copy()
    else:
        leaf.grad = leaf.grad + g


class Tape:
    """Reverse-topological record of the ops that produced an output."""

    def __init__(self, nodes):
        self.nodes = nodes

    @classmethod
    def record(cls, output):
        order, seen = [], set()
        stack = [(output, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in seen:
                    stack.append((parent, False))
        return cls(order)

    @property
    def entries(self):
        """(output id, input ids, op name) for every recorded op, in order."""
        return [(id(n), [id(p) for p in n._parents], n._op) for n in self.nodes if n._backward is not None]

    def is_topological(self):
        pos = {id(n): i for i, n in enumerate(self.nodes)}
        return all(pos[p] < pos[o] for o, ins, _ in self.entries for p in ins if p in pos)

    def run(self, seed):
        grads = {id(self.nodes[-1]): seed}
        for node in reversed(self.nodes):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                _accumulate(node, g)
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = pg if key not in grads else grads[key] + pg

    def free(self):
        for node in self.nodes:
            if node._backward is not None:
                node._backward = None
                node._parents = ()
                node._freed = True
