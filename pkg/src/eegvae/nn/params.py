"""Flat parameter storage with named views.

All trainable tensors of a model live in one contiguous float64 vector, with
a parallel vector for gradients.  Layers register their shapes up front, then
``allocate`` initializes everything and freezes the layout.  After allocation,
``view``/``grad`` return reshaped *views* into the flat buffers, so layers can
read and accumulate in place while optimizers update the whole model with a
single vectorized step.  The flat layout also makes finite-difference checking
and checkpoint serialization one-liners.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from ..errors import ParameterError

InitSpec = str | float | Callable[[np.random.Generator, tuple[int, ...]], np.ndarray]


def _glorot_uniform(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    """Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)) from the 2-D shape."""
    if len(shape) == 2:
        fan_in, fan_out = shape
    else:
        fan_in = int(np.prod(shape[:-1])) if len(shape) > 1 else shape[0]
        fan_out = shape[-1]
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class ParamStore:
    """Two-phase registry: ``register`` shapes, then ``allocate`` the buffer."""

    def __init__(self) -> None:
        self._specs: list[tuple[str, tuple[int, ...], InitSpec]] = []
        self._layout: dict[str, tuple[int, tuple[int, ...]]] = {}
        self.flat: np.ndarray | None = None
        self.flat_grad: np.ndarray | None = None

    @property
    def allocated(self) -> bool:
        return self.flat is not None

    @property
    def size(self) -> int:
        if not self.allocated:
            return sum(int(np.prod(s)) for _, s, _ in self._specs)
        return self.flat.size

    def register(self, name: str, shape: tuple[int, ...], init: InitSpec = "zeros") -> str:
        """Reserve a named tensor.  Returns the name for convenience."""
        if self.allocated:
            raise ParameterError("cannot register parameters after allocation")
        if any(n == name for n, _, _ in self._specs):
            raise ParameterError(f"duplicate parameter name {name!r}")
        if any(int(d) <= 0 for d in shape):
            raise ParameterError(f"parameter {name!r} has non-positive dim in shape {shape}")
        self._specs.append((name, tuple(int(d) for d in shape), init))
        return name

    def allocate(self, rng: np.random.Generator) -> None:
        """Build the flat buffers and run every registered initializer."""
        if self.allocated:
            raise ParameterError("parameters already allocated")
        total = sum(int(np.prod(s)) for _, s, _ in self._specs)
        self.flat = np.zeros(total, dtype=np.float64)
        self.flat_grad = np.zeros(total, dtype=np.float64)
        offset = 0
        for name, shape, init in self._specs:
            n = int(np.prod(shape))
            self._layout[name] = (offset, shape)
            block = self.flat[offset : offset + n].reshape(shape)
            if callable(init):
                block[...] = init(rng, shape)
            elif init == "glorot":
                block[...] = _glorot_uniform(rng, shape)
            elif init == "zeros":
                pass
            elif isinstance(init, (int, float)):
                block[...] = float(init)
            else:
                raise ParameterError(f"unknown initializer {init!r} for {name!r}")
            offset += n

    def _require(self, name: str) -> tuple[int, tuple[int, ...]]:
        if not self.allocated:
            raise ParameterError("parameters not allocated yet")
        try:
            return self._layout[name]
        except KeyError:
            raise ParameterError(f"unknown parameter name {name!r}") from None

    def view(self, name: str) -> np.ndarray:
        """Writable view of one named tensor inside the flat parameter vector."""
        offset, shape = self._require(name)
        return self.flat[offset : offset + int(np.prod(shape))].reshape(shape)

    def grad(self, name: str) -> np.ndarray:
        """Writable view of the matching slice of the flat gradient vector."""
        offset, shape = self._require(name)
        return self.flat_grad[offset : offset + int(np.prod(shape))].reshape(shape)

    def zero_grads(self) -> None:
        if self.allocated:
            self.flat_grad[...] = 0.0

    def names(self) -> list[str]:
        return [n for n, _, _ in self._specs]

    def shapes(self) -> dict[str, tuple[int, ...]]:
        return {n: s for n, s, _ in self._specs}

    def clone(self) -> "ParamStore":
        """Deep copy with identical layout and values (grads reset to zero)."""
        other = ParamStore()
        other._specs = list(self._specs)
        if self.allocated:
            other._layout = dict(self._layout)
            other.flat = self.flat.copy()
            other.flat_grad = np.zeros_like(self.flat_grad)
        return other
