"""Matrix-free linear maps, scaling (weight) operators, and spectral-norm estimation."""

from __future__ import annotations

from typing import Callable, NamedTuple, Optional

import numpy as np

from .rng import stream


class LinearMap:
    """Linear operator with forward and adjoint application.

    Subclasses implement ``_forward`` and ``_adjoint`` on 1-D float64
    arrays. ``explicit_matrix`` is ``None`` for matrix-free maps; when
    present it is the dense row-major representation used by tests and
    dense fallbacks.
    """

    def __init__(self, rows: int, cols: int):
        self.rows = int(rows)
        self.cols = int(cols)

    @property
    def explicit_matrix(self) -> Optional[np.ndarray]:
        return None

    def apply(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape != (self.cols,):
            raise ValueError(f"apply: expected vector of length {self.cols}, got shape {v.shape}")
        return self._forward(v)

    def adjoint_apply(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape != (self.rows,):
            raise ValueError(f"adjoint_apply: expected vector of length {self.rows}, got shape {v.shape}")
        return self._adjoint(v)

    def _forward(self, v: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _adjoint(self, v: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def dense(self) -> np.ndarray:
        """Materialize the dense matrix (tests / small problems only)."""
        if self.explicit_matrix is not None:
            return self.explicit_matrix
        cols = np.eye(self.cols)
        return np.column_stack([self._forward(cols[:, j]) for j in range(self.cols)])


class DenseMap(LinearMap):
    """Linear map backed by an explicit dense matrix."""

    def __init__(self, matrix: np.ndarray):
        matrix = np.ascontiguousarray(np.asarray(matrix, dtype=float))
        if matrix.ndim != 2:
            raise ValueError("DenseMap expects a 2-D matrix")
        super().__init__(matrix.shape[0], matrix.shape[1])
        self.matrix = matrix
        self._gram_small = None  # cached M Mᵀ for Woodbury solves

    @property
    def explicit_matrix(self) -> np.ndarray:
        return self.matrix

    def _forward(self, v):
        return self.matrix @ v

    def _adjoint(self, v):
        return self.matrix.T @ v

    def gram_small(self) -> np.ndarray:
        if self._gram_small is None:
            self._gram_small = self.matrix @ self.matrix.T
        return self._gram_small

    def gram_big(self) -> np.ndarray:
        cached = getattr(self, "_gram_big", None)
        if cached is None:
            cached = self.matrix.T @ self.matrix
            self._gram_big = cached
        return cached


class ScaledIdentityMap(LinearMap):
    """The map v ↦ s·v on R^n."""

    def __init__(self, scale: float, n: int):
        super().__init__(n, n)
        self.scale = float(scale)

    @property
    def explicit_matrix(self) -> np.ndarray:
        return self.scale * np.eye(self.rows)

    def _forward(self, v):
        return self.scale * v

    def _adjoint(self, v):
        return self.scale * v


class FunctionMap(LinearMap):
    """Matrix-free map from user-supplied forward/adjoint callables."""

    def __init__(self, rows: int, cols: int,
                 forward: Callable[[np.ndarray], np.ndarray],
                 adjoint: Callable[[np.ndarray], np.ndarray],
                 explicit_matrix: Optional[np.ndarray] = None):
        super().__init__(rows, cols)
        self._fwd = forward
        self._adj = adjoint
        self._mat = None if explicit_matrix is None else np.asarray(explicit_matrix, dtype=float)

    @property
    def explicit_matrix(self) -> Optional[np.ndarray]:
        return self._mat

    def _forward(self, v):
        return np.asarray(self._fwd(v), dtype=float)

    def _adjoint(self, v):
        return np.asarray(self._adj(v), dtype=float)


class SpectralNormEstimate(NamedTuple):
    value: float
    converged: bool
    iterations: int


def spectral_norm(op: LinearMap, tol: float = 1e-10, max_iter: int = 10000,
                  seed: int = 0) -> SpectralNormEstimate:
    """Estimate ‖M‖₂ by power iteration on MᵀM.

    The start vector is a deterministic pseudo-random unit vector drawn
    from the named stream ("power-iteration", seed), so repeated calls are
    bit-reproducible. If the iteration does not reach ``tol`` relative
    stagnation within ``max_iter``, the best estimate is returned with
    ``converged=False``.
    """
    gen = stream(seed, "power-iteration")
    v = gen.normal(size=op.cols)
    for _ in range(8):
        nv = float(np.linalg.norm(v))
        if nv > 0:
            break
        v = gen.normal(size=op.cols)
    else:
        raise ValueError("could not draw a nonzero start vector")
    v /= nv

    sigma = 0.0
    for it in range(1, max_iter + 1):
        w = op.apply(v)
        new_sigma = float(np.linalg.norm(w))
        if new_sigma == 0.0:
            raise ValueError("spectral_norm: map annihilated the iterate; map must be nonzero")
        if abs(new_sigma - sigma) <= tol * max(new_sigma, 1e-300):
            return SpectralNormEstimate(new_sigma, True, it)
        sigma = new_sigma
        v = op.adjoint_apply(w)
        v /= np.linalg.norm(v)
    return SpectralNormEstimate(sigma, False, max_iter)


def operator_norm(op: LinearMap) -> float:
    """‖M‖₂, exact when the map knows its Gram spectrum or is dense."""
    if isinstance(op, ScaledIdentityMap):
        return abs(op.scale)
    gram_norm_sq = getattr(op, "gram_norm_sq", None)
    if gram_norm_sq is not None:
        return float(np.sqrt(gram_norm_sq()))
    m = op.explicit_matrix
    if m is not None:
        return float(np.linalg.norm(m, 2))
    return spectral_norm(op).value


_SCALED_IDENTITY = "scaled-identity"
_IDENTITY_MINUS_GRAM = "identity-minus-gram"
_GRAM = "gram"


class ScalingOperator:
    """Weight operator W for the quadratic form ‖v‖²_W = vᵀWv.

    Three kinds: a·I, a·I − c·MᵀM, and c·MᵀM (a, c ≥ 0). The form may be
    negative for the middle kind; positive semidefiniteness is certified,
    not assumed.
    """

    def __init__(self, kind: str, a: float = 0.0, c: float = 0.0,
                 op: Optional[LinearMap] = None):
        if kind not in (_SCALED_IDENTITY, _IDENTITY_MINUS_GRAM, _GRAM):
            raise ValueError(f"unknown ScalingOperator kind {kind!r}")
        if a < 0 or c < 0:
            raise ValueError("ScalingOperator coefficients must be nonnegative")
        if kind != _SCALED_IDENTITY and op is None:
            raise ValueError(f"kind {kind!r} requires a linear map")
        self.kind = kind
        self.a = float(a)
        self.c = float(c)
        self.op = op

    @classmethod
    def scaled_identity(cls, a: float) -> "ScalingOperator":
        return cls(_SCALED_IDENTITY, a=a)

    @classmethod
    def identity_minus_gram(cls, a: float, c: float, op: LinearMap) -> "ScalingOperator":
        return cls(_IDENTITY_MINUS_GRAM, a=a, c=c, op=op)

    @classmethod
    def gram(cls, c: float, op: LinearMap) -> "ScalingOperator":
        return cls(_GRAM, c=c, op=op)

    @property
    def is_scaled_identity(self) -> bool:
        return self.kind == _SCALED_IDENTITY

    def norm_sq(self, v: np.ndarray) -> float:
        """‖v‖²_W = a‖v‖² − c‖Mv‖² (or the kind's reduction thereof)."""
        v = np.asarray(v, dtype=float)
        out = 0.0
        if self.kind in (_SCALED_IDENTITY, _IDENTITY_MINUS_GRAM):
            out += self.a * float(v @ v)
        if self.kind in (_IDENTITY_MINUS_GRAM, _GRAM):
            mv = self.op.apply(v)
            sign = -1.0 if self.kind == _IDENTITY_MINUS_GRAM else 1.0
            out += sign * self.c * float(mv @ mv)
        return out

    def apply(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if self.kind == _SCALED_IDENTITY:
            return self.a * v
        gram_v = self.op.adjoint_apply(self.op.apply(v))
        if self.kind == _GRAM:
            return self.c * gram_v
        return self.a * v - self.c * gram_v

    def psd_certified(self, shift: float = 0.0, tol: float = 1e-10) -> bool:
        """Whether W − shift·I ⪰ 0 is certified via spectral bounds.

        For the identity-minus-gram kind the certificate is
        a − shift ≥ c‖M‖₂² (within ``tol`` relative); for the pure Gram
        kind only shift ≤ 0 can be certified (M may have a nullspace).
        """
        scale = max(1.0, abs(self.a), abs(shift))
        if self.kind == _SCALED_IDENTITY:
            return self.a - shift >= -tol * scale
        if self.kind == _GRAM:
            return shift <= tol * scale
        gram_norm = self.c * operator_norm(self.op) ** 2
        return self.a - shift >= gram_norm - tol * max(scale, gram_norm)

    def eigenvalue_bounds(self) -> tuple[float, float]:
        """Interval [lo, hi] certified to contain the spectrum of W."""
        if self.kind == _SCALED_IDENTITY:
            return (self.a, self.a)
        sq = self.c * operator_norm(self.op) ** 2
        if self.kind == _GRAM:
            return (0.0, sq)
        return (self.a - sq, self.a)

    def dense(self, n: int) -> np.ndarray:
        """Materialize W as a dense n×n matrix (tests only)."""
        out = np.zeros((n, n))
        if self.kind in (_SCALED_IDENTITY, _IDENTITY_MINUS_GRAM):
            out += self.a * np.eye(n)
        if self.kind in (_IDENTITY_MINUS_GRAM, _GRAM):
            m = self.op.dense()
            sign = -1.0 if self.kind == _IDENTITY_MINUS_GRAM else 1.0
            out += sign * self.c * (m.T @ m)
        return out


def scaled_norm_sq(w: ScalingOperator, v: np.ndarray) -> float:
    """Quadratic form vᵀWv; may be negative when W is not PSD."""
    return w.norm_sq(v)
