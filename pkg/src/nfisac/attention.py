"""Bidirectional cross-task attention between semantic and geometric token sets.

Forward-only, single head. Each branch queries the other branch's keys and
values; the result is added back to the branch's own tokens through a scalar
mixing coefficient.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidConfigError

BRANCHES = ("semantic", "geometric")


@dataclass(frozen=True, eq=False)
class TokenMatrix:
    tokens: np.ndarray
    branch: str = "semantic"

    def __post_init__(self):
        t = np.asarray(self.tokens, dtype=float)
        if t.ndim != 2 or t.shape[0] < 1:
            raise InvalidConfigError(f"tokens must be (L>=1, d_f), got {t.shape}")
        if not np.all(np.isfinite(t)):
            raise InvalidConfigError("tokens contain non-finite values")
        if self.branch not in BRANCHES:
            raise InvalidConfigError(f"branch must be one of {BRANCHES}")
        object.__setattr__(self, "tokens", t)


@dataclass(frozen=True, eq=False)
class CtaWeights:
    """Projection matrices for both branches plus the residual mixing coefficients.

    Query and key projections are ``(d_f, d_a)``. Value projections are
    ``(d_f, d_f)`` so the attended output can be added to the residual
    stream.
    """

    wq_cls: np.ndarray
    wk_cls: np.ndarray
    wv_cls: np.ndarray
    wq_loc: np.ndarray
    wk_loc: np.ndarray
    wv_loc: np.ndarray
    alpha_cls: float = 0.1
    alpha_loc: float = 0.1

    def __post_init__(self):
        for name in ("wq_cls", "wk_cls", "wv_cls", "wq_loc", "wk_loc", "wv_loc"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        d_f, d_a = self.wq_cls.shape
        for name in ("wk_cls", "wq_loc", "wk_loc"):
            if getattr(self, name).shape != (d_f, d_a):
                raise InvalidConfigError(f"{name} must be ({d_f}, {d_a}), got {getattr(self, name).shape}")
        for name in ("wv_cls", "wv_loc"):
            if getattr(self, name).shape != (d_f, d_f):
                raise InvalidConfigError(f"{name} must be ({d_f}, {d_f}), got {getattr(self, name).shape}")
        if d_a < 1:
            raise InvalidConfigError("attention dimension must be positive")
        for name in ("alpha_cls", "alpha_loc"):
            v = float(getattr(self, name))
            if not np.isfinite(v):
                raise InvalidConfigError(f"{name} must be finite")
            object.__setattr__(self, name, v)

    @property
    def token_dim(self):
        return self.wq_cls.shape[0]

    @property
    def attention_dim(self):
        return self.wq_cls.shape[1]

    @classmethod
    def random(cls, token_dim, attention_dim, seed=0, alpha=0.1):
        """Deterministic Glorot-style initialization for tests and self-checks."""
        rng = np.random.default_rng(seed)
        qk_scale = np.sqrt(2.0 / (token_dim + attention_dim))
        v_scale = np.sqrt(1.0 / token_dim)
        mats = [rng.normal(0.0, qk_scale, (token_dim, attention_dim)) for _ in range(2)]
        v1 = rng.normal(0.0, v_scale, (token_dim, token_dim))
        mats2 = [rng.normal(0.0, qk_scale, (token_dim, attention_dim)) for _ in range(2)]
        v2 = rng.normal(0.0, v_scale, (token_dim, token_dim))
        return cls(mats[0], mats[1], v1, mats2[0], mats2[1], v2, alpha, alpha)


def softmax(logits, axis=-1):
    z = logits - np.max(logits, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=axis, keepdims=True)


def _attend(queries_from, keys_from, wq, wk, wv):
    Q = queries_from @ wq
    K = keys_from @ wk
    V = keys_from @ wv
    attn = softmax(Q @ K.T / np.sqrt(wq.shape[1]), axis=1)
    return attn @ V, attn


def cross_attend(f_cls, f_loc, weights):
    """Refine each branch with the other branch's attended values.

    Parameters
    ----------
    f_cls, f_loc : TokenMatrix or ndarray
        Token sequences ``(L_cls, d_f)`` and ``(L_loc, d_f)``.
    weights : CtaWeights

    Returns
    -------
    refined_cls, refined_loc : ndarray
        Same shapes as the inputs.
    maps : dict
        ``"cls_to_loc"`` of shape ``(L_cls, L_loc)`` and ``"loc_to_cls"`` of
        shape ``(L_loc, L_cls)``; every row sums to one.
    """
    F_cls = f_cls.tokens if isinstance(f_cls, TokenMatrix) else TokenMatrix(f_cls).tokens
    F_loc = f_loc.tokens if isinstance(f_loc, TokenMatrix) else TokenMatrix(f_loc, "geometric").tokens
    d_f = weights.token_dim
    if F_cls.shape[1] != d_f or F_loc.shape[1] != d_f:
        raise InvalidConfigError(
            f"token dimension mismatch: cls {F_cls.shape[1]}, loc {F_loc.shape[1]}, weights {d_f}")
    upd_cls, map_cls = _attend(F_cls, F_loc, weights.wq_cls, weights.wk_loc, weights.wv_loc)
    upd_loc, map_loc = _attend(F_loc, F_cls, weights.wq_loc, weights.wk_cls, weights.wv_cls)
    refined_cls = F_cls + weights.alpha_cls * upd_cls if weights.alpha_cls != 0 else F_cls.copy()
    refined_loc = F_loc + weights.alpha_loc * upd_loc if weights.alpha_loc != 0 else F_loc.copy()
    return refined_cls, refined_loc, {"cls_to_loc": map_cls, "loc_to_cls": map_loc}


def attention_rows_stochastic(maps, atol=1e-6):
    """True when every row of every map is nonnegative and sums to one."""
    if isinstance(maps, dict):
        maps = list(maps.values())
    elif isinstance(maps, np.ndarray):
        maps = [maps]
    for m in maps:
        m = np.asarray(m, dtype=float)
        if np.any(m < 0) or not np.allclose(m.sum(axis=-1), 1.0, rtol=0.0, atol=atol):
            return False
    return True


def pool(tokens, projection=None):
    """Mean over tokens followed by a linear map (identity by default)."""
    t = tokens.tokens if isinstance(tokens, TokenMatrix) else np.asarray(tokens, dtype=float)
    if t.ndim != 2 or t.shape[0] == 0:
        raise InvalidConfigError("pool needs a nonempty (L, d) token matrix")
    h = t.mean(axis=0)
    return h if projection is None else np.asarray(projection, dtype=float) @ h
