"""Pure numpy implementations of the hot kernels.

Used when the compiled extension is unavailable or when
``TRANSECT_BACKEND=python``. Semantics match ``_ckernels`` exactly; values may
differ in the last few ulps because the Cholesky routines differ.
"""

import numpy as np


def subset_logdet(K, idx, jitter):
    """Log-determinants of principal submatrices ``K[idx[b]][:, idx[b]]``.

    Returns ``(logdet, ok)``; ``ok[b]`` is 0 where the factorization failed,
    in which case ``logdet[b]`` is NaN.
    """
    idx = np.asarray(idx, dtype=np.intp)
    B, d = idx.shape
    out = np.full(B, np.nan)
    ok = np.zeros(B, dtype=np.uint8)
    if B == 0:
        return out, ok
    if d == 0:
        out[:] = 0.0
        ok[:] = 1
        return out, ok
    sub = K[idx[:, :, None], idx[:, None, :]]
    diag = np.arange(d)
    sub[:, diag, diag] += np.asarray(jitter, dtype=float).reshape(-1, 1)
    try:
        L = np.linalg.cholesky(sub)
    except np.linalg.LinAlgError:
        for b in range(B):
            try:
                Lb = np.linalg.cholesky(sub[b])
            except np.linalg.LinAlgError:
                continue
            out[b] = 2.0 * np.log(np.diagonal(Lb)).sum()
            ok[b] = 1
        return out, ok
    out[:] = 2.0 * np.log(np.diagonal(L, axis1=1, axis2=2)).sum(axis=1)
    ok[:] = 1
    return out, ok


def first_argmax(values, tol):
    """Row-wise index of the first entry within ``tol`` of the row maximum."""
    values = np.atleast_2d(values)
    top = values.max(axis=1)
    return np.argmax(values >= (top - tol)[:, None], axis=1)


def dp_backward(interior, terminal, sweeps, tol):
    """Backward induction over a stationary window table.

    ``interior[w, a]`` / ``terminal[w, a]`` is the stage reward for taking
    action ``a`` after window ``w``; the successor window drops the oldest
    action and appends ``a``. Returns ``(values, best)`` of shape
    ``(sweeps + 1, W)`` ordered by increasing stage, so the last row is the
    terminal stage.
    """
    W, chi = terminal.shape
    stride = W // chi
    succ = (np.arange(W) % stride)[:, None] * chi + np.arange(chi)[None, :]
    values = np.empty((sweeps + 1, W))
    best = np.empty((sweeps + 1, W), dtype=np.int64)
    rows = np.arange(W)

    b = first_argmax(terminal, tol)
    values[sweeps] = terminal[rows, b]
    best[sweeps] = b
    for s in range(sweeps - 1, -1, -1):
        cand = interior + values[s + 1][succ]
        b = first_argmax(cand, tol)
        values[s] = cand[rows, b]
        best[s] = b
    return values, best
