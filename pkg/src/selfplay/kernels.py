"""Hot numeric kernels with a numba path and a pure-numpy path.

Both paths implement identical contracts; :data:`ACTIVE` names the one that
the rest of the package calls through the module-level aliases at the
bottom of this file. ``numba_impl`` and ``numpy_impl`` stay importable so
tests and the benchmark can compare them side by side.
"""

from types import SimpleNamespace

import numpy as np

from ._accel import USE_NUMBA, njit

# ---------------------------------------------------------------------------
# numba path
# ---------------------------------------------------------------------------


@njit
def _nb_masked_softmax(logits, mask, temperature):
    n = logits.shape[0]
    out = np.zeros(n)
    top = -np.inf
    for i in range(n):
        if mask[i]:
            z = logits[i] / temperature
            if z > top:
                top = z
    if top == -np.inf:
        return out
    total = 0.0
    for i in range(n):
        if mask[i]:
            e = np.exp(logits[i] / temperature - top)
            out[i] = e
            total += e
    for i in range(n):
        out[i] /= total
    return out


@njit
def _nb_sample_index(probs, u):
    c = 0.0
    last = -1
    for i in range(probs.shape[0]):
        p = probs[i]
        if p > 0.0:
            last = i
            c += p
            if u < c:
                return i
    return last


@njit
def _nb_entropy(probs):
    h = 0.0
    for i in range(probs.shape[0]):
        p = probs[i]
        if p > 0.0:
            h -= p * np.log(p)
    return h


@njit
def _nb_logprob_grad(probs, action, temperature, mask):
    n = probs.shape[0]
    g = np.zeros(n)
    for i in range(n):
        if mask[i]:
            g[i] = -probs[i] / temperature
    g[action] += 1.0 / temperature
    return g


@njit
def _nb_adam_update(theta, grad, m, v, step, lr, beta1, beta2, eps, weight_decay):
    c1 = 1.0 - beta1**step
    c2 = 1.0 - beta2**step
    for i in range(theta.shape[0]):
        g = grad[i]
        m[i] = beta1 * m[i] + (1.0 - beta1) * g
        v[i] = beta2 * v[i] + (1.0 - beta2) * g * g
        mhat = m[i] / c1
        vhat = v[i] / c2
        theta[i] = theta[i] * (1.0 - lr * weight_decay) + lr * mhat / (np.sqrt(vhat) + eps)


@njit
def _nb_ema_scan(b0, alpha, returns):
    out = np.empty(returns.shape[0])
    b = b0
    for i in range(returns.shape[0]):
        b = alpha * b + (1.0 - alpha) * returns[i]
        out[i] = b
    return out


@njit
def _nb_line_winners(grid, k):
    rows, cols = grid.shape
    found = 0
    for r in range(rows):
        for c in range(cols):
            v = grid[r, c]
            if v == 0:
                continue
            for dr, dc in ((0, 1), (1, 0), (1, 1), (1, -1)):
                er = r + (k - 1) * dr
                ec = c + (k - 1) * dc
                if er < 0 or er >= rows or ec < 0 or ec >= cols:
                    continue
                ok = True
                for s in range(1, k):
                    if grid[r + s * dr, c + s * dc] != v:
                        ok = False
                        break
                if ok:
                    found |= 1 << (v - 1)
    return found


@njit
def _nb_pig_hold_at_mc(n_episodes, hold_at, target, max_turns, seed):
    np.random.seed(seed)
    counts = np.zeros(3, dtype=np.int64)
    for _ in range(n_episodes):
        banked0 = 0
        banked1 = 0
        pend0 = 0
        pend1 = 0
        winner = -1
        for t in range(max_turns):
            if t % 2 == 0:
                if pend0 >= hold_at or banked0 + pend0 >= target:
                    banked0 += pend0
                    pend0 = 0
                    if banked0 >= target:
                        winner = 0
                        break
                else:
                    face = np.random.randint(1, 7)
                    if face == 1:
                        pend0 = 0
                    else:
                        pend0 += face
            else:
                if pend1 >= hold_at or banked1 + pend1 >= target:
                    banked1 += pend1
                    pend1 = 0
                    if banked1 >= target:
                        winner = 1
                        break
                else:
                    face = np.random.randint(1, 7)
                    if face == 1:
                        pend1 = 0
                    else:
                        pend1 += face
        if winner == 0:
            counts[0] += 1
        elif winner == 1:
            counts[1] += 1
        else:
            counts[2] += 1
    return counts


# ---------------------------------------------------------------------------
# numpy path
# ---------------------------------------------------------------------------


def _np_masked_softmax(logits, mask, temperature):
    out = np.zeros(logits.shape[0])
    if not mask.any():
        return out
    z = logits[mask] / temperature
    e = np.exp(z - z.max())
    out[mask] = e / e.sum()
    return out


def _np_sample_index(probs, u):
    nz = np.flatnonzero(probs > 0.0)
    if nz.size == 0:
        return -1
    cdf = np.cumsum(probs[nz])
    i = int(np.searchsorted(cdf, u, side="right"))
    return int(nz[min(i, nz.size - 1)])


def _np_entropy(probs):
    p = probs[probs > 0.0]
    return float(-(p * np.log(p)).sum())


def _np_logprob_grad(probs, action, temperature, mask):
    g = np.where(mask, -probs / temperature, 0.0)
    g[action] += 1.0 / temperature
    return g


def _np_adam_update(theta, grad, m, v, step, lr, beta1, beta2, eps, weight_decay):
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    mhat = m / (1.0 - beta1**step)
    vhat = v / (1.0 - beta2**step)
    theta *= 1.0 - lr * weight_decay
    theta += lr * mhat / (np.sqrt(vhat) + eps)


def _np_ema_scan(b0, alpha, returns):
    # sequential on purpose: results must match the per-update rule bit for bit
    out = np.empty(len(returns))
    b = float(b0)
    for i, r in enumerate(returns):
        b = alpha * b + (1.0 - alpha) * float(r)
        out[i] = b
    return out


def _np_line_winners(grid, k):
    from numpy.lib.stride_tricks import sliding_window_view

    g = np.asarray(grid)
    found = 0
    windows = []
    if g.shape[1] >= k:
        windows.append(sliding_window_view(g, k, axis=1).reshape(-1, k))
    if g.shape[0] >= k:
        windows.append(sliding_window_view(g, k, axis=0).reshape(-1, k))
    for flip in (g, g[:, ::-1]):
        for off in range(-g.shape[0] + 1, g.shape[1]):
            d = np.diagonal(flip, offset=off)
            if d.shape[0] >= k:
                windows.append(sliding_window_view(d, k))
    for w in windows:
        full = (w == w[:, :1]).all(axis=1)
        for v in (1, 2):
            if (full & (w[:, 0] == v)).any():
                found |= 1 << (v - 1)
    return found


def _np_pig_hold_at_mc(n_episodes, hold_at, target, max_turns, seed):
    rng = np.random.default_rng(seed)
    banked = np.zeros((2, n_episodes), dtype=np.int64)
    pend = np.zeros((2, n_episodes), dtype=np.int64)
    winner = np.full(n_episodes, -1)
    for t in range(max_turns):
        p = t % 2
        live = winner < 0
        if not live.any():
            break
        hold = live & ((pend[p] >= hold_at) | (banked[p] + pend[p] >= target))
        roll = live & ~hold
        banked[p] += np.where(hold, pend[p], 0)
        pend[p] = np.where(hold, 0, pend[p])
        faces = rng.integers(1, 7, size=n_episodes)
        pend[p] = np.where(roll & (faces == 1), 0, np.where(roll, pend[p] + faces, pend[p]))
        winner = np.where(hold & (banked[p] >= target), p, winner)
    return np.array([(winner == 0).sum(), (winner == 1).sum(), (winner < 0).sum()], dtype=np.int64)


numba_impl = SimpleNamespace(
    masked_softmax=_nb_masked_softmax,
    sample_index=_nb_sample_index,
    entropy=_nb_entropy,
    logprob_grad=_nb_logprob_grad,
    adam_update=_nb_adam_update,
    ema_scan=_nb_ema_scan,
    line_winners=_nb_line_winners,
    pig_hold_at_mc=_nb_pig_hold_at_mc,
)

numpy_impl = SimpleNamespace(
    masked_softmax=_np_masked_softmax,
    sample_index=_np_sample_index,
    entropy=_np_entropy,
    logprob_grad=_np_logprob_grad,
    adam_update=_np_adam_update,
    ema_scan=_np_ema_scan,
    line_winners=_np_line_winners,
    pig_hold_at_mc=_np_pig_hold_at_mc,
)

ACTIVE = "numba" if USE_NUMBA else "numpy"
_impl = numba_impl if USE_NUMBA else numpy_impl

masked_softmax = _impl.masked_softmax
sample_index = _impl.sample_index
entropy = _impl.entropy
logprob_grad = _impl.logprob_grad
adam_update = _impl.adam_update
ema_scan = _impl.ema_scan
line_winners = _impl.line_winners
pig_hold_at_mc = _impl.pig_hold_at_mc
