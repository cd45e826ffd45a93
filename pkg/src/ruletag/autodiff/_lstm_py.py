"""Pure numpy LSTM recurrence.  Used when the compiled kernel is unavailable.

``zx`` holds the input projection plus bias for every step, shape (n, 4h),
gate order input, forget, output, candidate.  ``wh`` is the (h, 4h)
recurrent matrix.  Initial hidden and cell states are zero.
"""
import numpy as np


def _sigmoid(x):
    return 0.5 * np.tanh(0.5 * x) + 0.5


def recurrence_forward(zx, wh):
    n, four_h = zx.shape
    h = four_h // 4
    hs = np.zeros((n, h))
    cs = np.zeros((n, h))
    acts = np.empty((n, four_h))
    h_prev = np.zeros(h)
    c_prev = np.zeros(h)
    for t in range(n):
        z = zx[t] + h_prev @ wh
        a = acts[t]
        a[:3 * h] = _sigmoid(z[:3 * h])
        a[3 * h:] = np.tanh(z[3 * h:])
        c_prev = a[h:2 * h] * c_prev + a[:h] * a[3 * h:]
        h_prev = a[2 * h:3 * h] * np.tanh(c_prev)
        cs[t] = c_prev
        hs[t] = h_prev
    return hs, cs, acts


def recurrence_backward(dhs, acts, cs, wh):
    n, h = dhs.shape
    dz = np.empty((n, 4 * h))
    dh_next = np.zeros(h)
    dc_next = np.zeros(h)
    zero = np.zeros(h)
    for t in range(n - 1, -1, -1):
        a = acts[t]
        ai, af, ao, ag = a[:h], a[h:2 * h], a[2 * h:3 * h], a[3 * h:]
        c_prev = cs[t - 1] if t > 0 else zero
        tc = np.tanh(cs[t])
        dh = dhs[t] + dh_next
        dc = dh * ao * (1.0 - tc * tc) + dc_next
        row = dz[t]
        row[:h] = dc * ag * ai * (1.0 - ai)
        row[h:2 * h] = dc * c_prev * af * (1.0 - af)
        row[2 * h:3 * h] = dh * tc * ao * (1.0 - ao)
        row[3 * h:] = dc * ai * (1.0 - ag * ag)
        dc_next = dc * af
        dh_next = wh @ row
    return dz
