"""Pure-numpy implementation of the LSTM time loops.

Gate layout along the 4H axis is (input, forget, output, cell) so the
three sigmoids run as one vectorized call over z[:, :3H].
"""

from __future__ import annotations

import numpy as np


def lstm_loop_fwd(xp, mask3, Wh, hs, cs, gates, tc, one):
    T, B, G = xp.shape
    H = G // 4
    h = np.zeros((B, H), xp.dtype)
    c = np.zeros((B, H), xp.dtype)
    for t in range(T):
        z = xp[t] + h @ Wh
        z[:, : 3 * H] = one / (one + np.exp(-z[:, : 3 * H]))
        np.tanh(z[:, 3 * H :], out=z[:, 3 * H :])
        i = z[:, :H]
        f = z[:, H : 2 * H]
        o = z[:, 2 * H : 3 * H]
        g = z[:, 3 * H :]
        c_new = f * c + i * g
        tch = np.tanh(c_new)
        h_new = o * tch
        m = mask3[t]
        h = m * h_new + (one - m) * h
        c = m * c_new + (one - m) * c
        hs[t] = h
        cs[t] = c
        gates[t] = z
        tc[t] = tch


def lstm_loop_bwd(d_hlast, mask3, WhT, hs, cs, gates, tc, dz, one):
    T, B, H = hs.shape
    dh = d_hlast.copy()
    dc = np.zeros_like(dh)
    for t in range(T - 1, -1, -1):
        m = mask3[t]
        dh_new = dh * m
        dc_new = dc * m
        carry_h = dh - dh_new
        carry_c = dc - dc_new
        tch = tc[t]
        i = gates[t, :, :H]
        f = gates[t, :, H : 2 * H]
        o = gates[t, :, 2 * H : 3 * H]
        g = gates[t, :, 3 * H :]
        do = dh_new * tch
        dct = dc_new + dh_new * o * (one - tch * tch)
        c_prev = cs[t - 1] if t > 0 else np.zeros((B, H), dh.dtype)
        dz[t, :, :H] = dct * g * i * (one - i)
        dz[t, :, H : 2 * H] = dct * c_prev * f * (one - f)
        dz[t, :, 2 * H : 3 * H] = do * o * (one - o)
        dz[t, :, 3 * H :] = dct * i * (one - g * g)
        dh = dz[t] @ WhT + carry_h
        dc = dct * f + carry_c
