"""Compiled loop over quad pairs for the auxiliary Hamiltonian."""

import numba
import numpy as np


@numba.njit(cache=True)
def chi_slot4_sum(z, xoff, yoff, ucode, inside, recip_in, recip_cross, out):
    """``out[k] += z_k1 z_k2 conj(z_k3) * r`` over all quad pairs with ``k4 = k``.

    ``xoff[i, m] + yoff[j, m]`` is the flat index of mode ``m`` of the tuple
    built from x-quad ``i`` and y-quad ``j``.  ``r`` is looked up from the
    distinct-defect tables by ``(ucode[i], ucode[j])``; ``recip_in`` applies
    when all four modes lie in the inner box, ``recip_cross`` otherwise.  A
    zero entry means the tuple is not a term.
    """
    n = ucode.shape[0]
    for i in range(n):
        ui = ucode[i]
        ini = inside[i]
        x0 = xoff[i, 0]
        x1 = xoff[i, 1]
        x2 = xoff[i, 2]
        x3 = xoff[i, 3]
        for j in range(n):
            if ini and inside[j]:
                r = recip_in[ui, ucode[j]]
            else:
                r = recip_cross[ui, ucode[j]]
            if r == 0.0:
                continue
            out[x3 + yoff[j, 3]] += z[x0 + yoff[j, 0]] * z[x1 + yoff[j, 1]] * np.conj(z[x2 + yoff[j, 2]]) * r
    return out


@numba.njit(cache=True)
def term_sum(u, idx, delta, t, out):
    """``out[k4] += u_k1 u_k2 conj(u_k3) exp(-i delta t)`` over an explicit term list."""
    for n in range(idx.shape[0]):
        a = u[idx[n, 0]]
        if a == 0:
            continue
        b = u[idx[n, 1]]
        if b == 0:
            continue
        c = u[idx[n, 2]]
        if c == 0:
            continue
        p = a * b * np.conj(c)
        d = delta[n]
        if d != 0.0 and t != 0.0:
            p *= np.exp(-1j * d * t)
        out[idx[n, 3]] += p
    return out
