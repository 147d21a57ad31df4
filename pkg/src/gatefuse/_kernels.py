"""numba kernels over interleaved component arrays.

Every kernel takes real arrays of shape ``(batch, 2 * 2**n)`` (the
``view`` of a complex state), so amplitude ``x`` lives at columns ``2x``
and ``2x+1``.  Work is cut into chunks whose size depends only on the
problem shape, never on the thread count; per-chunk partial sums are then
combined in ascending chunk order, which makes reductions bit-identical for
any number of threads.

Rotation axes are coded X=0, Y=1, Z=2.  ``_rot`` computes
``c*a + i*s*P a`` on an amplitude pair; with ``s -> -s`` that is the
forward rotation ``cos(t/2) I - i sin(t/2) P`` and with ``s`` as given it
is its adjoint.
"""

import os

import numba
import numpy as np
from numba import njit, prange

if "NUMBA_THREADING_LAYER" not in os.environ:
    # the default probe tries TBB first, which warns on old TBB installs
    try:
        from numba.np.ufunc import omppool  # noqa: F401
        numba.config.THREADING_LAYER = "omp"
    except ImportError:
        numba.config.THREADING_LAYER = "workqueue"

TUPLES_PER_CHUNK = 4096
AMPS_PER_CHUNK = 16384


@njit(inline="always")
def _rot(ax, c, s, a0r, a0i, a1r, a1i):
    if ax == 0:
        return (c * a0r - s * a1i, c * a0i + s * a1r,
                c * a1r - s * a0i, c * a1i + s * a0r)
    elif ax == 1:
        return (c * a0r + s * a1r, c * a0i + s * a1i,
                c * a1r - s * a0r, c * a1i - s * a0i)
    else:
        return (c * a0r - s * a0i, c * a0i + s * a0r,
                c * a1r + s * a1i, c * a1i - s * a1r)


@njit(inline="always")
def _grad_term(ax, c, s, a0r, a0i, a1r, a1i, r0r, r0i, r1r, r1i):
    """``Re <r| du/dtheta |a>`` for the pair; du = -(s/2) I - i (c/2) P."""
    re_ra = r0r * a0r + r0i * a0i + r1r * a1r + r1i * a1i
    if ax == 0:
        im_rpa = r0r * a1i - r0i * a1r + r1r * a0i - r1i * a0r
    elif ax == 1:
        im_rpa = -r0r * a1r - r0i * a1i + r1r * a0r + r1i * a0i
    else:
        im_rpa = r0r * a0i - r0i * a0r - r1r * a1i + r1i * a1r
    return 0.5 * (c * im_rpa - s * re_ra)


@njit(inline="always")
def _parity(v):
    v ^= v >> 32
    v ^= v >> 16
    v ^= v >> 8
    v ^= v >> 4
    v ^= v >> 2
    v ^= v >> 1
    return v & 1


@njit(cache=True)
def ordered_column_sum(partial):
    """Sum rows of ``partial`` strictly in ascending row order."""
    out = np.zeros(partial.shape[1])
    for r in range(partial.shape[0]):
        for k in range(partial.shape[1]):
            out[k] += partial[r, k]
    return out


def rows_per_chunk(lo_size):
    return max(1, TUPLES_PER_CHUNK // lo_size)


def tuple_chunks(dim, g):
    """``(tuples_per_chunk, n_chunks_per_sample)`` for a window of ``g`` qubits."""
    n_tup = dim >> g
    per = min(n_tup, TUPLES_PER_CHUNK)
    return per, n_tup // per


# -- fused unitary ---------------------------------------------------------
#
# The fused kernels gather TILE tuples of 2**g amplitudes into planar
# scratch (component-major, tuple index innermost) so that every arithmetic
# loop runs over contiguous tuples and vectorises.

TILE = 256


@njit(inline="always")
def _tile_offsets(xs, first, nt, q0, g, lo_mask):
    for t in range(nt):
        r = first + t
        xs[t] = 2 * (((r >> q0) << (q0 + g)) | (r & lo_mask))


@njit(parallel=True, cache=True)
def apply_group_matrix(src, dst, ur, ui, q0, g, per):
    """dst <- U src for U acting on qubits ``q0 .. q0+g-1`` (one pass)."""
    batch = src.shape[0]
    dim = src.shape[1] // 2
    G = 1 << g
    cps = (dim >> g) // per
    lo_mask = (1 << q0) - 1
    for ch in prange(batch * cps):
        smp = ch // cps
        s_ = src[smp]
        d_ = dst[smp]
        ar = np.empty((G, TILE), dtype=src.dtype)
        ai = np.empty((G, TILE), dtype=src.dtype)
        orr = np.empty(TILE, dtype=src.dtype)
        oi = np.empty(TILE, dtype=src.dtype)
        xs = np.empty(TILE, dtype=np.int64)
        tup0 = (ch - smp * cps) * per
        for tile in range(0, per, TILE):
            nt = min(TILE, per - tile)
            _tile_offsets(xs, tup0 + tile, nt, q0, g, lo_mask)
            for j in range(G):
                off = 2 * (j << q0)
                for t in range(nt):
                    x = xs[t] + off
                    ar[j, t] = s_[x]
                    ai[j, t] = s_[x + 1]
            for i in range(G):
                orr[:nt] = 0
                oi[:nt] = 0
                for j in range(G):
                    a = ur[i, j]
                    b = ui[i, j]
                    xr = ar[j]
                    xi = ai[j]
                    for t in range(nt):
                        orr[t] += a * xr[t] - b * xi[t]
                        oi[t] += a * xi[t] + b * xr[t]
                off = 2 * (i << q0)
                for t in range(nt):
                    x = xs[t] + off
                    d_[x] = orr[t]
                    d_[x + 1] = oi[t]


@njit(parallel=True, cache=True)
def backward_group(psi, lam, psi_out, lam_out, write_psi, q0, g,
                   axes, poss, cs, ss, partial, per):
    """Fused backward pass over one block in a single traversal.

    Each tile of block outputs ``psi`` and adjoints ``lam`` is loaded once;
    constituents are then walked last to first.  At constituent ``k`` both
    vectors sit just after that rotation, so its gradient is
    ``Im <lam|P|psi> / 2``; then the rotation is undone on both.  Only the
    final tuples are written back (``psi`` only if ``write_psi``).
    """
    batch = psi.shape[0]
    dim = psi.shape[1] // 2
    G = 1 << g
    m = axes.shape[0]
    cps = (dim >> g) // per
    lo_mask = (1 << q0) - 1
    dt = psi.dtype
    for ch in prange(batch * cps):
        smp = ch // cps
        s_ = psi[smp]
        l_ = lam[smp]
        pr = np.empty((G, TILE), dtype=dt)
        pi = np.empty((G, TILE), dtype=dt)
        lr = np.empty((G, TILE), dtype=dt)
        li = np.empty((G, TILE), dtype=dt)
        acc = np.zeros((m, TILE))
        xs = np.empty(TILE, dtype=np.int64)
        tup0 = (ch - smp * cps) * per
        for tile in range(0, per, TILE):
            nt = min(TILE, per - tile)
            _tile_offsets(xs, tup0 + tile, nt, q0, g, lo_mask)
            for j in range(G):
                off = 2 * (j << q0)
                for t in range(nt):
                    x = xs[t] + off
                    pr[j, t] = s_[x]
                    pi[j, t] = s_[x + 1]
                    lr[j, t] = l_[x]
                    li[j, t] = l_[x + 1]
            for k in range(m - 1, -1, -1):
                ax = axes[k]
                p = poss[k]
                stride = 1 << p
                c = cs[k]
                s = ss[k]
                ak = acc[k]
                for h in range(G // 2):
                    j0 = ((h >> p) << (p + 1)) | (h & (stride - 1))
                    j1 = j0 | stride
                    p0r, p0i, p1r, p1i = pr[j0], pi[j0], pr[j1], pi[j1]
                    l0r, l0i, l1r, l1i = lr[j0], li[j0], lr[j1], li[j1]
                    if ax == 0:
                        for t in range(nt):
                            a0r, a0i, a1r, a1i = p0r[t], p0i[t], p1r[t], p1i[t]
                            r0r, r0i, r1r, r1i = l0r[t], l0i[t], l1r[t], l1i[t]
                            ak[t] += r0r * a1i - r0i * a1r + r1r * a0i - r1i * a0r
                            p0r[t] = c * a0r - s * a1i
                            p0i[t] = c * a0i + s * a1r
                            p1r[t] = c * a1r - s * a0i
                            p1i[t] = c * a1i + s * a0r
                            l0r[t] = c * r0r - s * r1i
                            l0i[t] = c * r0i + s * r1r
                            l1r[t] = c * r1r - s * r0i
                            l1i[t] = c * r1i + s * r0r
                    elif ax == 1:
                        for t in range(nt):
                            a0r, a0i, a1r, a1i = p0r[t], p0i[t], p1r[t], p1i[t]
                            r0r, r0i, r1r, r1i = l0r[t], l0i[t], l1r[t], l1i[t]
                            ak[t] += r1r * a0r + r1i * a0i - r0r * a1r - r0i * a1i
                            p0r[t] = c * a0r + s * a1r
                            p0i[t] = c * a0i + s * a1i
                            p1r[t] = c * a1r - s * a0r
                            p1i[t] = c * a1i - s * a0i
                            l0r[t] = c * r0r + s * r1r
                            l0i[t] = c * r0i + s * r1i
                            l1r[t] = c * r1r - s * r0r
                            l1i[t] = c * r1i - s * r0i
                    else:
                        for t in range(nt):
                            a0r, a0i, a1r, a1i = p0r[t], p0i[t], p1r[t], p1i[t]
                            r0r, r0i, r1r, r1i = l0r[t], l0i[t], l1r[t], l1i[t]
                            ak[t] += r0r * a0i - r0i * a0r - r1r * a1i + r1i * a1r
                            p0r[t] = c * a0r - s * a0i
                            p0i[t] = c * a0i + s * a0r
                            p1r[t] = c * a1r + s * a1i
                            p1i[t] = c * a1i - s * a1r
                            l0r[t] = c * r0r - s * r0i
                            l0i[t] = c * r0i + s * r0r
                            l1r[t] = c * r1r + s * r1i
                            l1i[t] = c * r1i - s * r1r
            lo_ = lam_out[smp]
            po_ = psi_out[smp]
            for j in range(G):
                off = 2 * (j << q0)
                for t in range(nt):
                    x = xs[t] + off
                    lo_[x] = lr[j, t]
                    lo_[x + 1] = li[j, t]
                if write_psi:
                    for t in range(nt):
                        x = xs[t] + off
                        po_[x] = pr[j, t]
                        po_[x + 1] = pi[j, t]
        for k in range(m):
            tot = 0.0
            for t in range(TILE):
                tot += acc[k, t]
            partial[ch, k] = 0.5 * tot


# -- single rotations (per-gate executor) ----------------------------------


@njit(parallel=True, cache=True)
def apply_rotation(src, dst, ax, t, c, s, rpc):
    """dst <- R_ax(theta) src on qubit ``t`` with c=cos(theta/2), s=sin(theta/2)."""
    batch = src.shape[0]
    dim = src.shape[1] // 2
    lo_size = 1 << t
    hi_count = dim >> (t + 1)
    n_rows = batch * hi_count
    n_chunks = (n_rows + rpc - 1) // rpc
    ms = -s
    for ch in prange(n_chunks):
        stop = min(n_rows, (ch + 1) * rpc)
        for row in range(ch * rpc, stop):
            smp = row // hi_count
            base_row = (row - smp * hi_count) << (t + 1)
            for lo in range(lo_size):
                i0 = base_row | lo
                i1 = i0 | lo_size
                a0r, a0i, a1r, a1i = _rot(ax, c, ms, src[smp, 2 * i0], src[smp, 2 * i0 + 1],
                                          src[smp, 2 * i1], src[smp, 2 * i1 + 1])
                dst[smp, 2 * i0] = a0r
                dst[smp, 2 * i0 + 1] = a0i
                dst[smp, 2 * i1] = a1r
                dst[smp, 2 * i1 + 1] = a1i


@njit(parallel=True, cache=True)
def backward_rotation(psi_in, lam, lam_out, ax, t, c, s, partial, rpc):
    """Gradient term from a stored gate input plus ``lam <- R^dagger lam`` (one pass)."""
    batch = psi_in.shape[0]
    dim = psi_in.shape[1] // 2
    lo_size = 1 << t
    hi_count = dim >> (t + 1)
    n_rows = batch * hi_count
    n_chunks = (n_rows + rpc - 1) // rpc
    for ch in prange(n_chunks):
        acc = 0.0
        stop = min(n_rows, (ch + 1) * rpc)
        for row in range(ch * rpc, stop):
            smp = row // hi_count
            base_row = (row - smp * hi_count) << (t + 1)
            for lo in range(lo_size):
                i0 = base_row | lo
                i1 = i0 | lo_size
                r0r = lam[smp, 2 * i0]
                r0i = lam[smp, 2 * i0 + 1]
                r1r = lam[smp, 2 * i1]
                r1i = lam[smp, 2 * i1 + 1]
                acc += _grad_term(ax, c, s, psi_in[smp, 2 * i0], psi_in[smp, 2 * i0 + 1],
                                  psi_in[smp, 2 * i1], psi_in[smp, 2 * i1 + 1],
                                  r0r, r0i, r1r, r1i)
                n0r, n0i, n1r, n1i = _rot(ax, c, s, r0r, r0i, r1r, r1i)
                lam_out[smp, 2 * i0] = n0r
                lam_out[smp, 2 * i0 + 1] = n0i
                lam_out[smp, 2 * i1] = n1r
                lam_out[smp, 2 * i1 + 1] = n1i
        partial[ch, 0] = acc


# -- bitmask kernels -------------------------------------------------------


def amp_chunks(dim):
    per = min(dim, AMPS_PER_CHUNK)
    return per, dim // per


@njit(parallel=True, cache=True)
def apply_cz_masks(src, dst, masks, per):
    """Negate amplitude x iff an odd number of masks are fully set in x."""
    batch = src.shape[0]
    dim = src.shape[1] // 2
    cps = dim // per
    nm = masks.shape[0]
    for ch in prange(batch * cps):
        smp = ch // cps
        start = (ch - smp * cps) * per
        for x in range(start, start + per):
            parity = 0
            for i in range(nm):
                mk = masks[i]
                if (mk & x) == mk:
                    parity ^= 1
            if parity:
                dst[smp, 2 * x] = -src[smp, 2 * x]
                dst[smp, 2 * x + 1] = -src[smp, 2 * x + 1]
            else:
                dst[smp, 2 * x] = src[smp, 2 * x]
                dst[smp, 2 * x + 1] = src[smp, 2 * x + 1]


@njit(parallel=True, cache=True)
def apply_cnot_masks(src, dst, control_masks, target_masks, per):
    """Trace each source index through the CNOT list and scatter to its destination."""
    batch = src.shape[0]
    dim = src.shape[1] // 2
    cps = dim // per
    nm = control_masks.shape[0]
    for ch in prange(batch * cps):
        smp = ch // cps
        start = (ch - smp * cps) * per
        for x in range(start, start + per):
            out = x
            for i in range(nm):
                cm = control_masks[i]
                if (out & cm) == cm:
                    out ^= target_masks[i]
            dst[smp, 2 * out] = src[smp, 2 * x]
            dst[smp, 2 * out + 1] = src[smp, 2 * x + 1]


@njit(parallel=True, cache=True)
def expectation_partials(src, x_mask, z_mask, y_mod4, per, partial):
    """Per (sample, chunk) sums of Re[conj(a_x) * phase * a_(x^x_mask)]."""
    batch = src.shape[0]
    dim = src.shape[1] // 2
    cps = dim // per
    for ch in prange(batch * cps):
        smp = ch // cps
        cidx = ch - smp * cps
        start = cidx * per
        acc = 0.0
        for x in range(start, start + per):
            tgt = x ^ x_mask
            kr = src[smp, 2 * tgt]
            ki = src[smp, 2 * tgt + 1]
            if _parity(tgt & z_mask):
                kr = -kr
                ki = -ki
            if y_mod4 == 1:
                kr, ki = -ki, kr
            elif y_mod4 == 2:
                kr, ki = -kr, -ki
            elif y_mod4 == 3:
                kr, ki = ki, -kr
            acc += src[smp, 2 * x] * kr + src[smp, 2 * x + 1] * ki
        partial[smp, cidx] = acc


@njit(parallel=True, cache=True)
def seed_adjoint_kernel(src, dst, x_mask, z_mask, y_mod4, per):
    """dst_x = 2 * phase(x) * src_(x^x_mask), i.e. dst = 2 O src."""
    batch = src.shape[0]
    dim = src.shape[1] // 2
    cps = dim // per
    for ch in prange(batch * cps):
        smp = ch // cps
        start = (ch - smp * cps) * per
        for x in range(start, start + per):
            tgt = x ^ x_mask
            kr = 2 * src[smp, 2 * tgt]
            ki = 2 * src[smp, 2 * tgt + 1]
            if _parity(tgt & z_mask):
                kr = -kr
                ki = -ki
            if y_mod4 == 1:
                kr, ki = -ki, kr
            elif y_mod4 == 2:
                kr, ki = -kr, -ki
            elif y_mod4 == 3:
                kr, ki = ki, -kr
            dst[smp, 2 * x] = kr
            dst[smp, 2 * x + 1] = ki


@njit(cache=True)
def ordered_row_sums(partial):
    out = np.zeros(partial.shape[0])
    for r in range(partial.shape[0]):
        acc = 0.0
        for c in range(partial.shape[1]):
            acc += partial[r, c]
        out[r] = acc
    return out
