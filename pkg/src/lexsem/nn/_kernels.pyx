# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled recurrent sequence kernels; math identical to lexsem.nn.kernels."""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, tanh

cnp.import_array()


cdef inline double _sig(double v) noexcept nogil:
    cdef double e
    if v >= 0.0:
        return 1.0 / (1.0 + exp(-v))
    e = exp(v)
    return e / (1.0 + e)


def gru_forward(x, Wz, Wr, Wh, Uz, Ur, Uh, bz, br, bh):
    cdef double[:, ::1] xv = np.ascontiguousarray(x)
    cdef double[:, ::1] wz = np.ascontiguousarray(Wz)
    cdef double[:, ::1] wr = np.ascontiguousarray(Wr)
    cdef double[:, ::1] wh = np.ascontiguousarray(Wh)
    cdef double[:, ::1] uz = np.ascontiguousarray(Uz)
    cdef double[:, ::1] ur = np.ascontiguousarray(Ur)
    cdef double[:, ::1] uh = np.ascontiguousarray(Uh)
    cdef double[::1] bzv = np.ascontiguousarray(bz)
    cdef double[::1] brv = np.ascontiguousarray(br)
    cdef double[::1] bhv = np.ascontiguousarray(bh)

    cdef Py_ssize_t T = xv.shape[0]
    cdef Py_ssize_t d = xv.shape[1]
    cdef Py_ssize_t H = bzv.shape[0]

    h_arr = np.zeros((T, H))
    z_arr = np.zeros((T, H))
    r_arr = np.zeros((T, H))
    c_arr = np.zeros((T, H))
    cdef double[:, ::1] h = h_arr
    cdef double[:, ::1] z = z_arr
    cdef double[:, ::1] r = r_arr
    cdef double[:, ::1] c = c_arr

    rh_arr = np.zeros(H)
    cdef double[::1] rh = rh_arr

    cdef Py_ssize_t t, j, p
    cdef double az, ar, ac, hp

    with nogil:
        for t in range(T):
            for j in range(H):
                az = bzv[j]
                ar = brv[j]
                for p in range(d):
                    az += wz[j, p] * xv[t, p]
                    ar += wr[j, p] * xv[t, p]
                if t > 0:
                    for p in range(H):
                        hp = h[t - 1, p]
                        az += uz[j, p] * hp
                        ar += ur[j, p] * hp
                z[t, j] = _sig(az)
                r[t, j] = _sig(ar)
            if t > 0:
                for p in range(H):
                    rh[p] = r[t, p] * h[t - 1, p]
            else:
                for p in range(H):
                    rh[p] = 0.0
            for j in range(H):
                ac = bhv[j]
                for p in range(d):
                    ac += wh[j, p] * xv[t, p]
                for p in range(H):
                    ac += uh[j, p] * rh[p]
                c[t, j] = tanh(ac)
                hp = h[t - 1, j] if t > 0 else 0.0
                h[t, j] = (1.0 - z[t, j]) * hp + z[t, j] * c[t, j]

    return h_arr, (np.asarray(x), h_arr, z_arr, r_arr, c_arr)


def gru_backward(dh, cache, Wz, Wr, Wh, Uz, Ur, Uh):
    x_arr, h_arr, z_arr, r_arr, c_arr = cache
    cdef double[:, ::1] dhv = np.ascontiguousarray(dh)
    cdef double[:, ::1] xv = np.ascontiguousarray(x_arr)
    cdef double[:, ::1] h = np.ascontiguousarray(h_arr)
    cdef double[:, ::1] z = np.ascontiguousarray(z_arr)
    cdef double[:, ::1] r = np.ascontiguousarray(r_arr)
    cdef double[:, ::1] c = np.ascontiguousarray(c_arr)
    cdef double[:, ::1] wz = np.ascontiguousarray(Wz)
    cdef double[:, ::1] wr = np.ascontiguousarray(Wr)
    cdef double[:, ::1] wh = np.ascontiguousarray(Wh)
    cdef double[:, ::1] uz = np.ascontiguousarray(Uz)
    cdef double[:, ::1] ur = np.ascontiguousarray(Ur)
    cdef double[:, ::1] uh = np.ascontiguousarray(Uh)

    cdef Py_ssize_t T = xv.shape[0]
    cdef Py_ssize_t d = xv.shape[1]
    cdef Py_ssize_t H = h.shape[1]

    dx_arr = np.zeros((T, d))
    dWz_arr = np.zeros((H, d)); dWr_arr = np.zeros((H, d)); dWh_arr = np.zeros((H, d))
    dUz_arr = np.zeros((H, H)); dUr_arr = np.zeros((H, H)); dUh_arr = np.zeros((H, H))
    dbz_arr = np.zeros(H); dbr_arr = np.zeros(H); dbh_arr = np.zeros(H)

    cdef double[:, ::1] dx = dx_arr
    cdef double[:, ::1] dWz = dWz_arr
    cdef double[:, ::1] dWr = dWr_arr
    cdef double[:, ::1] dWh = dWh_arr
    cdef double[:, ::1] dUz = dUz_arr
    cdef double[:, ::1] dUr = dUr_arr
    cdef double[:, ::1] dUh = dUh_arr
    cdef double[::1] dbz = dbz_arr
    cdef double[::1] dbr = dbr_arr
    cdef double[::1] dbh = dbh_arr

    carry_arr = np.zeros(H)
    next_carry_arr = np.zeros(H)
    dz_arr = np.zeros(H); dr_arr = np.zeros(H); dc_arr = np.zeros(H); drh_arr = np.zeros(H)
    cdef double[::1] carry = carry_arr
    cdef double[::1] next_carry = next_carry_arr
    cdef double[::1] dz_pre = dz_arr
    cdef double[::1] dr_pre = dr_arr
    cdef double[::1] dc_pre = dc_arr
    cdef double[::1] drh = drh_arr

    cdef Py_ssize_t t, j, p
    cdef double delta, hp, acc

    with nogil:
        for t in range(T - 1, -1, -1):
            for j in range(H):
                hp = h[t - 1, j] if t > 0 else 0.0
                delta = dhv[t, j] + carry[j]
                dz_pre[j] = delta * (c[t, j] - hp) * z[t, j] * (1.0 - z[t, j])
                dc_pre[j] = delta * z[t, j] * (1.0 - c[t, j] * c[t, j])
            for j in range(H):
                acc = 0.0
                for p in range(H):
                    acc += uh[p, j] * dc_pre[p]
                drh[j] = acc
                hp = h[t - 1, j] if t > 0 else 0.0
                dr_pre[j] = acc * hp * r[t, j] * (1.0 - r[t, j])
            for j in range(H):
                delta = dhv[t, j] + carry[j]
                acc = delta * (1.0 - z[t, j]) + drh[j] * r[t, j]
                for p in range(H):
                    acc += uz[p, j] * dz_pre[p] + ur[p, j] * dr_pre[p]
                next_carry[j] = acc
                dbz[j] += dz_pre[j]
                dbr[j] += dr_pre[j]
                dbh[j] += dc_pre[j]
                for p in range(d):
                    dWz[j, p] += dz_pre[j] * xv[t, p]
                    dWr[j, p] += dr_pre[j] * xv[t, p]
                    dWh[j, p] += dc_pre[j] * xv[t, p]
                for p in range(H):
                    hp = h[t - 1, p] if t > 0 else 0.0
                    dUz[j, p] += dz_pre[j] * hp
                    dUr[j, p] += dr_pre[j] * hp
                    dUh[j, p] += dc_pre[j] * r[t, p] * hp
            for j in range(H):
                carry[j] = next_carry[j]
            for p in range(d):
                acc = 0.0
                for j in range(H):
                    acc += wz[j, p] * dz_pre[j] + wr[j, p] * dr_pre[j] + wh[j, p] * dc_pre[j]
                dx[t, p] = acc

    return (dx_arr, dWz_arr, dWr_arr, dWh_arr, dUz_arr, dUr_arr, dUh_arr,
            dbz_arr, dbr_arr, dbh_arr)


def lstm_forward(x, Wi, Wf, Wo, Wg, Ui, Uf, Uo, Ug, bi, bf, bo, bg):
    cdef double[:, ::1] xv = np.ascontiguousarray(x)
    cdef double[:, ::1] wi = np.ascontiguousarray(Wi)
    cdef double[:, ::1] wf = np.ascontiguousarray(Wf)
    cdef double[:, ::1] wo = np.ascontiguousarray(Wo)
    cdef double[:, ::1] wg = np.ascontiguousarray(Wg)
    cdef double[:, ::1] ui = np.ascontiguousarray(Ui)
    cdef double[:, ::1] uf = np.ascontiguousarray(Uf)
    cdef double[:, ::1] uo = np.ascontiguousarray(Uo)
    cdef double[:, ::1] ug = np.ascontiguousarray(Ug)
    cdef double[::1] biv = np.ascontiguousarray(bi)
    cdef double[::1] bfv = np.ascontiguousarray(bf)
    cdef double[::1] bov = np.ascontiguousarray(bo)
    cdef double[::1] bgv = np.ascontiguousarray(bg)

    cdef Py_ssize_t T = xv.shape[0]
    cdef Py_ssize_t d = xv.shape[1]
    cdef Py_ssize_t H = biv.shape[0]

    h_arr = np.zeros((T, H))
    i_arr = np.zeros((T, H)); f_arr = np.zeros((T, H))
    o_arr = np.zeros((T, H)); g_arr = np.zeros((T, H))
    cell_arr = np.zeros((T, H))
    cdef double[:, ::1] h = h_arr
    cdef double[:, ::1] iv = i_arr
    cdef double[:, ::1] fv = f_arr
    cdef double[:, ::1] ov = o_arr
    cdef double[:, ::1] gv = g_arr
    cdef double[:, ::1] cell = cell_arr

    cdef Py_ssize_t t, j, p
    cdef double ai, af, ao, ag, hp, cp

    with nogil:
        for t in range(T):
            for j in range(H):
                ai = biv[j]; af = bfv[j]; ao = bov[j]; ag = bgv[j]
                for p in range(d):
                    ai += wi[j, p] * xv[t, p]
                    af += wf[j, p] * xv[t, p]
                    ao += wo[j, p] * xv[t, p]
                    ag += wg[j, p] * xv[t, p]
                if t > 0:
                    for p in range(H):
                        hp = h[t - 1, p]
                        ai += ui[j, p] * hp
                        af += uf[j, p] * hp
                        ao += uo[j, p] * hp
                        ag += ug[j, p] * hp
                iv[t, j] = _sig(ai)
                fv[t, j] = _sig(af)
                ov[t, j] = _sig(ao)
                gv[t, j] = tanh(ag)
                cp = cell[t - 1, j] if t > 0 else 0.0
                cell[t, j] = fv[t, j] * cp + iv[t, j] * gv[t, j]
                h[t, j] = ov[t, j] * tanh(cell[t, j])

    return h_arr, (np.asarray(x), h_arr, i_arr, f_arr, o_arr, g_arr, cell_arr)


def lstm_backward(dh, cache, Wi, Wf, Wo, Wg, Ui, Uf, Uo, Ug):
    x_arr, h_arr, i_arr, f_arr, o_arr, g_arr, cell_arr = cache
    cdef double[:, ::1] dhv = np.ascontiguousarray(dh)
    cdef double[:, ::1] xv = np.ascontiguousarray(x_arr)
    cdef double[:, ::1] h = np.ascontiguousarray(h_arr)
    cdef double[:, ::1] iv = np.ascontiguousarray(i_arr)
    cdef double[:, ::1] fv = np.ascontiguousarray(f_arr)
    cdef double[:, ::1] ov = np.ascontiguousarray(o_arr)
    cdef double[:, ::1] gv = np.ascontiguousarray(g_arr)
    cdef double[:, ::1] cell = np.ascontiguousarray(cell_arr)
    cdef double[:, ::1] wi = np.ascontiguousarray(Wi)
    cdef double[:, ::1] wf = np.ascontiguousarray(Wf)
    cdef double[:, ::1] wo = np.ascontiguousarray(Wo)
    cdef double[:, ::1] wg = np.ascontiguousarray(Wg)
    cdef double[:, ::1] ui = np.ascontiguousarray(Ui)
    cdef double[:, ::1] uf = np.ascontiguousarray(Uf)
    cdef double[:, ::1] uo = np.ascontiguousarray(Uo)
    cdef double[:, ::1] ug = np.ascontiguousarray(Ug)

    cdef Py_ssize_t T = xv.shape[0]
    cdef Py_ssize_t d = xv.shape[1]
    cdef Py_ssize_t H = h.shape[1]

    dx_arr = np.zeros((T, d))
    dWi_arr = np.zeros((H, d)); dWf_arr = np.zeros((H, d))
    dWo_arr = np.zeros((H, d)); dWg_arr = np.zeros((H, d))
    dUi_arr = np.zeros((H, H)); dUf_arr = np.zeros((H, H))
    dUo_arr = np.zeros((H, H)); dUg_arr = np.zeros((H, H))
    dbi_arr = np.zeros(H); dbf_arr = np.zeros(H)
    dbo_arr = np.zeros(H); dbg_arr = np.zeros(H)

    cdef double[:, ::1] dx = dx_arr
    cdef double[:, ::1] dWi = dWi_arr
    cdef double[:, ::1] dWf = dWf_arr
    cdef double[:, ::1] dWo = dWo_arr
    cdef double[:, ::1] dWg = dWg_arr
    cdef double[:, ::1] dUi = dUi_arr
    cdef double[:, ::1] dUf = dUf_arr
    cdef double[:, ::1] dUo = dUo_arr
    cdef double[:, ::1] dUg = dUg_arr
    cdef double[::1] dbi = dbi_arr
    cdef double[::1] dbf = dbf_arr
    cdef double[::1] dbo = dbo_arr
    cdef double[::1] dbg = dbg_arr

    carry_h_arr = np.zeros(H); carry_c_arr = np.zeros(H)
    di_a = np.zeros(H); df_a = np.zeros(H); do_a = np.zeros(H); dg_a = np.zeros(H)
    cdef double[::1] carry_h = carry_h_arr
    cdef double[::1] carry_c = carry_c_arr
    cdef double[::1] di_pre = di_a
    cdef double[::1] df_pre = df_a
    cdef double[::1] do_pre = do_a
    cdef double[::1] dg_pre = dg_a

    cdef Py_ssize_t t, j, p
    cdef double delta, tc, dc, hp, cp, acc

    with nogil:
        for t in range(T - 1, -1, -1):
            for j in range(H):
                cp = cell[t - 1, j] if t > 0 else 0.0
                delta = dhv[t, j] + carry_h[j]
                tc = tanh(cell[t, j])
                do_pre[j] = delta * tc * ov[t, j] * (1.0 - ov[t, j])
                dc = carry_c[j] + delta * ov[t, j] * (1.0 - tc * tc)
                di_pre[j] = dc * gv[t, j] * iv[t, j] * (1.0 - iv[t, j])
                df_pre[j] = dc * cp * fv[t, j] * (1.0 - fv[t, j])
                dg_pre[j] = dc * iv[t, j] * (1.0 - gv[t, j] * gv[t, j])
                carry_c[j] = dc * fv[t, j]
            for j in range(H):
                acc = 0.0
                for p in range(H):
                    acc += (ui[p, j] * di_pre[p] + uf[p, j] * df_pre[p]
                            + uo[p, j] * do_pre[p] + ug[p, j] * dg_pre[p])
                carry_h[j] = acc
            for j in range(H):
                dbi[j] += di_pre[j]
                dbf[j] += df_pre[j]
                dbo[j] += do_pre[j]
                dbg[j] += dg_pre[j]
                for p in range(d):
                    dWi[j, p] += di_pre[j] * xv[t, p]
                    dWf[j, p] += df_pre[j] * xv[t, p]
                    dWo[j, p] += do_pre[j] * xv[t, p]
                    dWg[j, p] += dg_pre[j] * xv[t, p]
                for p in range(H):
                    hp = h[t - 1, p] if t > 0 else 0.0
                    dUi[j, p] += di_pre[j] * hp
                    dUf[j, p] += df_pre[j] * hp
                    dUo[j, p] += do_pre[j] * hp
                    dUg[j, p] += dg_pre[j] * hp
            for p in range(d):
                acc = 0.0
                for j in range(H):
                    acc += (wi[j, p] * di_pre[j] + wf[j, p] * df_pre[j]
                            + wo[j, p] * do_pre[j] + wg[j, p] * dg_pre[j])
                dx[t, p] = acc

    return (dx_arr, dWi_arr, dWf_arr, dWo_arr, dWg_arr,
            dUi_arr, dUf_arr, dUo_arr, dUg_arr,
            dbi_arr, dbf_arr, dbo_arr, dbg_arr)
