"""Numba kernels for the sampler hot paths.

All randomness inside these kernels goes through numba's internal
np.random state, seeded once per chain via :func:`seed_rng`, which keeps
chains bit-reproducible and lets the whole sweep run without Python
overhead.  Matrix sizes here are small (coefficient blocks, m-neighbor
systems), so the Cholesky routines are hand-rolled to avoid per-call
allocations.
"""

import math

import numpy as np
from numba import njit

TRUNC = 0.64  # Jacobi-density split point for the PG sampler


@njit(cache=True)
def seed_rng(seed):
    np.random.seed(seed)


# --- scalar helpers ---------------------------------------------------------

@njit(cache=True, inline="always")
def log1p_exp(x):
    """log(1 + e^x), stable for large |x|."""
    if x > 35.0:
        return x
    if x < -35.0:
        return math.exp(x)
    return math.log1p(math.exp(x))


@njit(cache=True, inline="always")
def sigmoid(x):
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


@njit(cache=True, inline="always")
def _log_norm_cdf(x):
    if x > -8.0:
        return math.log(0.5 * math.erfc(-x * 0.7071067811865476))
    x2 = x * x
    return -0.5 * x2 - 0.9189385332046727 - math.log(-x) + math.log1p(
        -1.0 / x2 + 3.0 / (x2 * x2))


# --- exact Polya-Gamma PG(1, c) sampler --------------------------------------
# Alternating-series rejection sampler on the Jacobi density; the proposal
# mixes a truncated inverse-Gaussian left piece and an exponential tail.

@njit(cache=True, inline="always")
def _a_coef(n, x):
    k = n + 0.5
    if x <= TRUNC:
        return math.pi * k * math.pow(2.0 / (math.pi * x), 1.5) * math.exp(
            -2.0 * k * k / x)
    return math.pi * k * math.exp(-0.5 * x * math.pi * math.pi * k * k)


@njit(cache=True)
def _mass_texpon(z, fz):
    """Probability of proposing from the exponential tail piece."""
    t = TRUNC
    sti = 1.0 / math.sqrt(t)
    b = sti * (t * z - 1.0)
    a = -sti * (t * z + 1.0)
    x0 = math.log(fz) + fz * t
    xb = x0 - z + _log_norm_cdf(b)
    xa = x0 + z + _log_norm_cdf(a)
    qdivp = 4.0 / math.pi * (math.exp(xb) + math.exp(xa))
    return 1.0 / (1.0 + qdivp)


@njit(cache=True)
def _rtigauss(z):
    """Inverse-Gaussian(1/z, 1) draw truncated to (0, TRUNC]."""
    t = TRUNC
    if z < 1.0 / t:  # mu > t: rejection from a truncated Levy proposal
        while True:
            e1 = np.random.exponential(1.0)
            e2 = np.random.exponential(1.0)
            while e1 * e1 > 2.0 * e2 / t:
                e1 = np.random.exponential(1.0)
                e2 = np.random.exponential(1.0)
            x = t / ((1.0 + t * e1) * (1.0 + t * e1))
            if np.random.random() <= math.exp(-0.5 * z * z * x):
                return x
    else:
        mu = 1.0 / z
        while True:
            y = np.random.standard_normal()
            y = y * y
            mu_y = mu * y
            x = mu + 0.5 * mu * mu_y - 0.5 * mu * math.sqrt(4.0 * mu_y + mu_y * mu_y)
            if np.random.random() > mu / (mu + x):
                x = mu * mu / x
            if x <= t:
                return x


@njit(cache=True)
def pg_draw(c):
    """One exact draw from PG(1, c)."""
    z = 0.5 * abs(c)
    fz = 0.125 * math.pi * math.pi + 0.5 * z * z
    p_exp = _mass_texpon(z, fz)
    while True:
        if np.random.random() < p_exp:
            x = TRUNC + np.random.exponential(1.0) / fz
        else:
            x = _rtigauss(z)
        s = _a_coef(0, x)
        y = np.random.random() * s
        n = 0
        while True:
            n += 1
            if n % 2 == 1:
                s -= _a_coef(n, x)
                if y <= s:
                    return 0.25 * x
            else:
                s += _a_coef(n, x)
                if y > s:
                    break


@njit(cache=True)
def pg_draw_vec(c, out):
    for i in range(c.shape[0]):
        out[i] = pg_draw(c[i])


@njit(cache=True)
def pg_draw_masked(c, active, out):
    for i in range(c.shape[0]):
        if active[i]:
            out[i] = pg_draw(c[i])


# --- small dense Cholesky ----------------------------------------------------

@njit(cache=True)
def _chol_in_place(a, n):
    """Lower Cholesky of the leading n x n block; 1 on failure."""
    for i in range(n):
        for j in range(i):
            s = a[i, j]
            for k in range(j):
                s -= a[i, k] * a[j, k]
            a[i, j] = s / a[j, j]
        s = a[i, i]
        for k in range(i):
            s -= a[i, k] * a[i, k]
        if s <= 0.0:
            return 1
        a[i, i] = math.sqrt(s)
    return 0


@njit(cache=True)
def _chol_solve(l, b, n):
    """Solve L L^T x = b in place (b becomes x)."""
    for i in range(n):
        s = b[i]
        for k in range(i):
            s -= l[i, k] * b[k]
        b[i] = s / l[i, i]
    for i in range(n - 1, -1, -1):
        s = b[i]
        for k in range(i + 1, n):
            s -= l[k, i] * b[k]
        b[i] = s / l[i, i]


@njit(cache=True)
def _chol_draw(l, mean, n, out):
    """out = mean + L^{-T} eta with eta ~ N(0, I)."""
    for i in range(n):
        out[i] = np.random.standard_normal()
    for i in range(n - 1, -1, -1):
        s = out[i]
        for k in range(i + 1, n):
            s -= l[k, i] * out[k]
        out[i] = s / l[i, i]
    for i in range(n):
        out[i] += mean[i]


@njit(cache=True)
def gaussian_block_draw(x, pseudo, omega, active, prior_prec, prior_mean,
                        a_buf, rhs_buf, out):
    """Draw from N(A^{-1} rhs, A^{-1}), A = X'(Omega)X + P0 over active rows.

    pseudo carries kappa - omega * offset per row; returns 1 if the
    conditional precision is not positive definite.
    """
    n, p = x.shape
    for i in range(p):
        rhs_buf[i] = prior_prec[i] * prior_mean[i]
        for j in range(p):
            a_buf[i, j] = 0.0
        a_buf[i, i] = prior_prec[i]
    for r in range(n):
        if active[r]:
            w = omega[r]
            ps = pseudo[r]
            for i in range(p):
                xi = x[r, i]
                if xi != 0.0:
                    rhs_buf[i] += ps * xi
                    wxi = w * xi
                    for j in range(i + 1):
                        a_buf[i, j] += wxi * x[r, j]
    if _chol_in_place(a_buf, p) != 0:
        return 1
    _chol_solve(a_buf, rhs_buf, p)
    _chol_draw(a_buf, rhs_buf, p, out)
    return 0


# --- latent occupancy state ---------------------------------------------------

@njit(cache=True)
def update_z_kernel(occ_logit, det_logit, rep_ptr, any_det, z):
    for u in range(occ_logit.shape[0]):
        if any_det[u]:
            z[u] = 1
            continue
        lp1 = -log1p_exp(-occ_logit[u])
        for r in range(rep_ptr[u], rep_ptr[u + 1]):
            lp1 -= log1p_exp(det_logit[r])
        lp0 = -log1p_exp(occ_logit[u])
        m = lp1 if lp1 > lp0 else lp0
        e1 = math.exp(lp1 - m)
        pr = e1 / (e1 + math.exp(lp0 - m))
        z[u] = 1 if np.random.random() < pr else 0


@njit(cache=True)
def draw_bernoulli_logit(logits, out):
    for i in range(logits.shape[0]):
        out[i] = 1 if np.random.random() < sigmoid(logits[i]) else 0


@njit(cache=True)
def pointwise_ll_kernel(occ_logit, det_logit, rep_ptr, rep_y, any_det, out):
    """Site-season log likelihood with the latent state summed out."""
    for u in range(occ_logit.shape[0]):
        s = -log1p_exp(-occ_logit[u])
        for r in range(rep_ptr[u], rep_ptr[u + 1]):
            if rep_y[r] == 1:
                s -= log1p_exp(-det_logit[r])
            else:
                s -= log1p_exp(det_logit[r])
        if any_det[u]:
            out[u] = s
        else:
            l0 = -log1p_exp(occ_logit[u])
            m = s if s > l0 else l0
            out[u] = m + math.log(math.exp(s - m) + math.exp(l0 - m))


# --- NNGP geometry and weights -------------------------------------------------

@njit(cache=True)
def nearest_prev_neighbors(coords, m, nbr, nbr_count):
    """Up to m nearest previously-ordered sites; ties keep the smaller index."""
    n = coords.shape[0]
    bd = np.empty(m)
    bi = np.empty(m, np.int64)
    for i in range(n):
        c = m if i > m else i
        nbr_count[i] = c
        if c == 0:
            continue
        cnt = 0
        worst = np.inf
        for q in range(i):
            dx = coords[i, 0] - coords[q, 0]
            dy = coords[i, 1] - coords[q, 1]
            d = dx * dx + dy * dy
            if cnt < c:
                pos = cnt
                while pos > 0 and bd[pos - 1] > d:
                    bd[pos] = bd[pos - 1]
                    bi[pos] = bi[pos - 1]
                    pos -= 1
                bd[pos] = d
                bi[pos] = q
                cnt += 1
                worst = bd[cnt - 1]
            elif d < worst:
                pos = c - 1
                while pos > 0 and bd[pos - 1] > d:
                    bd[pos] = bd[pos - 1]
                    bi[pos] = bi[pos - 1]
                    pos -= 1
                bd[pos] = d
                bi[pos] = q
                worst = bd[c - 1]
        for a in range(c):
            nbr[i, a] = bi[a]


@njit(cache=True)
def nngp_weights_kernel(nbr_dmat, nbr_dvec, nbr_count, phi, b_out, ftilde_out,
                        r_buf, v_buf):
    """Conditional weights b_j and unit-variance f~_j for decay phi."""
    n = nbr_dvec.shape[0]
    for i in range(n):
        c = nbr_count[i]
        ftilde_out[i] = 1.0
        if c == 0:
            continue
        for a in range(c):
            v_buf[a] = math.exp(-phi * nbr_dvec[i, a])
            for q in range(a):
                r_buf[a, q] = math.exp(-phi * nbr_dmat[i, a, q])
            r_buf[a, a] = 1.0
        if _chol_in_place(r_buf, c) != 0:
            return 1
        _chol_solve(r_buf, v_buf, c)
        dot = 0.0
        for a in range(c):
            b_out[i, a] = v_buf[a]
            dot += v_buf[a] * math.exp(-phi * nbr_dvec[i, a])
        f = 1.0 - dot
        if f <= 0.0:
            return 1
        ftilde_out[i] = f
    return 0


@njit(cache=True)
def nngp_quad_logdet(w, site_of_ord, nbr, nbr_count, b, ftilde):
    """Sum of squared conditional residuals / f~ and sum of log f~."""
    quad = 0.0
    logdet = 0.0
    for i in range(w.shape[0]):
        pred = 0.0
        for a in range(nbr_count[i]):
            pred += b[i, a] * w[site_of_ord[nbr[i, a]]]
        r = w[site_of_ord[i]] - pred
        quad += r * r / ftilde[i]
        logdet += math.log(ftilde[i])
    return quad, logdet


@njit(cache=True)
def nngp_simulate_kernel(site_of_ord, nbr, nbr_count, b, f, out):
    for i in range(out.shape[0]):
        mean = 0.0
        for a in range(nbr_count[i]):
            mean += b[i, a] * out[site_of_ord[nbr[i, a]]]
        out[site_of_ord[i]] = mean + math.sqrt(f[i]) * np.random.standard_normal()


@njit(cache=True)
def gp_surface_sweep_kernel(w, site_of_ord, nbr, nbr_count, b, ftilde, sigma2,
                            child_ptr, child_ord, child_slot, unit_ptr,
                            aweight, omega, kappa, lin_total, moments):
    """Sequential full-conditional update of one GP surface.

    lin_total holds the complete occurrence logit per sampled unit and is
    kept in sync as sites are redrawn; moments records each site's
    conditional (mean, variance) from this sweep.
    """
    n = w.shape[0]
    for i in range(n):
        j = site_of_ord[i]
        f_i = sigma2 * ftilde[i]
        mu0 = 0.0
        for a in range(nbr_count[i]):
            mu0 += b[i, a] * w[site_of_ord[nbr[i, a]]]
        prec = 1.0 / f_i
        lin = mu0 / f_i
        for e in range(child_ptr[i], child_ptr[i + 1]):
            ic = child_ord[e]
            k = child_slot[e]
            f_c = sigma2 * ftilde[ic]
            bk = b[ic, k]
            pred_other = 0.0
            for a in range(nbr_count[ic]):
                if a != k:
                    pred_other += b[ic, a] * w[site_of_ord[nbr[ic, a]]]
            resid = w[site_of_ord[ic]] - pred_other
            prec += bk * bk / f_c
            lin += bk * resid / f_c
        for e in range(unit_ptr[j], unit_ptr[j + 1]):
            a_u = aweight[e]
            if a_u != 0.0:
                off = lin_total[e] - a_u * w[j]
                prec += omega[e] * a_u * a_u
                lin += a_u * (kappa[e] - omega[e] * off)
        var = 1.0 / prec
        mean = lin * var
        new = mean + math.sqrt(var) * np.random.standard_normal()
        delta = new - w[j]
        w[j] = new
        for e in range(unit_ptr[j], unit_ptr[j + 1]):
            lin_total[e] += aweight[e] * delta
        moments[j, 0] = mean
        moments[j, 1] = var


@njit(cache=True)
def draw_inverse_gamma(shape, scale):
    return scale / np.random.gamma(shape, 1.0)


@njit(cache=True)
def update_phi_kernel(w, site_of_ord, nbr, nbr_count, nbr_dmat, nbr_dvec,
                      b, ftilde, sigma2, phi, lo, hi, prop_sd,
                      b_prop, f_prop, r_buf, v_buf):
    """Random-walk Metropolis on the logit of the range-normalized decay.

    Returns (phi, accepted); on acceptance b/ftilde are overwritten with
    the proposal's weights.
    """
    if hi - lo <= 0.0:
        return phi, 0
    quad, logdet = nngp_quad_logdet(w, site_of_ord, nbr, nbr_count, b, ftilde)
    ll_cur = -0.5 * (logdet + quad / sigma2)
    u = (phi - lo) / (hi - lo)
    g = math.log(u / (1.0 - u))
    g_prop = g + prop_sd * np.random.standard_normal()
    phi_prop = lo + (hi - lo) * sigmoid(g_prop)
    if phi_prop <= lo or phi_prop >= hi:
        return phi, 0
    if nngp_weights_kernel(nbr_dmat, nbr_dvec, nbr_count, phi_prop,
                           b_prop, f_prop, r_buf, v_buf) != 0:
        return phi, 0
    quad_p, logdet_p = nngp_quad_logdet(w, site_of_ord, nbr, nbr_count,
                                        b_prop, f_prop)
    ll_prop = -0.5 * (logdet_p + quad_p / sigma2)
    jac_cur = -log1p_exp(-g) - log1p_exp(g)
    jac_prop = -log1p_exp(-g_prop) - log1p_exp(g_prop)
    if math.log(np.random.random()) < (ll_prop + jac_prop) - (ll_cur + jac_cur):
        n, m = b.shape
        for i in range(n):
            ftilde[i] = f_prop[i]
            for a in range(m):
                b[i, a] = b_prop[i, a]
        return phi_prop, 1
    return phi, 0


# --- AR(1) year effect ---------------------------------------------------------

@njit(cache=True)
def _ar1_quad(eta, rho):
    """eta' R(rho)^{-1} eta for the stationary AR(1) correlation matrix."""
    t = eta.shape[0]
    if t == 1:
        return eta[0] * eta[0]
    s_end = eta[0] * eta[0] + eta[t - 1] * eta[t - 1]
    s_mid = 0.0
    for i in range(1, t - 1):
        s_mid += eta[i] * eta[i]
    s_lag = 0.0
    for i in range(t - 1):
        s_lag += eta[i] * eta[i + 1]
    return (s_end + (1.0 + rho * rho) * s_mid - 2.0 * rho * s_lag) / (1.0 - rho * rho)


@njit(cache=True)
def update_eta_kernel(eta, rho, sig2_eta, unit_season, omega, kappa, lin_total,
                      prec_buf, rhs_buf, out_buf):
    """Joint Gaussian draw of the per-season effects."""
    t = eta.shape[0]
    for a in range(t):
        rhs_buf[a] = 0.0
        for q in range(t):
            prec_buf[a, q] = 0.0
    # prior tridiagonal precision
    c = 1.0 / (sig2_eta * (1.0 - rho * rho)) if t > 1 else 1.0 / sig2_eta
    for a in range(t):
        d = 1.0
        if t > 1 and 0 < a < t - 1:
            d = 1.0 + rho * rho
        prec_buf[a, a] = c * d
    for a in range(t - 1):
        prec_buf[a + 1, a] = -c * rho
        prec_buf[a, a + 1] = -c * rho
    for u in range(unit_season.shape[0]):
        s = unit_season[u]
        off = lin_total[u] - eta[s]
        prec_buf[s, s] += omega[u]
        rhs_buf[s] += kappa[u] - omega[u] * off
    if _chol_in_place(prec_buf, t) != 0:
        return 1
    _chol_solve(prec_buf, rhs_buf, t)
    _chol_draw(prec_buf, rhs_buf, t, out_buf)
    for u in range(unit_season.shape[0]):
        lin_total[u] += out_buf[unit_season[u]] - eta[unit_season[u]]
    for a in range(t):
        eta[a] = out_buf[a]
    return 0


@njit(cache=True)
def update_rho_kernel(eta, rho, sig2_eta, prop_sd):
    t = eta.shape[0]
    rho_prop = rho + prop_sd * np.random.standard_normal()
    if rho_prop <= -1.0 or rho_prop >= 1.0:
        return rho, 0
    ll_cur = -0.5 * ((t - 1) * math.log(1.0 - rho * rho)
                     + _ar1_quad(eta, rho) / sig2_eta)
    ll_prop = -0.5 * ((t - 1) * math.log(1.0 - rho_prop * rho_prop)
                      + _ar1_quad(eta, rho_prop) / sig2_eta)
    if math.log(np.random.random()) < ll_prop - ll_cur:
        return rho_prop, 1
    return rho, 0
