"""Compiled inner loops of the collapsed Gibbs sampler.

All conditionals are evaluated in log space.  The Python-facing
functions in :mod:`lsars.sampler` call the same kernels, so the sweep and
the inspectable conditionals cannot drift apart.
"""

import numpy as np
from numba import njit

_LOG_2PI = np.log(2.0 * np.pi)


@njit(cache=True)
def log_topic_sentiment(out, i, rec_user, cw_ptr, cw_idx, rw_ptr, rw_idx,
                        n_uz, n_u, n_zw, n_z_words, n_zs, n_z_recs, n_zsc, n_zs_words,
                        alpha, eta, delta, beta):
    """Fill ``out[z, s]`` with the log of the (z, s) conditional for record i.

    Each content/review word contributes one factor with the counts held
    fixed (repeated tokens contribute repeatedly).
    """
    K, S = out.shape
    W = n_zw.shape[1]
    C = n_zsc.shape[2]
    u = rec_user[i]
    user_norm = np.log(n_u[u] + K * alpha)
    for z in range(K):
        base = np.log(n_uz[u, z] + alpha) - user_norm
        word_norm = np.log(n_z_words[z] + W * eta)
        for p in range(cw_ptr[i], cw_ptr[i + 1]):
            base += np.log(n_zw[z, cw_idx[p]] + eta) - word_norm
        sent_norm = np.log(n_z_recs[z] + S * delta)
        for s in range(S):
            val = base + np.log(n_zs[z, s] + delta) - sent_norm
            rev_norm = np.log(n_zs_words[z, s] + C * beta)
            for p in range(rw_ptr[i], rw_ptr[i + 1]):
                val += np.log(n_zsc[z, s, rw_idx[p]] + beta) - rev_norm
            out[z, s] = val


@njit(cache=True)
def log_region(out, i, rec_user, rec_item, loc, n_ur, n_u, n_rv, n_r,
               gamma, tau, means, inv_covs, log_norms):
    """Fill ``out[r]`` with the log of the region conditional for record i."""
    R = out.shape[0]
    V = n_rv.shape[1]
    u = rec_user[i]
    v = rec_item[i]
    user_norm = np.log(n_u[u] + R * gamma)
    for r in range(R):
        dx = loc[i, 0] - means[r, 0]
        dy = loc[i, 1] - means[r, 1]
        quad = (dx * (inv_covs[r, 0, 0] * dx + inv_covs[r, 0, 1] * dy)
                + dy * (inv_covs[r, 1, 0] * dx + inv_covs[r, 1, 1] * dy))
        out[r] = (np.log(n_ur[u, r] + gamma) - user_norm
                  + np.log(n_rv[r, v] + tau) - np.log(n_r[r] + V * tau)
                  + log_norms[r] - 0.5 * quad)


@njit(cache=True)
def update_topic_sentiment(i, z, s, delta_count, rec_user, cw_ptr, cw_idx, rw_ptr, rw_idx,
                           n_uz, n_zw, n_z_words, n_zs, n_z_recs, n_zsc, n_zs_words):
    u = rec_user[i]
    n_uz[u, z] += delta_count
    n_zs[z, s] += delta_count
    n_z_recs[z] += delta_count
    for p in range(cw_ptr[i], cw_ptr[i + 1]):
        n_zw[z, cw_idx[p]] += delta_count
        n_z_words[z] += delta_count
    for p in range(rw_ptr[i], rw_ptr[i + 1]):
        n_zsc[z, s, rw_idx[p]] += delta_count
        n_zs_words[z, s] += delta_count


@njit(cache=True)
def update_region(i, r, delta_count, rec_user, rec_item, n_ur, n_rv, n_r):
    n_ur[rec_user[i], r] += delta_count
    n_rv[r, rec_item[i]] += delta_count
    n_r[r] += delta_count


@njit(cache=True)
def sample_log(logw, u):
    """Index drawn from weights ``exp(logw)`` using the uniform variate ``u``."""
    m = logw[0]
    for j in range(1, logw.shape[0]):
        if logw[j] > m:
            m = logw[j]
    total = 0.0
    for j in range(logw.shape[0]):
        total += np.exp(logw[j] - m)
    target = u * total
    acc = 0.0
    for j in range(logw.shape[0]):
        acc += np.exp(logw[j] - m)
        if acc > target:
            return j
    return logw.shape[0] - 1


@njit(cache=True)
def sweep(uniforms, z_assign, s_assign, r_assign,
          rec_user, rec_item, loc, cw_ptr, cw_idx, rw_ptr, rw_idx,
          n_uz, n_u, n_zw, n_z_words, n_zs, n_z_recs, n_zsc, n_zs_words,
          n_ur, n_rv, n_r,
          alpha, eta, delta, beta, gamma, tau,
          means, inv_covs, log_norms):
    """One pass over all records: (z, s) jointly, then r, per record."""
    n = rec_user.shape[0]
    K, S = n_zs.shape
    R = n_r.shape[0]
    zs_table = np.empty((K, S))
    r_table = np.empty(R)
    for i in range(n):
        u = rec_user[i]
        # ``n_u`` is the per-user total; hold it at |D_u| - 1 while excluded
        update_topic_sentiment(i, z_assign[i], s_assign[i], -1, rec_user, cw_ptr, cw_idx,
                               rw_ptr, rw_idx, n_uz, n_zw, n_z_words, n_zs, n_z_recs,
                               n_zsc, n_zs_words)
        n_u[u] -= 1
        log_topic_sentiment(zs_table, i, rec_user, cw_ptr, cw_idx, rw_ptr, rw_idx,
                            n_uz, n_u, n_zw, n_z_words, n_zs, n_z_recs, n_zsc, n_zs_words,
                            alpha, eta, delta, beta)
        flat = sample_log(zs_table.ravel(), uniforms[2 * i])
        z_new = flat // S
        s_new = flat % S
        update_topic_sentiment(i, z_new, s_new, 1, rec_user, cw_ptr, cw_idx,
                               rw_ptr, rw_idx, n_uz, n_zw, n_z_words, n_zs, n_z_recs,
                               n_zsc, n_zs_words)
        z_assign[i] = z_new
        s_assign[i] = s_new

        update_region(i, r_assign[i], -1, rec_user, rec_item, n_ur, n_rv, n_r)
        log_region(r_table, i, rec_user, rec_item, loc, n_ur, n_u, n_rv, n_r,
                   gamma, tau, means, inv_covs, log_norms)
        r_new = sample_log(r_table, uniforms[2 * i + 1])
        update_region(i, r_new, 1, rec_user, rec_item, n_ur, n_rv, n_r)
        r_assign[i] = r_new
        n_u[u] += 1
