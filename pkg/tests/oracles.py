"""Independent reference computations used by the tests.

Nothing here imports the sampler, model or scoring code: counts are
re-tallied from raw records with plain Python and every density is written
out by hand.
"""

import itertools
import math


def log_gauss(lat, lon, mean, cov):
    a, b, c, d = cov[0][0], cov[0][1], cov[1][0], cov[1][1]
    det = a * d - b * c
    dx, dy = lat - mean[0], lon - mean[1]
    # inverse of [[a, b], [c, d]] is [[d, -b], [-c, a]] / det
    quad = (dx * (d * dx - b * dy) + dy * (-c * dx + a * dy)) / det
    return -math.log(2 * math.pi) - 0.5 * math.log(det) - 0.5 * quad


def _log_polya(rows, dim, prior):
    """Sum over count rows (dicts) of the Dirichlet-multinomial log likelihood."""
    total = 0.0
    if dim == 0:
        return total
    for row in rows:
        n = sum(row.values())
        total += math.lgamma(dim * prior) - math.lgamma(n + dim * prior)
        for cnt in row.values():
            total += math.lgamma(cnt + prior) - math.lgamma(prior)
    return total


def collapsed_log_joint(records, z, s, r, dims, hyper, regions):
    """Log P(words, reviews, items, locations, z, s, r) with multinomials integrated out.

    ``records``: list of (user, item, (lat, lon), content_words, review_words).
    ``dims``: dict with N, V, W, C, K, R, S.  ``hyper``: dict of priors.
    ``regions``: list of (mean, cov) as nested lists.
    """
    N, K, R, S = dims["N"], dims["K"], dims["R"], dims["S"]
    uz = [dict() for _ in range(N)]
    ur = [dict() for _ in range(N)]
    zw = [dict() for _ in range(K)]
    zs = [dict() for _ in range(K)]
    zsc = [dict() for _ in range(K * S)]
    rv = [dict() for _ in range(R)]

    def inc(table, key):
        table[key] = table.get(key, 0) + 1

    loc_term = 0.0
    for i, (u, v, (lat, lon), cw, rw) in enumerate(records):
        inc(uz[u], z[i])
        inc(ur[u], r[i])
        inc(zs[z[i]], s[i])
        inc(rv[r[i]], v)
        for w in cw:
            inc(zw[z[i]], w)
        for c in rw:
            inc(zsc[z[i] * S + s[i]], c)
        mean, cov = regions[r[i]]
        loc_term += log_gauss(lat, lon, mean, cov)
    return (
        _log_polya(uz, K, hyper["alpha"])
        + _log_polya(ur, R, hyper["gamma"])
        + _log_polya(zw, dims["W"], hyper["eta"])
        + _log_polya(zs, S, hyper["delta"])
        + _log_polya(zsc, dims["C"], hyper["beta"])
        + _log_polya(rv, dims["V"], hyper["tau"])
        + loc_term
    )


def _normalize_logs(logs):
    m = max(logs.values())
    w = {k: math.exp(v - m) for k, v in logs.items()}
    tot = sum(w.values())
    return {k: x / tot for k, x in w.items()}


def enumerate_topic_sentiment(records, z, s, r, i, dims, hyper, regions):
    """Normalized P(z_i, s_i | rest) by evaluating the joint for every candidate."""
    logs = {}
    for zz, ss in itertools.product(range(dims["K"]), range(dims["S"])):
        z2, s2 = list(z), list(s)
        z2[i], s2[i] = zz, ss
        logs[(zz, ss)] = collapsed_log_joint(records, z2, s2, r, dims, hyper, regions)
    return _normalize_logs(logs)


def enumerate_region(records, z, s, r, i, dims, hyper, regions):
    logs = {}
    for rr in range(dims["R"]):
        r2 = list(r)
        r2[i] = rr
        logs[rr] = collapsed_log_joint(records, z, s, r2, dims, hyper, regions)
    return _normalize_logs(logs)


def printed_topic_sentiment(records, z, s, i, dims, hyper):
    """The (z, s) conditional product evaluated literally, counts excluding record i.

    Every word occurrence contributes one ratio with counts held fixed.
    """
    K, S, W, C = dims["K"], dims["S"], dims["W"], dims["C"]
    a, e, d, b = hyper["alpha"], hyper["eta"], hyper["delta"], hyper["beta"]
    u_i = records[i][0]
    n_uz = [0] * K
    n_zw = [[0] * W for _ in range(K)]
    n_zs = [[0] * S for _ in range(K)]
    n_zsc = [[[0] * C for _ in range(S)] for _ in range(K)]
    for j, (u, v, loc, cw, rw) in enumerate(records):
        if j == i:
            continue
        if u == u_i:
            n_uz[z[j]] += 1
        n_zs[z[j]][s[j]] += 1
        for w in cw:
            n_zw[z[j]][w] += 1
        for c in rw:
            n_zsc[z[j]][s[j]][c] += 1
    out = {}
    for zz in range(K):
        for ss in range(S):
            p = (n_uz[zz] + a) / sum(n + a for n in n_uz)
            for w in records[i][3]:
                p *= (n_zw[zz][w] + e) / sum(n + e for n in n_zw[zz])
            p *= (n_zs[zz][ss] + d) / sum(n + d for n in n_zs[zz])
            for c in records[i][4]:
                p *= (n_zsc[zz][ss][c] + b) / sum(n + b for n in n_zsc[zz][ss])
            out[(zz, ss)] = p
    tot = sum(out.values())
    return {k: v / tot for k, v in out.items()}


def haversine_by_hand(lat1, lon1, lat2, lon2, radius=6371.0):
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp, dl = p2 - p1, math.radians(lon2 - lon1)
    h = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * radius * math.asin(math.sqrt(h))
