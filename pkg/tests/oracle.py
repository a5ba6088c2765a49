"""Offline reference pipeline for cross-checking the streaming engine.

Works on whole arrays: sort every window, interpolate the quantile, take
differences with array slicing, then scan batches recomputing statistics from
the retained values at every step. Shares no code with the package apart
from configuration objects.
"""

import math

import numpy as np
from scipy import stats as sps

ORDER = ("tangential", "feed", "thrust")


def type7(sorted_vals, p):
    n = len(sorted_vals)
    h = p * (n - 1)
    lo = math.floor(h)
    hi = min(lo + 1, n - 1)
    return sorted_vals[lo] + (h - lo) * (sorted_vals[hi] - sorted_vals[lo])


def offline_q90(forces, window_len):
    m = forces.shape[0] // window_len
    out = np.empty((m, forces.shape[1]))
    for j in range(m):
        for c in range(forces.shape[1]):
            w = sorted(abs(v) for v in forces[j * window_len:(j + 1) * window_len, c])
            out[j, c] = type7(w, 0.9)
    return out


def offline_diffs(q90, mode, diff, channels=ORDER):
    """Channel -> (d, f) arrays over the whole run."""
    if mode == "multivariate":
        x = q90[:, :2]
        back = np.sqrt(((x[1:] - x[:-1]) ** 2).sum(axis=1))
        if diff == "FOD":
            return {"fused": (back, np.abs(x[1:]).mean(axis=1))}
        fwd = np.sqrt(((x[:-1] - x[1:]) ** 2).sum(axis=1))
        d = np.minimum(back[:-1], fwd[1:])
        return {"fused": (d, np.abs(x[1:-1]).mean(axis=1))}
    out = {}
    for ch in ORDER:
        if ch not in channels:
            continue
        x = q90[:, ORDER.index(ch)]
        if diff == "FOD":
            out[ch] = (x[1:] - x[:-1], x[1:])
        else:
            d = []
            for i in range(1, len(x) - 1):
                b, f = x[i] - x[i - 1], x[i] - x[i + 1]
                d.append(b if abs(b) <= abs(f) else f)
            out[ch] = (np.asarray(d), x[1:-1])
    return out


def _rank_signed(d, r):
    order = sorted(range(len(d)), key=lambda i: -abs(d[i]))
    return d[order[r - 1]]


def _test(cfg, d, acc):
    ddof = 0 if cfg.variance_denominator == "n" else 1
    n = len(acc)
    w = cfg.omega
    if cfg.method == "SPC":
        if n == 0:
            return "not_ready"
        fbar = float(np.mean(np.abs(acc)))
        mags = sorted((abs(v) for v in d), reverse=True)
        rules = [(mags[0], 3), (mags[1], 2), (mags[3], 1), (mags[5], 0)]
        ok = [m > (1.128 + k * w * 0.8525) * fbar / 1.128 for m, k in rules]
        ok = [o for o, on in zip(ok, cfg.spc_rules) if on]
        return "anomalous" if all(ok) else "clean"
    if cfg.method == "CHI2":
        var = float(np.var(acc, ddof=ddof)) if n > ddof else 0.0
        if n == 0 or var <= 0:
            return "not_ready"
        mean = float(np.mean(acc))
        ok = [(mean - _rank_signed(d, r)) ** 2 / var > (k * w) ** 2 for r, k in ((1, 3), (2, 2), (4, 1))]
        ok = [o for o, on in zip(ok, cfg.chi2_rules) if on]
        return "anomalous" if all(ok) else "clean"
    if n - 5 < 1:
        return "not_ready"
    mean = float(np.mean(acc))
    sd = float(np.std(acc, ddof=ddof)) if n > ddof else 0.0
    ok = []
    for r, k, off in ((1, 3, 2), (2, 2, 3), (4, 1, 5)):
        nr = n - off
        p = 2 * sps.norm.sf(k) / n
        t = sps.t.isf(p, nr)
        lam = (nr + 1) / math.sqrt(nr + 2) * math.sqrt(w * w * t * t / (nr + w * w * t * t)) * sd
        ok.append(abs(_rank_signed(d, r) - mean) > lam)
    return "anomalous" if all(ok) else "clean"


def offline_scan(diffs, cfg):
    """Return ([(second, channel, status)], t_hat, channel) up to the first anomaly."""
    L = cfg.batch_len
    cap = None if cfg.scheme == "RO" else int(round(cfg.window_s * L))
    chans = list(diffs)
    nb = min(len(diffs[c][0]) // L for c in chans)
    acc = {c: [] for c in chans}
    seq = []
    for k in range(1, nb + 1):
        fired = None
        for c in chans:
            d = list(diffs[c][0][(k - 1) * L:k * L])
            f = diffs[c][1][(k - 1) * L:k * L]
            gate = max(abs(v) for v in d) > cfg.gate_d or max(abs(v) for v in f) > cfg.gate_f
            if k <= cfg.warmup_batches:
                status = "not_ready"
            elif not gate:
                status = "clean"
            else:
                status = _test(cfg, d, acc[c])
            seq.append((k, c, status))
            if status == "anomalous":
                fired = fired or c
            else:
                acc[c].extend(d)
                if cap is not None and len(acc[c]) > cap:
                    del acc[c][:len(acc[c]) - cap]
        if fired:
            return seq, float(k), fired
    return seq, None, None


def offline_monitor(arr, cfg, window_len):
    q90 = offline_q90(arr[:, 1:], window_len)
    need = 2 if cfg.diff == "FOD" else 3
    if q90.shape[0] < need:
        return [], None, None
    return offline_scan(offline_diffs(q90, cfg.mode, cfg.diff, cfg.channels), cfg)
