"""Regenerate closed_form.json with 50-digit arithmetic (mpmath).

Independent of the Rust code path: evaluates the closed-form rate
expressions directly from their definitions. SNR is E_s / sigma2 with
sigma2 the total complex noise variance (sigma2 / 2 per axis).
"""
import json
from mpmath import mp, mpf, sqrt, erfc

mp.dps = 50


def q(x):
    return erfc(x / sqrt(2)) / 2


def axis_snr(snr_db):
    return 2 * mpf(10) ** (mpf(snr_db) / 10)


def ibp(m, alpha, snr_db):
    m, a = mpf(m), mpf(alpha)
    side = sqrt(m)
    g = axis_snr(snr_db)
    f = 1 - 4 * a**2 / (3 * m) + a**2 / 3
    hi = 2 / side * q(sqrt((1 - a + 2 * a / side) ** 2 * g / f))
    hu = (2 - 4 / side) * q(sqrt(4 * a**2 * g / (m * f)))
    p1 = hu * (1 - hi) + hi
    return dict(ser=2 * p1 - p1**2, iser=2 * hi - hi**2, user=2 * hu - hu**2)


def mqam(m, snr_db):
    m = mpf(m)
    side = sqrt(m)
    q1 = q(sqrt(3 * axis_snr(snr_db) / (m - 1)))
    pi = 6 / side * q1
    strip = side / 4
    pu = 1 - (1 - (2 * side - 2) / side * q1) * (1 - 2 * (strip - 1) / strip * q1)
    return dict(ser=pu * (1 - pi) + pi, iser=pi, user=pu)


def dump(r):
    return {k: mp.nstr(v, 25) for k, v in r.items()}


out = {
    "ibp_m64_alpha0.8_snr15": dump(ibp(64, 0.8, 15)),
    "ibp_m16_alpha0.6_snr12": dump(ibp(16, 0.6, 12)),
    "mqam_m16_snr10": dump(mqam(16, 10)),
    "mqam_m256_snr24": dump(mqam(256, 24)),
}
with open("closed_form.json", "w") as fh:
    json.dump(out, fh, indent=2)
    fh.write("\n")
