"""Independent scalar evaluation of the wake closed forms.

Uses only ``math`` and re-types every formula from scratch, so it shares no
code with ``windjoint.wake``.  Run once; the printed numbers are frozen in
``tests/test_wake.py`` as golden constants.

    python3 tools/derive_golden.py
"""
import math

D = 126.0
K_Y = 0.0229
A_D = -0.0356
B_D = -0.01
TI = 0.06


def x0(gamma_deg, ct, ti=TI):
    r = math.sqrt(1.0 - ct)
    return D * math.cos(math.radians(gamma_deg)) * (1.0 + r) / (math.sqrt(2.0) * (2.32 * ti + 0.154 * (1.0 - r)))


def sigma0(gamma_deg):
    return D * math.cos(math.radians(gamma_deg)) / (2.0 * math.sqrt(2.0))


def phi(gamma_deg, ct):
    g = math.radians(gamma_deg)
    return 0.3 * g / math.cos(g) * (1.0 - math.sqrt(1.0 - ct * math.cos(g)))


def deflection_terms(x, gamma_deg, ct):
    """Return the four terms separately; yaw terms enter with a minus sign."""
    s0 = sigma0(gamma_deg)
    xn = x0(gamma_deg, ct)
    s = s0 + max(x - xn, 0.0) * K_Y
    c0 = 1.0 - math.sqrt(1.0 - ct)
    e0 = c0 * c0 - 3.0 * math.exp(1.0 / 12.0) * c0 + 3.0 * math.exp(1.0 / 3.0)
    p = phi(gamma_deg, ct)
    sq = math.sqrt(ct)
    q = math.sqrt(s / s0)
    log_arg = (1.6 + sq) * (1.6 * q - sq) / ((1.6 - sq) * (1.6 * q + sq))
    t1 = A_D * D
    t2 = B_D * x
    t3 = math.tan(p) * min(x, xn)
    t4 = p / 5.2 * e0 * math.sqrt(s0 / (K_Y * ct)) * math.log(log_arg)
    return t1, t2, t3, t4


def peak_deficit(x, alpha, gamma_deg=0.0):
    ct = 4 * alpha * (1 - alpha)
    s0 = sigma0(gamma_deg)
    s = s0 + max(x - x0(gamma_deg, ct), 0.0) * K_Y
    return 1.0 - math.sqrt(1.0 - s0 / s * ct)


if __name__ == "__main__":
    print(f"x0(D=126, CT=8/9, I=0.06, gamma=0)   = {x0(0.0, 8 / 9)!r}")
    print(f"phi(gamma=25, CT=0.8)                 = {phi(25.0, 0.8)!r}")
    t = deflection_terms(5 * D, 30.0, 8 / 9)
    print(f"deflection terms (gamma=30, CT=8/9, x=5D) = {t!r}")
    print(f"deflection (gamma=30, CT=8/9, x=5D)   = {t[0] + t[1] - t[2] - t[3]!r}")
    print(f"peak deficit (x=7D, alpha=1/3)        = {peak_deficit(7 * D, 1 / 3)!r}")
    rho, cp = 1.29, 16 / 27
    print(f"unwaked power at 9 m/s                = {0.5 * rho * math.pi / 4 * D * D * cp * 9.0 ** 3!r}")
