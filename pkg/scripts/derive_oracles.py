"""Closed-form reference values frozen into the test suite.

Everything here uses mpmath at 30 digits and never imports the package, so
the numbers are an independent check of the numerical kernels.

    python3 scripts/derive_oracles.py
"""

import mpmath as mp

mp.mp.dps = 30


def bm_exit(sigma, mu, r, l, x, u):
    """Discounted exit weights (e_low, e_up) of BM with constant drift."""
    disc = mp.sqrt(mu**2 + 2 * r * sigma**2)
    gp, gm = (-mu + disc) / sigma**2, (-mu - disc) / sigma**2
    phi = lambda y: mp.e**(gp * (y - l)) - mp.e**(gm * (y - l))   # zero at l
    chi = lambda y: mp.e**(gp * (y - u)) - mp.e**(gm * (y - u))   # zero at u
    return chi(x) / chi(l), phi(x) / phi(u)


def bm_green(sigma, r, l, c, u):
    """Expected discounted semimartingale local time at c before exit."""
    if r == 0:
        return 2 * (c - l) * (u - c) / (u - l)
    k = mp.sqrt(2 * r) / sigma
    return 2 * mp.sinh(k * (c - l)) * mp.sinh(k * (u - c)) / (k * mp.sinh(k * (u - l)))


def gbm_exit(mu, sigma, r, l, x, u):
    a, b, c = sigma**2 / 2, mu - sigma**2 / 2, -r
    disc = mp.sqrt(b * b - 4 * a * c)
    pp, pm = (-b + disc) / (2 * a), (-b - disc) / (2 * a)
    phi = lambda y: y**pp * l**pm - y**pm * l**pp
    chi = lambda y: y**pp * u**pm - y**pm * u**pp
    return chi(x) / chi(l), phi(x) / phi(u), pp, pm


if __name__ == "__main__":
    print("BM s=1 r=0.5 [0,.5,1]", bm_exit(1, 0, mp.mpf("0.5"), 0, mp.mpf("0.5"), 1))
    print("BM s=0.7 r=0.3 [0,.6,2]", bm_exit(mp.mpf("0.7"), 0, mp.mpf("0.3"), 0, mp.mpf("0.6"), 2))
    print("BM s=1 mu=0.4 r=0.2 [0,.3,1]", bm_exit(1, mp.mpf("0.4"), mp.mpf("0.2"), 0, mp.mpf("0.3"), 1))
    print("BM s=1.5 mu=-0.3 r=0 [0,.7,1]", bm_exit(mp.mpf("1.5"), mp.mpf("-0.3"), mp.mpf("1e-40"), 0, mp.mpf("0.7"), 1))
    print("green BM s=1 r=0 [0,.5,1]", bm_green(1, 0, 0, mp.mpf("0.5"), 1))
    print("green BM s=1.5 r=0.2 [0,.4,1]", bm_green(mp.mpf("1.5"), mp.mpf("0.2"), 0, mp.mpf("0.4"), 1))
    print("green BM s=1 r=0.5 [0,.5,1]", bm_green(1, mp.mpf("0.5"), 0, mp.mpf("0.5"), 1))
    print("GBM mu=.05 s=.2 r=.1 [.5,1.1,2]", gbm_exit(mp.mpf("0.05"), mp.mpf("0.2"), mp.mpf("0.1"),
                                                    mp.mpf("0.5"), mp.mpf("1.1"), 2))
    # sojourn primitives at kappa = 1 from the elastic-killing identity
    e_low, e_up = bm_exit(1, 0, mp.mpf("0.5"), 0, mp.mpf("0.5"), 1)
    g = bm_green(1, mp.mpf("0.5"), 0, mp.mpf("0.5"), 1)
    print("primitives BM r=.5 kappa=1", e_up / (1 + g), e_low / (1 + g), g / (1 + g))
    print("E|B_1|", mp.sqrt(2 / mp.pi))
