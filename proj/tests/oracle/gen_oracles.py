"""High-precision reference values for the unit tests.

Everything here is computed independently of the C++ code with mpmath at 50 digits.
The printed numbers are pasted into tests/*.cpp as frozen constants; rerun this script
and compare if a formula in the library changes.

    python3 tests/oracle/gen_oracles.py
"""

from fractions import Fraction
from itertools import product

import mpmath as mp

mp.mp.dps = 50


def ell(d, q, x):
    y = mp.power(x, mp.mpf(2) / d)
    return (y - 1) / (1 - y / (q - 1))


def w_crit(d, q, B):
    return ell(d, q, (q - 1) * mp.e ** (-B))


def b_plus(d, q):
    target = (mp.mpf(d) / (d - 2)) ** 2

    def g(B):
        w = w_crit(d, q, B)
        return (1 + w) * (1 + w / (q - 1)) - target

    return mp.findroot(g, (mp.mpf("1e-6"), mp.mpf(40)), solver="anderson")


def bp_fixed(d, q, beta, B, start):
    eb = mp.e ** beta
    nu = [mp.mpf(1) / q] * q if start == "free" else [mp.mpf(1)] + [mp.mpf(0)] * (q - 1)
    for _ in range(200000):
        tot = sum(nu)
        w = [(tot + (eb - 1) * nu[i]) ** (d - 1) * (mp.e ** B if i == 0 else 1) for i in range(q)]
        s = sum(w)
        new = [x / s for x in w]
        if max(abs(a - b) for a, b in zip(new, nu)) < mp.mpf("1e-45"):
            return new
        nu = new
    raise RuntimeError("BP did not converge")


def bp_fixed_reduced(d, q, beta, B, start):
    # Root of the reduced map a -> BP(a) bracketed from the monotone iteration.
    eb = mp.e ** beta

    def step(a):
        b = (1 - a) / (q - 1)
        s1 = (a * eb + (1 - a)) ** (d - 1) * mp.e ** B
        s2 = (b * eb + (1 - b)) ** (d - 1)
        return s1 / (s1 + (q - 1) * s2)

    a = mp.mpf(1) / q if start == "free" else mp.mpf(1)
    for _ in range(3000):
        a = step(a)
    a = mp.findroot(lambda t: step(t) - t, a)
    return [a] + [(1 - a) / (q - 1)] * (q - 1)


def bethe(d, q, beta, B, nu):
    eb = mp.e ** beta
    tot = sum(nu)
    v = sum((tot + (eb - 1) * nu[i]) ** d * (mp.e ** B if i == 0 else 1) for i in range(q))
    e = tot * tot + (eb - 1) * sum(x * x for x in nu)
    return mp.log(v) - mp.mpf(d) / 2 * mp.log(e)


def root_marginal(d, q, beta, B, nu):
    eb = mp.e ** beta
    w = [(1 + (eb - 1) * nu[i]) ** d * (mp.e ** B if i == 0 else 1) for i in range(q)]
    s = sum(w)
    return [x / s for x in w]


def interaction(d, q, beta, B):
    return mp.matrix([[mp.e ** (beta * (i == j) + B / d * ((i == 0) + (j == 0))) for j in range(q)] for i in range(q)])


def solve_u(Bm, alpha):
    q = len(alpha)
    u = [mp.mpf(1)] * q
    for _ in range(400):
        u = [mp.sqrt(u[i] * alpha[i] / sum(Bm[i, j] * u[j] for j in range(q))) for i in range(q)]
    f = lambda *v: [v[i] * sum(Bm[i, j] * v[j] for j in range(q)) - alpha[i] for i in range(q)]
    return list(mp.findroot(f, u))


def upsilon1(d, q, beta, B, alpha):
    Bm = interaction(d, q, beta, B)
    u = solve_u(Bm, alpha)
    return (d - 1) * sum(a * mp.log(a) for a in alpha) - d * sum(a * mp.log(x) for a, x in zip(alpha, u))


def hessian_det(d, q, beta, B, alpha):
    m = q - 1

    def f(*free):
        a = list(free) + [1 - sum(free)]
        return upsilon1(d, q, beta, B, a)

    H = mp.matrix(m, m)
    x0 = alpha[:m]
    for r in range(m):
        for c in range(m):
            order = [0] * m
            order[r] += 1
            order[c] += 1
            H[r, c] = mp.diff(f, x0, tuple(order))
    return mp.det(-H), H


def lambdas(d, q, beta, B, x):
    eb = mp.e ** beta
    l2 = eb * x / (eb * x + q - 1) - x / (eb + x + q - 2)
    l3 = (eb - 1) / (eb + x + q - 2)
    return [l2] + [l3] * (q - 2)


def gamma(d, q, B):
    beta = mp.log(1 + w_crit(d, q, B))
    out = {}
    for ph in ("free", "wired"):
        nu = bp_fixed_reduced(d, q, beta, B, ph)
        alpha = root_marginal(d, q, beta, B, nu)
        x = nu[0] / nu[1]
        det, _ = hessian_det(d, q, beta, B, alpha)
        base = mp.fprod(alpha) * mp.fprod([1 + l for l in lambdas(d, q, beta, B, x)])
        out[ph] = (base, det, upsilon1(d, q, beta, B, alpha))
    g = mp.sqrt(out["wired"][0] * out["wired"][1] / (out["free"][0] * out["free"][1]))
    return beta, g, out


def ising_m(d, beta):
    e2 = mp.e ** (2 * beta)
    g = lambda u: (lambda h: h / (1 + h))(((e2 * u + 1 - u) / (u + e2 * (1 - u))) ** (d - 1))
    u = mp.mpf(1)
    for _ in range(5000):
        u = g(u)
    u = mp.findroot(lambda t: g(t) - t, u)
    t = u / (1 - u)
    # Root marginal ratio x* = t^{d/(d-1)} in this parametrisation.
    r = ((e2 * t + 1) / (t + e2)) ** d
    return (r - 1) / (r + 1)


def k2_exact():
    # K2 with q = 3, e^beta = e^B = 2: exhaustive colourings and bond sets.
    q, eb, eB = 3, Fraction(2), Fraction(2)
    z = agree = Fraction(0)
    for s in product(range(q), repeat=2):
        w = (eb if s[0] == s[1] else 1) * (eB if s[0] == 0 else 1) * (eB if s[1] == 0 else 1)
        z += w
        agree += w if s[0] == s[1] else 0
    return z, agree / z


def main():
    print("w_c(0+) d=3 q=3:", mp.nstr(w_crit(3, 3, 0), 20))
    for d, q in [(3, 3), (3, 5), (4, 3), (15, 45), (3, 8)]:
        print(f"B_+ d={d} q={q}:", mp.nstr(b_plus(d, q), 20))
    d, q = 3, 3
    B = b_plus(d, q) / 2
    beta = mp.log(1 + w_crit(d, q, B))
    nf = bp_fixed(d, q, beta, B, "free")
    nw = bp_fixed(d, q, beta, B, "wired")
    print("d=3 q=3 B=B_+/2 beta_crit:", mp.nstr(beta, 20))
    print("  nu_free(1):", mp.nstr(nf[0], 20), " nu_wired(1):", mp.nstr(nw[0], 20))
    print("  Psi free/wired:", mp.nstr(bethe(d, q, beta, B, nf), 20), mp.nstr(bethe(d, q, beta, B, nw), 20))
    print("  lambda free:", [mp.nstr(v, 16) for v in lambdas(d, q, beta, B, nf[0] / nf[1])])
    print("  lambda wired:", [mp.nstr(v, 16) for v in lambdas(d, q, beta, B, nw[0] / nw[1])])
    for dd, qq in [(3, 3), (3, 5)]:
        Bh = b_plus(dd, qq) / 2
        bc, g, parts = gamma(dd, qq, Bh)
        print(f"Gamma d={dd} q={qq} B=B_+/2:", mp.nstr(g, 16), " Upsilon_1:", mp.nstr(parts["free"][2], 16),
              mp.nstr(parts["wired"][2], 16))
    for b in ("0.7", "0.8", "1.0"):
        print(f"Ising m d=3 beta={b}:", mp.nstr(ising_m(3, mp.mpf(b)), 20))
    z, ag = k2_exact()
    print("K2 q=3 w=w_ghost=1: Z =", z, " agreement =", ag)


if __name__ == "__main__":
    main()
