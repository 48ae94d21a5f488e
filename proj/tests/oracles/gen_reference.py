#!/usr/bin/env python3
"""Frozen reference values for the unit tests, computed with mpmath at 40 digits.

Independent of the C++ code: every integral is evaluated by mpmath.quad on
split intervals.  Run from the repo root:

    python3 tests/oracles/gen_reference.py > tests/oracles/reference_values.hpp
"""
import mpmath as mp

mp.mp.dps = 40
LOG_SQRT_2PI = mp.log(mp.sqrt(2 * mp.pi))


def tau(theta):
    return [mp.mpf(theta), mp.mpf(theta) ** 2 / 2 + LOG_SQRT_2PI]


def log_p(t, x):
    return -x * x / 2 + t[0] * x - t[1]


def T(x):
    return [x, mp.mpf(-1)]


def breakpoints(*centers):
    lo = min(centers) - 40
    hi = max(centers) + 40
    pts = sorted(set([lo, hi] + [mp.mpf(c) for c in centers]))
    return pts


def quad(f, *centers):
    pts = breakpoints(*centers)
    return mp.quad(f, pts)


def nce_parts(ts, tq, t):
    def terms(x):
        ls, lq = log_p(ts, x), log_p(tq, x)
        psi = log_p(t, x) - lq
        return ls, lq, psi
    return terms


def nce_loss(R, t):
    ts, tq = tau(R), tau(0)
    f = nce_parts(ts, tq, t)

    def g(x):
        ls, lq, psi = f(x)
        return mp.e ** ls * mp.log1p(mp.e ** -psi) / 2 + mp.e ** lq * mp.log1p(mp.e ** psi) / 2
    return quad(g, 0, R, t[0])


def nce_grad(R, t):
    ts, tq = tau(R), tau(0)
    f = nce_parts(ts, tq, t)
    out = []
    for k in range(2):
        def g(x, k=k):
            ls, lq, psi = f(x)
            s = 1 / (1 + mp.e ** -psi)
            return (mp.e ** lq * s - mp.e ** ls * (1 - s)) / 2 * T(x)[k]
        out.append(quad(g, 0, R, t[0]))
    return out


def nce_hess(R, t):
    ts, tq = tau(R), tau(0)
    f = nce_parts(ts, tq, t)
    H = mp.matrix(2, 2)
    for i in range(2):
        for j in range(i, 2):
            def g(x, i=i, j=j):
                ls, lq, psi = f(x)
                s = 1 / (1 + mp.e ** -psi)
                return (mp.e ** ls + mp.e ** lq) * s * (1 - s) / 2 * T(x)[i] * T(x)[j]
            H[i, j] = H[j, i] = quad(g, 0, R, t[0])
    return H


def ence_loss(R, t):
    ts, tq = tau(R), tau(0)
    f = nce_parts(ts, tq, t)

    def g(x):
        ls, lq, psi = f(x)
        return mp.e ** (ls - psi / 2) / 2 + mp.e ** (lq + psi / 2) / 2
    return quad(g, 0, R, t[0])


def ence_grad(R, t):
    ts, tq = tau(R), tau(0)
    f = nce_parts(ts, tq, t)
    out = []
    for k in range(2):
        def g(x, k=k):
            ls, lq, psi = f(x)
            return (mp.e ** (lq + psi / 2) - mp.e ** (ls - psi / 2)) / 4 * T(x)[k]
        out.append(quad(g, 0, R, t[0]))
    return out


def eig2(H):
    a, b, c = H[0, 0], H[0, 1], H[1, 1]
    tr, det = a + c, a * c - b * b
    disc = mp.sqrt((a - c) ** 2 / 4 + b * b)
    hi = tr / 2 + disc
    return det / hi, hi


def emit(name, value):
    print(f"inline constexpr double {name} = {mp.nstr(value, 20, min_fixed=-1, max_fixed=-1)};")


def main():
    print("#pragma once")
    print("// Generated by tests/oracles/gen_reference.py (mpmath, 40 digits). Do not edit.")
    print()
    print("namespace ref {")
    for R in (2, 4, 6, 8):
        emit(f"nce_opt_loss_r{R}", nce_loss(R, tau(R)))
    for R in (4, 6, 8):
        lo, hi = eig2(nce_hess(R, tau(R)))
        emit(f"nce_opt_sigma_min_r{R}", lo)
        emit(f"nce_opt_sigma_max_r{R}", hi)
    for R in (4, 8, 16):
        lo, hi = eig2(nce_hess(R, tau(0)))
        emit(f"nce_init_sigma_max_r{R}", hi)
    # Off-optimum point for R = 4: theta = 1.5, alpha = 2.0
    t = [mp.mpf("1.5"), mp.mpf("2.0")]
    emit("nce_r4_off_loss", nce_loss(4, t))
    g = nce_grad(4, t)
    emit("nce_r4_off_grad0", g[0])
    emit("nce_r4_off_grad1", g[1])
    H = nce_hess(4, t)
    emit("nce_r4_off_h00", H[0, 0])
    emit("nce_r4_off_h01", H[0, 1])
    emit("nce_r4_off_h11", H[1, 1])
    emit("ence_r4_off_loss", ence_loss(4, t))
    g = ence_grad(4, t)
    emit("ence_r4_off_grad0", g[0])
    emit("ence_r4_off_grad1", g[1])
    for R in (1, 2, 4):
        ts, tq = tau(R), tau(0)
        bc = quad(lambda x: mp.e ** ((log_p(ts, x) + log_p(tq, x)) / 2), 0, R)
        emit(f"bc_r{R}", bc)
    emit("log_sum_exp_0_m50", mp.log(1 + mp.e ** -50))
    emit("diag_log_partition_prec2", mp.log(mp.sqrt(2 * mp.pi / 2)))
    lo, hi = eig2(mp.matrix([[18, -4], [-4, 2]]) / 8)
    emit("eig_example_lo", lo)
    emit("eig_example_hi", hi)
    print("}  // namespace ref")


if __name__ == "__main__":
    main()
