"""Reference values of ln I_nu(x) for the special-function accuracy tests.

Half-integer orders use the finite sinh/cosh closed form; integer orders use the
ascending power series. Both are evaluated in arbitrary precision so the
catastrophic cancellation of the closed form at small x is harmless.
"""
import mpmath as mp

mp.mp.dps = 800


def closed_form_half_integer(n, x):
    x = mp.mpf(x)
    s_plus = mp.mpf(0)
    s_minus = mp.mpf(0)
    for k in range(n + 1):
        c = mp.factorial(n + k) / (mp.factorial(k) * mp.factorial(n - k) * (2 * x) ** k)
        s_plus += (-1) ** k * c
        s_minus += c
    val = (mp.e ** x * s_plus + (-1) ** (n + 1) * mp.e ** (-x) * s_minus) / mp.sqrt(2 * mp.pi * x)
    return mp.log(val)


def power_series(nu, x):
    x = mp.mpf(x)
    q = (x / 2) ** 2
    term = (x / 2) ** nu / mp.gamma(nu + 1)
    total = term
    k = 0
    while True:
        k += 1
        term *= q / (k * (k + nu))
        total += term
        if term < total * mp.mpf(10) ** (-60) and k > q:
            break
    return mp.log(total)


def main():
    xs = [mp.mpf(10) ** (mp.mpf(e) / 4) for e in range(-12, 13)]
    print("nu,x,ln_i,oracle")
    for twice in range(0, 101):
        nu = mp.mpf(twice) / 2
        for x in xs:
            if twice % 2 == 1:
                v = closed_form_half_integer((twice - 1) // 2, x)
                tag = "closed_form"
            else:
                v = power_series(nu, x)
                tag = "series"
            print(f"{float(nu)!r},{mp.nstr(x, 25)},{mp.nstr(v, 25)},{tag}")


if __name__ == "__main__":
    main()
