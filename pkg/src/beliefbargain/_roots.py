"""Bracketed scalar root finding shared by the utility and pricing code."""
import math

from .errors import PricingError


def bracketed_root(f, df, lo, hi, bisect_width=1e-6, ftol=1e-12, maxiter=200,
                   accept=1e-10):
    """Root of a monotone ``f`` on ``[lo, hi]``: bisection, then Newton polish.

    Newton steps that leave the current bracket fall back to bisection.
    Returns ``(root, iterations, residual)``.
    """
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo, 0, 0.0
    if fhi == 0.0:
        return hi, 0, 0.0
    if math.copysign(1.0, flo) == math.copysign(1.0, fhi):
        raise PricingError(f"no sign change on [{lo}, {hi}]", bracket=(lo, hi))
    rising = fhi > 0.0
    it = 0
    while hi - lo > bisect_width and it < maxiter:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        it += 1
        if fm == 0.0:
            return mid, it, 0.0
        if (fm > 0.0) == rising:
            hi = mid
        else:
            lo = mid
    x = 0.5 * (lo + hi)
    fx = f(x)
    while it < maxiter:
        it += 1
        if abs(fx) <= ftol:
            return x, it, abs(fx)
        if (fx > 0.0) == rising:
            hi = x
        else:
            lo = x
        d = df(x)
        step = fx / d if d != 0.0 else math.inf
        xn = x - step
        if not (lo < xn < hi):
            xn = 0.5 * (lo + hi)
        if abs(xn - x) <= 1e-15 * max(1.0, abs(x)):
            fx = f(xn)
            x = xn
            break
        x = xn
        fx = f(x)
    if abs(fx) <= accept:
        return x, it, abs(fx)
    raise PricingError(f"root finder stalled after {it} iterations, residual {abs(fx):.3e}",
                       bracket=(lo, hi))
