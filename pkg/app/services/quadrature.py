"""Compiled summation core.

Kernels and restrictions are passed as small integer codes so that every loop
stays in nopython mode. A point sitting on an atom of a singular kernel
produces NaN; the kernel service turns that into SingularEvaluationError.

Sums over one evaluation point always run in a fixed order (ascending atom
positions, left-to-right tree traversal), so results do not depend on the
number of threads.
"""
import math
import numba
import numpy as np

# Kernel codes
FRAC = 0
RIESZ = 1
RIESZ_VERTICAL = 2
POISSON_REPRODUCING = 3
POISSON_STANDARD = 4

# Restriction codes, always against a closed interval [lo, hi]
NO_RESTRICTION = 0
KEEP_INSIDE = 1
KEEP_OUTSIDE = 2


@numba.njit(cache=True)
def kernel_value(kind, dx, dy, alpha, scale):
    """Kernel at offset (dx, dy) from the source point"""
    r2 = dx * dx + dy * dy
    if kind == POISSON_REPRODUCING:
        d = math.sqrt(r2)
        return (scale / ((scale + d) * (scale + d))) ** (2.0 - alpha)
    if kind == POISSON_STANDARD:
        d = math.sqrt(r2)
        return scale / (scale + d) ** (3.0 - alpha)
    if r2 == 0.0:
        return np.nan
    if kind == FRAC:
        return r2 ** ((alpha - 2.0) * 0.5)
    if kind == RIESZ:
        return dx * r2 ** ((alpha - 3.0) * 0.5)
    return dy * r2 ** ((alpha - 3.0) * 0.5)


@numba.njit(cache=True)
def _lower_bound(values, target):
    # first index with values[i] >= target
    lo = 0
    hi = values.size
    while lo < hi:
        mid = (lo + hi) // 2
        if values[mid] < target:
            lo = mid + 1
        else:
            hi = mid
    return lo


@numba.njit(cache=True)
def _upper_bound(values, target):
    # first index with values[i] > target
    lo = 0
    hi = values.size
    while lo < hi:
        mid = (lo + hi) // 2
        if values[mid] <= target:
            lo = mid + 1
        else:
            hi = mid
    return lo


@numba.njit(parallel=True, cache=True)
def atom_sums(kind, xs, ys, scales, los, his, modes, positions, masses, alpha):
    """Σ_t m_t K(x_i - p_t, y_i) for every evaluation point i"""
    n_atoms = positions.size
    out = np.zeros(xs.size)
    for i in numba.prange(xs.size):
        start = 0
        stop = n_atoms
        if modes[i] != NO_RESTRICTION:
            start = _lower_bound(positions, los[i])
            stop = _upper_bound(positions, his[i])
        total = 0.0
        if modes[i] == KEEP_OUTSIDE:
            for t in range(start):
                total += masses[t] * kernel_value(kind, xs[i] - positions[t], ys[i], alpha, scales[i])
            for t in range(max(stop, start), n_atoms):
                total += masses[t] * kernel_value(kind, xs[i] - positions[t], ys[i], alpha, scales[i])
        else:
            for t in range(start, stop):
                total += masses[t] * kernel_value(kind, xs[i] - positions[t], ys[i], alpha, scales[i])
        out[i] = total
    return out


@numba.njit(cache=True)
def _cantor_point(kind, x, y, scale, lo, hi, mode, lengths, half_span, cap, tol,
                  alpha, root_mass, stack_level, stack_left):
    total = 0.0
    stack_level[0] = 0
    stack_left[0] = 0.0
    top = 1
    while top > 0:
        top -= 1
        level = stack_level[top]
        left = stack_left[top]
        length = lengths[level]
        right = left + length
        mass = root_mass * 0.5 ** level

        full = True
        if mode == KEEP_INSIDE:
            if right < lo or left > hi:
                continue
            full = lo <= left and right <= hi
        elif mode == KEEP_OUTSIDE:
            if lo <= left and right <= hi:
                continue
            full = right < lo or left > hi

        if full:
            gap = 0.0
            if x < left:
                gap = left - x
            elif x > right:
                gap = x - right
            reach2 = gap * gap + y * y
            if kind == POISSON_REPRODUCING or kind == POISSON_STANDARD:
                reach = scale + math.sqrt(reach2)
                reach2 = reach * reach
            # the node mean is its midpoint, so collapsing costs O((length/reach)^2)
            if level == cap or length * length <= tol * reach2:
                total += mass * kernel_value(kind, x - (left + 0.5 * length), y, alpha, scale)
                continue
        elif level == cap:
            # partial leaf: uniform density of the generation-cap approximation
            if mode == KEEP_INSIDE:
                a = max(left, lo)
                c = min(right, hi)
                if c > a:
                    total += mass * (c - a) / length * kernel_value(kind, x - 0.5 * (a + c), y, alpha, scale)
            else:
                if lo > left:
                    c = min(right, lo)
                    total += mass * (c - left) / length * kernel_value(kind, x - 0.5 * (left + c), y, alpha, scale)
                if hi < right:
                    a = max(left, hi)
                    total += mass * (right - a) / length * kernel_value(kind, x - 0.5 * (a + right), y, alpha, scale)
            continue

        # right child first so the left subtree is summed first
        stack_level[top] = level + 1
        stack_left[top] = left + length * half_span
        top += 1
        stack_level[top] = level + 1
        stack_left[top] = left
        top += 1
    return total


@numba.njit(parallel=True, cache=True)
def cantor_sums(kind, xs, ys, scales, los, his, modes, lengths, half_span, cap, tol, alpha, root_mass):
    """∫ K(x_i - t, y_i) dω(t) against the Cantor measure on [0, 1], refined up to generation cap"""
    out = np.zeros(xs.size)
    for i in numba.prange(xs.size):
        stack_level = np.empty(2 * cap + 4, np.int64)
        stack_left = np.empty(2 * cap + 4)
        out[i] = _cantor_point(kind, xs[i], ys[i], scales[i], los[i], his[i], modes[i],
                               lengths, half_span, cap, tol, alpha, root_mass,
                               stack_level, stack_left)
    return out


@numba.njit(cache=True)
def _cantor_moments_one(lo, hi, center, lengths, half_span, cap, variance_factor, root_mass,
                        stack_level, stack_left):
    mass_sum = 0.0
    first = 0.0
    second = 0.0
    stack_level[0] = 0
    stack_left[0] = 0.0
    top = 1
    while top > 0:
        top -= 1
        level = stack_level[top]
        left = stack_left[top]
        length = lengths[level]
        right = left + length
        if right < lo or left > hi:
            continue
        mass = root_mass * 0.5 ** level
        if lo <= left and right <= hi:
            offset = left + 0.5 * length - center
            mass_sum += mass
            first += mass * offset
            second += mass * (offset * offset + variance_factor * length * length)
            continue
        if level == cap:
            a = max(left, lo)
            c = min(right, hi)
            if c > a:
                piece = mass * (c - a) / length
                offset = 0.5 * (a + c) - center
                mass_sum += piece
                first += piece * offset
                second += piece * (offset * offset + (c - a) * (c - a) / 12.0)
            continue
        stack_level[top] = level + 1
        stack_left[top] = left + length * half_span
        top += 1
        stack_level[top] = level + 1
        stack_left[top] = left
        top += 1
    return mass_sum, first, second


@numba.njit(parallel=True, cache=True)
def cantor_moments(los, his, centers, lengths, half_span, cap, variance_factor, root_mass):
    """Mass, first and second moment about centers[i] of the Cantor measure on [lo_i, hi_i]

    Whole tree nodes use the exact self-similar moments; nodes cut at the
    last generation use the uniform density there.
    """
    out = np.zeros((los.size, 3))
    for i in numba.prange(los.size):
        stack_level = np.empty(2 * cap + 4, np.int64)
        stack_left = np.empty(2 * cap + 4)
        m, f, s = _cantor_moments_one(los[i], his[i], centers[i], lengths, half_span, cap,
                                      variance_factor, root_mass, stack_level, stack_left)
        out[i, 0] = m
        out[i, 1] = f
        out[i, 2] = s
    return out


@numba.njit(parallel=True, cache=True)
def atom_moments(los, his, centers, positions, masses):
    """Mass, first and second moment about centers[i] of the atoms inside [lo_i, hi_i]"""
    out = np.zeros((los.size, 3))
    for i in numba.prange(los.size):
        start = _lower_bound(positions, los[i])
        stop = _upper_bound(positions, his[i])
        m = 0.0
        f = 0.0
        s = 0.0
        for t in range(start, stop):
            offset = positions[t] - centers[i]
            m += masses[t]
            f += masses[t] * offset
            s += masses[t] * offset * offset
        out[i, 0] = m
        out[i, 1] = f
        out[i, 2] = s
    return out
