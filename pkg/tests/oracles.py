"""Slow reference implementations the tests compare against.

Pure Python loops on purpose: nothing here shares code with the package.
"""
import math


def kernel_2d(size, sigma):
    half = size // 2
    w = [[math.exp(-(i * i + j * j) / (2 * sigma * sigma)) for j in range(-half, half + 1)]
         for i in range(-half, half + 1)]
    total = sum(sum(r) for r in w)
    return [[v / total for v in r] for r in w]


def convolve(img, k):
    """True convolution, clamp-to-edge borders."""
    h, w = len(img), len(img[0])
    kh = len(k)
    half = kh // 2
    out = [[0.0] * w for _ in range(h)]
    for y in range(h):
        for x in range(w):
            acc = 0.0
            for i in range(kh):
                for j in range(kh):
                    yy = min(max(y - (i - half), 0), h - 1)
                    xx = min(max(x - (j - half), 0), w - 1)
                    acc += k[i][j] * img[yy][xx]
            out[y][x] = acc
    return out


def smooth(e0, size, sigma, steps):
    k = kernel_2d(size, sigma)
    h = [row[:] for row in e0]
    for _ in range(steps):
        c = convolve(h, k)
        h = [[max(c[y][x], e0[y][x]) for x in range(len(e0[0]))] for y in range(len(e0))]
    return h


def phong_pixel(n, lights, ambient, k_a, alpha):
    """lights: (toward-light unit vector, colour, k_d, k_s)."""
    out = []
    for c in range(3):
        v = k_a * ambient[c]
        for l, col, kd, ks in lights:
            ndl = sum(a * b for a, b in zip(n, l))
            r = [2 * ndl * n[i] - l[i] for i in range(3)]
            rv = max(r[2], 0.0)
            v += (kd * max(ndl, 0.0) + ks * rv ** alpha) * col[c]
        out.append(math.floor(min(max(v, 0.0), 255.0) + 0.5))
    return tuple(out)


def metrics(a, b):
    """(ssim, psnr, mae%) for nested lists [row][col][channel] of 0..255 values."""
    h, w, ch = len(a), len(a[0]), len(a[0][0])
    n = h * w * ch
    abs_sum = sq_sum = 0.0
    for y in range(h):
        for x in range(w):
            for c in range(ch):
                d = a[y][x][c] - b[y][x][c]
                abs_sum += abs(d)
                sq_sum += d * d
    mae = abs_sum / n / 255 * 100
    mse = sq_sum / n
    psnr = math.inf if mse == 0 else 10 * math.log10(255 ** 2 / mse)

    g = kernel_2d(11, 1.5)
    c1, c2 = (0.01 * 255) ** 2, (0.03 * 255) ** 2
    per_channel = []
    for c in range(ch):
        vals = []
        for y0 in range(h - 10):
            for x0 in range(w - 10):
                mx = my = sxx = syy = sxy = 0.0
                for i in range(11):
                    for j in range(11):
                        p, q, wt = a[y0 + i][x0 + j][c], b[y0 + i][x0 + j][c], g[i][j]
                        mx += wt * p
                        my += wt * q
                        sxx += wt * p * p
                        syy += wt * q * q
                        sxy += wt * p * q
                sxx -= mx * mx
                syy -= my * my
                sxy -= mx * my
                vals.append(((2 * mx * my + c1) * (2 * sxy + c2)) / ((mx * mx + my * my + c1) * (sxx + syy + c2)))
        per_channel.append(sum(vals) / len(vals))
    return sum(per_channel) / ch, psnr, mae


def similarity_lstsq(src, dst):
    """Brute-force least squares over (s, tx, ty) via the 3x3 normal equations."""
    rows, rhs = [], []
    for (x, y), (u, v) in zip(src, dst):
        rows += [(x, 1.0, 0.0), (y, 0.0, 1.0)]
        rhs += [u, v]
    ata = [[sum(r[i] * r[j] for r in rows) for j in range(3)] for i in range(3)]
    atb = [sum(r[i] * t for r, t in zip(rows, rhs)) for i in range(3)]
    # Cramer's rule
    def det(m):
        return (m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]))
    d = det(ata)
    sol = []
    for k in range(3):
        m = [row[:] for row in ata]
        for i in range(3):
            m[i][k] = atb[i]
        sol.append(det(m) / d)
    return tuple(sol)
