"""Independent brute-force references: explicit-loop SSIM/MS-SSIM and helpers.

These recompute the structural-similarity definitions directly (per-window
loops, no shared code with the package) so the fast implementations can be
checked against them.
"""

import numpy as np

MS_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)


def gaussian_kernel2d(size=11, sigma=1.5):
    coords = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(coords ** 2) / (2.0 * sigma ** 2))
    g = g / g.sum()
    return np.outer(g, g)


def ssim_maps_bruteforce(a, b, window=None, c1=0.01 ** 2, c2=0.03 ** 2):
    """Luminance and contrast-structure maps via explicit window loops."""
    if window is None:
        window = gaussian_kernel2d()
    k = window.shape[0]
    h, w = a.shape
    l_map = np.zeros((h - k + 1, w - k + 1))
    cs_map = np.zeros_like(l_map)
    for i in range(h - k + 1):
        for j in range(w - k + 1):
            pa = a[i:i + k, j:j + k]
            pb = b[i:i + k, j:j + k]
            mu_a = (window * pa).sum()
            mu_b = (window * pb).sum()
            var_a = (window * pa * pa).sum() - mu_a ** 2
            var_b = (window * pb * pb).sum() - mu_b ** 2
            cov = (window * pa * pb).sum() - mu_a * mu_b
            l_map[i, j] = (2 * mu_a * mu_b + c1) / (mu_a ** 2 + mu_b ** 2 + c1)
            cs_map[i, j] = (2 * cov + c2) / (var_a + var_b + c2)
    return l_map, cs_map


def ssim_bruteforce(a, b, window=None):
    """Single-scale SSIM: mean of the pointwise l*cs map."""
    l_map, cs_map = ssim_maps_bruteforce(a, b, window)
    return float((l_map * cs_map).mean())


def _avg_pool2(x):
    h, w = x.shape[-2:]
    x = x[..., : h // 2 * 2, : w // 2 * 2]
    return x.reshape(*x.shape[:-2], h // 2, 2, w // 2, 2).mean(axis=(-3, -1))


def ms_ssim_bruteforce(a, b, scales, weights=MS_WEIGHTS):
    """Multi-scale similarity on [B,C,H,W] arrays: cs means at every scale,
    the full l*cs map at the coarsest, weighted product with renormalized
    exponents, negatives clamped at zero."""
    w = np.asarray(weights[:scales], dtype=np.float64)
    w = w / w.sum()
    terms = []
    for j in range(scales):
        values = []
        for bi in range(a.shape[0]):
            for ci in range(a.shape[1]):
                l_map, cs_map = ssim_maps_bruteforce(a[bi, ci], b[bi, ci])
                values.append(l_map * cs_map if j == scales - 1 else cs_map)
        terms.append(max(float(np.mean(values)), 0.0))
        if j < scales - 1:
            a, b = _avg_pool2(a), _avg_pool2(b)
    return float(np.prod([t ** wj for t, wj in zip(terms, w)]))
