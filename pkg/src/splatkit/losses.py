"""Photometric loss (L1 + weighted D-SSIM) and evaluation metrics (PSNR, SSIM).

SSIM uses the standard 11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03,
dynamic range 1, reflection padding, channels averaged. The D-SSIM term is
1 - ssim (the conventional 1/2 factor folds into the mixing weight). All
gradients are exact adjoints, validated against finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

from .errors import SplatkitError

_WIN = 11
_PAD = _WIN // 2
_SIGMA = 1.5
_K1, _K2 = 0.01, 0.03
_C1 = (_K1 * 1.0) ** 2
_C2 = (_K2 * 1.0) ** 2


def _gauss_window() -> np.ndarray:
    x = np.arange(_WIN) - _PAD
    w = np.exp(-(x ** 2) / (2.0 * _SIGMA ** 2))
    return w / w.sum()


_W1D = _gauss_window()


def _as_array(img) -> np.ndarray:
    a = img.array if hasattr(img, "array") else np.asarray(img, dtype=np.float64)
    if a.ndim != 3 or a.shape[2] != 3:
        raise SplatkitError(f"expected (h, w, 3) image, got shape {a.shape}")
    return np.asarray(a, dtype=np.float64)


def _check_shapes(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise SplatkitError(f"image dimension mismatch: {a.shape} vs {b.shape}")


@dataclass
class LossBreakdown:
    l1: float
    dssim: float
    total: float
    lam: float


def l1_loss(a, b, with_grad: bool = False):
    """Mean absolute difference; gradient wrt `a` is sign/(N*3), 0 at ties."""
    a, b = _as_array(a), _as_array(b)
    _check_shapes(a, b)
    diff = a - b
    loss = float(np.abs(diff).mean())
    if not with_grad:
        return loss
    return loss, np.sign(diff) / diff.size


def psnr(a, b) -> float:
    """10*log10(1/MSE) in dB, capped at 100 when MSE < 1e-10."""
    a, b = _as_array(a), _as_array(b)
    _check_shapes(a, b)
    mse = float(((a - b) ** 2).mean())
    if mse < 1e-10:
        return 100.0
    return min(100.0, 10.0 * np.log10(1.0 / mse))


def _reflect_indices(n: int) -> np.ndarray:
    return np.pad(np.arange(n), _PAD, mode="reflect")


def _window_mean(padded: np.ndarray) -> np.ndarray:
    # valid-mode separable correlation of an already padded 2D array
    out = correlate1d(padded, _W1D, axis=0, mode="constant")
    out = correlate1d(out, _W1D, axis=1, mode="constant")
    return out[_PAD:-_PAD, _PAD:-_PAD]


def _window_mean_adjoint(g: np.ndarray) -> np.ndarray:
    # adjoint of _window_mean: zero-embed into the padded canvas, correlate
    # with the (symmetric) kernel
    h, w = g.shape
    canvas = np.zeros((h + 2 * _PAD, w + 2 * _PAD))
    canvas[_PAD:-_PAD, _PAD:-_PAD] = g
    canvas = correlate1d(canvas, _W1D, axis=0, mode="constant")
    canvas = correlate1d(canvas, _W1D, axis=1, mode="constant")
    return canvas


def _fold_reflect(padded_grad: np.ndarray, h: int, w: int) -> np.ndarray:
    # adjoint of reflection padding: add each padded row/col back to its source
    iy = _reflect_indices(h)
    ix = _reflect_indices(w)
    tmp = np.zeros((h, padded_grad.shape[1]))
    np.add.at(tmp, iy, padded_grad)
    out = np.zeros((h, w))
    np.add.at(out.T, ix, tmp.T)
    return out


def ssim(a, b, with_grad: bool = False):
    """Structural similarity in [-1, 1]; optional exact gradient wrt `a`."""
    a, b = _as_array(a), _as_array(b)
    _check_shapes(a, b)
    h, w = a.shape[:2]
    if h < 2 or w < 2:
        raise SplatkitError("images too small for windowed SSIM")
    iy = _reflect_indices(h)
    ix = _reflect_indices(w)
    total = 0.0
    grad = np.zeros_like(a) if with_grad else None
    for ch in range(3):
        pa = a[iy][:, ix, ch]
        pb = b[iy][:, ix, ch]
        mu_a = _window_mean(pa)
        mu_b = _window_mean(pb)
        s_aa = _window_mean(pa * pa)
        s_bb = _window_mean(pb * pb)
        s_ab = _window_mean(pa * pb)
        var_a = s_aa - mu_a ** 2
        var_b = s_bb - mu_b ** 2
        cov = s_ab - mu_a * mu_b
        n1 = 2.0 * mu_a * mu_b + _C1
        n2 = 2.0 * cov + _C2
        d1 = mu_a ** 2 + mu_b ** 2 + _C1
        d2 = var_a + var_b + _C2
        smap = (n1 * n2) / (d1 * d2)
        total += float(smap.mean())
        if with_grad:
            scale = 1.0 / (h * w * 3)
            g_mu = scale * ((2.0 * mu_b * n2 - 2.0 * mu_b * n1) / (d1 * d2)
                            - smap * (2.0 * mu_a / d1 - 2.0 * mu_a / d2))
            g_saa = scale * (-smap / d2)
            g_sab = scale * (2.0 * n1 / (d1 * d2))
            d_pa = (_window_mean_adjoint(g_mu)
                    + 2.0 * pa * _window_mean_adjoint(g_saa)
                    + pb * _window_mean_adjoint(g_sab))
            grad[:, :, ch] = _fold_reflect(d_pa, h, w)
    value = total / 3.0
    if with_grad:
        return value, grad
    return value


def photometric_loss(rendered, target, lam: float = 0.2, with_grad: bool = False):
    """Training loss (1-lam)*L1 + lam*(1-SSIM); gradient is wrt `rendered`."""
    if with_grad:
        l1, g1 = l1_loss(rendered, target, with_grad=True)
        sv, gs = ssim(rendered, target, with_grad=True)
        dssim = 1.0 - sv
        total = (1.0 - lam) * l1 + lam * dssim
        grad = (1.0 - lam) * g1 - lam * gs
        return LossBreakdown(l1, dssim, total, lam), grad
    l1 = l1_loss(rendered, target)
    dssim = 1.0 - ssim(rendered, target)
    return LossBreakdown(l1, dssim, (1.0 - lam) * l1 + lam * dssim, lam)
