"""Shepp-Logan head phantom rasterized on the unit square.

The ellipse table below is the classical ten-ellipse geometry with the
widely used normalized contrast set (the "modified" intensities of Toft,
also MATLAB's default), which keeps the additive sums inside [0, 1].  The
original 1974 intensities (2.0, -0.98, -0.02, ...) would saturate everything
inside the skull once clamped to [0, 1], so they are unusable here; the
geometry is identical either way.

Columns: additive intensity, semi-axis a (x), semi-axis b (y), center x0,
center y0, rotation angle in degrees (counterclockwise).
"""

from __future__ import annotations

import math

import numpy as np

from .grids import SignalGrid

SHEPP_LOGAN_ELLIPSES = (
    # intensity   a       b       x0      y0     phi_deg
    (1.0,       0.6900, 0.9200,  0.00,   0.0000,   0.0),
    (-0.8,      0.6624, 0.8740,  0.00,  -0.0184,   0.0),
    (-0.2,      0.1100, 0.3100,  0.22,   0.0000, -18.0),
    (-0.2,      0.1600, 0.4100, -0.22,   0.0000,  18.0),
    (0.1,       0.2100, 0.2500,  0.00,   0.3500,   0.0),
    (0.1,       0.0460, 0.0460,  0.00,   0.1000,   0.0),
    (0.1,       0.0460, 0.0460,  0.00,  -0.1000,   0.0),
    (0.1,       0.0460, 0.0230, -0.08,  -0.6050,   0.0),
    (0.1,       0.0230, 0.0230,  0.00,  -0.6050,   0.0),
    (0.1,       0.0230, 0.0460,  0.06,  -0.6050,   0.0),
)


def point_intensity(x: float, y: float, ellipses=SHEPP_LOGAN_ELLIPSES) -> float:
    """Sum of intensities of the ellipses containing point (x, y)."""
    total = 0.0
    for inten, a, b, x0, y0, phi_deg in ellipses:
        phi = math.radians(phi_deg)
        dx = x - x0
        dy = y - y0
        u = dx * math.cos(phi) + dy * math.sin(phi)
        v = -dx * math.sin(phi) + dy * math.cos(phi)
        if (u / a) ** 2 + (v / b) ** 2 <= 1.0:
            total += inten
    return total


def shepp_logan(n: int) -> SignalGrid:
    """n x n phantom sampled at pixel centers, values clamped to [0, 1].

    Row 0 is the top of the head (y near +1); columns run left to right
    (x from -1 to +1).
    """
    n = int(n)
    if n < 8 or n % 2:
        raise ValueError(f"phantom size must be even and at least 8, got {n}")
    # pixel-center coordinates on [-1, 1]^2
    xs = -1.0 + (np.arange(n) + 0.5) * (2.0 / n)
    ys = 1.0 - (np.arange(n) + 0.5) * (2.0 / n)
    img = np.zeros((n, n))
    xg = xs[None, :]
    yg = ys[:, None]
    for inten, a, b, x0, y0, phi_deg in SHEPP_LOGAN_ELLIPSES:
        phi = math.radians(phi_deg)
        dx = xg - x0
        dy = yg - y0
        u = dx * math.cos(phi) + dy * math.sin(phi)
        v = -dx * math.sin(phi) + dy * math.cos(phi)
        img[(u / a) ** 2 + (v / b) ** 2 <= 1.0] += inten
    np.clip(img, 0.0, 1.0, out=img)
    return SignalGrid((n, n), img.reshape(-1))
