"""Independent reference computations used by the tests.

Nothing here imports the filter internals: each oracle re-derives its
answer from first principles (dense sampling, fine integration, finite
differences, closed-form algebra, a discretized Bayes filter).
"""

from __future__ import annotations

import math
from functools import reduce
from operator import xor

import numpy as np
from scipy.integrate import trapezoid
from scipy.ndimage import gaussian_filter


# -- geometry ----------------------------------------------------------------

def dense_projection(p, a, b, n=1000):
    """Closest of ``n + 1`` evenly spaced points on segment ab."""
    t = np.linspace(0.0, 1.0, n + 1)
    pts = np.outer(1 - t, a) + np.outer(t, b)
    d = np.hypot(pts[:, 0] - p[0], pts[:, 1] - p[1])
    k = int(np.argmin(d))
    return pts[k], float(d[k])


def point_segment_distance(p, a, b):
    """Scalar distance via the dot-product foot, clamped to [0, 1]."""
    ax, ay = a
    bx, by = b
    vx, vy = bx - ax, by - ay
    t = ((p[0] - ax) * vx + (p[1] - ay) * vy) / (vx * vx + vy * vy)
    t = min(1.0, max(0.0, t))
    return math.hypot(p[0] - (ax + t * vx), p[1] - (ay + t * vy))


def angular_distance(a, b):
    d = (a - b) % (2 * math.pi)
    return min(d, 2 * math.pi - d)


# -- motion ------------------------------------------------------------------

def exact_arc(pose, ds, dth, substeps=10_000):
    """Integrate the unicycle with constant curvature over ``ds`` meters
    in ``substeps`` midpoint steps."""
    x, y, th = map(float, pose)
    h = ds / substeps
    k = dth / ds if ds else 0.0
    for _ in range(substeps):
        mid = th + 0.5 * k * h
        x += h * math.cos(mid)
        y += h * math.sin(mid)
        th += k * h
    return np.array([x, y, th])


def central_jacobian(fun, x0, h=1e-6):
    x0 = np.asarray(x0, dtype=float)
    f0 = np.asarray(fun(x0))
    J = np.zeros((f0.size, x0.size))
    for k in range(x0.size):
        e = np.zeros_like(x0)
        e[k] = h
        J[:, k] = (np.asarray(fun(x0 + e)) - np.asarray(fun(x0 - e))) / (2 * h)
    return J


# -- NMEA / geodesy ----------------------------------------------------------

def xor_checksum(body: str) -> int:
    return reduce(xor, body.encode("ascii"), 0)


def meridional_radius(lat_deg, a=6378137.0, f=1 / 298.257223563):
    """M(phi) by its textbook closed form."""
    e2 = f * (2 - f)
    s = math.sin(math.radians(lat_deg))
    return a * (1 - e2) / (1 - e2 * s * s) ** 1.5


def meridian_arc(lat0, lat1, a=6378137.0, f=1 / 298.257223563, n=20_000):
    """Arc length along the meridian by trapezoid quadrature of M."""
    phis = np.linspace(lat0, lat1, n + 1)
    m = np.array([meridional_radius(p, a, f) for p in phis])
    return float(trapezoid(m, np.radians(phis)))


# -- Kalman ------------------------------------------------------------------

def scalar_kalman(m, p, z, r):
    k = p / (p + r)
    return m + k * (z - m), (1 - k) * p, k


# Two-sided 95% chi-square quantiles for 3 degrees of freedom, from a
# printed table.
CHI2_3DOF_95 = (0.2158, 9.3484)


# -- brute-force Bayes filter over (pose grid) x (segment) -------------------

class GridBayesFilter:
    """Discretized joint filter over a regular (x, y, theta) grid and a
    finite set of segment modes.

    Prediction shifts every cell through the motion model and deposits its
    mass trilinearly on the neighbouring nodes, then blurs with the process
    noise. Updates multiply by the Gaussian observation densities on the
    grid nodes. Mode marginals are sums over the pose grid.
    """

    def __init__(self, xs, ys, ths, modes, mean0, cov0):
        self.xs, self.ys, self.ths = (np.asarray(v, dtype=float) for v in (xs, ys, ths))
        self.modes = list(modes)
        X, Y, T = np.meshgrid(self.xs, self.ys, self.ths, indexing="ij")
        self.nodes = np.stack([X, Y, T], axis=-1)
        prior = self._gauss(self.nodes, np.asarray(mean0, float), np.asarray(cov0, float), angle=2)
        prior /= prior.sum()
        self.p = np.stack([prior / len(self.modes)] * len(self.modes))

    @staticmethod
    def _gauss(pts, mean, cov, angle=None):
        d = pts - mean
        if angle is not None:
            d[..., angle] = (d[..., angle] + np.pi) % (2 * np.pi) - np.pi
        inv = np.linalg.inv(cov)
        q = np.einsum("...i,ij,...j->...", d, inv, d)
        return np.exp(-0.5 * q) / math.sqrt((2 * math.pi) ** len(mean) * np.linalg.det(cov))

    def _deposit(self, mass, pts):
        out = np.zeros_like(mass)
        steps = [self.xs[1] - self.xs[0], self.ys[1] - self.ys[0], self.ths[1] - self.ths[0]]
        origin = [self.xs[0], self.ys[0], self.ths[0]]
        shape = mass.shape
        f = [(pts[..., k] - origin[k]) / steps[k] for k in range(3)]
        i0 = [np.floor(v).astype(int) for v in f]
        fr = [v - i for v, i in zip(f, i0)]
        for cx in (0, 1):
            for cy in (0, 1):
                for ct in (0, 1):
                    idx = [i0[0] + cx, i0[1] + cy, i0[2] + ct]
                    w = ((fr[0] if cx else 1 - fr[0]) * (fr[1] if cy else 1 - fr[1])
                         * (fr[2] if ct else 1 - fr[2]))
                    ok = np.ones(shape, bool)
                    for k in range(3):
                        ok &= (idx[k] >= 0) & (idx[k] < shape[k])
                    np.add.at(out, tuple(v[ok] for v in idx), (mass * w)[ok])
        return out

    def predict(self, ds, dth, B, noise_sigma=(0.0, 0.0, 0.0)):
        """``B[i, j]`` = P(mode j | mode i); ``noise_sigma`` in (m, m, rad)."""
        th = self.nodes[..., 2]
        a = th + dth / 2
        moved = np.stack([self.nodes[..., 0] + ds * np.cos(a),
                          self.nodes[..., 1] + ds * np.sin(a),
                          th + dth], axis=-1)
        shifted = np.stack([self._deposit(pm, moved) for pm in self.p])
        cell = (self.xs[1] - self.xs[0], self.ys[1] - self.ys[0], self.ths[1] - self.ths[0])
        sig = [s / c for s, c in zip(noise_sigma, cell)]
        if any(s > 0 for s in sig):
            shifted = np.stack([gaussian_filter(pm, sig, mode="constant") for pm in shifted])
        self.p = np.einsum("ij,i...->j...", np.asarray(B), shifted)

    def update(self, likelihoods):
        """``likelihoods[m]`` is a callable on the node array for mode m."""
        for m in range(len(self.modes)):
            self.p[m] *= likelihoods[m](self.nodes)
        self.p /= self.p.sum()

    def gaussian_likelihood(self, z, R, dims, angle_dim=None):
        z = np.asarray(z, float)
        R = np.asarray(R, float)

        def lik(nodes):
            pts = nodes[..., dims]
            ad = dims.index(angle_dim) if angle_dim in dims else None
            return self._gauss(pts, z, R, angle=ad)
        return lik

    def mode_marginals(self):
        return self.p.reshape(len(self.modes), -1).sum(axis=1)
