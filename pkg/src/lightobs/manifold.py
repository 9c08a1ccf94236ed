"""Lorentzian cylinder-type manifolds with timelike boundary.

Conventions used throughout the package:

* a single global chart with coordinates (t, x_1, ..., x_n); the metric
  has signature (-, +, ..., +) and ``t`` is the time function (dt is
  declared past-oriented covectorwise, so dt(V) > 0 means future),
* the spatial slice is a disk-like domain cut out by a defining function
  ``F`` with F > 0 in the interior, F = 0 on the boundary and dF != 0
  there,
* the auxiliary Riemannian metric used for normalization and distances
  is the Euclidean metric of the chart.

Built-in geometries: a flat solid cylinder (|x| < R), the same cylinder
with a radially perturbed boundary r < (1 + f(t, phi)) R, and static
products R_t x X for a flat disk or stadium factor X.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateBoundaryError, DomainError, PreconditionError

EPS_NULL = 1e-10       # |g(V,V)| <= EPS_NULL * g+(V,V) counts as null
EPS_TANGENT = 1e-8     # |dF(V)| <= EPS_TANGENT * |dF| |V| counts as boundary-tangent
EPS_STRICT = 1e-6      # classification margin for the convexity audit


# ---------------------------------------------------------------------------
# boundary perturbations (closed-form first and second derivatives)

@dataclass(frozen=True)
class CosinePerturbation:
    """f(t, phi) = amplitude * cos(t_frequency*t) * cos(angular_frequency*phi).

    angular_frequency must be an integer so the boundary closes up.
    """

    amplitude: float
    t_frequency: float = 1.0
    angular_frequency: int = 0

    def value(self, t, phi):
        return self.amplitude * np.cos(self.t_frequency * t) * np.cos(self.angular_frequency * phi)

    def grad(self, t, phi):
        a, w, m = self.amplitude, self.t_frequency, self.angular_frequency
        ft = -a * w * np.sin(w * t) * np.cos(m * phi)
        fp = -a * m * np.cos(w * t) * np.sin(m * phi)
        return ft, fp

    def hess(self, t, phi):
        a, w, m = self.amplitude, self.t_frequency, self.angular_frequency
        ftt = -a * w * w * np.cos(w * t) * np.cos(m * phi)
        ftp = a * w * m * np.sin(w * t) * np.sin(m * phi)
        fpp = -a * m * m * np.cos(w * t) * np.cos(m * phi)
        return ftt, ftp, fpp


@dataclass(frozen=True)
class BumpPerturbation:
    """Localized dent/bulge: Gaussian profile in t times a von-Mises
    profile in the angle (periodic, smooth, closed-form derivatives)."""

    amplitude: float
    t_center: float = 0.0
    t_width: float = 0.5
    phi_center: float = 0.0
    concentration: float = 8.0

    def _parts(self, t, phi):
        u = (t - self.t_center) / self.t_width
        gt = np.exp(-0.5 * u * u)
        gp = np.exp(self.concentration * (np.cos(phi - self.phi_center) - 1.0))
        return u, gt, gp

    def value(self, t, phi):
        _, gt, gp = self._parts(t, phi)
        return self.amplitude * gt * gp

    def grad(self, t, phi):
        u, gt, gp = self._parts(t, phi)
        k = self.concentration
        ft = self.amplitude * gt * gp * (-u / self.t_width)
        fp = self.amplitude * gt * gp * (-k * np.sin(phi - self.phi_center))
        return ft, fp

    def hess(self, t, phi):
        u, gt, gp = self._parts(t, phi)
        k = self.concentration
        s = np.sin(phi - self.phi_center)
        c = np.cos(phi - self.phi_center)
        base = self.amplitude * gt * gp
        ftt = base * (u * u - 1.0) / (self.t_width ** 2)
        ftp = base * (-u / self.t_width) * (-k * s)
        fpp = base * (k * k * s * s - k * c)
        return ftt, ftp, fpp


# ---------------------------------------------------------------------------
# spatial factors for static products

class DiskFactor:
    """Flat disk {|x| < radius} in R^n."""

    def __init__(self, radius=1.0, dim=2):
        self.radius = float(radius)
        self.dim = int(dim)
        self.perimeter = 2.0 * math.pi * self.radius

    def value(self, x):
        return self.radius - float(np.linalg.norm(x))

    def grad(self, x):
        r = np.linalg.norm(x)
        if r == 0.0:
            return np.zeros_like(x)
        return -np.asarray(x) / r

    def hess(self, x):
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x)
        n = len(x)
        if r == 0.0:
            return np.zeros((n, n))
        xh = x / r
        return -(np.eye(n) - np.outer(xh, xh)) / r

    def boundary_point(self, u):
        # u is the normalized parameter in [0, 2pi); only n = 2 supported
        return self.radius * np.array([math.cos(u), math.sin(u)])

    def boundary_param(self, x):
        return math.atan2(x[1], x[0]) % (2.0 * math.pi)


class StadiumFactor:
    """Stadium: points within ``radius`` of the segment [-half_length,
    half_length] x {0}.  The defining function is C^1 with a curvature
    jump where the straight edges meet the caps, which is the point of
    this factor: the flat edges make the boundary only weakly convex."""

    def __init__(self, radius=0.5, half_length=0.5):
        self.radius = float(radius)
        self.half_length = float(half_length)
        self.dim = 2
        self.perimeter = 2.0 * math.pi * self.radius + 4.0 * self.half_length

    def _seg_dist(self, x):
        dx = max(abs(x[0]) - self.half_length, 0.0)
        return math.hypot(dx, x[1])

    def value(self, x):
        return self.radius - self._seg_dist(x)

    def grad(self, x):
        L = self.half_length
        if abs(x[0]) <= L:
            if x[1] == 0.0:
                return np.zeros(2)
            return np.array([0.0, -math.copysign(1.0, x[1])])
        cx = math.copysign(L, x[0])
        d = math.hypot(x[0] - cx, x[1])
        if d == 0.0:
            return np.zeros(2)
        return -np.array([x[0] - cx, x[1]]) / d

    def hess(self, x):
        L = self.half_length
        if abs(x[0]) <= L:
            return np.zeros((2, 2))
        cx = math.copysign(L, x[0])
        v = np.array([x[0] - cx, x[1]])
        d = np.linalg.norm(v)
        if d == 0.0:
            return np.zeros((2, 2))
        vh = v / d
        return -(np.eye(2) - np.outer(vh, vh)) / d

    def boundary_point(self, u):
        R, L = self.radius, self.half_length
        s = (u % (2.0 * math.pi)) / (2.0 * math.pi) * self.perimeter
        if s < math.pi * R:
            th = -0.5 * math.pi + s / R
            return np.array([L + R * math.cos(th), R * math.sin(th)])
        s -= math.pi * R
        if s < 2.0 * L:
            return np.array([L - s, R])
        s -= 2.0 * L
        if s < math.pi * R:
            th = 0.5 * math.pi + s / R
            return np.array([-L + R * math.cos(th), R * math.sin(th)])
        s -= math.pi * R
        return np.array([-L + s, -R])

    def boundary_param(self, x):
        R, L = self.radius, self.half_length
        if x[0] > L:
            th = math.atan2(x[1], x[0] - L)
            s = (th + 0.5 * math.pi) * R
        elif x[0] < -L:
            th = math.atan2(x[1], x[0] + L)
            if th < 0.5 * math.pi:
                th += 2.0 * math.pi
            s = math.pi * R + 2.0 * L + (th - 0.5 * math.pi) * R
        elif x[1] > 0:
            s = math.pi * R + (L - x[0])
        else:
            s = 2.0 * math.pi * R + 2.0 * L + (x[0] + L)
        return (s / self.perimeter) * 2.0 * math.pi


# ---------------------------------------------------------------------------
# manifold specifications

class ManifoldSpec:
    """Base class; subclasses fill in metric and boundary data.

    ``dim`` is the number n of spatial dimensions (spacetime is n+1
    dimensional), ``scale`` a coordinate length used to seed tolerances.
    """

    kind = "abstract"
    dim = 2
    scale = 1.0
    flat = False          # True when all Christoffel symbols vanish

    # -- metric -------------------------------------------------------
    def metric(self, p):
        raise NotImplementedError

    def metric_inv(self, p):
        return np.linalg.inv(self.metric(p))

    def christoffel(self, p):
        """Analytic Christoffel symbols, or None when unavailable."""
        if self.flat:
            d = self.dim + 1
            return np.zeros((d, d, d))
        return None

    # -- boundary -----------------------------------------------------
    def boundary_value(self, p):
        raise NotImplementedError

    def boundary_grad(self, p):
        raise NotImplementedError

    def boundary_hess(self, p):
        raise NotImplementedError

    def boundary_point(self, t, u):
        """Embed boundary-chart coordinates (t, u) into the spacetime chart."""
        raise NotImplementedError

    def boundary_coords(self, p):
        """Boundary-chart coordinates (t, u) of a point on (or near) the boundary."""
        raise NotImplementedError

    def boundary_jacobian(self, t, u, step=1e-6):
        """Columns: derivative of boundary_point with respect to (t, u)."""
        cols = []
        for i, h in ((0, step), (1, step)):
            args_p = [t, u]
            args_m = [t, u]
            args_p[i] += h
            args_m[i] -= h
            cols.append((self.boundary_point(*args_p) - self.boundary_point(*args_m)) / (2 * h))
        return np.stack(cols, axis=1)

    def contains(self, p):
        return self.boundary_value(p) > 0.0

    # -- auxiliary structures ------------------------------------------
    def aux_metric(self, p):
        return np.eye(self.dim + 1)


class MinkowskiCylinder(ManifoldSpec):
    """Flat metric -dt^2 + dx^2 on {|x| < radius}."""

    kind = "minkowski_cylinder"
    flat = True

    def __init__(self, radius=1.0, dim=2):
        self.radius = float(radius)
        self.dim = int(dim)
        self.scale = self.radius
        g = np.eye(self.dim + 1)
        g[0, 0] = -1.0
        self._g = g

    def metric(self, p):
        return self._g

    def metric_inv(self, p):
        return self._g     # own inverse

    def boundary_value(self, p):
        return self.radius - float(np.linalg.norm(p[1:]))

    def boundary_grad(self, p):
        x = np.asarray(p[1:], dtype=float)
        r = np.linalg.norm(x)
        out = np.zeros(self.dim + 1)
        if r > 0:
            out[1:] = -x / r
        return out

    def boundary_hess(self, p):
        x = np.asarray(p[1:], dtype=float)
        r = np.linalg.norm(x)
        out = np.zeros((self.dim + 1, self.dim + 1))
        if r > 0:
            xh = x / r
            out[1:, 1:] = -(np.eye(self.dim) - np.outer(xh, xh)) / r
        return out

    def boundary_point(self, t, u):
        if self.dim != 2:
            raise DomainError("boundary chart implemented for dim == 2 only")
        return np.array([t, self.radius * math.cos(u), self.radius * math.sin(u)])

    def boundary_coords(self, p):
        return float(p[0]), math.atan2(p[2], p[1]) % (2.0 * math.pi)

    def boundary_jacobian(self, t, u, step=None):
        R = self.radius
        return np.array([[1.0, 0.0],
                         [0.0, -R * math.sin(u)],
                         [0.0, R * math.cos(u)]])


class PerturbedCylinder(ManifoldSpec):
    """Flat metric on r < (1 + f(t, phi)) * radius, dim == 2.

    Only the boundary moves; the metric stays -dt^2 + dx^2.  The
    perturbation must supply closed-form first and second derivatives
    because the second fundamental form needs two derivatives of the
    defining function.
    """

    kind = "perturbed_cylinder"
    flat = True
    dim = 2

    def __init__(self, radius=1.0, perturbation=None):
        self.radius = float(radius)
        self.perturbation = perturbation or CosinePerturbation(0.0)
        self.scale = self.radius
        g = np.eye(3)
        g[0, 0] = -1.0
        self._g = g

    def metric(self, p):
        return self._g

    def metric_inv(self, p):
        return self._g

    def _polar(self, p):
        t, x, y = float(p[0]), float(p[1]), float(p[2])
        r = math.hypot(x, y)
        phi = math.atan2(y, x)
        return t, x, y, r, phi

    def boundary_value(self, p):
        t, _, _, r, phi = self._polar(p)
        return (1.0 + float(self.perturbation.value(t, phi))) * self.radius - r

    def boundary_grad(self, p):
        t, x, y, r, phi = self._polar(p)
        if r == 0.0:
            raise DegenerateBoundaryError("defining-function gradient undefined at the axis")
        ft, fp = self.perturbation.grad(t, phi)
        R = self.radius
        # phi_x = -y/r^2, phi_y = x/r^2
        return np.array([R * ft,
                         R * fp * (-y / r ** 2) - x / r,
                         R * fp * (x / r ** 2) - y / r])

    def boundary_hess(self, p):
        t, x, y, r, phi = self._polar(p)
        if r == 0.0:
            raise DegenerateBoundaryError("defining-function Hessian undefined at the axis")
        ft, fp = self.perturbation.grad(t, phi)
        ftt, ftp, fpp = self.perturbation.hess(t, phi)
        R = self.radius
        r2, r3, r4 = r ** 2, r ** 3, r ** 4
        px, py = -y / r2, x / r2
        pxx, pxy, pyy = 2 * x * y / r4, (y * y - x * x) / r4, -2 * x * y / r4
        rxx, rxy, ryy = y * y / r3, -x * y / r3, x * x / r3
        H = np.empty((3, 3))
        H[0, 0] = R * ftt
        H[0, 1] = H[1, 0] = R * ftp * px
        H[0, 2] = H[2, 0] = R * ftp * py
        H[1, 1] = R * (fpp * px * px + fp * pxx) - rxx
        H[1, 2] = H[2, 1] = R * (fpp * px * py + fp * pxy) - rxy
        H[2, 2] = R * (fpp * py * py + fp * pyy) - ryy
        return H

    def boundary_point(self, t, u):
        rho = (1.0 + float(self.perturbation.value(t, u))) * self.radius
        return np.array([t, rho * math.cos(u), rho * math.sin(u)])

    def boundary_coords(self, p):
        return float(p[0]), math.atan2(p[2], p[1]) % (2.0 * math.pi)

    def boundary_jacobian(self, t, u, step=None):
        R = self.radius
        rho = (1.0 + float(self.perturbation.value(t, u))) * R
        ft, fp = self.perturbation.grad(t, u)
        c, s = math.cos(u), math.sin(u)
        return np.array([[1.0, 0.0],
                         [R * ft * c, R * fp * c - rho * s],
                         [R * ft * s, R * fp * s + rho * c]])


class StaticProduct(ManifoldSpec):
    """R_t x X with metric -dt^2 + h for a flat factor X."""

    kind = "static_product"
    flat = True

    def __init__(self, factor):
        self.factor = factor
        self.dim = factor.dim
        self.scale = factor.radius
        g = np.eye(self.dim + 1)
        g[0, 0] = -1.0
        self._g = g

    def metric(self, p):
        return self._g

    def metric_inv(self, p):
        return self._g

    def boundary_value(self, p):
        return self.factor.value(np.asarray(p[1:], dtype=float))

    def boundary_grad(self, p):
        out = np.zeros(self.dim + 1)
        out[1:] = self.factor.grad(np.asarray(p[1:], dtype=float))
        return out

    def boundary_hess(self, p):
        out = np.zeros((self.dim + 1, self.dim + 1))
        out[1:, 1:] = self.factor.hess(np.asarray(p[1:], dtype=float))
        return out

    def boundary_point(self, t, u):
        return np.concatenate(([t], self.factor.boundary_point(u)))

    def boundary_coords(self, p):
        return float(p[0]), self.factor.boundary_param(np.asarray(p[1:], dtype=float))


class CustomManifold(ManifoldSpec):
    """Escape hatch for tests and experiments: metric and boundary are
    supplied as callables; Christoffel symbols fall back to finite
    differences unless given analytically."""

    kind = "custom"

    def __init__(self, dim, metric_fn, boundary_fn, boundary_grad_fn=None,
                 christoffel_fn=None, scale=1.0):
        self.dim = int(dim)
        self.scale = float(scale)
        self._metric_fn = metric_fn
        self._boundary_fn = boundary_fn
        self._boundary_grad_fn = boundary_grad_fn
        self._christoffel_fn = christoffel_fn
        self.flat = False

    def metric(self, p):
        return np.asarray(self._metric_fn(np.asarray(p, dtype=float)), dtype=float)

    def christoffel(self, p):
        if self._christoffel_fn is not None:
            return np.asarray(self._christoffel_fn(np.asarray(p, dtype=float)), dtype=float)
        return None

    def boundary_value(self, p):
        return float(self._boundary_fn(np.asarray(p, dtype=float)))

    def boundary_grad(self, p, step=1e-7):
        if self._boundary_grad_fn is not None:
            return np.asarray(self._boundary_grad_fn(np.asarray(p, dtype=float)), dtype=float)
        p = np.asarray(p, dtype=float)
        out = np.empty(self.dim + 1)
        for i in range(self.dim + 1):
            e = np.zeros(self.dim + 1)
            e[i] = step * self.scale
            out[i] = (self.boundary_value(p + e) - self.boundary_value(p - e)) / (2 * step * self.scale)
        return out

    def boundary_hess(self, p, step=1e-5):
        p = np.asarray(p, dtype=float)
        d = self.dim + 1
        out = np.empty((d, d))
        h = step * self.scale
        for i in range(d):
            e = np.zeros(d)
            e[i] = h
            gp = self.boundary_grad(p + e)
            gm = self.boundary_grad(p - e)
            out[i] = (gp - gm) / (2 * h)
        return 0.5 * (out + out.T)


# ---------------------------------------------------------------------------
# pointwise tensor operations

def metric_at(spec, p):
    """Metric matrix at p; raises DomainError outside the closed manifold."""
    if spec.boundary_value(p) < -10.0 * EPS_NULL * spec.scale:
        raise DomainError(f"point {np.asarray(p)} lies outside the domain")
    return spec.metric(p)


def christoffel_fd(spec, p, step=1e-5):
    """Central-difference Christoffel symbols from the metric alone."""
    p = np.asarray(p, dtype=float)
    d = spec.dim + 1
    h = step * spec.scale
    dg = np.empty((d, d, d))
    for a in range(d):
        e = np.zeros(d)
        e[a] = h
        dg[a] = (spec.metric(p + e) - spec.metric(p - e)) / (2 * h)
    ginv = np.linalg.inv(spec.metric(p))
    # Gamma^a_{bc} = 1/2 g^{ad} (d_b g_{dc} + d_c g_{db} - d_d g_{bc})
    sym = dg.transpose(1, 0, 2) + dg.transpose(2, 0, 1) - dg
    return 0.5 * np.einsum('ad,dbc->abc', ginv, sym)


def christoffel_at(spec, p, step=1e-5):
    """Analytic Christoffel symbols when available, FD fallback otherwise."""
    gamma = spec.christoffel(p)
    if gamma is None:
        gamma = christoffel_fd(spec, p, step=step)
    return gamma


def lorentz_sq(spec, p, v):
    g = spec.metric(p)
    v = np.asarray(v, dtype=float)
    return float(v @ g @ v)


def aux_sq(spec, p, v):
    v = np.asarray(v, dtype=float)
    return float(v @ v)


def causal_character(spec, p, v):
    q = lorentz_sq(spec, p, v)
    a = aux_sq(spec, p, v)
    if a == 0.0:
        raise PreconditionError("zero vector has no causal character")
    if abs(q) <= EPS_NULL * a:
        return "null"
    return "timelike" if q < 0 else "spacelike"


def is_future(spec, p, v):
    return float(v[0]) > 0.0


def outward_normal(spec, p, tol_bdy=None):
    """Outward unit normal at a boundary point.

    Computed as -grad F / |grad F|_g; outward means dF(nu) < 0.
    """
    tol = tol_bdy if tol_bdy is not None else 1e-6 * spec.scale
    if abs(spec.boundary_value(p)) > tol:
        raise PreconditionError("outward_normal requires a boundary point")
    dF = spec.boundary_grad(p)
    ginv = spec.metric_inv(p)
    gradF = ginv @ dF
    nrm2 = float(dF @ gradF)
    if nrm2 <= 0.0:
        raise DegenerateBoundaryError("defining-function gradient is not spacelike")
    nu = -gradF / math.sqrt(nrm2)
    return nu


def second_fundamental_form(spec, p, v, w, tol_bdy=None):
    """II(V, W) for boundary-tangent V, W; positive values bend null rays
    back into the interior."""
    tol = tol_bdy if tol_bdy is not None else 1e-6 * spec.scale
    if abs(spec.boundary_value(p)) > tol:
        raise PreconditionError("second_fundamental_form requires a boundary point")
    dF = spec.boundary_grad(p)
    nF = np.linalg.norm(dF)
    for vec in (v, w):
        if abs(float(dF @ vec)) > EPS_TANGENT * nF * max(np.linalg.norm(vec), 1e-300):
            raise PreconditionError("vector is not tangent to the boundary")
    ginv = spec.metric_inv(p)
    gradF = ginv @ dF
    scale = math.sqrt(float(dF @ gradF))
    if scale == 0.0:
        raise DegenerateBoundaryError("defining-function gradient vanishes")
    hess = spec.boundary_hess(p)
    gamma = spec.christoffel(p)
    if gamma is None:
        gamma = christoffel_fd(spec, p)
    hx = hess - np.einsum('c,cab->ab', dF, gamma)
    return -float(v @ hx @ w) / scale


def reflect(spec, p, v, tol_bdy=None):
    """Billiard reflection rho(V) = V - 2 g(V, nu) nu at a boundary point.

    Accepts null vectors only; preserves nullity, boundary-tangential
    inner products and time orientation.
    """
    v = np.asarray(v, dtype=float)
    if abs(lorentz_sq(spec, p, v)) > EPS_NULL * max(aux_sq(spec, p, v), 1e-300):
        raise PreconditionError("reflect accepts null vectors only")
    nu = outward_normal(spec, p, tol_bdy=tol_bdy)
    g = spec.metric(p)
    return v - 2.0 * float(v @ g @ nu) * nu


def _future_null_time_component(g, u):
    """Solve g(V,V)=0 for the time component of V=(a, u), future root."""
    gtt = g[0, 0]
    b = float(g[0, 1:] @ u)
    c = float(u @ g[1:, 1:] @ u)
    disc = b * b - gtt * c
    if disc <= 0.0:
        raise DegenerateBoundaryError("no null vector over the given spatial direction")
    r1 = (-b + math.sqrt(disc)) / gtt
    r2 = (-b - math.sqrt(disc)) / gtt
    return max(r1, r2)


def sample_null_directions(spec, q, m):
    """m future-directed null directions at q with unit auxiliary norm.

    Spatial directions are placed deterministically: equally spaced
    angles for n = 2, a Fibonacci sphere for n = 3.
    """
    if not spec.contains(q):
        raise DomainError("source point lies outside the domain")
    n = spec.dim
    g = spec.metric(q)
    if n == 2:
        ang = 2.0 * math.pi * np.arange(m) / m
        us = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    elif n == 3:
        k = np.arange(m) + 0.5
        phi = math.pi * (1 + math.sqrt(5)) * k
        z = 1 - 2 * k / m
        r = np.sqrt(1 - z * z)
        us = np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    else:
        raise DomainError("direction sampling implemented for n in {2, 3}")
    out = np.empty((m, n + 1))
    for i, u in enumerate(us):
        a = _future_null_time_component(g, u)
        v = np.concatenate(([a], u))
        out[i] = v / np.linalg.norm(v)
    return out


def boundary_null_tangents(spec, p, unit_spatial=True):
    """The null directions inside T_p(boundary), n = 2: two rays.

    Vectors are scaled so the Euclidean norm of the spatial part is 1,
    matching the curvature normalization 1/R of the round cylinder.
    """
    dF = spec.boundary_grad(p)
    # tangent space = null space of the 1 x (n+1) row dF
    _, _, vt = np.linalg.svd(dF[None, :])
    basis = vt[1:]                       # rows orthogonal to dF
    g = spec.metric(p)
    gsub = basis @ g @ basis.T
    evals, evecs = np.linalg.eigh(gsub)
    if evals[0] >= 0 or np.any(evals[1:] <= 0):
        raise DegenerateBoundaryError("boundary tangent space is not timelike")
    e0 = basis.T @ evecs[:, 0] / math.sqrt(-evals[0])
    rays = []
    for sign in (+1.0, -1.0):
        e1 = basis.T @ evecs[:, 1] / math.sqrt(evals[1])
        v = e0 + sign * e1
        if v[0] < 0:
            v = -v
        if unit_spatial:
            v = v / np.linalg.norm(v[1:])
        rays.append(v)
    return rays


@dataclass
class ConvexityReport:
    classification: str              # "strict" | "weak" | "violated"
    min_value: float
    worst_point: np.ndarray
    worst_vector: np.ndarray
    n_samples: int
    values: np.ndarray = field(repr=False, default=None)


def audit_null_convexity(spec, t_box, n_t=24, n_u=48, u_box=None, eps=EPS_STRICT):
    """Sample II(V, V) over null boundary-tangent directions in the given
    boundary-chart box and classify the boundary's convexity.

    Returns a ConvexityReport; ``strict`` requires every sampled value
    above ``eps``, ``violated`` means some value below ``-eps``.
    """
    ts = np.linspace(t_box[0], t_box[1], n_t)
    if u_box is None:
        us = 2.0 * math.pi * (np.arange(n_u) + 0.371) / n_u   # offset avoids symmetry axes
    else:
        us = np.linspace(u_box[0], u_box[1], n_u)
    best = None
    vals = np.empty(len(ts) * len(us) * 2)
    idx = 0
    for t in ts:
        for u in us:
            p = spec.boundary_point(t, u)
            for v in boundary_null_tangents(spec, p):
                val = second_fundamental_form(spec, p, v, v)
                vals[idx] = val
                idx += 1
                if best is None or val < best[0]:
                    best = (val, p, v)
    mn = float(best[0])
    if mn > eps:
        cls = "strict"
    elif mn < -eps:
        cls = "violated"
    else:
        cls = "weak"
    return ConvexityReport(cls, mn, best[1], best[2], idx, vals)
