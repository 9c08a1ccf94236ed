"""Broken null-geodesic flow: adaptive integration between boundary
contacts, billiard reflection at the boundary, and derived diagnostics.

The integrator is an embedded Dormand-Prince 4(5) pair with cubic
Hermite dense output.  After every accepted step the time component of
the velocity is re-solved from g(V, V) = 0 (spatial part kept fixed) so
truncation error cannot slowly drift the ray off the light cone.
Boundary contacts are located by a sign change of the defining function
along the dense output, refined by bracketed root finding, then the
contact point is projected onto the zero level set.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import PreconditionError, StratumError
from .manifold import christoffel_fd, outward_normal, reflect

# Dormand-Prince 4(5) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
_A = (
    np.array([], dtype=float),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
)
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200,
                187 / 2100, 1 / 40])


class Termination(enum.Enum):
    AFFINE_LIMIT = "AffineLimit"
    TIME_WINDOW_EXIT = "TimeWindowExit"
    REFLECTION_LIMIT = "ReflectionLimit"
    GRAZING_ABORT = "GrazingAbort"
    ACCUMULATION_SUSPECTED = "AccumulationSuspected"
    STEP_UNDERFLOW = "StepUnderflow"


@dataclass
class IntegratorOptions:
    rtol: float = 1e-10
    atol: float = 1e-12
    h0: float | None = None
    max_step: float = math.inf
    eps_bdy: float | None = None        # defaults to 1e-10 * spec.scale
    eps_tan: float = 1e-6
    renormalize: bool = True
    christoffel_step: float = 1e-5


@dataclass
class Limits:
    """Budget and window limits for a broken trajectory."""

    s_total: float = 100.0
    max_reflections: int = 64
    t_min: float = -math.inf
    t_max: float = math.inf
    min_chord: float = 1e-4


@dataclass
class Segment:
    """Dense-output record of one boundary-free arc.

    Node arrays carry position, velocity and acceleration at the
    accepted steps; evaluation interpolates with cubic Hermite
    polynomials, which is exact for straight-line arcs.
    """

    s_nodes: np.ndarray
    points: np.ndarray
    velocities: np.ndarray
    accelerations: np.ndarray

    @property
    def s0(self):
        return float(self.s_nodes[0])

    @property
    def s1(self):
        return float(self.s_nodes[-1])

    def eval(self, s):
        s = float(s)
        i = int(np.searchsorted(self.s_nodes, s, side="right")) - 1
        i = min(max(i, 0), len(self.s_nodes) - 2)
        h = self.s_nodes[i + 1] - self.s_nodes[i]
        th = (s - self.s_nodes[i]) / h
        h00 = (1 + 2 * th) * (1 - th) ** 2
        h10 = th * (1 - th) ** 2
        h01 = th * th * (3 - 2 * th)
        h11 = th * th * (th - 1)
        p = (h00 * self.points[i] + h10 * h * self.velocities[i]
             + h01 * self.points[i + 1] + h11 * h * self.velocities[i + 1])
        v = (h00 * self.velocities[i] + h10 * h * self.accelerations[i]
             + h01 * self.velocities[i + 1] + h11 * h * self.accelerations[i + 1])
        return p, v


@dataclass
class BoundaryHit:
    s: float
    point: np.ndarray
    velocity: np.ndarray      # incoming (outward-pointing) velocity


@dataclass
class ReflectionEvent:
    s: float
    point: np.ndarray
    v_in: np.ndarray
    v_out: np.ndarray
    theta: float                   # dF(v_out) > 0, the inward angle
    chord_next: float | None = None


@dataclass
class BrokenGeodesic:
    spec: object
    initial_point: np.ndarray
    initial_velocity: np.ndarray
    segments: list = field(default_factory=list)        # (s_offset, Segment)
    reflections: list = field(default_factory=list)
    termination: Termination = Termination.AFFINE_LIMIT
    s_end: float = 0.0

    @property
    def reflection_count(self):
        return len(self.reflections)

    def eval(self, s):
        if not self.segments:
            raise PreconditionError("empty trajectory")
        s = min(max(s, 0.0), self.s_end)
        for off, seg in reversed(self.segments):
            if s >= off - 1e-15:
                return seg.eval(s - off)
        off, seg = self.segments[0]
        return seg.eval(s - off)

    @property
    def end_state(self):
        return self.eval(self.s_end)


def _renormalize_null(g, v):
    """Re-solve the time component of v from g(v, v) = 0, keeping the
    spatial part and the time orientation."""
    gtt = g[0, 0]
    u = v[1:]
    b = float(g[0, 1:] @ u)
    c = float(u @ g[1:, 1:] @ u)
    disc = b * b - gtt * c
    if disc <= 0.0:
        return v
    r1 = (-b + math.sqrt(disc)) / gtt
    r2 = (-b - math.sqrt(disc)) / gtt
    vt = r1 if (r1 > 0) == (v[0] > 0) else r2
    out = v.copy()
    out[0] = vt
    return out


def _segment_result(nodes):
    s, p, v, a = zip(*nodes)
    return Segment(np.array(s), np.array(p), np.array(v), np.array(a))


def integrate_segment(spec, point, velocity, s_budget, opts=None):
    """Integrate one boundary-free arc of the null geodesic flow.

    Returns (segment, hit, status) with status one of "budget", "hit",
    "grazing", "underflow".  ``hit`` carries the refined boundary
    contact when status == "hit".
    """
    opts = opts or IntegratorOptions()
    d = spec.dim + 1
    eps_bdy = opts.eps_bdy if opts.eps_bdy is not None else 1e-10 * spec.scale
    arm_eps = max(100.0 * eps_bdy, 1e-9 * spec.scale)
    flat = spec.flat
    zero_acc = np.zeros(d)

    def rhs(p, v):
        if flat:
            return zero_acc
        gamma = spec.christoffel(p)
        if gamma is None:
            gamma = christoffel_fd(spec, p, step=opts.christoffel_step)
        return -np.einsum('abc,b,c->a', gamma, v, v)

    p = np.asarray(point, dtype=float).copy()
    v = np.asarray(velocity, dtype=float).copy()
    F0 = spec.boundary_value(p)
    dF0 = spec.boundary_grad(p)
    if F0 < arm_eps and float(dF0 @ v) < 0:
        raise PreconditionError("segment starts on the boundary moving outward")
    armed = F0 > arm_eps

    nodes = [(0.0, p.copy(), v.copy(), rhs(p, v))]
    s = 0.0
    vnorm = max(np.linalg.norm(v), 1e-300)
    h = opts.h0 if opts.h0 is not None else min(0.05 * spec.scale / vnorm, s_budget)
    h = min(h, s_budget, opts.max_step)
    h_min = 1e-14 * max(spec.scale, 1.0)

    ks = np.empty((7, 2 * d))

    def f(y):
        return np.concatenate((y[d:], rhs(y[:d], y[d:])))

    y = np.concatenate((p, v))
    while s < s_budget - 1e-15:
        h = min(h, s_budget - s, opts.max_step)
        if h < h_min:
            return _segment_result(nodes), None, "underflow"
        ks[0] = f(y)
        for i in range(1, 6):
            yi = y + h * (ks[:i].T @ _A[i])
            ks[i] = f(yi)
        y5 = y + h * (ks[:6].T @ _B5[:6])
        ks[6] = f(y5)
        y4 = y + h * (ks.T @ _B4)
        scale_vec = opts.atol + opts.rtol * np.maximum(np.abs(y), np.abs(y5))
        err = math.sqrt(float(np.mean(((y5 - y4) / scale_vec) ** 2)))
        if err > 1.0:
            h *= max(0.9 * err ** -0.2, 0.1)
            continue

        # accepted
        p1 = y5[:d]
        v1 = y5[d:]
        if opts.renormalize:
            v1 = _renormalize_null(spec.metric(p1), v1)
        a1 = rhs(p1, v1)
        s1 = s + h
        nodes.append((s1, p1.copy(), v1.copy(), a1))
        seg_now = _segment_result(nodes[-2:])

        # scan the step for a boundary crossing; interior samples arm the
        # detector after a start on the boundary and guard against dipping
        # through a non-convex boundary within one long step
        F1 = spec.boundary_value(p1)
        crossing = None
        prev_s = s
        for th in (0.25, 0.5, 0.75, 1.0):
            si = s + th * h
            Fi = F1 if th == 1.0 else spec.boundary_value(seg_now.eval(si)[0])
            if not armed:
                if Fi > arm_eps:
                    armed = True
                    prev_s = si
                continue
            if Fi < 0.0:
                crossing = (prev_s, si)
                break
            prev_s = si

        if crossing is not None:
            lo, hi = crossing

            def fb(ss):
                return spec.boundary_value(seg_now.eval(ss)[0])

            s_hit = brentq(fb, lo, hi, xtol=1e-15, rtol=8.9e-16)
            p_hit, v_hit = seg_now.eval(s_hit)
            # project the contact point onto the zero level set
            for _ in range(3):
                Fh = spec.boundary_value(p_hit)
                if abs(Fh) <= eps_bdy:
                    break
                gFh = spec.boundary_grad(p_hit)
                p_hit = p_hit + (-Fh / float(gFh @ gFh)) * gFh
            if opts.renormalize:
                v_hit = _renormalize_null(spec.metric(p_hit), v_hit)
            dFh = spec.boundary_grad(p_hit)
            theta_in = float(dFh @ v_hit)
            graze_scale = np.linalg.norm(dFh) * max(np.linalg.norm(v_hit), 1e-300)
            nodes[-1] = (s_hit, p_hit.copy(), v_hit.copy(), rhs(p_hit, v_hit))
            seg = _segment_result(nodes)
            if abs(theta_in) < opts.eps_tan * graze_scale:
                return seg, None, "grazing"
            return seg, BoundaryHit(s_hit, p_hit, v_hit), "hit"

        y = np.concatenate((p1, v1))
        s = s1
        h *= min(max(0.9 * err ** -0.2 if err > 0 else 5.0, 0.2), 5.0)

    return _segment_result(nodes), None, "budget"


def broken_exponential(spec, q, v, s_total, limits=None, opts=None):
    """Trace the broken null geodesic from (q, v) through reflections.

    ``v`` may be future- or past-directed; t-window limits apply to
    whichever direction the ray moves.  Affine budget, reflection count,
    chord-accumulation and grazing guards terminate the trajectory with
    the matching taxonomy tag.
    """
    limits = limits or Limits(s_total=s_total)
    opts = opts or IntegratorOptions()
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    geo = BrokenGeodesic(spec, q, v)

    p_cur, v_cur = q.copy(), v.copy()
    s_off = 0.0
    last_hit_s = None
    while True:
        seg, hit, status = integrate_segment(spec, p_cur, v_cur, s_total - s_off, opts)
        geo.segments.append((s_off, seg))

        # time-window check along this arc (t is monotone on null arcs)
        t_end = seg.points[-1][0]
        exited = t_end > limits.t_max or t_end < limits.t_min
        if exited:
            target = limits.t_max if t_end > limits.t_max else limits.t_min
            lo, hi = seg.s0, seg.s1

            def ft(ss):
                return seg.eval(ss)[0][0] - target

            if ft(lo) * ft(hi) < 0:
                s_exit = brentq(ft, lo, hi, xtol=1e-13)
            else:
                s_exit = hi
            geo.s_end = s_off + s_exit
            geo.termination = Termination.TIME_WINDOW_EXIT
            return geo

        geo.s_end = s_off + seg.s1
        if status == "grazing":
            geo.termination = Termination.GRAZING_ABORT
            return geo
        if status == "underflow":
            geo.termination = Termination.STEP_UNDERFLOW
            return geo
        if status == "budget":
            geo.termination = Termination.AFFINE_LIMIT
            return geo

        # boundary hit: reflect and continue
        s_hit = s_off + hit.s
        v_out = reflect(spec, hit.point, hit.velocity)
        theta = float(spec.boundary_grad(hit.point) @ v_out)
        ev = ReflectionEvent(s_hit, hit.point.copy(), hit.velocity.copy(), v_out, theta)
        if geo.reflections:
            geo.reflections[-1].chord_next = s_hit - geo.reflections[-1].s
        geo.reflections.append(ev)
        geo.s_end = s_hit

        if len(geo.reflections) > limits.max_reflections:
            geo.termination = Termination.REFLECTION_LIMIT
            return geo
        if last_hit_s is not None and (s_hit - last_hit_s) < limits.min_chord:
            geo.termination = Termination.ACCUMULATION_SUSPECTED
            return geo
        last_hit_s = s_hit
        p_cur, v_cur = hit.point, v_out
        s_off = s_hit
        if s_off >= s_total - 1e-15:
            geo.termination = Termination.AFFINE_LIMIT
            return geo


def reflection_data(geo):
    """Bookkeeping tuples (s_j, p_j, V_j, theta_j) with V_j the outgoing
    velocity and theta_j = dF(V_j) > 0."""
    return [(e.s, e.point, e.v_out, e.theta) for e in geo.reflections]


@dataclass
class TamenessReport:
    n_reflections: int
    t_span: tuple
    reflections_per_unit_t: float
    min_chord: float
    thetas: np.ndarray
    accumulation: bool
    termination: Termination


def tameness_monitor(geo, min_chord=1e-4):
    """Reflection-rate and chord-gap diagnostics for one trajectory."""
    t0 = float(geo.initial_point[0])
    t1 = float(geo.eval(geo.s_end)[0][0])
    n = geo.reflection_count
    span = abs(t1 - t0)
    rate = n / span if span > 0 else math.inf if n else 0.0
    chords = [e.chord_next for e in geo.reflections if e.chord_next is not None]
    mc = min(chords) if chords else math.inf
    accum = (geo.termination is Termination.ACCUMULATION_SUSPECTED
             or (bool(chords) and mc < min_chord))
    thetas = np.array([e.theta for e in geo.reflections])
    return TamenessReport(n, (t0, t1), rate, mc, thetas, accum, geo.termination)


@dataclass
class SequenceReport:
    """Products j * a_j for the decrement iteration a_{j+1} = a_j - a_j^2."""

    a1: float
    j_max: int
    min_product: float
    max_product: float
    entry_index: int          # first j with j * a_j >= 0.5
    min_after_entry: float
    final_product: float
    eventually_increasing: bool


def sequence_products(a1=0.4, j_max=10 ** 6):
    """Track j * a_j for a_{j+1} = a_j - a_j^2; the products must enter
    [0.5, 1.05] quickly, stay there, and increase toward 1."""
    if not (0.0 < a1 < 0.5):
        raise PreconditionError("a1 must lie in (0, 1/2)")
    a = a1
    mn, mx = math.inf, -math.inf
    entry = None
    mn_after = math.inf
    prev = -math.inf
    increasing_from_entry = True
    last = 0.0
    for j in range(1, j_max + 1):
        prod = j * a
        last = prod
        mn = min(mn, prod)
        mx = max(mx, prod)
        if entry is None:
            if prod >= 0.5:
                entry = j
                mn_after = prod
                prev = prod
        else:
            mn_after = min(mn_after, prod)
            if prod < prev:
                increasing_from_entry = False
            prev = prod
        a = a - a * a
    return SequenceReport(a1, j_max, mn, mx, entry or -1, mn_after, last,
                          increasing_from_entry)


@dataclass
class ConjugacyReport:
    jacobian: np.ndarray
    singular_values: np.ndarray
    ratio: float
    conjugate: bool
    arrival_point: np.ndarray
    arrival_s: float
    k: int


def _null_velocity_for_angle(spec, q, phi, spatial_norm):
    from .manifold import _future_null_time_component
    u = np.array([math.cos(phi), math.sin(phi)]) * spatial_norm
    a = _future_null_time_component(spec.metric(q), u)
    return np.concatenate(([a], u))


def _kth_event(spec, q, v, k, opts, s_budget):
    lim = Limits(s_total=s_budget, max_reflections=k + 2)
    geo = broken_exponential(spec, q, v, s_budget, lim, opts)
    if len(geo.reflections) <= k:
        raise StratumError(f"trajectory has only {len(geo.reflections)} boundary "
                           f"contacts, needs {k + 1}; reduce the step")
    return geo, geo.reflections[k]


def expb_differential(spec, q, v, k_target, h=1e-5, eps_conj=1e-3, opts=None):
    """Finite-difference differential of the broken exponential map at a
    boundary arrival, in boundary-chart coordinates.

    Columns: the affine scaling direction (evaluated one-sidedly at
    (1 - 10h) of the arrival parameter) and the spatial rotation of the
    initial direction, the latter re-localized to the k-th boundary
    contact of the perturbed ray.  The verdict flags a conjugate arrival
    when the singular-value ratio drops below ``eps_conj``.
    """
    if spec.dim != 2:
        raise PreconditionError("conjugacy differential implemented for n == 2")
    opts = opts or IntegratorOptions()
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    sp = v[1:]
    spatial_norm = float(np.linalg.norm(sp))
    phi = math.atan2(sp[1], sp[0])
    s_budget = 2.0 + 4.0 * h

    base_geo, base_ev = _kth_event(spec, q, v, k_target, opts, s_budget)
    s_star = base_ev.s
    t_star, u_star = spec.boundary_coords(base_ev.point)

    def bdy_coords_unwrapped(p):
        t, u = spec.boundary_coords(p)
        du = (u - u_star + math.pi) % (2.0 * math.pi) - math.pi
        return np.array([t - t_star, du])

    # scaling column: one-sided derivative along the ray itself
    eps = 10.0 * h
    c_hi = (1.0 - eps) * (1.0 + h)
    c_lo = (1.0 - eps) * (1.0 - h)
    p_hi = base_geo.eval(c_hi * s_star)[0]
    p_lo = base_geo.eval(c_lo * s_star)[0]
    col_scale = (bdy_coords_unwrapped(p_hi) - bdy_coords_unwrapped(p_lo)) / (c_hi - c_lo)

    # direction column: re-localized k-th contact of the rotated ray
    cols_dir = []
    for sgn in (+1.0, -1.0):
        v_p = _null_velocity_for_angle(spec, q, phi + sgn * h, spatial_norm)
        _, ev = _kth_event(spec, q, v_p, k_target, opts, s_budget)
        cols_dir.append(bdy_coords_unwrapped(ev.point))
    col_dir = (cols_dir[0] - cols_dir[1]) / (2.0 * h)

    jac = np.stack([col_scale, col_dir], axis=1)
    svals = np.linalg.svd(jac, compute_uv=False)
    ratio = float(svals[-1] / svals[0]) if svals[0] > 0 else 0.0
    return ConjugacyReport(jac, svals, ratio, ratio < eps_conj,
                           base_ev.point, s_star, k_target)


def aim_null_velocity(spec, q, phi, k_target, opts=None, s_budget=20.0):
    """Initial null velocity, affine-normalized so the k-th boundary
    contact of the broken ray from q sits at parameter 1."""
    opts = opts or IntegratorOptions()
    v0 = _null_velocity_for_angle(spec, q, phi, 1.0)
    v0 = v0 / np.linalg.norm(v0)
    lim = Limits(s_total=s_budget, max_reflections=k_target + 2)
    geo = broken_exponential(spec, q, v0, s_budget, lim, opts)
    if len(geo.reflections) <= k_target:
        raise StratumError("ray does not reach the requested boundary contact")
    s_star = geo.reflections[k_target].s
    return v0 * s_star, geo, s_star
