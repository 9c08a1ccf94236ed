"""Boundary light observation sets and their set-geometric analysis.

An observation set collects every boundary contact of the broken null
rays fanned out from one source point, restricted to a boundary-chart
region.  The *public view* of a set is the bare multiset of boundary
coordinates; arrival parameters, reflection counts, ray indices and
arrival velocities are metadata that the reconstruction side is not
allowed to read.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import (DegenerateBoundaryError, InsufficientDataError,
                     PreconditionError)
from .manifold import DiskFactor, MinkowskiCylinder, StaticProduct, sample_null_directions
from .raytrace import IntegratorOptions, Limits, broken_exponential

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class BoundaryRegion:
    """A box in the boundary chart (t, u); u is periodic with period 2*pi.

    ``angle`` of None means the full period.  The inner box shrinks the
    region by the given margins; distinctness comparisons are restricted
    to it so that sets are only compared where they are fully recorded.
    """

    t_lo: float
    t_hi: float
    angle_lo: float | None = None
    angle_hi: float | None = None
    inner_t_margin: float = 0.0
    inner_angle_margin: float = 0.0

    @property
    def full_angle(self):
        return self.angle_lo is None

    def _angle_ok(self, u, lo, hi):
        u = np.asarray(u) % TWO_PI
        lo = lo % TWO_PI
        hi = hi % TWO_PI
        if lo <= hi:
            return (u >= lo) & (u <= hi)
        return (u >= lo) | (u <= hi)

    def contains(self, t, u):
        ok = (np.asarray(t) >= self.t_lo) & (np.asarray(t) <= self.t_hi)
        if not self.full_angle:
            ok = ok & self._angle_ok(u, self.angle_lo, self.angle_hi)
        return ok

    def contains_inner(self, t, u):
        ok = ((np.asarray(t) >= self.t_lo + self.inner_t_margin)
              & (np.asarray(t) <= self.t_hi - self.inner_t_margin))
        if not self.full_angle:
            ok = ok & self._angle_ok(u, self.angle_lo + self.inner_angle_margin,
                                     self.angle_hi - self.inner_angle_margin)
        return ok


@dataclass
class ObservationPoint:
    u: np.ndarray             # boundary-chart coordinates (t, angle)
    s: float                  # affine arrival parameter (metadata)
    k: int                    # reflections before this arrival (metadata)
    w_out: np.ndarray         # outward-pointing arrival velocity (metadata)
    dir_index: int            # index of the source ray (metadata)


@dataclass
class ObservationSet:
    source_id: str
    dim: int
    region: BoundaryRegion
    m_directions: int
    points: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    @property
    def public_view(self):
        """The u-coordinate multiset, the only part reconstruction may read."""
        if not self.points:
            return np.empty((0, self.dim))
        return np.array([pt.u for pt in self.points])


def embed_u(u):
    """Map (t, angle) rows to (t, cos, sin) so Euclidean distances respect
    the angle's periodicity."""
    u = np.atleast_2d(np.asarray(u, dtype=float))
    return np.column_stack([u[:, 0], np.cos(u[:, 1]), np.sin(u[:, 1])])


def unwrap_u(u, center):
    """Shift the periodic coordinate of each row into center +- pi."""
    u = np.atleast_2d(np.asarray(u, dtype=float)).copy()
    u[:, 1] = center[1] + (u[:, 1] - center[1] + math.pi) % TWO_PI - math.pi
    return u


def default_limits(spec, q, region, margin=0.05):
    t0 = float(q[0])
    t_max = region.t_hi + margin * spec.scale
    span = max(t_max - t0, 1.0)
    return Limits(s_total=4.0 * span, max_reflections=24, t_max=t_max,
                  t_min=-math.inf, min_chord=1e-4 * spec.scale)


def _flat_disk_radius(spec):
    if isinstance(spec, MinkowskiCylinder):
        return spec.radius
    if isinstance(spec, StaticProduct) and isinstance(spec.factor, DiskFactor):
        return spec.factor.radius
    return None


def _observe_fast_disk(spec, q, region, m, limits):
    """Vectorized exact bouncer for the flat disk kinds: straight rays,
    quadratic boundary solve, closed-form reflection."""
    R = _flat_disk_radius(spec)
    dirs = sample_null_directions(spec, q, m)
    P = np.tile(np.asarray(q, dtype=float), (m, 1))
    W = dirs.copy()
    s_acc = np.zeros(m)
    alive = np.ones(m, dtype=bool)
    pts = []
    k = 0
    while alive.any() and k <= limits.max_reflections:
        idx = np.flatnonzero(alive)
        Psp = P[idx, 1:]
        Wsp = W[idx, 1:]
        a = np.einsum('ij,ij->i', Wsp, Wsp)
        b = 2.0 * np.einsum('ij,ij->i', Psp, Wsp)
        c = np.einsum('ij,ij->i', Psp, Psp) - R * R
        disc = np.maximum(b * b - 4.0 * a * c, 0.0)
        s = (-b + np.sqrt(disc)) / (2.0 * a)
        hits = P[idx] + s[:, None] * W[idx]
        t_hit = hits[:, 0]
        phi = np.arctan2(hits[:, 2], hits[:, 1]) % TWO_PI
        in_window = t_hit <= limits.t_max
        rec = in_window & region.contains(t_hit, phi)
        for j in np.flatnonzero(rec):
            g = idx[j]
            pts.append(ObservationPoint(np.array([t_hit[j], phi[j]]),
                                        float(s_acc[g] + s[j]), k,
                                        W[g].copy(), int(g)))
        nu = hits[:, 1:] / R
        Wn = Wsp - 2.0 * np.einsum('ij,ij->i', Wsp, nu)[:, None] * nu
        P[idx] = hits
        W[idx, 1:] = Wn
        s_acc[idx] += s
        alive[idx] = in_window
        k += 1
    pts.sort(key=lambda p: (p.dir_index, p.k))
    diag = Counter({"TimeWindowExit": int(m)})
    return pts, dict(diag)


def _observe_generic(spec, q, region, m, limits, opts):
    dirs = sample_null_directions(spec, q, m)
    pts = []
    diag = Counter()
    for i in range(m):
        geo = broken_exponential(spec, q, dirs[i], limits.s_total, limits, opts)
        diag[geo.termination.value] += 1
        for k, ev in enumerate(geo.reflections):
            t, u = spec.boundary_coords(ev.point)
            if bool(region.contains(t, u)):
                pts.append(ObservationPoint(np.array([t, u]), float(ev.s), k,
                                            ev.v_in.copy(), i))
    pts.sort(key=lambda p: (p.dir_index, p.k))
    return pts, dict(diag)


def compute_observation_set(spec, q, region, m=720, limits=None, opts=None,
                            source_id="src", method="auto",
                            screen_conjugacy=False):
    """Fan m null rays out of q and record every boundary contact whose
    chart coordinates fall in the region.

    ``method``: "auto" picks the vectorized exact bouncer on the flat
    disk kinds and the adaptive integrator otherwise; "integrate" forces
    the integrator (used to cross-check the fast path).

    ``screen_conjugacy`` (simulation diagnostics only) reruns every
    recorded arrival through the broken-exponential differential and
    attaches (dir_index, k, singular-value ratio, conjugate?) tuples.
    """
    if not spec.contains(q):
        raise PreconditionError("source point must lie in the interior")
    limits = limits or default_limits(spec, q, region)
    opts = opts or IntegratorOptions()
    if method == "auto" and _flat_disk_radius(spec) is not None:
        pts, diag = _observe_fast_disk(spec, q, region, m, limits)
    else:
        pts, diag = _observe_generic(spec, q, region, m, limits, opts)
    if screen_conjugacy:
        from .raytrace import expb_differential
        dirs = sample_null_directions(spec, q, m)
        screened = []
        for pt in pts:
            rep = expb_differential(spec, q, dirs[pt.dir_index] * pt.s,
                                    k_target=pt.k, opts=opts)
            screened.append((pt.dir_index, pt.k, rep.ratio, rep.conjugate))
        diag = dict(diag)
        diag["conjugacy"] = screened
    return ObservationSet(source_id, spec.dim, region, m, pts, diag)


# ---------------------------------------------------------------------------
# regular-part detection

@dataclass
class RegularPatch:
    p: np.ndarray                 # chart point on the sheet
    tangent: np.ndarray           # (n-1, n) orthonormal rows in chart coords
    normal: np.ndarray            # (n,) unit normal in chart coords
    residual: float
    sheet_id: int
    n_points: int
    curvature: float = 0.0


@dataclass
class RegularityResult:
    patches: list
    singular: bool


def _fit_sheet(X, p):
    """Line-plus-curvature fit of one sheet through nearby chart points.

    Fits an affine line by total least squares, then a polynomial
    correction along it (cubic when the window is well populated,
    quadratic otherwise so that sparse windows cannot interpolate away
    the residual test); returns the patch evaluated at the projection
    of p and the post-correction residual.
    """
    c = X.mean(axis=0)
    Y = X - c
    _, sv, vt = np.linalg.svd(Y, full_matrices=False)
    e1, e2 = vt[0], vt[1]
    tau = Y @ e1
    rho = Y @ e2
    deg = 3 if len(X) >= 8 else 2
    V = np.column_stack([tau ** j for j in range(deg + 1)])
    coef, *_ = np.linalg.lstsq(V, rho, rcond=None)
    resid = rho - V @ coef
    tau_p = float((p - c) @ e1)
    powers = np.array([tau_p ** j for j in range(deg + 1)])
    rho_p = float(coef @ powers)
    dpow = np.array([j * tau_p ** (j - 1) if j else 0.0 for j in range(deg + 1)])
    slope = float(coef @ dpow)
    tan = e1 + slope * e2
    tan /= np.linalg.norm(tan)
    nrm = np.array([-tan[1], tan[0]])
    point = c + tau_p * e1 + rho_p * e2
    curv = float(2.0 * coef[2] + (6.0 * coef[3] * tau_p if deg == 3 else 0.0))
    return point, tan, nrm, float(np.max(np.abs(resid))), curv


def detect_regular(view, p, radius, eps_fit=1e-6, min_points=4):
    """Cluster the view near p into smooth sheets by plane-fit consensus.

    Returns RegularityResult; ``singular`` is set when neither one sheet
    nor a transversal pair fits the neighborhood within eps_fit.
    """
    view = np.asarray(view, dtype=float)
    p = np.asarray(p, dtype=float)
    if view.ndim != 2 or view.shape[1] != 2:
        raise PreconditionError("detect_regular implemented for 2d boundary charts")
    U = unwrap_u(view, p)
    d = np.linalg.norm(U - p, axis=1)
    X = U[d <= radius]
    if len(X) < min_points:
        raise InsufficientDataError(f"only {len(X)} points within radius {radius}")

    point, tan, nrm, resid, curv = _fit_sheet(X, p)
    if resid < eps_fit:
        return RegularityResult(
            [RegularPatch(point, tan[None, :], nrm, resid, 0, len(X), curv)], False)

    # two-sheet consensus: for a transversal crossing the sheets lie in
    # opposite quadrants of the mean-line frame, so seed the split with
    # the sign of the tangential*normal product and iterate reassignment
    # to the nearer of two refitted lines
    c0 = X.mean(axis=0)
    _, _, vt0 = np.linalg.svd(X - c0, full_matrices=False)
    tau0 = (X - c0) @ vt0[0]
    rho0 = (X - c0) @ vt0[1]
    labels = ((tau0 * rho0) > 0).astype(int)
    for _ in range(25):
        fits = []
        for lab in (0, 1):
            G = X[labels == lab]
            if len(G) < max(min_points // 2, 3):
                return RegularityResult([], True)
            fits.append(_fit_sheet(G, p))
        d0 = np.abs((X - fits[0][0]) @ fits[0][2])
        d1 = np.abs((X - fits[1][0]) @ fits[1][2])
        new = (d1 < d0).astype(int)
        if np.array_equal(new, labels):
            break
        labels = new
    patches = []
    for lab in (0, 1):
        G = X[labels == lab]
        if len(G) < max(min_points // 2, 3):
            return RegularityResult([], True)
        point, tan, nrm, resid, curv = _fit_sheet(G, p)
        if resid >= eps_fit:
            return RegularityResult([], True)
        patches.append(RegularPatch(point, tan[None, :], nrm, resid, lab, len(G), curv))
    ta, tb = patches[0].tangent[0], patches[1].tangent[0]
    cross = abs(float(ta[0] * tb[1] - ta[1] * tb[0]))
    if cross < math.sin(math.radians(5.0)):
        return RegularityResult([], True)     # parallel duplicates, not a crossing
    return RegularityResult(patches, False)


# ---------------------------------------------------------------------------
# outward null ray through a tangent patch

def outward_null_ray(spec, patch, normalize=True):
    """The unique future-directed outward-pointing null ray g-orthogonal
    to the patch tangent, solved in the 2-dimensional Lorentzian
    orthocomplement; of the four candidate rays exactly one points both
    to the future and out of the manifold.
    """
    t, u = float(patch.p[0]), float(patch.p[1])
    P = spec.boundary_point(t, u)
    J = spec.boundary_jacobian(t, u)
    T_amb = patch.tangent @ J.T                       # (n-1, n+1) pushforward
    g = spec.metric(P)
    A = T_amb @ g                                     # rows: covectors g(T_i, .)
    _, sv, vt = np.linalg.svd(A, full_matrices=True)
    N = vt[len(A):].T                                 # (n+1, 2) nullspace basis
    G2 = N.T @ g @ N
    evals, evecs = np.linalg.eigh(G2)
    if not (evals[0] < 0 < evals[1]):
        raise DegenerateBoundaryError("patch orthocomplement is not Lorentzian "
                                      "(is the patch spacelike?)")
    em = N @ evecs[:, 0] / math.sqrt(-evals[0])
    ep = N @ evecs[:, 1] / math.sqrt(evals[1])
    from .manifold import outward_normal as _nu
    nu = _nu(spec, P)
    candidates = []
    for s1 in (+1.0, -1.0):
        for s2 in (+1.0, -1.0):
            w = s1 * em + s2 * ep
            if w[0] > 0 and float(w @ g @ nu) > 0:
                candidates.append(w)
    if len(candidates) != 1:
        raise DegenerateBoundaryError(
            f"{len(candidates)} future outward null rays found, expected exactly 1")
    w = candidates[0]
    if normalize:
        w = w / np.linalg.norm(w)
    return w


# ---------------------------------------------------------------------------
# distinctness

@dataclass
class DistinctnessReport:
    ids: list
    matrix: np.ndarray
    verdict: str                  # "PASS" | "FAIL"
    close_pairs: list
    excluded: list


def hausdorff_distance(A, B):
    """Symmetric Hausdorff distance between embedded point clouds."""
    ta = cKDTree(A)
    tb = cKDTree(B)
    d_ab = tb.query(A, k=1)[0].max()
    d_ba = ta.query(B, k=1)[0].max()
    return float(max(d_ab, d_ba))


def distinctness_check(views, tol, region=None):
    """Pairwise Hausdorff distances of public views (restricted to the
    inner box when a region is given); FAIL when any two sets are closer
    than tol.  Views with no points in the comparison window are
    excluded and reported.
    """
    ids = list(views.keys())
    clouds = {}
    excluded = []
    for i in ids:
        V = np.asarray(views[i], dtype=float)
        if region is not None and len(V):
            V = V[region.contains_inner(V[:, 0], V[:, 1])]
        if len(V) == 0:
            excluded.append(i)
        else:
            clouds[i] = embed_u(V)
    keep = [i for i in ids if i in clouds]
    n = len(keep)
    M = np.zeros((n, n))
    close = []
    for a in range(n):
        for b in range(a + 1, n):
            h = hausdorff_distance(clouds[keep[a]], clouds[keep[b]])
            M[a, b] = M[b, a] = h
            if h < tol:
                close.append((keep[a], keep[b], h))
    verdict = "FAIL" if close else "PASS"
    return DistinctnessReport(keep, M, verdict, close, excluded)


# ---------------------------------------------------------------------------
# text serialization

def _fmt(x):
    return f"{x:.17e}"


def save_observation_set(path, obs, public=False, config_hash="none"):
    """Write one set as a text table; public drops every metadata column."""
    with open(path, "w") as fh:
        fh.write(f"# config_hash: {config_hash}\n")
        fh.write(f"# set_id: {obs.source_id}\n")
        fh.write(f"# dim: {obs.dim}\n")
        fh.write(f"# m_directions: {obs.m_directions}\n")
        r = obs.region
        ang = "full" if r.full_angle else f"{_fmt(r.angle_lo)} {_fmt(r.angle_hi)}"
        fh.write(f"# region_t: {_fmt(r.t_lo)} {_fmt(r.t_hi)}\n")
        fh.write(f"# region_angle: {ang}\n")
        fh.write(f"# inner_margins: {_fmt(r.inner_t_margin)} {_fmt(r.inner_angle_margin)}\n")
        fh.write(f"# n_points: {len(obs.points)}\n")
        if public:
            fh.write("# columns: t,u\n")
            for pt in obs.points:
                fh.write(",".join(_fmt(x) for x in pt.u) + "\n")
        else:
            fh.write("# columns: t,u,s,k,dir,w...\n")
            for pt in obs.points:
                row = list(pt.u) + [pt.s, float(pt.k), float(pt.dir_index)] + list(pt.w_out)
                fh.write(",".join(_fmt(x) for x in row) + "\n")


def load_observation_set(path):
    header = {}
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].partition(":")
                header[key.strip()] = val.strip()
            else:
                rows.append([float(x) for x in line.split(",")])
    dim = int(header.get("dim", 2))
    tlo, thi = (float(x) for x in header["region_t"].split())
    ang = header["region_angle"]
    if ang == "full":
        alo = ahi = None
    else:
        alo, ahi = (float(x) for x in ang.split())
    mt, ma = (float(x) for x in header["inner_margins"].split())
    region = BoundaryRegion(tlo, thi, alo, ahi, mt, ma)
    public = header.get("columns", "").strip() == "t,u"
    pts = []
    for row in rows:
        if public:
            pts.append(ObservationPoint(np.array(row[:dim]), math.nan, -1,
                                        np.full(dim + 1, math.nan), -1))
        else:
            u = np.array(row[:dim])
            s, k, di = row[dim], int(row[dim + 1]), int(row[dim + 2])
            w = np.array(row[dim + 3:])
            pts.append(ObservationPoint(u, s, k, w, di))
    return ObservationSet(header.get("set_id", "set"), dim, region,
                          int(header.get("m_directions", 0)), pts, {})
