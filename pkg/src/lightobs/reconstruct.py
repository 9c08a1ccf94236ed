"""Source reconstruction from public boundary observation data.

Everything here except :func:`triangulate_source` and the explicitly
simulation-mode verdicts consumes only public views, the region
geometry, and (optionally) the conformal class of the boundary metric.
The pipeline mirrors the four recovery stages: topology from a
meets/misses subbasis, smooth charts from earliest observation times
along boundary curves, null directions and a conformal metric fit from
chart-coordinate lines, and time orientation from tracked regular
points.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from .errors import (ChartError, FitError, InsufficientDataError,
                     PreconditionError, TrackingError, TriangulationError)
from .observe import (BoundaryRegion, detect_regular, embed_u, outward_null_ray,
                      unwrap_u)
from .raytrace import IntegratorOptions, Limits, broken_exponential

TWO_PI = 2.0 * math.pi

# discretization-tied defaults; callers override when sampling changes
DELTA_HIT = 0.0175        # 2x cone-slice spacing at 720 rays on unit scale
ALPHA_MIN_DEG = 10.0      # earliest-time transversality floor
ALPHA_Q_DEG = 2.0         # patch-alignment window for the null-line criterion
KAPPA_MAX = 1.0e3         # chart conditioning bound
DELTA_TRI = 1.0e-3        # triangulation miss bound


class ObservationFamily:
    """An unlabelled family of public views over one boundary region.

    ``boundary_conformal`` is any representative of the conformal class
    of the boundary metric, as a callable (t, u) -> 2x2 matrix in chart
    order (t, u); ``future_is_increasing_t`` records its time
    orientation.  Ids are opaque; no source coordinates enter.
    """

    def __init__(self, views, region, boundary_conformal=None,
                 future_is_increasing_t=True):
        self.views = {k: np.asarray(v, dtype=float) for k, v in views.items()}
        self.region = region
        self.boundary_conformal = boundary_conformal
        self.future_is_increasing_t = future_is_increasing_t
        self._trees = {}

    @property
    def ids(self):
        return sorted(self.views.keys())

    def view(self, sid):
        return self.views[sid]

    def tree(self, sid):
        if sid not in self._trees:
            self._trees[sid] = cKDTree(embed_u(self.views[sid]))
        return self._trees[sid]


@dataclass
class CurveInU:
    """A straight parameterized segment s in [-1, 1] in the boundary chart."""

    p0: np.ndarray
    tangent: np.ndarray         # unit chart direction
    half_span: float

    def __post_init__(self):
        self.p0 = np.asarray(self.p0, dtype=float)
        t = np.asarray(self.tangent, dtype=float)
        n = np.linalg.norm(t)
        if n == 0 or self.half_span <= 0:
            raise PreconditionError("curve needs a nonvanishing derivative")
        self.tangent = t / n

    def eval(self, s):
        s = np.asarray(s, dtype=float)
        return self.p0 + np.multiply.outer(s * self.half_span, self.tangent)


@dataclass
class Chart:
    center_id: str
    curves: list
    coords: dict
    conditioning: float
    neighbor_ids: list


# ---------------------------------------------------------------------------
# topology

@dataclass
class TopologyReport:
    ids: list
    opens: list
    compacts: list
    meets: np.ndarray            # (n_ids, n_opens) bool
    misses: np.ndarray           # (n_ids, n_compacts) bool
    classes: list                # groups of ids with identical signatures
    verdict: str                 # "PASS" | "FAIL" | "untested"
    max_class_spread: float


def _box_meets(view, box):
    t_lo, t_hi, u_lo, u_hi = box
    ok = (view[:, 0] >= t_lo) & (view[:, 0] <= t_hi)
    if u_lo is not None:
        du = (view[:, 1] - u_lo) % TWO_PI
        ok = ok & (du <= (u_hi - u_lo) % TWO_PI)
    return bool(ok.any())


def random_boxes(region, n, half_t, half_u, seed=0):
    """Deterministic box family inside the region for the subbasis probe."""
    rng = np.random.default_rng(seed)
    tc = rng.uniform(region.t_lo + half_t, region.t_hi - half_t, n)
    if region.full_angle:
        uc = rng.uniform(0.0, TWO_PI, n)
    else:
        lo = region.angle_lo + half_u
        hi = region.angle_hi - half_u
        uc = rng.uniform(lo, hi, n)
    return [(tc[i] - half_t, tc[i] + half_t,
             (uc[i] - half_u) % TWO_PI, (uc[i] + half_u) % TWO_PI)
            for i in range(n)]


def topology_probe(family, opens=None, compacts=None, n_boxes=400,
                   box_half=(0.04, 0.04), seed=0, truth=None, eps_top=0.1):
    """Meets/misses incidence of every view against a subbasis box family.

    Views sharing a full incidence signature land in one class; with
    ground-truth source positions (simulation mode) the verdict checks
    that no class contains sources farther apart than eps_top.
    """
    if opens is None and compacts is None:
        opens = random_boxes(family.region, n_boxes, box_half[0], box_half[1], seed)
        compacts = opens
    opens = opens or []
    compacts = compacts or []
    ids = family.ids
    meets = np.zeros((len(ids), len(opens)), dtype=bool)
    misses = np.zeros((len(ids), len(compacts)), dtype=bool)
    for i, sid in enumerate(ids):
        V = family.view(sid)
        for b, box in enumerate(opens):
            meets[i, b] = _box_meets(V, box)
        for b, box in enumerate(compacts):
            misses[i, b] = not _box_meets(V, box)
    sig = {}
    for i, sid in enumerate(ids):
        key = (meets[i].tobytes(), misses[i].tobytes())
        sig.setdefault(key, []).append(sid)
    classes = sorted(sig.values(), key=lambda c: c[0])
    verdict = "untested"
    spread = 0.0
    if truth is not None:
        for cls in classes:
            for a, b in itertools.combinations(cls, 2):
                spread = max(spread, float(np.linalg.norm(
                    np.asarray(truth[a]) - np.asarray(truth[b]))))
        verdict = "PASS" if spread <= eps_top else "FAIL"
    return TopologyReport(ids, opens, compacts, meets, misses, classes,
                          verdict, spread)


def incidence_neighbors(report, center_id, k=10):
    """The k ids whose incidence signatures are Hamming-closest to the
    center's; the intrinsic stand-in for a metric neighbor graph."""
    i = report.ids.index(center_id)
    bits = np.column_stack([report.meets, report.misses])
    ham = (bits != bits[i]).sum(axis=1)
    order = np.lexsort((np.array(report.ids, dtype=object), ham))
    out = [report.ids[j] for j in order if report.ids[j] != center_id]
    return out[:k]


# ---------------------------------------------------------------------------
# earliest observation times and charts

def _patch_at(view, p, radius, eps_fit, min_points=4):
    res = detect_regular(view, p, radius, eps_fit=eps_fit, min_points=min_points)
    if res.singular or len(res.patches) != 1:
        return None
    return res.patches[0]


def earliest_observation_time(family, sid, curve, delta_hit=DELTA_HIT,
                              alpha_min_deg=ALPHA_MIN_DEG, n_samples=801,
                              patch_radius=None, patch_eps=1e-5):
    """Parameter in [-1, 1] where the curve crosses sid's view exactly
    once, through a regular single-sheet patch, transversally; None (not
    in domain) otherwise.
    """
    view = family.view(sid)
    if len(view) == 0:
        return None
    ss = np.linspace(-1.0, 1.0, n_samples)
    pts = curve.eval(ss)
    d, idx = family.tree(sid).query(embed_u(pts))
    hit = d <= delta_hit
    if not hit.any():
        return None
    # cluster consecutive hit samples; tolerate 2-sample dropouts
    hits = np.flatnonzero(hit)
    breaks = np.flatnonzero(np.diff(hits) > 3)
    clusters = np.split(hits, breaks + 1)
    if len(clusters) != 1:
        return None
    cl = clusters[0]
    j = cl[np.argmin(d[cl])]
    p_near = unwrap_u(view[idx[j]], curve.eval(float(ss[j])))[0]
    radius = patch_radius if patch_radius is not None else 4.0 * delta_hit
    patch = _patch_at(view, p_near, radius, patch_eps)
    if patch is None:
        return None
    tan = patch.tangent[0]
    cross = abs(float(curve.tangent[0] * tan[1] - curve.tangent[1] * tan[0]))
    if cross < math.sin(math.radians(alpha_min_deg)):
        return None
    # curve is straight: intersect with the quadratically corrected sheet
    denom = curve.half_span * float(curve.tangent @ patch.normal)
    s_star = float((patch.p - curve.p0) @ patch.normal) / denom
    for _ in range(2):
        rel = curve.eval(s_star) - patch.p
        tau = float(rel @ tan)
        f = float(rel @ patch.normal) - 0.5 * patch.curvature * tau * tau
        fp = denom - patch.curvature * tau * curve.half_span * float(curve.tangent @ tan)
        s_star -= f / fp
    if not (-1.0 <= s_star <= 1.0):
        return None
    return s_star


def regular_points_by_angle(family, sid, angles, delta_hit=DELTA_HIT,
                            patch_radius=None, patch_eps=1e-5):
    """For each requested angle, the patch through the view point
    angularly nearest to it (earliest in t on ties); skips angles where
    the neighborhood is singular."""
    view = family.view(sid)
    radius = patch_radius if patch_radius is not None else 4.0 * delta_hit
    out = []
    for ang in angles:
        dphi = np.abs((view[:, 1] - ang + math.pi) % TWO_PI - math.pi)
        order = np.lexsort((view[:, 0], dphi))
        p = view[order[0]].copy()
        patch = _patch_at(view, p, radius, patch_eps)
        if patch is not None:
            out.append(patch)
    return out


def curves_through_patches(patches, half_span, direction=(1.0, 0.0)):
    """Coordinate curves through patch points; parameter 0 sits on the
    sheet, so the chart assigns the center coordinate 0 there."""
    return [CurveInU(patch.p, np.array(direction), half_span)
            for patch in patches]


def build_chart(family, center_id, candidate_curves, neighbor_ids,
                kappa_max=KAPPA_MAX, n_coords=3, delta_hit=DELTA_HIT,
                domain_ids=None, **eot_kw):
    """Select n+1 coordinate curves whose finite-difference differential
    across the neighbor ids is well conditioned; evaluate the chart on
    the whole domain.
    """
    if len(candidate_curves) < n_coords:
        raise ChartError(f"need at least {n_coords} candidate curves")

    def coords_for(ids, curves):
        table = {}
        for sid in ids:
            vals = [earliest_observation_time(family, sid, c, delta_hit, **eot_kw)
                    for c in curves]
            if all(v is not None for v in vals):
                table[sid] = np.array(vals)
        return table

    best = (math.inf, None)
    for combo in itertools.combinations(range(len(candidate_curves)), n_coords):
        curves = [candidate_curves[i] for i in combo]
        pts = np.array([c.p0 for c in curves])
        if len(np.unique(np.round(pts, 9), axis=0)) < n_coords:
            continue              # curves must pass through distinct points
        table = coords_for([center_id] + list(neighbor_ids), curves)
        if center_id not in table:
            continue
        rows = [table[s] - table[center_id] for s in neighbor_ids if s in table]
        if len(rows) < n_coords:
            continue
        D = np.array(rows)
        sv = np.linalg.svd(D, compute_uv=False)
        cond = math.inf if sv[-1] == 0 else float(sv[0] / sv[-1])
        if cond < best[0]:
            best = (cond, curves)
        if cond < kappa_max:
            break
    cond, curves = best
    if curves is None or cond >= kappa_max:
        raise ChartError(f"no curve selection met conditioning {kappa_max:g}; "
                         f"best achieved {cond:g}")
    domain = domain_ids if domain_ids is not None else family.ids
    coords = coords_for(domain, curves)
    if center_id in coords:
        center_vals = coords[center_id].copy()
        coords = {k: v - center_vals for k, v in coords.items()}
    return Chart(center_id, curves, coords, cond, list(neighbor_ids))


# ---------------------------------------------------------------------------
# null directions and the conformal fit

def recover_null_direction(family, chart, p, delta_hit=0.006,
                           alpha_q_deg=1.2, patch_radius=None,
                           patch_eps=1e-5):
    """Chart-coordinate direction of the source line sharing the outgoing
    null ray at p.

    Neighbors qualify when their view has a regular point within
    delta_hit of p whose patch aligns with the center's within alpha_q.
    Both gates sit tighter than the sampling-tied defaults used
    elsewhere: they must separate the one-dimensional source line from
    sources on the nearby null hyperplane, whose sheets also pass close
    to p with small slope.  delta_hit may not go below half the
    along-sheet sample spacing, or the line's own members drop out.

    A total-least-squares line seeds the direction; since the chart
    image of the source line is curved, the returned direction is the
    tangent at the center of a per-coordinate quadratic in the line
    parameter.
    """
    radius = patch_radius if patch_radius is not None else 4.0 * DELTA_HIT
    center_patch = _patch_at(family.view(chart.center_id), p, radius, patch_eps)
    if center_patch is None:
        raise InsufficientDataError("no regular patch at p for the center")
    tC = center_patch.tangent[0]
    cos_q = math.cos(math.radians(alpha_q_deg))
    qualifying = []
    for sid in sorted(chart.coords.keys()):
        dd, jj = family.tree(sid).query(embed_u(center_patch.p)[0])
        if dd > delta_hit:
            continue
        pn = unwrap_u(family.view(sid)[jj], center_patch.p)[0]
        patch = _patch_at(family.view(sid), pn, radius, patch_eps)
        if patch is None:
            continue
        if abs(float(patch.tangent[0] @ tC)) < cos_q:
            continue
        qualifying.append(sid)
    if len(qualifying) < 2:
        raise InsufficientDataError(
            f"only {len(qualifying)} ids share the ray at p")
    X = np.array([chart.coords[s] for s in qualifying])
    c = X.mean(axis=0)
    _, _, vt = np.linalg.svd(X - c, full_matrices=False)
    direction = vt[0]
    tau = (X - c) @ direction
    if len(qualifying) >= 4 and np.ptp(tau) > 0:
        tau0 = float((chart.coords[chart.center_id] - c) @ direction)
        V = np.column_stack([np.ones_like(tau), tau, tau * tau])
        coef, *_ = np.linalg.lstsq(V, X, rcond=None)
        direction = coef[1] + 2.0 * tau0 * coef[2]
        direction = direction / np.linalg.norm(direction)
    lead = np.flatnonzero(np.abs(direction) > 1e-12)[0]
    if direction[lead] < 0:
        direction = -direction
    return direction, qualifying


@dataclass
class ConformalFit:
    matrix: np.ndarray
    residual: float
    signature_ok: bool
    n_directions: int


def fit_conformal_metric(directions):
    """Least-squares symmetric matrix annihilating the given null
    directions, gauge-fixed to unit trace-norm with negative time-time
    entry; the residual is the smallest singular value of the design.
    """
    V = np.atleast_2d(np.asarray(directions, dtype=float))
    m, d = V.shape
    npar = d * (d + 1) // 2
    if m < npar - 1:
        raise FitError(f"{m} directions cannot determine {npar - 1} ratios")
    pairs = [(a, b) for a in range(d) for b in range(a, d)]
    A = np.empty((m, npar))
    for r in range(m):
        v = V[r] / np.linalg.norm(V[r])
        A[r] = [v[a] * v[b] * (1.0 if a == b else 2.0) for a, b in pairs]
    _, sv, vt = np.linalg.svd(A, full_matrices=True)
    if sv.size >= npar - 1 and sv[npar - 2] < 1e-10 * sv[0]:
        raise FitError("degenerate direction set: null space not unique")
    q = vt[-1]
    Q = np.zeros((d, d))
    for val, (a, b) in zip(q, pairs):
        Q[a, b] = Q[b, a] = val
    evals = np.linalg.eigvalsh(Q)
    Q /= np.sum(np.abs(evals))
    # gauge: prefer the sign giving signature (-,+,...,+); in frames where
    # neither sign does, fall back to a negative time-time entry
    evals = np.linalg.eigvalsh(Q)
    neg, pos = int((evals < 0).sum()), int((evals > 0).sum())
    if neg == d - 1 and pos == 1:
        Q = -Q
    elif not (neg == 1 and pos == d - 1) and Q[0, 0] > 0:
        Q = -Q
    evals = np.linalg.eigvalsh(Q)
    signature_ok = bool((evals < 0).sum() == 1 and (evals > 0).sum() == d - 1)
    residual = float(sv[-1]) if sv.size == npar else float(sv[min(len(sv), npar) - 1])
    return ConformalFit(Q, residual, signature_ok, m)


# ---------------------------------------------------------------------------
# time orientation

@dataclass
class OrientationResult:
    verdict: str                 # "future" | "past" | "unavailable"
    pairing: float               # g_boundary(p'(0), N)
    tracked: np.ndarray          # (len(path), 2) tracked chart points


def time_orientation_test(family, path_ids, p_start, delta_track=0.15,
                          patch_radius=None, patch_eps=1e-5,
                          delta_hit=DELTA_HIT):
    """Future/past verdict for an ordered source path from the motion of
    a tracked regular point, decided by the sign of the boundary pairing
    of its velocity with the future unit normal of the patch tangent.
    """
    if family.boundary_conformal is None:
        return OrientationResult("unavailable", math.nan, np.empty((0, 2)))
    radius = patch_radius if patch_radius is not None else 4.0 * delta_hit
    p_prev = np.asarray(p_start, dtype=float)
    tracked = []
    patches = []
    for sid in path_ids:
        dd, jj = family.tree(sid).query(embed_u(p_prev)[0])
        pn = unwrap_u(family.view(sid)[jj], p_prev)[0]
        if np.linalg.norm(pn - p_prev) > delta_track:
            raise TrackingError(f"patch jumped by {np.linalg.norm(pn - p_prev):.3g} "
                                f"at id {sid}")
        patch = _patch_at(family.view(sid), pn, radius, patch_eps)
        if patch is None:
            raise TrackingError(f"lost the regular patch at id {sid}")
        tracked.append(patch.p)
        patches.append(patch)
        p_prev = patch.p
    tracked = np.array(tracked)
    mid = len(path_ids) // 2
    if mid == 0 or mid + 1 >= len(path_ids):
        raise PreconditionError("path needs at least 3 ids")
    dp = (tracked[mid + 1] - tracked[mid - 1]) / 2.0
    dp[1] = (dp[1] + math.pi) % TWO_PI - math.pi
    G = np.asarray(family.boundary_conformal(*tracked[mid]), dtype=float)
    T = patches[mid].tangent[0]
    row = T @ G
    N0 = np.array([-row[1], row[0]])         # 2d nullspace of one covector
    nn = float(N0 @ G @ N0)
    if nn >= 0:
        raise PreconditionError("patch tangent has no timelike normal; "
                                "conformal representative not Lorentzian?")
    N = N0 / math.sqrt(-nn)
    future_sign = 1.0 if family.future_is_increasing_t else -1.0
    if future_sign * N[0] < 0:
        N = -N
    pairing = float(dp @ G @ N)
    return OrientationResult("future" if pairing < 0 else "past", pairing, tracked)


# ---------------------------------------------------------------------------
# oracle-mode triangulation

@dataclass
class TriangulationResult:
    point: np.ndarray
    miss: float
    s_params: tuple


def triangulate_source(spec, view, p1, p2, t_min, s_total=8.0,
                       delta_tri=DELTA_TRI, n_dense=400, patch_radius=0.07,
                       patch_eps=1e-5, opts=None, max_reflections=6):
    """Backward-trace the outward rays of two regular points and return
    the closest-approach midpoint of the two broken trajectories
    (simulation mode: needs the ground-truth spec).
    """
    opts = opts or IntegratorOptions()
    geos = []
    for p in (p1, p2):
        patch = _patch_at(view, np.asarray(p, dtype=float), patch_radius, patch_eps)
        if patch is None:
            raise TriangulationError(f"no single regular patch at {p}")
        W = outward_null_ray(spec, patch)
        P = spec.boundary_point(*patch.p)
        lim = Limits(s_total=s_total, max_reflections=max_reflections, t_min=t_min)
        geos.append(broken_exponential(spec, P, -W, s_total, lim, opts))
    ss = [np.linspace(0.0, g.s_end, n_dense) for g in geos]
    X = [np.array([g.eval(s)[0] for s, g in zip(sg, [geo] * n_dense)])
         for sg, geo in zip(ss, geos)]
    D = cdist(X[0], X[1])
    i, j = np.unravel_index(np.argmin(D), D.shape)

    def f(sv):
        a = geos[0].eval(min(max(sv[0], 0.0), geos[0].s_end))[0]
        b = geos[1].eval(min(max(sv[1], 0.0), geos[1].s_end))[0]
        return float(np.sum((a - b) ** 2))

    res = minimize(f, x0=np.array([ss[0][i], ss[1][j]]), method="Nelder-Mead",
                   options={"xatol": 1e-12, "fatol": 1e-24, "maxiter": 400})
    s1, s2 = res.x
    a = geos[0].eval(min(max(s1, 0.0), geos[0].s_end))[0]
    b = geos[1].eval(min(max(s2, 0.0), geos[1].s_end))[0]
    miss = float(np.linalg.norm(a - b))
    if miss > delta_tri:
        raise TriangulationError(f"backward rays miss by {miss:.3g} > {delta_tri:g}")
    return TriangulationResult((a + b) / 2.0, miss, (float(s1), float(s2)))


# ---------------------------------------------------------------------------
# report plumbing

@dataclass
class ReconstructionReport:
    topology_verdict: str = "untested"
    n_classes: int = 0
    charts: list = field(default_factory=list)
    null_directions: dict = field(default_factory=dict)
    conformal_fits: dict = field(default_factory=dict)
    orientation: dict = field(default_factory=dict)
    oracle_errors: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)


def save_report(path, report, config_hash="none"):
    """Structured text with stable key ordering."""
    L = [f"# config_hash: {config_hash}",
         f"topology_verdict: {report.topology_verdict}",
         f"n_classes: {report.n_classes}"]
    for ch in report.charts:
        L.append(f"chart {ch.center_id}: curves={len(ch.curves)} "
                 f"domain={len(ch.coords)} conditioning={ch.conditioning:.6e}")
    for key in sorted(report.null_directions):
        d = report.null_directions[key]
        L.append("null_direction " + str(key) + ": "
                 + " ".join(f"{x:.12e}" for x in np.atleast_1d(d)))
    for key in sorted(report.conformal_fits):
        fit = report.conformal_fits[key]
        flat = " ".join(f"{x:.12e}" for x in fit.matrix.ravel())
        L.append(f"conformal_fit {key}: residual={fit.residual:.6e} "
                 f"signature_ok={fit.signature_ok} matrix={flat}")
    for key in sorted(report.orientation):
        L.append(f"orientation {key}: {report.orientation[key]}")
    for key in sorted(report.oracle_errors):
        L.append(f"oracle_error {key}: {report.oracle_errors[key]:.6e}")
    for note in report.notes:
        L.append(f"note: {note}")
    with open(path, "w") as fh:
        fh.write("\n".join(L) + "\n")
