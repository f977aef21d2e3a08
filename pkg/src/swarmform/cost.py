"""Composite trajectory cost over all agents' B-spline control points.

Terms: formation tracking, anchor-distance, smoothness, dynamic limits,
obstacle clearance, reciprocal separation, and endpoint attraction.  Every
term has an exact analytic gradient; control points with index < 3 are
fixed by the start state and receive zero gradient.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bspline import BSplineTrajectory, basis_row, clamped_knots
from .esdf import esdf_query_batch
from .formation import anchor_coefficients

N_FIXED = 3  # q0,q1,q2 pinned by the start state


@dataclass
class CostWeights:
    lam_f: float = 1.0
    lam_b: float = 0.5
    lam_s: float = 1.0
    lam_d: float = 1.0
    lam_o: float = 30.0
    lam_r: float = 10.0
    lam_e: float = 2.0
    v_max: float = 2.5
    a_max: float = 3.0
    clearance: float = 0.6            # D, obstacle safety distance
    reciprocal_clearance: float = 0.7  # D_r, inter-agent safety distance
    reciprocal_dt: float = 0.2         # spacing of sampled times t_k

    def validate(self):
        for name in ("lam_f", "lam_b", "lam_s", "lam_d", "lam_o", "lam_r", "lam_e"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.clearance <= 0 or self.reciprocal_clearance <= 0:
            raise ValueError("clearances must be positive")
        return self


@dataclass
class TrajectoryProblem:
    control_points: np.ndarray   # (N, n, 3) shared knot layout
    knot_dt: float
    endpoints: np.ndarray        # (N, 3) per-agent targets
    esdf: object                 # EsdfGrid or None (no obstacle term)
    spec: object                 # FormationSpec
    weights: CostWeights = field(default_factory=CostWeights)

    def __post_init__(self):
        self.control_points = np.asarray(self.control_points, dtype=np.float64)
        self.endpoints = np.asarray(self.endpoints, dtype=np.float64).reshape(-1, 3)
        n_agents, n_ctrl, _ = self.control_points.shape
        if self.endpoints.shape[0] != n_agents:
            raise ValueError("one endpoint target per agent")
        if n_ctrl < N_FIXED + 1:
            raise ValueError("need at least one free control point")
        self.knots = clamped_knots(n_ctrl, 3, self.knot_dt)
        # knot spans for derivative control points
        self.span_v = self.knots[4:4 + n_ctrl - 1] - self.knots[1:n_ctrl]
        self.span_a = self.knots[4:4 + n_ctrl - 2] - self.knots[2:n_ctrl]
        duration = self.knots[-1]
        n_samples = max(int(np.floor(duration / self.weights.reciprocal_dt)) + 1, 2)
        ts = np.minimum(np.arange(n_samples) * self.weights.reciprocal_dt, duration)
        self.sample_basis = np.vstack([basis_row(self.knots, 3, t) for t in ts])
        # complex anchor weights for every non-anchor agent
        self._fw = {i: anchor_coefficients(self.spec, i)
                    for i in range(n_agents) if i not in self.spec.anchor_indices}

    @property
    def n_agents(self):
        return self.control_points.shape[0]

    @property
    def n_ctrl(self):
        return self.control_points.shape[1]

    def trajectories(self, cp=None):
        cp = self.control_points if cp is None else cp
        return [BSplineTrajectory(cp[i], self.knot_dt) for i in range(self.n_agents)]


def _rot_mat(c):
    """2x2 matrix of multiplication by the complex number c."""
    return np.array([[c.real, -c.imag], [c.imag, c.real]])


def evaluate_terms(problem, cp=None):
    """All cost terms and their gradients; returns (terms, grads) dicts."""
    cp = problem.control_points if cp is None else np.asarray(cp, dtype=np.float64)
    n_agents, n_ctrl, _ = cp.shape
    w = problem.weights
    a0, a1 = problem.spec.anchor_indices
    free = slice(N_FIXED, n_ctrl)
    terms = {}
    grads = {k: np.zeros_like(cp) for k in ("f", "b", "s", "d", "o", "r", "e")}

    # formation tracking
    jf = 0.0
    gf = grads["f"]
    for i, wc in problem._fw.items():
        m0 = _rot_mat(1.0 - wc).T
        m1 = _rot_mat(wc).T
        q0 = cp[a0, free, :]
        q1 = cp[a1, free, :]
        hat_xy = q0[:, :2] + (q1[:, :2] - q0[:, :2]) @ _rot_mat(wc).T
        hat_z = 0.5 * (q0[:, 2] + q1[:, 2])
        exy = cp[i, free, :2] - hat_xy
        ez = cp[i, free, 2] - hat_z
        jf += float(np.sum(exy ** 2) + np.sum(ez ** 2))
        gf[i, free, :2] += 2.0 * exy
        gf[i, free, 2] += 2.0 * ez
        gf[a0, free, :2] += -2.0 * exy @ m0.T
        gf[a1, free, :2] += -2.0 * exy @ m1.T
        gf[a0, free, 2] += -ez
        gf[a1, free, 2] += -ez
    terms["f"] = jf

    # anchor-distance regularization
    d_ref2 = problem.spec.d_ref ** 2
    diff = cp[a0, free, :] - cp[a1, free, :]
    c = np.sum(diff ** 2, axis=1) - d_ref2
    terms["b"] = float(np.sum(c ** 2))
    gb = 4.0 * c[:, None] * diff
    grads["b"][a0, free, :] += gb
    grads["b"][a1, free, :] -= gb

    # elastic smoothness on second differences
    gs = grads["s"]
    jj = np.arange(N_FIXED, n_ctrl - 1)
    s = 2.0 * cp[:, jj, :] - cp[:, jj - 1, :] - cp[:, jj + 1, :]
    terms["s"] = float(np.sum(s ** 2))
    gs[:, jj, :] += 4.0 * s
    back = jj - 1 >= N_FIXED
    gs[:, jj[back] - 1, :] -= 2.0 * s[:, back, :]
    gs[:, jj + 1, :] -= 2.0 * s

    # dynamic feasibility on derivative control points
    jd = 0.0
    gd = grads["d"]
    sv = problem.span_v
    sa = problem.span_a
    v = 3.0 * (cp[:, 1:, :] - cp[:, :-1, :]) / sv[None, :, None]
    jv = np.arange(2, n_ctrl - 1)
    ex = np.sum(v[:, jv, :] ** 2, axis=2) - w.v_max ** 2
    act = ex > 0
    if act.any():
        jd += float(np.sum(ex[act] ** 2))
        dv = 4.0 * np.where(act, ex, 0.0)[:, :, None] * v[:, jv, :]
        dv *= (3.0 / sv[jv])[None, :, None]
        gd[:, jv + 1, :] += dv
        fwd = jv >= N_FIXED
        gd[:, jv[fwd], :] -= dv[:, fwd, :]
    a_cp = 2.0 * (v[:, 1:, :] - v[:, :-1, :]) / sa[None, :, None]
    ja = np.arange(1, n_ctrl - 2)
    ex = np.sum(a_cp[:, ja, :] ** 2, axis=2) - w.a_max ** 2
    act = ex > 0
    if act.any():
        jd += float(np.sum(ex[act] ** 2))
        da = 4.0 * np.where(act, ex, 0.0)[:, :, None] * a_cp[:, ja, :]
        # a_j = 2/sa_j * (v_{j+1} - v_j); v_j = 3/sv_j (q_{j+1} - q_j)
        k_hi = (2.0 / sa[ja]) * (3.0 / sv[ja + 1])   # via v_{j+1}
        k_lo = (2.0 / sa[ja]) * (3.0 / sv[ja])       # via v_j
        gd[:, ja + 2, :] += k_hi[None, :, None] * da
        mid = ja + 1 >= N_FIXED
        gd[:, ja[mid] + 1, :] -= ((k_hi + k_lo)[mid])[None, :, None] * da[:, mid, :]
        low = ja >= N_FIXED
        gd[:, ja[low], :] += (k_lo[low])[None, :, None] * da[:, low, :]
    terms["d"] = jd

    bmat = problem.sample_basis
    pos = np.einsum("kj,ijd->ikd", bmat, cp)  # (N, K, 3)

    # obstacle clearance via the ESDF, hinged at densely sampled curve
    # positions; the occupancy map holds only the sensed surface shell, so
    # sparse control-point queries could step across it unpenalized
    jo = 0.0
    go = grads["o"]
    if problem.esdf is not None:
        pts = pos.reshape(-1, 3)
        dist, grad, inside = esdf_query_batch(problem.esdf, pts)
        pen = np.zeros(len(dist))
        dpen = np.zeros((len(dist), 3))
        viol = inside & (dist < w.clearance)
        pen[viol] = (dist[viol] - w.clearance) ** 2
        dpen[viol] = 2.0 * (dist[viol] - w.clearance)[:, None] * grad[viol]
        pen[~inside] = w.clearance ** 2  # maximal hinge penalty, no gradient
        jo = float(np.sum(pen))
        dpen = dpen.reshape(n_agents, -1, 3)
        for i in range(n_agents):
            go[i] += bmat.T @ dpen[i]
    terms["o"] = jo

    # reciprocal separation at sampled times
    jr = 0.0
    gr = grads["r"]
    dr2 = w.reciprocal_clearance ** 2
    for i in range(n_agents):
        for j in range(i + 1, n_agents):
            d = pos[i] - pos[j]
            dist2 = np.sum(d ** 2, axis=1)
            act = dist2 < dr2
            if act.any():
                cc = dist2[act] - dr2
                jr += float(np.sum(cc ** 2))
                dd = 4.0 * cc[:, None] * d[act]
                contrib = bmat[act].T @ dd
                gr[i] += contrib
                gr[j] -= contrib
    gr[:, :N_FIXED, :] = 0.0
    terms["r"] = jr

    # endpoint attraction
    ee = cp[:, -1, :] - problem.endpoints
    terms["e"] = float(np.sum(ee ** 2))
    grads["e"][:, -1, :] += 2.0 * ee

    for g in grads.values():
        g[:, :N_FIXED, :] = 0.0
    return terms, grads


def cost_and_gradient(problem, cp=None):
    """Weighted total cost and its gradient tensor (zeros on fixed points).

    Accumulates every term straight into one weighted gradient array; the
    optimizer calls this hundreds of times per plan, so the per-term
    bookkeeping of evaluate_terms is deliberately skipped here.  The two
    paths are tied together by the finite-difference tests.
    """
    cp = problem.control_points if cp is None else np.asarray(cp, dtype=np.float64)
    n_agents, n_ctrl, _ = cp.shape
    w = problem.weights
    a0, a1 = problem.spec.anchor_indices
    free = slice(N_FIXED, n_ctrl)
    total = 0.0
    grad = np.zeros_like(cp)

    if w.lam_f != 0.0:
        lf = w.lam_f
        q0 = cp[a0, free, :]
        q1 = cp[a1, free, :]
        for i, wc in problem._fw.items():
            m0 = _rot_mat(1.0 - wc).T
            m1 = _rot_mat(wc).T
            hat_xy = q0[:, :2] + (q1[:, :2] - q0[:, :2]) @ m1
            exy = cp[i, free, :2] - hat_xy
            ez = cp[i, free, 2] - 0.5 * (q0[:, 2] + q1[:, 2])
            total += lf * float(np.sum(exy ** 2) + np.sum(ez ** 2))
            grad[i, free, :2] += (2.0 * lf) * exy
            grad[i, free, 2] += (2.0 * lf) * ez
            grad[a0, free, :2] += (-2.0 * lf) * exy @ m0.T
            grad[a1, free, :2] += (-2.0 * lf) * exy @ m1.T
            grad[a0, free, 2] += -lf * ez
            grad[a1, free, 2] += -lf * ez

    if w.lam_b != 0.0:
        diff = cp[a0, free, :] - cp[a1, free, :]
        c = np.sum(diff ** 2, axis=1) - problem.spec.d_ref ** 2
        total += w.lam_b * float(np.sum(c ** 2))
        gb = (4.0 * w.lam_b) * c[:, None] * diff
        grad[a0, free, :] += gb
        grad[a1, free, :] -= gb

    if w.lam_s != 0.0:
        jj = np.arange(N_FIXED, n_ctrl - 1)
        s = 2.0 * cp[:, jj, :] - cp[:, jj - 1, :] - cp[:, jj + 1, :]
        total += w.lam_s * float(np.sum(s ** 2))
        s *= 2.0 * w.lam_s
        grad[:, jj, :] += 2.0 * s
        back = jj - 1 >= N_FIXED
        grad[:, jj[back] - 1, :] -= s[:, back, :]
        grad[:, jj + 1, :] -= s

    if w.lam_d != 0.0:
        ld = w.lam_d
        sv = problem.span_v
        sa = problem.span_a
        v = 3.0 * (cp[:, 1:, :] - cp[:, :-1, :]) / sv[None, :, None]
        jv = np.arange(2, n_ctrl - 1)
        ex = np.sum(v[:, jv, :] ** 2, axis=2) - w.v_max ** 2
        act = ex > 0
        if act.any():
            total += ld * float(np.sum(ex[act] ** 2))
            dv = (4.0 * ld) * np.where(act, ex, 0.0)[:, :, None] * v[:, jv, :]
            dv *= (3.0 / sv[jv])[None, :, None]
            grad[:, jv + 1, :] += dv
            fwd = jv >= N_FIXED
            grad[:, jv[fwd], :] -= dv[:, fwd, :]
        a_cp = 2.0 * (v[:, 1:, :] - v[:, :-1, :]) / sa[None, :, None]
        ja = np.arange(1, n_ctrl - 2)
        ex = np.sum(a_cp[:, ja, :] ** 2, axis=2) - w.a_max ** 2
        act = ex > 0
        if act.any():
            total += ld * float(np.sum(ex[act] ** 2))
            da = (4.0 * ld) * np.where(act, ex, 0.0)[:, :, None] * a_cp[:, ja, :]
            k_hi = (2.0 / sa[ja]) * (3.0 / sv[ja + 1])
            k_lo = (2.0 / sa[ja]) * (3.0 / sv[ja])
            grad[:, ja + 2, :] += k_hi[None, :, None] * da
            mid = ja + 1 >= N_FIXED
            grad[:, ja[mid] + 1, :] -= ((k_hi + k_lo)[mid])[None, :, None] * da[:, mid, :]
            low = ja >= N_FIXED
            grad[:, ja[low], :] += (k_lo[low])[None, :, None] * da[:, low, :]

    bmat = problem.sample_basis
    pos = None
    if (w.lam_o != 0.0 and problem.esdf is not None) or w.lam_r != 0.0:
        pos = np.einsum("kj,ijd->ikd", bmat, cp)

    if w.lam_o != 0.0 and problem.esdf is not None:
        pts = pos.reshape(-1, 3)
        dist, dgrad, inside = esdf_query_batch(problem.esdf, pts)
        viol = inside & (dist < w.clearance)
        slack = np.where(viol, dist - w.clearance, 0.0)
        total += w.lam_o * float(np.sum(slack ** 2)
                                 + np.count_nonzero(~inside) * w.clearance ** 2)
        if viol.any():
            dpen = ((2.0 * w.lam_o) * slack[:, None] * dgrad).reshape(
                n_agents, -1, 3)
            for i in range(n_agents):
                grad[i, free, :] += bmat[:, free].T @ dpen[i]

    if w.lam_r != 0.0:
        dr2 = w.reciprocal_clearance ** 2
        gr = np.zeros_like(cp)
        touched = False
        for i in range(n_agents):
            for j in range(i + 1, n_agents):
                d = pos[i] - pos[j]
                dist2 = np.sum(d ** 2, axis=1)
                act = dist2 < dr2
                if act.any():
                    cc = dist2[act] - dr2
                    total += w.lam_r * float(np.sum(cc ** 2))
                    dd = (4.0 * w.lam_r) * cc[:, None] * d[act]
                    contrib = bmat[act].T @ dd
                    gr[i] += contrib
                    gr[j] -= contrib
                    touched = True
        if touched:
            gr[:, :N_FIXED, :] = 0.0
            grad += gr

    if w.lam_e != 0.0:
        ee = cp[:, -1, :] - problem.endpoints
        total += w.lam_e * float(np.sum(ee ** 2))
        grad[:, -1, :] += (2.0 * w.lam_e) * ee

    grad[:, :N_FIXED, :] = 0.0
    return total, grad
