"""Compiled fast paths for homogeneous models.

Two model families dominate the experiment runtime and get numba kernels:

* 1-D grid models (quadratic unary + truncated-quadratic pairwise) for both
  samplers, used by the denoising experiments;
* 4-D pose models (position/multi-source quadratic unary + weak-perspective
  pairwise) for the Metropolis-Hastings sampler, used by the tracking
  parameter sweeps.

The kernels consume the same per-(iteration, node) random streams as the
generic sampler loop, pre-drawn in blocks, and replicate its floating-point
expression order, so generic and fast results are bit-identical (covered by
equivalence tests).  Anything that does not match falls back to the generic
path automatically.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit
from scipy.special import ndtri

from . import beliefs
from .engine import chain_rng
from .graph import MrfGraph
from .intervals import MERGE_GAP
from .potentials import (
    MultiSourceQuadraticUnary,
    PositionQuadraticUnary,
    QuadraticUnary,
    TruncatedQuadraticPair,
    WeakPerspectivePair,
)
from .samplers import GUARD_SLACK

_CACHE_ATTR = "_particlebp_fastpath_info"


def _csr_arrays(graph: MrfGraph):
    n = graph.node_count
    ptr = np.zeros(n + 1, dtype=np.int64)
    for s in range(n):
        ptr[s + 1] = ptr[s] + len(graph.neighbors[s])
    dst = np.empty(ptr[-1], dtype=np.int64)
    for s in range(n):
        dst[ptr[s] : ptr[s + 1]] = graph.neighbors[s]
    # directed edge (s -> j-th neighbor) has id ptr[s] + j by construction
    eid = {e: i for i, e in enumerate(graph.directed_edges)}
    rev = np.array(
        [eid[(t, s)] for (s, t) in graph.directed_edges], dtype=np.int64
    )
    src = np.array([e[0] for e in graph.directed_edges], dtype=np.int64)
    return ptr, dst, src, rev


class GridFastPath:
    """Fast path for homogeneous 1-D grid models (both samplers)."""

    def __init__(self, graph: MrfGraph, config):
        self.ptr, self.dst, self.src, self.rev = _csr_arrays(graph)
        self.centers = np.array([u.center for u in graph.unary])
        self.uweights = np.array([u.weight for u in graph.unary])
        e2 = len(graph.directed_edges)
        self.w2 = np.empty(e2)
        self.cap = np.empty(e2)
        for i, (s, t) in enumerate(graph.directed_edges):
            pot, _ = graph.edge_potential(s, t)
            self.w2[i] = pot.w2
            self.cap[i] = pot.cap
        axis = graph.label_spaces[0].axis(0)
        self.lo, self.hi = axis.lo, axis.hi

    @staticmethod
    def matches(graph: MrfGraph, config) -> bool:
        axis0 = graph.label_spaces[0].box
        for space in graph.label_spaces:
            if space.dims != 1 or space.box != axis0:
                return False
        if not all(isinstance(u, QuadraticUnary) for u in graph.unary):
            return False
        for s, t in graph.directed_edges:
            pot, _ = graph.edge_potential(s, t)
            if not isinstance(pot, TruncatedQuadraticPair):
                return False
        if config.sampler == "metropolis-hastings":
            if config.mh_polar_pairs or len(config.mh_sigmas) != 1:
                return False
        return True

    def _stack(self, state: beliefs.ParticleState, graph: MrfGraph):
        parts = np.stack([p[:, 0] for p in state.particles])
        disb = np.stack(state.disbelief)
        msgs = np.stack([state.messages[e] for e in graph.directed_edges])
        return parts, disb, msgs

    def sample_iteration(self, graph, state, temp, config, iteration, record):
        parts, disb, msgs = self._stack(state, graph)
        n, p, steps = graph.node_count, config.particles, config.mcmc_steps
        new_parts = np.empty((n, p))
        chains = np.empty((n, p, steps)) if record else np.empty((0, 0, 0))
        if config.sampler == "slice":
            counts = p * steps * (self.ptr[1:] - self.ptr[:-1] + 2)
            uoff = np.zeros(n + 1, dtype=np.int64)
            np.cumsum(counts, out=uoff[1:])
            u_all = np.empty(uoff[-1])
            for s in range(n):
                rng = chain_rng(config.seed, iteration, s)
                u_all[uoff[s] : uoff[s + 1]] = rng.random(counts[s])
            accepted = _slice_grid_kernel(
                parts, disb, msgs, self.ptr, self.dst, self.rev,
                self.centers, self.uweights, self.w2, self.cap,
                self.lo, self.hi, temp, steps, u_all, uoff,
                new_parts, chains, record,
            )
        else:
            z_all = np.empty((n, p, steps))
            a_all = np.empty((n, p, steps))
            for s in range(n):
                rng = chain_rng(config.seed, iteration, s)
                u = rng.random(p * steps * 2).reshape(p, steps, 2)
                z_all[s] = ndtri(u[:, :, 0])
                a_all[s] = u[:, :, 1]
            sigma = float(config.mh_sigmas[0])
            accepted = _mh_grid_kernel(
                parts, disb, msgs, self.ptr, self.dst, self.rev,
                self.centers, self.uweights, self.w2, self.cap,
                self.lo, self.hi, temp, steps, sigma, z_all, a_all,
                new_parts, chains, record,
            )
        out = [new_parts[s].reshape(p, 1) for s in range(n)]
        return out, (chains[..., None] if record else None), int(accepted)

    def refresh(self, graph, state, new_particles, temp):
        parts_old, disb_old, msgs_old = self._stack(state, graph)
        parts_new = np.stack([q[:, 0] for q in new_particles])
        xs = parts_new[self.dst]  # (E2, p) receiver's new particles
        xt = parts_old[self.src]  # (E2, p) sender's old particles
        consts = disb_old[self.src] - msgs_old[self.rev]
        diff = xs[:, :, None] - xt[:, None, :]
        vals = (2.0 * (self.w2[:, None, None] * np.minimum(self.cap[:, None, None], diff * diff))) / temp
        vals = vals + consts[:, None, :]
        m_new = vals.min(axis=2)
        d = parts_new - self.centers[:, None]
        b_new = (self.uweights[:, None] * d) * d / temp
        for s in range(graph.node_count):
            for j in range(self.ptr[s], self.ptr[s + 1]):
                b_new[s] += m_new[self.rev[j]]
        b_new -= b_new.min(axis=1, keepdims=True)
        m_new -= m_new.min(axis=1, keepdims=True)
        msgs = {e: m_new[i] for i, e in enumerate(graph.directed_edges)}
        disb = [b_new[s] for s in range(graph.node_count)]
        return beliefs.ParticleState(new_particles, disb, msgs, state.iteration + 1)


@njit(cache=True)
def _slice_grid_kernel(
    parts, disb, msgs, ptr, dst, rev, centers, uweights, w2, cap,
    lo, hi, temp, steps, u_all, uoff, new_parts, chains, record,
):
    n, p = parts.shape
    max_deg = 0
    for s in range(n):
        deg = ptr[s + 1] - ptr[s]
        if deg > max_deg:
            max_deg = deg
    nf = max_deg + 1
    F = np.empty(nf)
    ubar = np.empty(nf)
    consts = np.empty((max_deg, p))
    cap_pieces = max_deg * p + 2
    cur_lo = np.empty(cap_pieces)
    cur_hi = np.empty(cap_pieces)
    set_lo = np.empty(p + 1)
    set_hi = np.empty(p + 1)
    tmp_lo = np.empty(cap_pieces)
    tmp_hi = np.empty(cap_pieces)
    accepted = 0
    for s in range(n):
        deg = ptr[s + 1] - ptr[s]
        stride = deg + 2
        cs = centers[s]
        uw = uweights[s]
        for j in range(deg):
            e = ptr[s] + j
            t = dst[e]
            for k in range(p):
                consts[j, k] = disb[t, k] - msgs[e, k]
        for i in range(p):
            x = parts[s, i]
            base = uoff[s] + i * steps * stride
            for m in range(steps):
                ub = base + m * stride
                # factor values at the current sample
                dxc = x - cs
                F[0] = (uw * dxc) * dxc / temp
                for j in range(deg):
                    e = ptr[s] + j
                    t = dst[e]
                    best = np.inf
                    for k in range(p):
                        dd = x - parts[t, k]
                        v = (2.0 * (w2[e] * min(cap[e], dd * dd))) / temp + consts[j, k]
                        if v < best:
                            best = v
                    F[1 + j] = best
                # slice levels
                for l in range(deg + 1):
                    uu = u_all[ub + l]
                    if uu > 0.0:
                        ubar[l] = F[l] - math.log(uu)
                    else:
                        ubar[l] = np.inf
                upos = u_all[ub + deg + 1]
                # unary sub-level set, clipped to the axis
                lvl = ubar[0] * temp
                r = math.sqrt(lvl / uw)
                clo = cs - r
                chi = cs + r
                if clo < lo:
                    clo = lo
                if chi > hi:
                    chi = hi
                if clo <= chi:
                    cur_lo[0] = clo
                    cur_hi[0] = chi
                    ncur = 1
                else:
                    ncur = 0
                # per-neighbor union of pairwise sub-level sets, intersected in
                for j in range(deg):
                    if ncur == 0:
                        break
                    e = ptr[s] + j
                    t = dst[e]
                    npc = 0
                    for k in range(p):
                        lvl = (ubar[1 + j] - consts[j, k]) * temp / 2.0
                        if lvl < 0.0:
                            continue
                        if lvl >= w2[e] * cap[e]:
                            plo = lo
                            phi = hi
                        else:
                            r = math.sqrt(lvl / w2[e])
                            ck = parts[t, k]
                            plo = ck - r
                            phi = ck + r
                            if plo < lo:
                                plo = lo
                            if phi > hi:
                                phi = hi
                            if plo > phi:
                                continue
                        set_lo[npc] = plo
                        set_hi[npc] = phi
                        npc += 1
                    if npc == 0:
                        ncur = 0
                        break
                    # insertion sort by (lo, hi)
                    for a in range(1, npc):
                        klo = set_lo[a]
                        khi = set_hi[a]
                        b = a - 1
                        while b >= 0 and (
                            set_lo[b] > klo or (set_lo[b] == klo and set_hi[b] > khi)
                        ):
                            set_lo[b + 1] = set_lo[b]
                            set_hi[b + 1] = set_hi[b]
                            b -= 1
                        set_lo[b + 1] = klo
                        set_hi[b + 1] = khi
                    # canonical merge (gap tolerance)
                    nm = 0
                    for a in range(npc):
                        if nm > 0 and set_lo[a] <= set_hi[nm - 1] + MERGE_GAP:
                            if set_hi[a] > set_hi[nm - 1]:
                                set_hi[nm - 1] = set_hi[a]
                        else:
                            set_lo[nm] = set_lo[a]
                            set_hi[nm] = set_hi[a]
                            nm += 1
                    # intersect cur with the union (two-pointer sweep)
                    ii = 0
                    jj = 0
                    nt = 0
                    while ii < ncur and jj < nm:
                        xlo = cur_lo[ii] if cur_lo[ii] > set_lo[jj] else set_lo[jj]
                        xhi = cur_hi[ii] if cur_hi[ii] < set_hi[jj] else set_hi[jj]
                        if xlo <= xhi:
                            tmp_lo[nt] = xlo
                            tmp_hi[nt] = xhi
                            nt += 1
                        if cur_hi[ii] < set_hi[jj]:
                            ii += 1
                        else:
                            jj += 1
                    # canonicalize the result back into cur
                    ncur = 0
                    for a in range(nt):
                        if ncur > 0 and tmp_lo[a] <= cur_hi[ncur - 1] + MERGE_GAP:
                            if tmp_hi[a] > cur_hi[ncur - 1]:
                                cur_hi[ncur - 1] = tmp_hi[a]
                        else:
                            cur_lo[ncur] = tmp_lo[a]
                            cur_hi[ncur] = tmp_hi[a]
                            ncur += 1
                total = 0.0
                for a in range(ncur):
                    total += cur_hi[a] - cur_lo[a]
                if total <= 0.0:
                    if record:
                        chains[s, i, m] = x
                    continue
                target = upos * total
                acc = 0.0
                cand = x
                for a in range(ncur):
                    ln = cur_hi[a] - cur_lo[a]
                    nxt = acc + ln
                    if target <= nxt or a == ncur - 1:
                        cand = cur_lo[a] + (target - acc)
                        if cand > cur_hi[a]:
                            cand = cur_hi[a]
                        break
                    acc = nxt
                # acceptance guard at the candidate
                dxc = cand - cs
                ok = (uw * dxc) * dxc / temp <= ubar[0] + GUARD_SLACK
                if ok:
                    for j in range(deg):
                        e = ptr[s] + j
                        t = dst[e]
                        best = np.inf
                        for k in range(p):
                            dd = cand - parts[t, k]
                            v = (2.0 * (w2[e] * min(cap[e], dd * dd))) / temp + consts[j, k]
                            if v < best:
                                best = v
                        if not best <= ubar[1 + j] + GUARD_SLACK:
                            ok = False
                            break
                if ok:
                    x = cand
                    accepted += 1
                if record:
                    chains[s, i, m] = x
            new_parts[s, i] = x
    return accepted


@njit(cache=True)
def _mh_grid_kernel(
    parts, disb, msgs, ptr, dst, rev, centers, uweights, w2, cap,
    lo, hi, temp, steps, sigma, z_all, a_all, new_parts, chains, record,
):
    n, p = parts.shape
    max_deg = 0
    for s in range(n):
        deg = ptr[s + 1] - ptr[s]
        if deg > max_deg:
            max_deg = deg
    consts = np.empty((max_deg, p))
    scale = sigma * math.sqrt(temp)
    accepted = 0
    for s in range(n):
        deg = ptr[s + 1] - ptr[s]
        cs = centers[s]
        uw = uweights[s]
        for j in range(deg):
            e = ptr[s] + j
            t = dst[e]
            for k in range(p):
                consts[j, k] = disb[t, k] - msgs[e, k]
        for i in range(p):
            x = parts[s, i]
            cur_b = np.nan
            have_b = False
            for m in range(steps):
                cand = x + scale * z_all[s, i, m]
                if not have_b:
                    dxc = x - cs
                    cur_b = (uw * dxc) * dxc / temp
                    for j in range(deg):
                        e = ptr[s] + j
                        t = dst[e]
                        best = np.inf
                        for k in range(p):
                            dd = x - parts[t, k]
                            v = (2.0 * (w2[e] * min(cap[e], dd * dd))) / temp + consts[j, k]
                            if v < best:
                                best = v
                        cur_b = cur_b + best
                    have_b = True
                if cand < lo or cand > hi:
                    if record:
                        chains[s, i, m] = x
                    continue
                dxc = cand - cs
                cand_b = (uw * dxc) * dxc / temp
                for j in range(deg):
                    e = ptr[s] + j
                    t = dst[e]
                    best = np.inf
                    for k in range(p):
                        dd = cand - parts[t, k]
                        v = (2.0 * (w2[e] * min(cap[e], dd * dd))) / temp + consts[j, k]
                        if v < best:
                            best = v
                    cand_b = cand_b + best
                ua = a_all[s, i, m]
                if ua > 0.0:
                    thr = cur_b - math.log(ua)
                else:
                    thr = np.inf
                if cand_b < thr:
                    x = cand
                    cur_b = cand_b
                    accepted += 1
                if record:
                    chains[s, i, m] = x
            new_parts[s, i] = x
    return accepted


class TrackMHFastPath:
    """Fast path for 4-D pose models under Metropolis-Hastings."""

    def __init__(self, graph: MrfGraph, config):
        self.ptr, self.dst, self.src, self.rev = _csr_arrays(graph)
        u0 = graph.unary[0]
        if isinstance(u0, MultiSourceQuadraticUnary):
            self.multi = True
            self.targets = u0.targets  # shared (n_obs, 2)
            self.node_targets = np.zeros((graph.node_count, 2))
        else:
            self.multi = False
            self.targets = np.zeros((1, 2))
            self.node_targets = np.stack([u.target for u in graph.unary])
        self.uweight = float(u0.weight)
        e2 = len(graph.directed_edges)
        self.dab = np.empty((e2, 2))
        self.den = np.empty(e2)
        self.wpair = np.empty(e2)
        self.side = np.empty(e2, dtype=np.int64)
        for i, (s, t) in enumerate(graph.directed_edges):
            pot, side = graph.edge_potential(s, t)
            self.dab[i] = pot.d_ab
            self.den[i] = pot.den
            self.wpair[i] = pot.weight
            self.side[i] = side
        box = graph.label_spaces[0].box
        self.box_lo = np.array([a.lo for a in box])
        self.box_hi = np.array([a.hi for a in box])

    @staticmethod
    def matches(graph: MrfGraph, config) -> bool:
        if config.sampler != "metropolis-hastings":
            return False
        if config.mh_polar_pairs != ((2, 3),):
            return False
        box0 = graph.label_spaces[0].box
        for space in graph.label_spaces:
            if space.dims != 4 or space.box != box0:
                return False
        u0 = graph.unary[0]
        if isinstance(u0, MultiSourceQuadraticUnary):
            for u in graph.unary:
                if (
                    not isinstance(u, MultiSourceQuadraticUnary)
                    or u.coords != (0, 1)
                    or u.weight != u0.weight
                    or u.targets is not u0.targets
                ):
                    return False
        elif isinstance(u0, PositionQuadraticUnary):
            for u in graph.unary:
                if (
                    not isinstance(u, PositionQuadraticUnary)
                    or u.coords != (0, 1)
                    or u.weight != u0.weight
                ):
                    return False
        else:
            return False
        for s, t in graph.directed_edges:
            pot, _ = graph.edge_potential(s, t)
            if not isinstance(pot, WeakPerspectivePair):
                return False
        return True

    def sample_iteration(self, graph, state, temp, config, iteration, record):
        if record:
            return None  # caller falls back to the generic path
        parts = np.stack(state.particles)  # (S, p, 4)
        disb = np.stack(state.disbelief)
        msgs = np.stack([state.messages[e] for e in graph.directed_edges])
        n, p, steps = graph.node_count, config.particles, config.mcmc_steps
        z_all = np.empty((n, p, steps, 4))
        a_all = np.empty((n, p, steps))
        for s in range(n):
            rng = chain_rng(config.seed, iteration, s)
            u = rng.random(p * steps * 5).reshape(p, steps, 5)
            z_all[s] = ndtri(u[:, :, :4])
            a_all[s] = u[:, :, 4]
        sigmas = np.asarray(config.mh_sigmas, dtype=float)
        new_parts = np.empty((n, p, 4))
        accepted = _mh_track_kernel(
            parts, disb, msgs, self.ptr, self.dst,
            1 if self.multi else 0, self.targets, self.node_targets, self.uweight,
            self.dab, self.den, self.wpair, self.side,
            self.box_lo, self.box_hi, temp, steps, sigmas, z_all, a_all, new_parts,
        )
        return [new_parts[s] for s in range(n)], None, int(accepted)

    refresh = None  # generic refresh is cheap at tracking scale


@njit(cache=True)
def _pose_disbelief(
    x, s, parts, ptr, dst, consts, multi, targets, node_targets, uweight,
    dab, den, wpair, side, temp,
):
    if multi == 1:
        best_u = np.inf
        for o in range(targets.shape[0]):
            dx = x[0] - targets[o, 0]
            dy = x[1] - targets[o, 1]
            v = dx * dx + dy * dy
            if v < best_u:
                best_u = v
        b = uweight * best_u / temp
    else:
        dx = x[0] - node_targets[s, 0]
        dy = x[1] - node_targets[s, 1]
        b = uweight * (dx * dx + dy * dy) / temp
    deg = ptr[s + 1] - ptr[s]
    p = parts.shape[1]
    for j in range(deg):
        e = ptr[s] + j
        t = dst[e]
        dabx = dab[e, 0]
        daby = dab[e, 1]
        ndabx = -dabx
        ndaby = -daby
        best = np.inf
        for k in range(p):
            if side[e] == 0:
                pax, pay, oax, oay = x[0], x[1], x[2], x[3]
                pbx = parts[t, k, 0]
                pby = parts[t, k, 1]
                obx = parts[t, k, 2]
                oby = parts[t, k, 3]
            else:
                pax = parts[t, k, 0]
                pay = parts[t, k, 1]
                oax = parts[t, k, 2]
                oay = parts[t, k, 3]
                pbx, pby, obx, oby = x[0], x[1], x[2], x[3]
            r1x = pbx - pax - (oax * dabx - oay * daby)
            r1y = pby - pay - (oay * dabx + oax * daby)
            r2x = pax - pbx - (obx * ndabx - oby * ndaby)
            r2y = pay - pby - (oby * ndabx + obx * ndaby)
            e_val = wpair[e] * (((r1x * r1x + r1y * r1y) + r2x * r2x) + r2y * r2y) / den[e]
            v = (2.0 * e_val) / temp + consts[j, k]
            if v < best:
                best = v
        b = b + best
    return b


@njit(cache=True)
def _mh_track_kernel(
    parts, disb, msgs, ptr, dst, multi, targets, node_targets, uweight,
    dab, den, wpair, side, box_lo, box_hi, temp, steps, sigmas, z_all, a_all,
    new_parts,
):
    n, p, _ = parts.shape
    max_deg = 0
    for s in range(n):
        deg = ptr[s + 1] - ptr[s]
        if deg > max_deg:
            max_deg = deg
    consts = np.empty((max_deg, p))
    sq = math.sqrt(temp)
    accepted = 0
    cand = np.empty(4)
    for s in range(n):
        deg = ptr[s + 1] - ptr[s]
        for j in range(deg):
            e = ptr[s] + j
            t = dst[e]
            for k in range(p):
                consts[j, k] = disb[t, k] - msgs[e, k]
        for i in range(p):
            x = parts[s, i].copy()
            cur_b = np.nan
            have_b = False
            for m in range(steps):
                r = math.hypot(x[2], x[3])
                phi = math.atan2(x[3], x[2])
                r2 = r + (sigmas[2] * sq) * z_all[s, i, m, 2]
                phi2 = phi + (sigmas[3] * sq) * z_all[s, i, m, 3]
                cand[2] = r2 * math.cos(phi2)
                cand[3] = r2 * math.sin(phi2)
                cand[0] = x[0] + (sigmas[0] * sq) * z_all[s, i, m, 0]
                cand[1] = x[1] + (sigmas[1] * sq) * z_all[s, i, m, 1]
                if not have_b:
                    cur_b = _pose_disbelief(
                        x, s, parts, ptr, dst, consts, multi, targets,
                        node_targets, uweight, dab, den, wpair, side, temp,
                    )
                    have_b = True
                inside = True
                for a in range(4):
                    if cand[a] < box_lo[a] or cand[a] > box_hi[a]:
                        inside = False
                        break
                if not inside:
                    continue
                cand_b = _pose_disbelief(
                    cand, s, parts, ptr, dst, consts, multi, targets,
                    node_targets, uweight, dab, den, wpair, side, temp,
                )
                ua = a_all[s, i, m]
                if ua > 0.0:
                    thr = cur_b - math.log(ua)
                else:
                    thr = np.inf
                if cand_b < thr:
                    for a in range(4):
                        x[a] = cand[a]
                    cur_b = cand_b
                    accepted += 1
            new_parts[s, i] = x
    return accepted


def dispatch(graph: MrfGraph, config):
    """Return a cached fast-path object for this graph/config, or None."""
    cache = graph.__dict__.setdefault(_CACHE_ATTR, {})
    key = (config.sampler, config.mh_polar_pairs)
    if key in cache:
        return cache[key]
    fast = None
    if GridFastPath.matches(graph, config):
        fast = GridFastPath(graph, config)
    elif TrackMHFastPath.matches(graph, config):
        fast = TrackMHFastPath(graph, config)
    cache[key] = fast
    return fast
