"""Batched ray/scene occlusion.

Rays are first culled per building with a slab test against its bounding box;
survivors go through a vectorised Moller-Trumbore test against that
building's triangles only.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

EPS = 1e-6
_CHUNK = 1 << 18     # rays x triangles evaluated per numpy batch


@dataclass(frozen=True)
class RayHit:
    hit: bool
    distance: float = float("inf")


@dataclass(frozen=True)
class SceneIndex:
    v0: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    spans: tuple          # per building: (start, stop, lo[3], hi[3])
    has_ground: bool

    @classmethod
    def from_scene(cls, scene) -> "SceneIndex":
        tris = [b.triangles for b in scene.buildings]
        if tris:
            all_t = np.concatenate(tris)
        else:
            all_t = np.empty((0, 3, 3))
        spans, k = [], 0
        for b in scene.buildings:
            m = len(b.triangles)
            spans.append((k, k + m, np.asarray(b.aabb[0], float), np.asarray(b.aabb[1], float)))
            k += m
        v0 = all_t[:, 0]
        return cls(v0, all_t[:, 1] - v0, all_t[:, 2] - v0, tuple(spans), scene.has_ground)

    def nearest(self, origins, dirs, eps: float = EPS, use_aabb: bool = True) -> np.ndarray:
        """Distance to the first scene hit for each ray (``inf`` when none)."""
        o = np.atleast_2d(np.asarray(origins, float))
        d = np.atleast_2d(np.asarray(dirs, float))
        o, d = np.broadcast_arrays(o, d)
        best = np.full(len(o), np.inf)
        for start, stop, lo, hi in self.spans:
            if use_aabb:
                idx = np.nonzero(_slab(o, d, lo, hi, eps))[0]
            else:
                idx = np.arange(len(o))
            if idx.size:
                t = _moller_trumbore(o[idx], d[idx], self.v0[start:stop],
                                     self.e1[start:stop], self.e2[start:stop], eps)
                best[idx] = np.minimum(best[idx], t)
        if self.has_ground:
            down = d[:, 2] < 0
            with np.errstate(divide="ignore", invalid="ignore"):
                tg = np.where(down, -o[:, 2] / np.where(down, d[:, 2], 1.0), np.inf)
            tg = np.where(tg > eps, tg, np.inf)
            best = np.minimum(best, tg)
        return best

    def occluded(self, origins, dirs, eps: float = EPS, use_aabb: bool = True) -> np.ndarray:
        return np.isfinite(self.nearest(origins, dirs, eps, use_aabb))


def _slab(o, d, lo, hi, eps):
    """Rays whose [eps, inf) segment overlaps the box."""
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / d
        t1 = (lo - o) * inv
        t2 = (hi - o) * inv
    tmin = np.minimum(t1, t2)
    tmax = np.maximum(t1, t2)
    # axis-parallel rays: inside the slab -> unbounded, outside -> empty
    par = d == 0
    inside = (o >= lo) & (o <= hi)
    tmin = np.where(par, np.where(inside, -np.inf, np.inf), tmin)
    tmax = np.where(par, np.where(inside, np.inf, -np.inf), tmax)
    near = tmin.max(axis=1)
    far = tmax.min(axis=1)
    return (far >= near) & (far > eps)


def _moller_trumbore(o, d, v0, e1, e2, eps):
    n_rays, n_tri = len(o), len(v0)
    out = np.full(n_rays, np.inf)
    if n_tri == 0:
        return out
    step = max(1, _CHUNK // n_tri)
    for s in range(0, n_rays, step):
        oo = o[s:s + step, None, :]
        dd = d[s:s + step, None, :]
        pvec = np.cross(dd, e2[None])
        det = np.einsum("rtk,tk->rt", pvec, e1)
        ok = np.abs(det) > 1e-12
        inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
        tvec = oo - v0[None]
        u = np.einsum("rtk,rtk->rt", tvec, pvec) * inv
        qvec = np.cross(tvec, e1[None])
        v = np.einsum("rtk,rtk->rt", dd, qvec) * inv
        t = np.einsum("tk,rtk->rt", e2, qvec) * inv
        hit = ok & (u >= 0) & (u <= 1) & (v >= 0) & (u + v <= 1) & (t > eps)
        out[s:s + step] = np.where(hit, t, np.inf).min(axis=1)
    return out


def ray_occluded(scene, origin, direction, eps: float = EPS) -> RayHit:
    """First hit along one ray; the ground only stops downward rays."""
    d = np.asarray(direction, float)
    dist = float(scene.index.nearest(np.asarray(origin, float)[None], d[None], eps)[0])
    return RayHit(np.isfinite(dist), dist)
