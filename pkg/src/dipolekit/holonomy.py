"""SU(2) parallel transport and Wilson loops through the dipole-propagator machinery.

A path x(t) in the base manifold and a potential A^a_mu(x) define the field
R^a(t) = x'^mu(t) A^a_mu(x(t)); the holonomy is the evolution operator of
H(t) = R(t).J over the path. Each smooth piece of the path is handed to an
exact propagator when its pulled-back field satisfies a solvability
condition, and to the oracle integrator otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import curves as fc
from . import propagators as pr
from .oracle import IntegrationConfig, integrate
from .su2 import LEVI_CIVITA, SpinRep, field_hamiltonian

CLOSED_TOL = 1e-9
COLLAPSE_TOL = 1e-12


@dataclass(frozen=True)
class GaugePotential:
    """Components A^a_mu(x), returned by ``evaluator`` with shape (..., 3, D)."""

    dim: int
    evaluator: Callable
    name: str = "custom"

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.asarray(self.evaluator(x), dtype=float)


def zero_potential(dim: int) -> GaugePotential:
    return GaugePotential(dim, lambda x: np.zeros(x.shape[:-1] + (3, dim)), "zero")


def constant_potential(components) -> GaugePotential:
    comps = np.asarray(components, dtype=float)
    if comps.ndim != 2 or comps.shape[0] != 3:
        raise ValueError("constant potential needs a 3 x D array")
    return GaugePotential(comps.shape[1], lambda x: np.broadcast_to(comps, x.shape[:-1] + comps.shape).copy(),
                          "constant")


def abelian_vortex(strength: float, axis=(0.0, 0.0, 1.0), dim: int = 2) -> GaugePotential:
    """A^a_mu = n^a c (-x_2, x_1, 0, ...): a single Lie-algebra direction n, curl 2c in the x1-x2 plane."""
    n = np.asarray(axis, dtype=float)
    n = n / np.linalg.norm(n)
    c = float(strength)

    def evaluate(x):
        a = np.zeros(x.shape)
        a[..., 0] = -c * x[..., 1]
        a[..., 1] = c * x[..., 0]
        return n[:, None] * a[..., None, :]

    return GaugePotential(dim, evaluate, "abelian_vortex")


def hedgehog(strength: float = 1.0, core: float = 0.0) -> GaugePotential:
    """A^a_mu = g eps_{a mu nu} x^nu / (|x|^2 + core^2) on R^3."""
    g, core2 = float(strength), float(core) ** 2

    def evaluate(x):
        denom = np.sum(x * x, axis=-1) + core2
        return g * np.einsum("amn,...n->...am", LEVI_CIVITA, x) / denom[..., None, None]

    return GaugePotential(3, evaluate, "hedgehog")


POTENTIALS = {
    "zero": zero_potential,
    "constant": constant_potential,
    "abelian_vortex": abelian_vortex,
    "hedgehog": hedgehog,
}


@dataclass(frozen=True)
class Segment:
    """A smooth stretch of path; its functions may be evaluated slightly past [0, duration]."""

    duration: float
    position: Callable
    velocity: Callable


@dataclass(frozen=True)
class BasePath:
    """A piecewise-smooth path in R^D built from smooth segments traversed in order."""

    dim: int
    segments: tuple
    kind: str = "custom"
    params: dict = field(default_factory=dict)

    @property
    def duration(self) -> float:
        return float(sum(s.duration for s in self.segments))

    @property
    def breakpoints(self) -> np.ndarray:
        return np.cumsum([s.duration for s in self.segments])[:-1]

    def _locate(self, t):
        t = np.asarray(t, dtype=float)
        edges = np.concatenate([[0.0], np.cumsum([s.duration for s in self.segments])])
        which = np.clip(np.searchsorted(edges, t, side="right") - 1, 0, len(self.segments) - 1)
        return t, which, edges

    def position(self, t) -> np.ndarray:
        t, which, edges = self._locate(t)
        out = np.zeros(t.shape + (self.dim,))
        for k, seg in enumerate(self.segments):
            mask = which == k
            if np.any(mask):
                out[mask] = seg.position(t[mask] - edges[k])
        return out

    def velocity(self, t) -> np.ndarray:
        t, which, edges = self._locate(t)
        out = np.zeros(t.shape + (self.dim,))
        for k, seg in enumerate(self.segments):
            mask = which == k
            if np.any(mask):
                out[mask] = seg.velocity(t[mask] - edges[k])
        return out

    @property
    def closed(self) -> bool:
        gap = self.position(0.0) - self.segments[-1].position(self.segments[-1].duration)
        return bool(np.max(np.abs(gap)) <= CLOSED_TOL)

    def pieces(self) -> list["BasePath"]:
        return [BasePath(self.dim, (s,), self.kind) for s in self.segments]

    def then(self, other: "BasePath") -> "BasePath":
        """Traverse this path, then ``other``."""
        if other.dim != self.dim:
            raise ValueError("paths live in different dimensions")
        return BasePath(self.dim, self.segments + other.segments, "composite")

    def reversed(self) -> "BasePath":
        def flip(seg):
            T = seg.duration
            return Segment(T, lambda t: seg.position(T - t), lambda t: -seg.velocity(T - t))
        return BasePath(self.dim, tuple(flip(s) for s in reversed(self.segments)), f"reversed {self.kind}")

    def reparameterized(self, warp: fc.Profile, duration: float) -> "BasePath":
        """x(s(t)) for an increasing map s: [0, duration] -> [0, self.duration]; single-segment paths only."""
        if len(self.segments) != 1:
            raise ValueError("reparameterize each segment separately")
        seg = self.segments[0]
        return BasePath(self.dim, (Segment(float(duration), lambda t: seg.position(warp(t)),
                                           lambda t: seg.velocity(warp(t)) * warp(t, 1)[..., None]),),
                        f"reparameterized {self.kind}")

    def split(self, at: float) -> tuple["BasePath", "BasePath"]:
        """Cut a single-segment path at local time ``at``."""
        if len(self.segments) != 1:
            raise ValueError("split applies to single-segment paths")
        seg = self.segments[0]
        first = Segment(float(at), seg.position, seg.velocity)
        second = Segment(seg.duration - float(at), lambda t: seg.position(t + at), lambda t: seg.velocity(t + at))
        return BasePath(self.dim, (first,), self.kind), BasePath(self.dim, (second,), self.kind)


def segment(start, end, duration: float = 1.0) -> BasePath:
    a = np.asarray(start, dtype=float)
    b = np.asarray(end, dtype=float)
    v = (b - a) / float(duration)
    seg = Segment(float(duration), lambda t: a + np.asarray(t)[..., None] * v,
                  lambda t: np.broadcast_to(v, np.shape(t) + v.shape).copy())
    return BasePath(a.size, (seg,), "segment", dict(start=a.tolist(), end=b.tolist()))


def circle(radius: float = 1.0, duration: float = 2 * np.pi, center=(0.0, 0.0), turns: float = 1.0,
           start_angle: float = 0.0, plane=(0, 1)) -> BasePath:
    """Circle in the coordinate plane spanned by axes ``plane``, counter-clockwise for turns > 0."""
    c = np.asarray(center, dtype=float)
    dim = c.size
    R, T = float(radius), float(duration)
    rate = 2 * np.pi * float(turns) / T
    i, k = plane

    def position(t):
        t = np.asarray(t, dtype=float)
        x = np.broadcast_to(c, t.shape + (dim,)).copy()
        x[..., i] += R * np.cos(start_angle + rate * t)
        x[..., k] += R * np.sin(start_angle + rate * t)
        return x

    def velocity(t):
        t = np.asarray(t, dtype=float)
        v = np.zeros(t.shape + (dim,))
        v[..., i] = -R * rate * np.sin(start_angle + rate * t)
        v[..., k] = R * rate * np.cos(start_angle + rate * t)
        return v

    return BasePath(dim, (Segment(T, position, velocity),), "circle",
                    dict(radius=R, turns=turns, start_angle=start_angle))


def rectangle(corner, width: float, height: float, duration: float = 4.0, plane=(0, 1)) -> BasePath:
    """Closed counter-clockwise rectangle; each side takes duration / 4."""
    p0 = np.asarray(corner, dtype=float)
    e1 = np.zeros_like(p0)
    e2 = np.zeros_like(p0)
    e1[plane[0]] = width
    e2[plane[1]] = height
    corners = [p0, p0 + e1, p0 + e1 + e2, p0 + e2, p0]
    path = segment(corners[0], corners[1], duration / 4)
    for a, b in zip(corners[1:-1], corners[2:]):
        path = path.then(segment(a, b, duration / 4))
    return BasePath(path.dim, path.segments, "rectangle", dict(width=width, height=height))


def sampled_path(t, points) -> BasePath:
    t = np.asarray(t, dtype=float)
    pts = np.asarray(points, dtype=float)
    if abs(t[0]) > 1e-12:
        raise ValueError("sampled paths must start at t = 0")
    profiles = [fc.Profile.sampled(t, pts[:, k]) for k in range(pts.shape[1])]
    seg = Segment(float(t[-1]), lambda s: np.stack([p(s) for p in profiles], axis=-1),
                  lambda s: np.stack([p(s, 1) for p in profiles], axis=-1))
    return BasePath(pts.shape[1], (seg,), "sampled")


def shifted_loop(path: BasePath, offset: float) -> BasePath:
    """The same closed single-segment loop started at local time ``offset``."""
    if not path.closed or len(path.segments) != 1:
        raise ValueError("basepoint shifts need a closed single-segment loop")
    first, second = path.split(offset)
    return second.then(first)


PATHS = {"segment": segment, "circle": circle, "rectangle": rectangle}


# ---------------------------------------------------------------- pullback

def pullback_field(A: GaugePotential, path: BasePath, t, return_flags: bool = False):
    """Cartesian R^a(t) = x'^mu A^a_mu(x(t)); flags mark samples with |R| = 0."""
    if A.dim != path.dim:
        raise ValueError(f"potential is defined on R^{A.dim}, path lives in R^{path.dim}")
    R = np.einsum("...am,...m->...a", A(path.position(t)), path.velocity(t))
    if return_flags:
        return R, np.linalg.norm(R, axis=-1) <= COLLAPSE_TOL
    return R


def _stencil(fn, t, h, order):
    if order == 1:
        return (8.0 * (fn(t + h) - fn(t - h)) - (fn(t + 2 * h) - fn(t - 2 * h))) / (12.0 * h)
    return (-(fn(t + 2 * h) + fn(t - 2 * h)) + 16.0 * (fn(t + h) + fn(t - h)) - 30.0 * fn(t)) / (12.0 * h * h)


def cartesian_curve(R: Callable, duration: float, sample_count: int = fc.DEFAULT_SAMPLES) -> fc.FieldCurve:
    """Spherical FieldCurve for a Cartesian field R(t); phi is tracked continuously."""
    h = 1e-3 * float(duration)
    grid = np.linspace(0.0, duration, sample_count)
    Rg = R(grid)
    phi_ref = np.unwrap(np.arctan2(Rg[:, 1], Rg[:, 0]))

    def parts(t):
        t = np.asarray(t, dtype=float)
        X = R(t)
        V = _stencil(R, t, h, 1)
        Acc = _stencil(R, t, h, 2)
        return X, V, Acc

    def theta(t):
        X = R(np.asarray(t, dtype=float))
        return np.arctan2(np.hypot(X[..., 0], X[..., 1]), X[..., 2])

    def phi(t):
        t = np.asarray(t, dtype=float)
        X = R(t)
        raw = np.arctan2(X[..., 1], X[..., 0])
        ref = np.interp(t, grid, phi_ref)
        return raw + 2 * np.pi * np.round((ref - raw) / (2 * np.pi))

    def spherical_rates(t):
        X, V, Acc = parts(t)
        x, y, z = X[..., 0], X[..., 1], X[..., 2]
        vx, vy, vz = V[..., 0], V[..., 1], V[..., 2]
        ax, ay, az = Acc[..., 0], Acc[..., 1], Acc[..., 2]
        rho2 = x * x + y * y
        rho = np.sqrt(rho2)
        r2 = rho2 + z * z
        # On the +z axis phi is frozen and theta moves only with the transverse velocity.
        on_axis = rho <= COLLAPSE_TOL * np.sqrt(r2)
        with np.errstate(divide="ignore", invalid="ignore"):
            drho = (x * vx + y * vy) / rho
            ddrho = (vx * vx + vy * vy + x * ax + y * ay) / rho - drho * drho / rho
            num = z * drho - rho * vz
            dnum = z * ddrho - rho * az
            dr2 = 2.0 * (rho * drho + z * vz)
            dtheta = num / r2
            ddtheta = dnum / r2 - num * dr2 / (r2 * r2)
            pn = x * vy - y * vx
            dpn = x * ay - y * ax
            dphi = pn / rho2
            ddphi = dpn / rho2 - pn * 2.0 * rho * drho / (rho2 * rho2)
        axis_rate = np.hypot(vx, vy) / np.sqrt(r2)
        return (np.where(on_axis, axis_rate, dtheta), np.where(on_axis, 0.0, ddtheta),
                np.where(on_axis, 0.0, dphi), np.where(on_axis, 0.0, ddphi))

    theta_p = fc.Profile(theta, lambda t: spherical_rates(t)[0], lambda t: spherical_rates(t)[1],
                         description="pulled-back polar angle")
    phi_p = fc.Profile(phi, lambda t: spherical_rates(t)[2], lambda t: spherical_rates(t)[3],
                       description="pulled-back azimuth")
    r_p = fc.Profile(lambda t: np.linalg.norm(R(np.asarray(t, dtype=float)), axis=-1),
                     description="pulled-back magnitude")
    return fc.FieldCurve(theta_p, phi_p, float(duration), r=r_p, sample_count=sample_count, kind="pullback")


def _direction_jumps(R: Callable, grid: np.ndarray) -> int:
    """Count sample intervals where the unit vector of R turns faster than its angular speed allows.

    Such a jump means R passed through zero between samples (for instance a
    field that reverses along a fixed axis), which no spherical curve can follow.
    """
    X = R(grid)
    norm = np.linalg.norm(X, axis=-1)
    u = X / norm[:, None]
    angle = np.arccos(np.clip(np.sum(u[1:] * u[:-1], axis=-1), -1.0, 1.0))
    h = 1e-3 * (grid[-1] - grid[0])
    speed = np.linalg.norm(np.cross(X, _stencil(R, grid, h, 1)), axis=-1) / norm**2
    allowed = 2.0 * np.diff(grid) * np.maximum(speed[1:], speed[:-1]) + 1e-6
    return int(np.count_nonzero(angle > allowed))


# ---------------------------------------------------------------- transport

def _transport_piece(rep: SpinRep, A: GaugePotential, piece: BasePath, engine: str, cfg: IntegrationConfig):
    T = piece.duration
    R = lambda t: pullback_field(A, piece, t)
    info = dict(duration=T)

    def oracle(note):
        H = lambda t: field_hamiltonian(rep, R(t))
        U = integrate(H, T, cfg).matrix
        info.update(engine="oracle", note=note)
        return U

    if engine == "oracle":
        return oracle("oracle requested"), info
    grid = np.linspace(0.0, T, fc.DEFAULT_SAMPLES)
    _, collapsed = pullback_field(A, piece, grid, return_flags=True)
    if collapsed.any():
        if engine == "exact":
            raise ValueError("pulled-back field vanishes on the path; no spherical description")
        return oracle(f"field vanishes at {int(collapsed.sum())} samples"), info
    jumps = _direction_jumps(R, grid)
    if jumps:
        if engine == "exact":
            raise ValueError("pulled-back field reverses through zero between samples")
        return oracle(f"field direction jumps in {jumps} sample intervals"), info
    curve = cartesian_curve(R, T)
    check = fc.validate(curve)
    if not check.ok:
        if engine == "exact":
            raise ValueError("; ".join(check.violations))
        return oracle("spherical patch unusable: " + "; ".join(check.violations)), info
    report = pr.solvability_check(curve)
    info["solvability"] = report.as_dict()
    if report.classification in ("lemma1", "adiabatic_exact"):
        prop = pr.exact_U_lemma1(rep, curve, T, report=report)
    elif report.classification == "lemma2":
        prop = pr.exact_U_lemma2(rep, curve, T, report=report)
    elif engine == "exact":
        raise pr.NotSolvableError(f"pulled-back field not solvable (residual {report.residual:.3e})")
    else:
        return oracle("no solvability condition holds"), info
    info.update(engine=prop.method, note=report.classification)
    return prop.matrix, info


def transport(rep: SpinRep, A: GaugePotential, path: BasePath, *, engine: str = "auto",
              cfg: IntegrationConfig | None = None) -> pr.Propagator:
    """Path-ordered exponential along ``path``; ``engine`` is auto, exact or oracle."""
    if engine not in ("auto", "exact", "oracle"):
        raise ValueError("engine must be auto, exact or oracle")
    cfg = cfg or IntegrationConfig()
    U = np.eye(rep.dim, dtype=complex)
    pieces = []
    for piece in path.pieces():
        Up, info = _transport_piece(rep, A, piece, engine, cfg)
        U = Up @ U
        pieces.append(info)
    engines = {p["engine"] for p in pieces}
    method = "oracle" if "oracle" in engines else ("lemma2" if "lemma2" in engines else "lemma1")
    return pr.Propagator(U, method, path.duration, dict(pieces=pieces))


def wilson_loop(rep: SpinRep, A: GaugePotential, path: BasePath, **kw) -> complex:
    """Trace of the holonomy around a closed path."""
    if not path.closed:
        raise ValueError("Wilson loops need a closed path")
    return complex(np.trace(transport(rep, A, path, **kw).matrix))
