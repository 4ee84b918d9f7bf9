"""Coordination field: task potential, guidance velocity field, vortex repulsion.

The scalar potential over the grid is a sum of weighted Gaussians, one per
active task, zeroed inside buildings:

    phi(x, y) = sum_j w_j * exp(-|p - p_j|^2 / (2 sigma_j^2))

A guidance velocity field relaxes toward the potential's gradient by an
explicit diffusion-plus-force update (the pressure term of the underlying
fluid analogy is dropped; density is normalized to 1):

    v <- v + dt * (nu * lap(v) + k * grad(phi))

Each UAV additionally emits a regularized tangential vortex so that agents
repel each other instead of piling onto the same hotspot. Patrol and
tracking tasks induce separate potential and velocity lattices; every UAV
follows the lattice of its own type.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .tasks import TASK_TYPES, TaskSet

# Below r_guard = R_GUARD_FRAC * r0 the tangential speed switches to its
# Taylor-limit branch to avoid 0/0.
R_GUARD_FRAC = 1e-6

_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class FieldParams:
    """Gains and numerics for the guidance field."""

    k: float = 1.0  # attraction gain on grad(phi)
    nu: float = 0.5  # viscosity, cells^2/step
    rho: float = 1.0  # normalized density, fixed
    r0: float = 15.0  # vortex influence radius, world units
    dt_field: float = 0.2  # field substep, steps
    v_max: float = 3.0  # speed clamp, cells/step

    def __post_init__(self) -> None:
        for name in ("k", "nu", "r0", "dt_field", "v_max"):
            if getattr(self, name) <= 0:
                raise ValueError(f"FieldParams.{name} must be strictly positive")
        if self.rho != 1.0:
            raise ValueError("rho is normalized to 1 in this model")

    def check_stability(self, cell_size: float) -> None:
        """2D explicit diffusion stability bound: nu*dt/h^2 <= 1/4."""
        ratio = self.nu * self.dt_field / (cell_size * cell_size)
        if ratio > 0.25 + 1e-12:
            raise ValueError(
                f"unstable field configuration: nu*dt_field/cell_size^2 = "
                f"{ratio:.4f} > 0.25"
            )


def cell_centers(n: int, cell_size: float) -> np.ndarray:
    """Coordinates of cell centers along one axis."""
    return (np.arange(n, dtype=float) + 0.5) * cell_size


def build_phi(
    tasks: TaskSet, mask: np.ndarray, task_type: str, cell_size: float = 1.0
) -> np.ndarray:
    """Weighted-Gaussian potential of the active tasks of one type.

    Evaluated at cell centers; exactly 0.0 on masked cells. The Gaussian is
    separable, so the whole mixture reduces to one (W x n) @ (n x H) product
    of per-task 1D factors.
    """
    width, height = mask.shape
    active = tasks.active_tasks(task_type)
    if not active:
        return np.zeros((width, height), dtype=float)
    cx = cell_centers(width, cell_size)
    cy = cell_centers(height, cell_size)
    gxs = np.empty((len(active), width))
    gys = np.empty((len(active), height))
    for i, t in enumerate(active):
        inv = 1.0 / (2.0 * t.sigma * t.sigma)
        gxs[i] = t.weight * np.exp(-((cx - t.x) ** 2) * inv)
        gys[i] = np.exp(-((cy - t.y) ** 2) * inv)
    phi = gxs.T @ gys
    phi[mask] = 0.0
    return phi


class GradientStencil:
    """Precomputed fix-up index sets for one obstacle mask.

    The bulk gradient is a plain central difference; only cells beside a
    masked or out-of-domain neighbor need one-sided or zero treatment, and
    those index sets depend only on the mask, so they are computed once."""

    def __init__(self, mask: np.ndarray):
        valid = ~mask
        w, h = mask.shape
        self.mask_idx = np.nonzero(mask)
        self.axis_fix = []
        for axis in (0, 1):
            up_ok = np.zeros_like(valid)
            dn_ok = np.zeros_like(valid)
            if axis == 0:
                up_ok[:-1, :] = valid[1:, :]
                dn_ok[1:, :] = valid[:-1, :]
            else:
                up_ok[:, :-1] = valid[:, 1:]
                dn_ok[:, 1:] = valid[:, :-1]
            fwd = np.nonzero(valid & up_ok & ~dn_ok)
            bwd = np.nonzero(valid & ~up_ok & dn_ok)
            zero = np.nonzero(valid & ~up_ok & ~dn_ok)
            self.axis_fix.append((fwd, bwd, zero))


def lattice_gradient(
    phi: np.ndarray,
    mask: np.ndarray,
    cell_size: float = 1.0,
    stencil: GradientStencil | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-cell gradient: central differences, one-sided beside masked or
    out-of-domain neighbors, zero where no valid neighbor exists."""
    h = cell_size
    if stencil is None:
        stencil = GradientStencil(mask)

    def one_axis(axis: int) -> np.ndarray:
        g = np.empty_like(phi)
        if axis == 0:
            g[1:-1, :] = (phi[2:, :] - phi[:-2, :]) / (2.0 * h)
            g[0, :] = (phi[1, :] - phi[0, :]) / h if phi.shape[0] > 1 else 0.0
            g[-1, :] = (phi[-1, :] - phi[-2, :]) / h if phi.shape[0] > 1 else 0.0
            di, dj = 1, 0
        else:
            g[:, 1:-1] = (phi[:, 2:] - phi[:, :-2]) / (2.0 * h)
            g[:, 0] = (phi[:, 1] - phi[:, 0]) / h if phi.shape[1] > 1 else 0.0
            g[:, -1] = (phi[:, -1] - phi[:, -2]) / h if phi.shape[1] > 1 else 0.0
            di, dj = 0, 1
        fwd, bwd, zero = stencil.axis_fix[axis]
        if len(fwd[0]):
            g[fwd] = (phi[fwd[0] + di, fwd[1] + dj] - phi[fwd]) / h
        if len(bwd[0]):
            g[bwd] = (phi[bwd] - phi[bwd[0] - di, bwd[1] - dj]) / h
        if len(zero[0]):
            g[zero] = 0.0
        g[stencil.mask_idx] = 0.0
        return g

    return one_axis(0), one_axis(1)


def bilinear(arr: np.ndarray, x, y, cell_size: float = 1.0):
    """Bilinear sample of a cell-centered lattice at world points.

    Constant extrapolation inside the half-cell margin at domain edges; a
    point exactly on a cell seam takes full weight on the lower-indexed cell.
    """
    width, height = arr.shape
    u = np.asarray(x, dtype=float) / cell_size - 0.5
    v = np.asarray(y, dtype=float) / cell_size - 0.5
    i0 = np.clip(np.floor(u).astype(int), 0, max(width - 2, 0))
    j0 = np.clip(np.floor(v).astype(int), 0, max(height - 2, 0))
    fx = np.clip(u - i0, 0.0, 1.0)
    fy = np.clip(v - j0, 0.0, 1.0)
    i1 = np.minimum(i0 + 1, width - 1)
    j1 = np.minimum(j0 + 1, height - 1)
    out = (
        arr[i0, j0] * (1 - fx) * (1 - fy)
        + arr[i1, j0] * fx * (1 - fy)
        + arr[i0, j1] * (1 - fx) * fy
        + arr[i1, j1] * fx * fy
    )
    return out


def grad_phi(
    phi: np.ndarray, mask: np.ndarray, p: tuple[float, float], cell_size: float = 1.0
) -> tuple[float, float]:
    """Gradient of the lattice potential at a world point.

    Lattice finite differences (see lattice_gradient) sampled bilinearly.
    Raises on masked or out-of-domain points: callers must not steer there.
    """
    x, y = p
    width, height = mask.shape
    if not (0.0 <= x < width * cell_size and 0.0 <= y < height * cell_size):
        raise ValueError(f"grad_phi: point ({x}, {y}) outside the domain")
    ix, iy = int(x // cell_size), int(y // cell_size)
    if mask[ix, iy]:
        raise ValueError(f"grad_phi: point ({x}, {y}) is on a masked cell")
    gx, gy = lattice_gradient(phi, mask, cell_size)
    return float(bilinear(gx, x, y, cell_size)), float(bilinear(gy, x, y, cell_size))


def task_force(
    phi: np.ndarray,
    mask: np.ndarray,
    cell_size: float,
    k: float,
    stencil: GradientStencil | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Attraction force lattice k * grad(phi), reusable across substeps."""
    gx, gy = lattice_gradient(phi, mask, cell_size, stencil)
    return k * gx, k * gy


def _laplacian(a: np.ndarray, h2: float) -> np.ndarray:
    """5-point Laplacian; neighbors outside the domain contribute zero
    (no-slip boundary)."""
    out = a * -4.0
    out[1:, :] += a[:-1, :]
    out[:-1, :] += a[1:, :]
    out[:, 1:] += a[:, :-1]
    out[:, :-1] += a[:, 1:]
    out /= h2
    return out


def clamp_speed(vx: np.ndarray, vy: np.ndarray, v_max: float) -> None:
    """In-place per-cell speed clamp."""
    speed2 = vx * vx + vy * vy
    over = speed2 > v_max * v_max
    if np.any(over):
        scale = v_max / np.sqrt(speed2[over])
        vx[over] *= scale
        vy[over] *= scale


@dataclass(frozen=True)
class FieldGrid:
    """Per-type potential and velocity lattices over one obstacle mask.

    Treated as an immutable snapshot: update methods return new grids.
    """

    mask: np.ndarray
    cell_size: float
    params: FieldParams
    phi: dict = dc_field(default_factory=dict)  # type -> (W, H) array
    vel: dict = dc_field(default_factory=dict)  # type -> (vx, vy) arrays
    stencil: GradientStencil | None = None

    def __post_init__(self) -> None:
        self.params.check_stability(self.cell_size)
        w, h = self.mask.shape
        for t in TASK_TYPES:
            if t not in self.phi:
                self.phi[t] = np.zeros((w, h))
            if t not in self.vel:
                self.vel[t] = (np.zeros((w, h)), np.zeros((w, h)))

    @classmethod
    def empty(
        cls, mask: np.ndarray, cell_size: float = 1.0, params: FieldParams | None = None
    ) -> "FieldGrid":
        return cls(mask=mask, cell_size=cell_size, params=params or FieldParams())

    @property
    def gradient_stencil(self) -> GradientStencil:
        if self.stencil is None:
            object.__setattr__(self, "stencil", GradientStencil(self.mask))
        return self.stencil

    def with_phi(self, tasks: TaskSet) -> "FieldGrid":
        """Rebuild the potential lattices from the active task set."""
        phi = {
            t: build_phi(tasks, self.mask, t, self.cell_size) for t in TASK_TYPES
        }
        return FieldGrid(
            mask=self.mask,
            cell_size=self.cell_size,
            params=self.params,
            phi=phi,
            vel=self.vel,
            stencil=self.stencil,
        )

    def sample_phi(self, task_type: str, x: float, y: float) -> float:
        return float(bilinear(self.phi[task_type], x, y, self.cell_size))

    def sample_vel(self, task_type: str, x: float, y: float) -> tuple[float, float]:
        vx, vy = self.vel[task_type]
        return (
            float(bilinear(vx, x, y, self.cell_size)),
            float(bilinear(vy, x, y, self.cell_size)),
        )


def step_velocity(field: FieldGrid, phis: dict | None = None, forces: dict | None = None) -> FieldGrid:
    """One explicit substep of the guidance field for every task type.

    v <- v + dt_field * (nu * lap(v) + k * grad(phi)), then no-slip zeroing
    on masked cells and a per-cell speed clamp. `phis` defaults to the grid's
    own potential lattices; `forces` may carry precomputed k*grad(phi)
    lattices so per-step callers do not re-differentiate every substep.
    """
    p = field.params
    h2 = field.cell_size * field.cell_size
    new_vel = {}
    for t in TASK_TYPES:
        phi = field.phi[t] if phis is None else phis[t]
        vx, vy = field.vel[t]
        if not phi.any() and not vx.any() and not vy.any():
            # Nothing drives this type's lattice and it is already at rest.
            new_vel[t] = (vx, vy)
            continue
        if forces is not None and t in forces:
            fx, fy = forces[t]
        else:
            fx, fy = task_force(
                phi, field.mask, field.cell_size, p.k, field.gradient_stencil
            )
        nvx = vx + p.dt_field * (p.nu * _laplacian(vx, h2) + fx)
        nvy = vy + p.dt_field * (p.nu * _laplacian(vy, h2) + fy)
        nvx[field.mask] = 0.0
        nvy[field.mask] = 0.0
        clamp_speed(nvx, nvy, p.v_max)
        new_vel[t] = (nvx, nvy)
    return FieldGrid(
        mask=field.mask,
        cell_size=field.cell_size,
        params=p,
        phi=field.phi if phis is None else dict(phis),
        vel=new_vel,
        stencil=field.stencil,
    )


def gamma_i(uav, phi_at_uav: float, all_capabilities) -> float:
    """Circulation strength: c_i * phi(x_i, y_i) / sum_j c_j."""
    total = float(np.sum(all_capabilities))
    if total <= 0:
        raise ValueError("gamma_i: all-zero capabilities (degenerate roster)")
    return uav.capability * phi_at_uav / total


def vortex_tangential(gamma: float, r, r0: float):
    """Tangential repulsion speed at radius r from a vortex of circulation gamma.

    Gamma / (2 pi r) * (1 - exp(-(r/r0)^2)); below r_guard the Taylor-limit
    branch Gamma * r / (2 pi r0^2) applies, making the profile continuous
    through zero.
    """
    if r0 <= 0:
        raise ValueError("vortex_tangential: r0 must be positive")
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0):
        raise ValueError("vortex_tangential: r must be >= 0")
    r_guard = R_GUARD_FRAC * r0
    limit = gamma * r_arr / (_TWO_PI * r0 * r0)
    safe_r = np.where(r_arr < r_guard, 1.0, r_arr)
    full = gamma / (_TWO_PI * safe_r) * (-np.expm1(-((safe_r / r0) ** 2)))
    out = np.where(r_arr < r_guard, limit, full)
    return float(out) if np.isscalar(r) else out


def vorticity_profile(gamma: float, r: float, r0: float) -> float:
    """Diagnostic vorticity Gamma/(2 pi r) * exp(-(r/r0)^2); singular at r=0."""
    if r <= 0:
        raise ValueError("vorticity_profile: r must be > 0 (singular at 0)")
    if r0 <= 0:
        raise ValueError("vorticity_profile: r0 must be positive")
    return gamma / (_TWO_PI * r) * math.exp(-((r / r0) ** 2))


@dataclass(frozen=True)
class VortexContext:
    """Roster positions and circulations, computed once per published field."""

    ids: tuple[str, ...]
    types: tuple[str, ...]
    xs: np.ndarray
    ys: np.ndarray
    gammas: np.ndarray


def vortex_context(field: FieldGrid, uavs) -> VortexContext:
    """Circulation of every UAV: c_i * phi_own_type(x_i, y_i) / sum_j c_j."""
    caps = np.array([u.capability for u in uavs], dtype=float)
    total = float(caps.sum())
    if uavs and total <= 0:
        raise ValueError("vortex_context: all-zero capabilities")
    xs = np.array([u.x for u in uavs], dtype=float)
    ys = np.array([u.y for u in uavs], dtype=float)
    phis = np.zeros(len(uavs))
    for ttype in TASK_TYPES:
        idx = [i for i, u in enumerate(uavs) if u.uav_type == ttype]
        if idx:
            phis[idx] = bilinear(field.phi[ttype], xs[idx], ys[idx], field.cell_size)
    gammas = caps * phis / total if uavs else np.zeros(0)
    return VortexContext(
        ids=tuple(u.id for u in uavs),
        types=tuple(u.uav_type for u in uavs),
        xs=xs,
        ys=ys,
        gammas=gammas,
    )


def compose_from_context(
    field: FieldGrid,
    ctx: VortexContext,
    p: tuple[float, float],
    for_uav: str,
    uav_type: str,
) -> tuple[float, float]:
    x, y = p
    width, height = field.mask.shape
    cs = field.cell_size
    if not (0.0 <= x < width * cs and 0.0 <= y < height * cs) or field.mask[
        int(x // cs), int(y // cs)
    ]:
        raise ValueError(f"compose_v_new: point ({x}, {y}) is masked or outside")
    vx, vy = field.sample_vel(uav_type, x, y)

    sel = np.array([i != for_uav for i in ctx.ids], dtype=bool)
    if sel.any():
        dx = x - ctx.xs[sel]
        dy = y - ctx.ys[sel]
        r = np.hypot(dx, dy)
        vt = vortex_tangential(1.0, r, field.params.r0) * ctx.gammas[sel]
        # Counterclockwise tangential direction around each emitter.
        nonzero = r > 0
        r_safe = np.where(nonzero, r, 1.0)
        vx += float(np.sum(np.where(nonzero, vt * (-dy) / r_safe, 0.0)))
        vy += float(np.sum(np.where(nonzero, vt * dx / r_safe, 0.0)))

    speed = math.hypot(vx, vy)
    if speed > field.params.v_max:
        scale = field.params.v_max / speed
        vx *= scale
        vy *= scale
    return vx, vy


def compose_v_new(
    field: FieldGrid, uavs, p: tuple[float, float], for_uav: str
) -> tuple[float, float]:
    """Control velocity at p for one UAV: background guidance sample plus the
    counterclockwise tangential vortices of every other UAV, speed-clamped.

    Each emitter's circulation uses the potential of its own type at its own
    position; capabilities are normalized over the whole roster.
    """
    me = next((u for u in uavs if u.id == for_uav), None)
    if me is None:
        raise ValueError(f"compose_v_new: unknown uav id {for_uav!r}")
    ctx = vortex_context(field, uavs)
    return compose_from_context(field, ctx, p, for_uav, me.uav_type)
