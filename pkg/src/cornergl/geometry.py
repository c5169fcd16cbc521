"""Wedge domain Gamma_beta(L, ell): construction, coordinates, meshing.

The wedge has two outer sides of length L meeting at the origin V with
opening angle beta, and a boundary layer of width ell.  With the signed
deficit d = pi - beta (d > 0 acute side, d < 0 obtuse side):

  * outer side 1 runs from V along the +x axis to B = (L, 0);
  * outer side 2 runs from V at angle beta to A = L (cos beta, sin beta);
  * the inner boundary is the offset of the outer sides at distance ell,
    meeting at D on the bisectrix; E = (L, ell), C = A + ell n2.

Tubular patch coordinates (s, t): tangential length along the outer side
and normal distance to it,

    plus patch  (theta <= beta/2):  s+ = x,             t+ = y
    minus patch:                    s- = x cos d - y sin d,
                                    t- = x sin d + y cos d

In patch coordinates the domain is {0 <= t <= ell, s_bis(t) <= s+ <= L}
and its mirror, with s_bis(t) = tan(d/2) t the bisectrix line.  t+ = t-
on the bisectrix; s jumps.

The mesh is two mapped structured quad patches graded uniformly in
(s, t), split into triangles, stitched node-exactly along the bisectrix
(both patches share the same t levels, so the interface nodes coincide
to rounding).
"""

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import InvalidGeometry, MeshFailure, OutsideDomain

MIN_ANGLE_DEG = 20.0


class PatchCoords(NamedTuple):
    patch: str   # "plus" | "minus"
    s: float
    t: float


class PolarCoords(NamedTuple):
    rho: float
    theta: float


@dataclass(frozen=True)
class WedgeGeometry:
    beta: float
    L: float
    ell: float
    gamma: float
    delta: float            # |pi - beta|
    side: str               # "minus" (beta = pi - delta), "plus", or "flat"
    vertices: dict = field(repr=False)
    theta_bis: float
    theta_lt: float
    theta_gt: float

    @property
    def delta_signed(self):
        """pi - beta: positive on the acute side."""
        return np.pi - self.beta

    def s_bis(self, t):
        """Bisectrix line in plus-patch coordinates: s = tan(d/2) t."""
        return np.tan(0.5 * self.delta_signed) * t

    def area(self):
        return 2.0 * self.L * self.ell - np.tan(0.5 * self.delta_signed) * self.ell**2


def build_wedge(beta, L, ell, gamma) -> WedgeGeometry:
    """Construct the wedge polygon; validates ell <= tan(beta/2) L."""
    if not 0.0 < beta < 2.0 * np.pi:
        raise InvalidGeometry(f"beta must be in (0, 2*pi), got {beta}")
    if L <= 0 or ell <= 0:
        raise InvalidGeometry("L and ell must be positive")
    d = np.pi - beta
    # ell <= tan(beta/2) L; for beta >= pi the mirror condition keeps D's
    # tangential coordinate within [-L, L]
    if ell * abs(np.tan(0.5 * d)) > L * (1 + 1e-14):
        raise InvalidGeometry(
            f"layer too wide: ell <= tan(beta/2) L requires ell <= "
            f"{L / abs(np.tan(0.5 * d)):.6g}, got ell = {ell}")
    if not 0.0 <= gamma < beta / 2:
        raise InvalidGeometry(f"need 0 <= gamma < beta/2, got gamma={gamma}")

    A = np.array([L * np.cos(beta), L * np.sin(beta)])
    B = np.array([L, 0.0])
    E = np.array([L, ell])
    n2 = np.array([np.sin(beta), -np.cos(beta)])   # inward normal of side 2
    C = A + ell * n2
    D = np.array([ell * np.tan(0.5 * d), ell])
    side = "flat" if d == 0 else ("minus" if d > 0 else "plus")
    return WedgeGeometry(
        beta=beta, L=L, ell=ell, gamma=gamma, delta=abs(d), side=side,
        vertices={"V": np.zeros(2), "A": A, "B": B, "C": C, "D": D, "E": E},
        theta_bis=beta / 2, theta_lt=(beta - gamma) / 2, theta_gt=(beta + gamma) / 2)


def patch_coords_arrays(geom, x, y):
    """(s, t) of both patches for arrays of cartesian points."""
    d = geom.delta_signed
    s_plus, t_plus = x, y
    s_minus = x * np.cos(d) - y * np.sin(d)
    t_minus = x * np.sin(d) + y * np.cos(d)
    return s_plus, t_plus, s_minus, t_minus


def minus_patch_to_cartesian(geom, s, t):
    d = geom.delta_signed
    return s * np.cos(d) + t * np.sin(d), -s * np.sin(d) + t * np.cos(d)


def map_coordinates(geom: WedgeGeometry, point) -> tuple[PatchCoords, PolarCoords]:
    """Patch and polar coordinates of a point inside the closed wedge.

    Points on the bisectrix belong to the plus patch (fixed convention;
    t is continuous there so nothing depends on the tie-break).
    """
    x, y = float(point[0]), float(point[1])
    rho = float(np.hypot(x, y))
    theta = float(np.arctan2(y, x))
    if theta < 0:
        theta += 2.0 * np.pi
    tol = 1e-9 * max(1.0, geom.L, geom.ell)
    if rho > tol and not -tol <= theta * rho <= geom.beta * rho + tol:
        raise OutsideDomain(f"polar angle {theta:.6f} outside [0, {geom.beta:.6f}]")
    sp, tp, sm, tm = patch_coords_arrays(geom, x, y)
    if theta <= geom.theta_bis or rho <= tol:
        pc = PatchCoords("plus", float(sp), float(tp))
    else:
        pc = PatchCoords("minus", float(sm), float(tm))
    t_, s_ = pc.t, pc.s
    if not (-tol <= t_ <= geom.ell + tol):
        raise OutsideDomain(f"normal distance {t_:.6f} outside [0, {geom.ell}]")
    smax = geom.L if pc.patch == "plus" else -geom.s_bis(t_)
    smin = geom.s_bis(t_) if pc.patch == "plus" else -geom.L
    if not (smin - tol <= s_ <= smax + tol):
        raise OutsideDomain(f"tangential coordinate {s_:.6f} outside patch range")
    return pc, PolarCoords(rho, theta)


@dataclass
class Mesh:
    """Conforming triangle mesh of the wedge.

    ``boundary_edges`` holds (n1, n2, tag) with tag in {out, in, bd};
    ``bis_edges`` are the internal interface edges along the bisectrix.
    Per-node patch data (s/t in both patches, plus-patch flag) and the
    per-element patch labels are precomputed for the field evaluations.
    """

    geom: WedgeGeometry
    h: float
    nodes: np.ndarray            # (N, 2)
    triangles: np.ndarray        # (M, 3) int
    boundary_edges: list
    bis_edges: list
    node_patch: np.ndarray       # +1 plus / -1 minus (bisectrix -> +1)
    s_plus: np.ndarray
    t_plus: np.ndarray
    s_minus: np.ndarray
    t_minus: np.ndarray
    element_patch: np.ndarray    # (M,) +1 / -1
    ns: int
    nt: int

    @property
    def n_nodes(self):
        return self.nodes.shape[0]

    def areas(self):
        p = self.nodes[self.triangles]
        return 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                      - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))

    def node_st(self):
        """Patch-consistent (s, t) per node (plus values on the bisectrix)."""
        plus = self.node_patch > 0
        s = np.where(plus, self.s_plus, self.s_minus)
        t = np.where(plus, self.t_plus, self.t_minus)
        return s, t

    def boundary_nodes(self, *tags):
        ids = {n for (a, b, tag) in self.boundary_edges if tag in tags for n in (a, b)}
        return np.array(sorted(ids), dtype=int)

    def min_angle_deg(self):
        p = self.nodes[self.triangles]
        angles = []
        for i in range(3):
            u = p[:, (i + 1) % 3] - p[:, i]
            v = p[:, (i + 2) % 3] - p[:, i]
            c = (u * v).sum(1) / (np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))
            angles.append(np.degrees(np.arccos(np.clip(c, -1.0, 1.0))))
        return float(np.min(angles))


def generate_mesh(geom: WedgeGeometry, h) -> Mesh:
    """Two structured quad patches graded in (s, t), stitched on the bisectrix."""
    if h > geom.ell / 8 + 1e-12:
        raise MeshFailure(f"need h <= ell/8 = {geom.ell / 8:.4g}, got {h}")
    ns = max(1, int(round(geom.L / h)))
    nt = max(8, int(round(geom.ell / h)))
    tj = np.linspace(0.0, geom.ell, nt + 1)
    sb = geom.s_bis(tj)                       # bisectrix s per t level

    # columns k = -ns..ns; k >= 0 plus patch, k <= 0 minus patch (k = 0 shared)
    ncol = 2 * ns + 1
    nodes = np.empty((ncol * (nt + 1), 2))
    for k in range(-ns, ns + 1):
        col = k + ns
        frac = abs(k) / ns
        s = sb + frac * (geom.L - sb)
        if k >= 0:
            xs, ys = s, tj
        else:
            xs, ys = minus_patch_to_cartesian(geom, -s, tj)
        idx = col * (nt + 1) + np.arange(nt + 1)
        nodes[idx, 0] = xs
        nodes[idx, 1] = ys

    def nid(col, j):
        return col * (nt + 1) + j

    tris, epatch = [], []
    for col in range(ncol - 1):
        for j in range(nt):
            n00, n10 = nid(col, j), nid(col + 1, j)
            n01, n11 = nid(col, j + 1), nid(col + 1, j + 1)
            tris.append((n00, n10, n11))
            tris.append((n00, n11, n01))
            epatch += [1 if col >= ns else -1] * 2
    triangles = np.array(tris, dtype=int)

    boundary = []
    for col in range(ncol - 1):
        boundary.append((nid(col, 0), nid(col + 1, 0), "out"))
        boundary.append((nid(col, nt), nid(col + 1, nt), "in"))
    for j in range(nt):
        boundary.append((nid(0, j), nid(0, j + 1), "bd"))
        boundary.append((nid(ncol - 1, j), nid(ncol - 1, j + 1), "bd"))
    bis = [(nid(ns, j), nid(ns, j + 1)) for j in range(nt)]

    sp, tp, sm, tm = patch_coords_arrays(geom, nodes[:, 0], nodes[:, 1])
    node_patch = np.ones(nodes.shape[0], dtype=int)
    cols = np.arange(nodes.shape[0]) // (nt + 1)
    node_patch[cols < ns] = -1

    mesh = Mesh(geom=geom, h=h, nodes=nodes, triangles=triangles,
                boundary_edges=boundary, bis_edges=bis, node_patch=node_patch,
                s_plus=sp, t_plus=tp, s_minus=sm, t_minus=tm,
                element_patch=np.array(epatch, dtype=int), ns=ns, nt=nt)

    areas = mesh.areas()
    if np.any(areas <= 0):
        raise MeshFailure("non-positively-oriented triangle produced")
    if abs(areas.sum() - geom.area()) > 1e-10 * abs(geom.area()):
        raise MeshFailure("mesh does not tile the polygon")
    if mesh.min_angle_deg() < MIN_ANGLE_DEG:
        raise MeshFailure(
            f"min triangle angle {mesh.min_angle_deg():.2f} deg < {MIN_ANGLE_DEG}")
    return mesh


def save_mesh_txt(mesh: Mesh, path):
    """Plain-text mesh: node table, triangle table, tagged boundary edges."""
    with open(path, "w") as fh:
        fh.write(f"# wedge mesh: beta={mesh.geom.beta!r} L={mesh.geom.L!r} "
                 f"ell={mesh.geom.ell!r} h={mesh.h!r}\n")
        fh.write(f"nodes {mesh.n_nodes}\n")
        for i, (x, y) in enumerate(mesh.nodes):
            fh.write(f"{i} {x:.17g} {y:.17g}\n")
        fh.write(f"triangles {len(mesh.triangles)}\n")
        for i, (a, b, c) in enumerate(mesh.triangles):
            fh.write(f"{i} {a} {b} {c}\n")
        fh.write(f"boundary_edges {len(mesh.boundary_edges)}\n")
        for a, b, tag in mesh.boundary_edges:
            fh.write(f"{a} {b} {tag}\n")


def save_mesh_off(mesh: Mesh, path):
    """Geomview OFF, loadable by standard mesh viewers."""
    with open(path, "w") as fh:
        fh.write("OFF\n")
        fh.write(f"{mesh.n_nodes} {len(mesh.triangles)} 0\n")
        for x, y in mesh.nodes:
            fh.write(f"{x:.17g} {y:.17g} 0\n")
        for a, b, c in mesh.triangles:
            fh.write(f"3 {a} {b} {c}\n")
