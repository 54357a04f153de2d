"""Q1 quadrilateral meshes, node adjacency, macroelement pair geometry and
boundary classification.

Meshes are immutable after construction.  The pair geometry stores, for every
ordered node pair (i, j) with j a neighbor of i, the point where the line
through x_j and x_i leaves the macroelement around i on the opposite side,
together with interpolation data for evaluating nodal fields there.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .physics import GAMMA, check_admissible, wave_speeds, RoeAverage, velocity, sound_speed


@dataclass(frozen=True)
class Mesh:
    coords: np.ndarray           # (N, 2)
    cells: np.ndarray            # (E, 4) counterclockwise
    adj_indptr: np.ndarray       # CSR over nodes, neighbors incl. self, sorted
    adj_indices: np.ndarray
    boundary_edges: np.ndarray   # (NB, 2) node pairs on the domain boundary
    boundary_edge_normals: np.ndarray  # (NB, 2) outward unit normals
    boundary_nodes: np.ndarray   # sorted node ids on the boundary
    boundary_normals: np.ndarray  # (len(boundary_nodes), 2) averaged unit normals
    h_char: np.ndarray           # (N,) longest incident edge per node
    L_char: float                # bounding-box diagonal
    structured_shape: tuple | None = None  # (nx, ny) for structured grids

    @property
    def n_nodes(self):
        return self.coords.shape[0]

    @property
    def n_cells(self):
        return self.cells.shape[0]

    def neighbors(self, i):
        return self.adj_indices[self.adj_indptr[i]:self.adj_indptr[i + 1]]

    @property
    def is_boundary(self):
        mask = np.zeros(self.n_nodes, dtype=bool)
        mask[self.boundary_nodes] = True
        return mask

    def boundary_normal(self, i):
        k = np.searchsorted(self.boundary_nodes, i)
        if k >= len(self.boundary_nodes) or self.boundary_nodes[k] != i:
            raise ValueError(f"node {i} is not on the boundary")
        return self.boundary_normals[k]


def _cell_areas(coords, cells):
    x = coords[cells, 0]
    y = coords[cells, 1]
    # shoelace on the straight-sided quad
    return 0.5 * ((x * np.roll(y, -1, axis=1) - np.roll(x, -1, axis=1) * y).sum(axis=1))


def _build_mesh(coords, cells, structured_shape=None):
    coords = np.ascontiguousarray(coords, dtype=float)
    cells = np.ascontiguousarray(cells, dtype=np.int64)
    areas = _cell_areas(coords, cells)
    if np.any(areas <= 0):
        bad = np.flatnonzero(areas <= 0)
        raise ValueError(f"{bad.size} cells have non-positive area (first: {bad[:5].tolist()})")

    n = coords.shape[0]
    # node adjacency: nodes sharing a cell, incl. self
    e = cells.shape[0]
    rows = np.repeat(cells, 4, axis=1).ravel()
    cols = np.tile(cells, (1, 4)).ravel()
    adj = sp.csr_matrix((np.ones_like(rows, dtype=np.int8), (rows, cols)), shape=(n, n))
    adj.sum_duplicates()
    adj.sort_indices()

    # boundary edges: cell edges appearing exactly once
    edges = np.stack([cells, np.roll(cells, -1, axis=1)], axis=2).reshape(-1, 2)
    key = np.sort(edges, axis=1)
    order = np.lexsort((key[:, 1], key[:, 0]))
    ks = key[order]
    uniq, first, counts = np.unique(ks, axis=0, return_index=True, return_counts=True)
    single = counts == 1
    b_edges = edges[order][first[single]]  # keep ccw orientation of owning cell

    dvec = coords[b_edges[:, 1]] - coords[b_edges[:, 0]]
    nrm = np.stack([dvec[:, 1], -dvec[:, 0]], axis=1)
    nrm /= np.linalg.norm(nrm, axis=1, keepdims=True)

    b_nodes = np.unique(b_edges)
    nsum = np.zeros((n, 2))
    np.add.at(nsum, b_edges[:, 0], nrm)
    np.add.at(nsum, b_edges[:, 1], nrm)
    b_normals = nsum[b_nodes]
    b_normals /= np.linalg.norm(b_normals, axis=1, keepdims=True)

    # longest incident edge per node
    h = np.zeros(n)
    elen = np.linalg.norm(coords[edges[:, 1]] - coords[edges[:, 0]], axis=1)
    np.maximum.at(h, edges[:, 0], elen)
    np.maximum.at(h, edges[:, 1], elen)

    lo = coords.min(axis=0)
    hi = coords.max(axis=0)
    return Mesh(
        coords=coords, cells=cells,
        adj_indptr=adj.indptr, adj_indices=adj.indices,
        boundary_edges=b_edges, boundary_edge_normals=nrm,
        boundary_nodes=b_nodes, boundary_normals=b_normals,
        h_char=h, L_char=float(np.linalg.norm(hi - lo)),
        structured_shape=structured_shape,
    )


def build_structured_quad(nx, ny, bbox=((0.0, 0.0), (1.0, 1.0))):
    """Uniform nx-by-ny cell grid on the rectangle bbox = ((x0, y0), (x1, y1))."""
    if nx < 1 or ny < 1:
        raise ValueError("cell counts must be >= 1")
    (x0, y0), (x1, y1) = bbox
    if not (x1 > x0 and y1 > y0):
        raise ValueError("bbox is degenerate")
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    coords = np.stack([X.ravel(), Y.ravel()], axis=1)

    def nid(i, j):
        return i * (ny + 1) + j

    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    cells = np.stack([nid(ii, jj), nid(ii + 1, jj), nid(ii + 1, jj + 1), nid(ii, jj + 1)],
                     axis=2).reshape(-1, 4)
    return _build_mesh(coords, cells, structured_shape=(nx, ny))


def _polyline_eval(points, x):
    """Evaluate a piecewise-linear curve y(x) given by (k, 2) points."""
    points = np.asarray(points, dtype=float)
    return np.interp(x, points[:, 0], points[:, 1])


def _polyline_self_intersects(points):
    points = np.asarray(points, dtype=float)
    return np.any(np.diff(points[:, 0]) <= 0)


def build_polygonal_channel(wall_points, obstacle_points=None, target_h=0.1,
                            obstacle_wallside=None):
    """Boundary-fitted quad mesh of a symmetric channel with optional interior
    obstacles.

    `wall_points` is the upper-wall polyline y = w(x) > 0 (the lower wall is its
    mirror).  `obstacle_points` describes one interior obstacle placed in the
    lower half (mirrored into the upper half): a polyline of the surface facing
    the channel center; the surface facing the wall is taken as the straight
    chords between its first, lowest and last vertices.  With no obstacle the
    result is a plain transfinite channel mesh, which for a constant wall
    height is identical to a structured rectangle.
    """
    wall = np.asarray(wall_points, dtype=float)
    if _polyline_self_intersects(wall):
        raise ValueError("wall polyline must be strictly increasing in x")
    x_in, x_out = wall[0, 0], wall[-1, 0]

    if obstacle_points is None:
        nx = max(1, int(round((x_out - x_in) / target_h)))
        ny = max(2, int(round(2.0 * wall[:, 1].mean() / target_h)))
        if np.ptp(wall[:, 1]) < 1e-14:
            return build_structured_quad(nx, ny, ((x_in, -wall[0, 1]), (x_out, wall[0, 1])))
        xs = np.linspace(x_in, x_out, nx + 1)
        coords = []
        for x in xs:
            w = _polyline_eval(wall, x)
            coords.append(np.stack([np.full(ny + 1, x), np.linspace(-w, w, ny + 1)], axis=1))
        coords = np.concatenate(coords, axis=0)
        ii, jj = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
        nid = lambda i, j: i * (ny + 1) + j
        cells = np.stack([nid(ii, jj), nid(ii + 1, jj), nid(ii + 1, jj + 1), nid(ii, jj + 1)],
                         axis=2).reshape(-1, 4)
        return _build_mesh(coords, cells)

    obs = np.asarray(obstacle_points, dtype=float)
    if _polyline_self_intersects(obs):
        raise ValueError("obstacle polyline must be strictly increasing in x")
    if np.any(obs[:, 1] >= 0):
        raise ValueError("obstacle polyline must lie in the lower half plane")
    xa, xe = obs[0, 0], obs[-1, 0]
    ya, ye = obs[0, 1], obs[-1, 1]
    if obstacle_wallside is not None:
        wallside = np.asarray(obstacle_wallside, dtype=float)
        if _polyline_self_intersects(wallside):
            raise ValueError("wall-side polyline must be strictly increasing in x")
        if wallside[0, 0] != xa or wallside[-1, 0] != xe:
            raise ValueError("wall-side polyline must share the obstacle endpoints")
        y_deep = min(obs[:, 1].min(), wallside[:, 1].min())
    else:
        y_deep = obs[:, 1].min()
        # wall-facing surface: leading point -> deepest level -> trailing point
        x_deep = obs[np.argmin(obs[:, 1]), 0]
        if x_deep <= xa or x_deep >= xe:
            wallside = np.array([[xa, ya], [xe, ye]])
        else:
            wallside = np.array([[xa, ya], [x_deep, y_deep], [xe, ye]])

    def layer_bounds(x):
        """(y_center_side, y_wall_side) of the lower obstacle at station x."""
        if x <= xa:
            return ya, ya
        if x >= xe:
            return ye, ye
        return _polyline_eval(obs, x), _polyline_eval(wallside, x)

    # column stations: obstacle end points must be grid columns
    def seg(n0, n1):
        k = max(1, int(round((n1 - n0) / target_h)))
        return np.linspace(n0, n1, k + 1)

    xs = np.concatenate([seg(x_in, xa)[:-1], seg(xa, xe)[:-1], seg(xe, x_out)])

    n_out = max(2, int(round((_polyline_eval(wall, x_in) + y_deep) / target_h)))
    n_mid = max(2, int(round(-2.0 * ya / target_h)))

    node_id = {}
    coords = []

    def add_node(x, y):
        key = (round(x, 12), round(y, 12))
        if key not in node_id:
            node_id[key] = len(coords)
            coords.append((x, y))
        return node_id[key]

    # per column: node ids bottom wall -> top wall for the three layers
    col_rows = []
    for x in xs:
        w = _polyline_eval(wall, x)
        yc, yw = layer_bounds(x)
        rows_low = [add_node(x, y) for y in np.linspace(-w, yw, n_out + 1)]
        rows_mid = [add_node(x, y) for y in np.linspace(yc, -yc, n_mid + 1)]
        rows_up = [add_node(x, y) for y in np.linspace(-yw, w, n_out + 1)]
        col_rows.append((rows_low, rows_mid, rows_up))

    cells = []
    for (la, ma, ua), (lb, mb, ub) in zip(col_rows[:-1], col_rows[1:]):
        for ra, rb in ((la, lb), (ma, mb), (ua, ub)):
            for k in range(len(ra) - 1):
                cells.append((ra[k], rb[k], rb[k + 1], ra[k + 1]))
    return _build_mesh(np.asarray(coords), np.asarray(cells, dtype=np.int64))


@dataclass(frozen=True)
class PairGeometry:
    """Opposite-point geometry for every ordered neighbor pair (i, j), j != i.

    Arrays are aligned: entry p describes the pair (pair_i[p], pair_j[p]).
    The opposite point is interpolated from nodes (sym_a, sym_b) with weights
    (w_a, w_b).  Pairs where the ray from x_j through x_i exits the
    macroelement immediately (one-sided boundary stencils) fall back to
    mirroring the data of node j; they are flagged in `one_sided`.
    """

    pair_i: np.ndarray
    pair_j: np.ndarray
    r_len: np.ndarray      # |x_j - x_i|
    sym_a: np.ndarray
    sym_b: np.ndarray
    w_a: np.ndarray
    w_b: np.ndarray
    r_sym_len: np.ndarray  # |x_sym - x_i|
    one_sided: np.ndarray  # bool

    @property
    def n_pairs(self):
        return self.pair_i.shape[0]

    def interpolate(self, values):
        """Nodal field values at the opposite points, aligned with the pairs."""
        values = np.asarray(values)
        return self.w_a * values[self.sym_a] + self.w_b * values[self.sym_b]


def compute_pair_geometry(mesh: Mesh, tol=1e-12):
    coords = mesh.coords
    n = mesh.n_nodes

    # incident cells per node
    cell_of = [[] for _ in range(n)]
    for e, cell in enumerate(mesh.cells):
        for a in cell:
            cell_of[a].append(e)

    pi, pj = [], []
    r_len, sa, sb, wa, wb, rs_len, osided = [], [], [], [], [], [], []

    for i in range(n):
        neigh = mesh.neighbors(i)
        neigh = neigh[neigh != i]
        if neigh.size == 0:
            continue
        # boundary edges of the macroelement: cell edges used once that avoid i
        edge_count = {}
        for e in cell_of[i]:
            cell = mesh.cells[e]
            for k in range(4):
                a, b = cell[k], cell[(k + 1) % 4]
                key = (a, b) if a < b else (b, a)
                edge_count[key] = edge_count.get(key, 0) + 1
        bedges = np.array([k for k, c in edge_count.items() if c == 1 and i not in k],
                          dtype=np.int64)

        xi = coords[i]
        dvec = xi - coords[neigh]                      # ray directions, (J, 2)
        dlen = np.linalg.norm(dvec, axis=1)

        if bedges.size:
            A = coords[bedges[:, 0]]                   # (K, 2)
            E = coords[bedges[:, 1]] - A               # (K, 2)
            # solve xi + t d = A + s E for each (pair, edge)
            # [d, -E] [t, s]^T = A - xi
            rhs = A - xi                               # (K, 2)
            det = dvec[:, None, 0] * (-E[None, :, 1]) - dvec[:, None, 1] * (-E[None, :, 0])
            with np.errstate(divide="ignore", invalid="ignore"):
                t = (rhs[None, :, 0] * (-E[None, :, 1]) - rhs[None, :, 1] * (-E[None, :, 0])) / det
                s = (dvec[:, None, 0] * rhs[None, :, 1] - dvec[:, None, 1] * rhs[None, :, 0]) / det
            eps_s = 1e-10
            valid = (np.abs(det) > 1e-300) & (t > tol) & (s >= -eps_s) & (s <= 1.0 + eps_s)
            t = np.where(valid, t, np.inf)
            best = np.argmin(t, axis=1)
            tbest = t[np.arange(len(neigh)), best]
        else:
            tbest = np.full(len(neigh), np.inf)

        for k, j in enumerate(neigh):
            pi.append(i)
            pj.append(j)
            r_len.append(dlen[k])
            if np.isfinite(tbest[k]):
                ke = best[k]
                sval = float(np.clip(s[k, ke], 0.0, 1.0))
                a_node, b_node = bedges[ke]
                if sval < 1e-9:
                    sa.append(a_node); sb.append(a_node); wa.append(1.0); wb.append(0.0)
                elif sval > 1.0 - 1e-9:
                    sa.append(b_node); sb.append(b_node); wa.append(1.0); wb.append(0.0)
                else:
                    sa.append(a_node); sb.append(b_node)
                    wa.append(1.0 - sval); wb.append(sval)
                rs_len.append(tbest[k] * dlen[k])
                osided.append(False)
            else:
                # one-sided fallback: mirror node j data
                sa.append(j); sb.append(j); wa.append(1.0); wb.append(0.0)
                rs_len.append(dlen[k])
                osided.append(True)

    return PairGeometry(
        pair_i=np.asarray(pi, dtype=np.int64),
        pair_j=np.asarray(pj, dtype=np.int64),
        r_len=np.asarray(r_len),
        sym_a=np.asarray(sa, dtype=np.int64),
        sym_b=np.asarray(sb, dtype=np.int64),
        w_a=np.asarray(wa),
        w_b=np.asarray(wb),
        r_sym_len=np.asarray(rs_len),
        one_sided=np.asarray(osided, dtype=bool),
    )


def classify_inflow(boundary_state, normal, gamma=GAMMA):
    """Per-component inflow flags at a boundary point.

    Component beta is inflow iff the beta-th eigenvalue of the outward
    directional flux Jacobian is <= 0, with eigenvalues ordered
    (v.n, v.n, v.n - c|n|, v.n + c|n|).
    """
    u = np.asarray(boundary_state, dtype=float)
    check_admissible(u, gamma, where="boundary state")
    v = velocity(u)
    c = sound_speed(u, gamma)
    avg = RoeAverage(rho=u[..., 0], vel=v, H=np.zeros_like(c), c_s=c)
    lam = wave_speeds(avg, np.asarray(normal, dtype=float))
    return lam <= 0.0
