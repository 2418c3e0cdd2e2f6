"""Reference triangulations: structured hexagonal patches and domain meshes.

Nodes and triangles are plain numpy arrays; triangles are counter-clockwise
index triples.  Each node carries a motion constraint tag (free, line along
a unit direction, or pinned) and an ordered fan of incident triangles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "TriangleMesh",
    "LatticeSpec",
    "FREE",
    "hex_sigma",
    "skew_sigma",
    "build_hexagonal_patch",
    "build_domain_mesh",
    "validate",
    "write_mesh",
    "read_mesh",
]

FREE = ("free",)


def hex_sigma() -> np.ndarray:
    """Unit neighbor offsets of the regular hexagonal lattice, CCW."""
    k = np.arange(6)
    return np.stack([np.cos(np.pi * k / 3.0), np.sin(np.pi * k / 3.0)], axis=1)


def skew_sigma() -> np.ndarray:
    """Neighbor offsets of the degenerate (skew) hexagon, CCW."""
    return np.array(
        [[1.0, 0.0], [0.5, 0.5], [0.0, 1.0], [-1.0, 0.0], [-0.5, -0.5], [0.0, -1.0]]
    )


@dataclass(frozen=True)
class LatticeSpec:
    """Structured lattice: kind in {'hexagonal', 'skew'} and spacing > 0."""

    kind: str
    spacing: float

    def __post_init__(self):
        if self.kind not in ("hexagonal", "skew"):
            raise ValueError(f"unknown lattice kind {self.kind!r}")
        if not self.spacing > 0.0:
            raise ValueError(f"lattice spacing must be positive, got {self.spacing}")

    def offsets(self) -> np.ndarray:
        return hex_sigma() if self.kind == "hexagonal" else skew_sigma()


@dataclass(frozen=True)
class TriangleMesh:
    """Immutable triangulation with node constraints and ordered node fans.

    constraints[l] is ('free',), ('line', (dx, dy)) with a unit direction,
    or ('pinned',).  fans[l] lists (triangle, a, b) with (a, b) the edge
    opposite node l ordered CCW; interior fans close up (b of one entry is
    a of the next), boundary fans are open chains.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    constraints: tuple = ()
    fans: tuple = field(default=(), repr=False)

    def __post_init__(self):
        nodes = np.ascontiguousarray(np.asarray(self.nodes, dtype=float))
        tris = np.ascontiguousarray(np.asarray(self.triangles, dtype=np.int64))
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "triangles", tris)
        if not self.constraints:
            object.__setattr__(self, "constraints", tuple([FREE] * len(nodes)))
        if not self.fans:
            object.__setattr__(self, "fans", _build_fans(len(nodes), tris))

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    def signed_dets(self, positions: np.ndarray | None = None) -> np.ndarray:
        """det(p1-p0 | p2-p0) per triangle; twice the signed area."""
        p = self.nodes if positions is None else positions
        p0 = p[self.triangles[:, 0]]
        e1 = p[self.triangles[:, 1]] - p0
        e2 = p[self.triangles[:, 2]] - p0
        return e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]

    def areas(self) -> np.ndarray:
        return 0.5 * self.signed_dets()

    def centroids(self, positions: np.ndarray | None = None) -> np.ndarray:
        p = self.nodes if positions is None else positions
        return (p[self.triangles[:, 0]] + p[self.triangles[:, 1]] + p[self.triangles[:, 2]]) / 3.0

    def edges(self) -> np.ndarray:
        """Unique undirected edges as sorted index pairs."""
        t = self.triangles
        e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        e.sort(axis=1)
        return np.unique(e, axis=0)

    def max_edge_length(self) -> float:
        e = self.edges()
        d = self.nodes[e[:, 0]] - self.nodes[e[:, 1]]
        return float(np.max(np.hypot(d[:, 0], d[:, 1])))

    def interior_nodes(self) -> np.ndarray:
        """Nodes whose fan is closed."""
        out = []
        for l, fan in enumerate(self.fans):
            if fan and fan[0][1] == fan[-1][2]:
                out.append(l)
        return np.array(out, dtype=np.int64)


def _build_fans(n_nodes: int, tris: np.ndarray) -> tuple:
    incident: list[list[tuple[int, int, int]]] = [[] for _ in range(n_nodes)]
    for t, (i, j, k) in enumerate(tris):
        if min(i, j, k) < 0 or max(i, j, k) >= n_nodes:
            continue  # validate() reports out-of-range indices
        incident[int(i)].append((t, int(j), int(k)))
        incident[int(j)].append((t, int(k), int(i)))
        incident[int(k)].append((t, int(i), int(j)))
    fans = []
    for entries in incident:
        if not entries:
            fans.append(tuple())
            continue
        by_a = {a: e for (t, a, b) in entries for e in [(t, a, b)]}
        bs = {b for (_, _, b) in entries}
        starts = [e for e in entries if e[1] not in bs]
        chain = [starts[0] if starts else entries[0]]
        seen = {chain[0][0]}
        while len(chain) < len(entries):
            nxt = by_a.get(chain[-1][2])
            if nxt is None or nxt[0] in seen:
                break
            chain.append(nxt)
            seen.add(nxt[0])
        # orphans only occur on malformed meshes; keep them so validate() can report
        chain.extend(e for e in entries if e[0] not in seen)
        fans.append(tuple(chain))
    return tuple(fans)


def build_hexagonal_patch(
    spec: LatticeSpec, rings: int, center=(0.0, 0.0)
) -> TriangleMesh:
    """Exact structured patch of `rings` neighbor rings around a center node.

    Hexagonal patches realize the offsets eps*sigma_k exactly for every
    interior node; the skew kind realizes the degenerate hexagon and only
    supports a single ring (its fan does not extend to a lattice).
    """
    if rings < 1:
        raise ValueError(f"patch needs at least one ring of neighbors, got rings={rings}")
    eps = spec.spacing
    cx, cy = float(center[0]), float(center[1])
    if spec.kind == "skew":
        if rings != 1:
            raise ValueError("skew patches support exactly one ring")
        nodes = np.vstack([[0.0, 0.0], skew_sigma() * eps]) + [cx, cy]
        tris = np.array([[0, k, k % 6 + 1] for k in range(1, 7)], dtype=np.int64)
        return TriangleMesh(nodes, tris)

    # axial lattice coordinates: P(i, j) = i*u + j*v
    u = eps * np.array([1.0, 0.0])
    v = eps * np.array([0.5, math.sqrt(3.0) / 2.0])
    keys = []
    for i in range(-rings, rings + 1):
        for j in range(-rings, rings + 1):
            if max(abs(i), abs(j), abs(i + j)) <= rings:
                keys.append((i, j))
    keys.sort(key=lambda ij: (max(abs(ij[0]), abs(ij[1]), abs(ij[0] + ij[1])), ij))
    index = {ij: n for n, ij in enumerate(keys)}
    nodes = np.array([[cx, cy] + i * u + j * v for (i, j) in keys])
    tris = []
    for i in range(-rings - 1, rings + 1):
        for j in range(-rings - 1, rings + 1):
            up = ((i, j), (i + 1, j), (i, j + 1))
            down = ((i + 1, j), (i + 1, j + 1), (i, j + 1))
            for tri in (up, down):
                if all(c in index for c in tri):
                    tris.append(tuple(index[c] for c in tri))
    return TriangleMesh(nodes, np.array(sorted(tris), dtype=np.int64))


def _strip(low_idx, low_par, up_idx, up_par, low_pts, up_pts, flip=False):
    """Triangulate the strip between two parameter-sorted node rows.

    Advances along both rows, always cutting the shorter diagonal.  With
    flip=False triangles are CCW when the upper row lies left of the
    direction of travel (horizontal rows); rings need flip=True.
    """
    tris = []
    i, j = 0, 0
    while i < len(low_idx) - 1 or j < len(up_idx) - 1:
        can_low = i < len(low_idx) - 1
        can_up = j < len(up_idx) - 1
        if can_low and can_up:
            d_low = np.hypot(*(up_pts[j] - low_pts[i + 1]))
            d_up = np.hypot(*(low_pts[i] - up_pts[j + 1]))
            can_low = d_low <= d_up
            can_up = not can_low
        if can_low:
            tri = (low_idx[i], low_idx[i + 1], up_idx[j])
            i += 1
        else:
            tri = (low_idx[i], up_idx[j + 1], up_idx[j])
            j += 1
        if flip:
            tri = (tri[0], tri[2], tri[1])
        tris.append(tri)
    return tris


def _ring_nodes_quarter(r, ell):
    k = max(1, int(round((math.pi / 2.0) * r / ell)))
    theta = np.linspace(0.0, math.pi / 2.0, k + 1)
    return theta


def _ring_nodes_full(r, ell):
    k = max(6, int(round(2.0 * math.pi * r / ell)))
    theta = np.arange(k) * (2.0 * math.pi / k)
    return theta


def build_domain_mesh(domain: str, h_max: float, *, bounds=None, radius=None) -> TriangleMesh:
    """Mesh one of the computational domains with max edge length <= h_max.

    domain 'square' uses staggered hexagonal-lattice rows (bounds =
    (x0, y0, x1, y1)); 'disc' and 'quarter_disc' use concentric rings so
    boundary nodes sit exactly on the circle and, for the quarter disc, on
    the symmetry axes.  Quarter-disc axis nodes are constrained to
    tangential motion and the corner node is pinned.
    """
    if not h_max > 0.0:
        raise ValueError(f"h_max must be positive, got {h_max}")
    if domain == "square":
        if bounds is None:
            raise ValueError("square domain needs bounds=(x0, y0, x1, y1)")
        x0, y0, x1, y1 = map(float, bounds)
        W, H = x1 - x0, y1 - y0
        if W <= 0 or H <= 0:
            raise ValueError(f"empty square bounds {bounds}")
        if h_max > math.hypot(W, H):
            raise ValueError(f"h_max={h_max} exceeds domain diameter {math.hypot(W, H):g}")
        h_eff = h_max * (1.0 - 1e-9)  # keep roundoff from tipping edges over h_max
        ncol = max(1, math.ceil(W / h_eff))
        dx = W / ncol
        nrow = max(1, math.ceil(H / math.sqrt(max(h_eff**2 - (dx / 2.0) ** 2, (h_eff / 2.0) ** 2))))
        dy = H / nrow
        rows = []
        nodes = []
        for j in range(nrow + 1):
            y = y0 + j * dy
            if j % 2 == 0:
                xs = x0 + dx * np.arange(ncol + 1)
            else:
                xs = np.concatenate([[x0], x0 + dx * (np.arange(ncol) + 0.5), [x1]])
            idx = np.arange(len(nodes), len(nodes) + len(xs))
            nodes.extend((x, y) for x in xs)
            rows.append((idx, xs))
        nodes = np.array(nodes)
        tris = []
        for j in range(nrow):
            li, lp = rows[j]
            ui, up = rows[j + 1]
            tris.extend(_strip(li, lp, ui, up, nodes[li], nodes[ui]))
        return TriangleMesh(nodes, np.array(tris, dtype=np.int64))

    if domain not in ("disc", "quarter_disc"):
        raise ValueError(f"unknown domain {domain!r}")
    if radius is None or not radius > 0.0:
        raise ValueError(f"{domain} needs a positive radius, got {radius}")
    R = float(radius)
    diam = 2.0 * R if domain == "disc" else R * math.sqrt(2.0)
    if h_max > diam:
        raise ValueError(f"h_max={h_max} exceeds domain diameter {diam:g}")
    # ring spacing sized so strip diagonals stay below h_max; the factor is
    # tightened until the built mesh meets the bound (ring-count jumps can
    # stretch isolated diagonals past the nominal estimate)
    for factor in (0.65, 0.55, 0.46, 0.38, 0.3):
        mesh = _build_ring_mesh(domain, R, factor * h_max)
        if mesh.max_edge_length() <= h_max:
            return mesh
    raise RuntimeError(f"could not meet edge bound h_max={h_max} on {domain}")


def _build_ring_mesh(domain: str, R: float, dr_target: float) -> TriangleMesh:
    n = max(1, math.ceil(R / dr_target))
    dr = R / n
    ell = 2.0 * dr / math.sqrt(3.0)
    nodes = [(0.0, 0.0)]
    tags = [("pinned",) if domain == "quarter_disc" else FREE]
    rings = [(np.array([0]), np.array([0.0]))]
    for i in range(1, n + 1):
        r = i * dr
        if domain == "quarter_disc":
            theta = _ring_nodes_quarter(r, ell)
        else:
            theta = _ring_nodes_full(r, ell)
        idx = np.arange(len(nodes), len(nodes) + len(theta))
        for th in theta:
            x, y = r * math.cos(th), r * math.sin(th)
            if domain == "quarter_disc" and th == 0.0:
                x, y = r, 0.0
                tags.append(("line", (1.0, 0.0)))
            elif domain == "quarter_disc" and th == theta[-1]:
                x, y = 0.0, r
                tags.append(("line", (0.0, 1.0)))
            else:
                tags.append(FREE)
            nodes.append((x, y))
        rings.append((idx, theta))
    nodes = np.array(nodes)
    tris = []
    for i in range(n):
        li, lp = rings[i]
        ui, up = rings[i + 1]
        if domain == "disc" and i >= 1:
            # close the annulus: repeat the first node of each ring at 2*pi
            li2 = np.append(li, li[0])
            lp2 = np.append(lp, lp[0] + 2.0 * math.pi)
            ui2 = np.append(ui, ui[0])
            up2 = np.append(up, up[0] + 2.0 * math.pi)
            lpts = np.vstack([nodes[li], nodes[li[0]]])
            upts = np.vstack([nodes[ui], nodes[ui[0]]])
            tris.extend(_strip(li2, lp2, ui2, up2, lpts, upts, flip=True))
        elif domain == "disc":
            ui2 = np.append(ui, ui[0])
            for j in range(len(ui)):
                tris.append((0, ui2[j], ui2[j + 1]))
        elif i == 0:
            for j in range(len(ui) - 1):
                tris.append((0, ui[j], ui[j + 1]))
        else:
            tris.extend(_strip(li, lp, ui, up, nodes[li], nodes[ui], flip=True))
    mesh = TriangleMesh(nodes, np.array(tris, dtype=np.int64), constraints=tuple(tags))
    if np.any(mesh.signed_dets() <= 0.0):
        raise RuntimeError("domain mesher produced a non-CCW triangle")
    return mesh


def validate(mesh: TriangleMesh) -> list[str]:
    """Check mesh invariants; returns a list of violations (empty if valid)."""
    report = []
    L, tris = mesh.n_nodes, mesh.triangles
    if tris.size and (tris.min() < 0 or tris.max() >= L):
        report.append("triangle node index out of range")
        return report
    dets = mesh.signed_dets()
    for t in np.flatnonzero(dets <= 0.0):
        report.append(f"triangle {t} has non-positive reference area (det={dets[t]:g})")
    canon = np.sort(tris, axis=1)
    _, counts = np.unique(canon, axis=0, return_counts=True)
    if np.any(counts > 1):
        report.append("duplicate triangles present")
    for l, fan in enumerate(mesh.fans):
        if not fan:
            report.append(f"node {l} has an empty fan (dangling node)")
            continue
        for j in range(len(fan) - 1):
            if fan[j][2] != fan[j + 1][1]:
                report.append(f"node {l} has a disconnected or mis-ordered fan")
                break
    for l, tag in enumerate(mesh.constraints):
        if tag[0] == "line":
            d = np.asarray(tag[1], dtype=float)
            if abs(np.hypot(d[0], d[1]) - 1.0) > 1e-12:
                report.append(f"node {l} line constraint direction is not unit length")
        elif tag[0] not in ("free", "pinned"):
            report.append(f"node {l} has unknown constraint tag {tag!r}")
    return report


_TAG_TO_TEXT = {"free": "f", "pinned": "p"}


def _tag_text(tag) -> str:
    if tag[0] == "line":
        d = tag[1]
        if abs(abs(d[0]) - 1.0) < 1e-12 and abs(d[1]) < 1e-12:
            return "lx"
        if abs(abs(d[1]) - 1.0) < 1e-12 and abs(d[0]) < 1e-12:
            return "ly"
        raise ValueError(f"only axis-aligned line constraints are exportable, got {tag}")
    return _TAG_TO_TEXT[tag[0]]


def _tag_parse(text: str):
    if text == "f":
        return FREE
    if text == "lx":
        return ("line", (1.0, 0.0))
    if text == "ly":
        return ("line", (0.0, 1.0))
    if text == "p":
        return ("pinned",)
    raise ValueError(f"unknown constraint tag {text!r} in mesh file")


def write_mesh(mesh: TriangleMesh, path) -> None:
    """Plain-text export: header 'L M', L node lines 'x y tag', M index triples."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"{mesh.n_nodes} {mesh.n_triangles}\n")
        for p, tag in zip(mesh.nodes, mesh.constraints):
            f.write(f"{p[0]:.17g} {p[1]:.17g} {_tag_text(tag)}\n")
        for i, j, k in mesh.triangles:
            f.write(f"{i} {j} {k}\n")


def read_mesh(path) -> TriangleMesh:
    with open(path, "r", encoding="utf-8") as f:
        lines = [ln.strip() for ln in f if ln.strip()]
    L, M = map(int, lines[0].split())
    nodes = np.empty((L, 2))
    tags = []
    for l in range(L):
        x, y, tag = lines[1 + l].split()
        nodes[l] = (float(x), float(y))
        tags.append(_tag_parse(tag))
    tris = np.array([list(map(int, lines[1 + L + m].split())) for m in range(M)], dtype=np.int64)
    return TriangleMesh(nodes, tris, constraints=tuple(tags))
