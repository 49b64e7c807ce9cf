#!/usr/bin/env python3
"""Generate the test meshes in crates/core/tests/data.

plate_hole.msh  : 1 x 2 plate with a central hole of diameter 0.5 (TRI3)
cracked_block.msh: 1.0 x 0.4 x 0.5 block with a zero-width crack from the top (TET4)

Output is deterministic; rerun after changing parameters and commit the files.
"""
import math
import os
import sys

import numpy as np
from scipy.spatial import Delaunay

OUT = os.path.join(os.path.dirname(__file__), "..", "crates", "core", "tests", "data")


def write_msh(path, dim, nodes, cells, groups):
    names = sorted(groups)
    facet_ty, cell_ty = (1, 2) if dim == 2 else (2, 4)
    lines = ["$MeshFormat", "2.2 0 8", "$EndMeshFormat", "$PhysicalNames", str(len(names))]
    lines += [f'{dim - 1} {i + 1} "{n}"' for i, n in enumerate(names)]
    lines += ["$EndPhysicalNames", "$Nodes", str(len(nodes))]
    for i, p in enumerate(nodes):
        z = p[2] if dim == 3 else 0.0
        lines.append(f"{i + 1} {p[0]:.12g} {p[1]:.12g} {z:.12g}")
    lines.append("$EndNodes")
    total = sum(len(groups[n]) for n in names) + len(cells)
    lines += ["$Elements", str(total)]
    eid = 1
    for tag, n in enumerate(names):
        for f in groups[n]:
            lines.append(f"{eid} {facet_ty} 2 {tag + 1} {tag + 1} " + " ".join(str(v + 1) for v in f))
            eid += 1
    for c in cells:
        lines.append(f"{eid} {cell_ty} 2 0 1 " + " ".join(str(v + 1) for v in c))
        eid += 1
    lines.append("$EndElements")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def boundary_facets(cells, faces):
    count = {}
    for c in cells:
        for f in faces:
            key = tuple(sorted(c[i] for i in f))
            count[key] = count.get(key, 0) + 1
    return [list(k) for k, v in count.items() if v == 1]


def plate(width=1.0, height=2.0, radius=0.25, h=0.09, h_hole=0.05):
    cx, cy = width / 2, height / 2
    pts = []
    nx = round(width / h)
    ny = round(height / h)
    for i in range(nx):
        pts.append((width * i / nx, 0.0))
        pts.append((width * (i + 1) / nx, height))
    for j in range(ny):
        pts.append((width, height * j / ny))
        pts.append((0.0, height * (j + 1) / ny))
    nh = round(2 * math.pi * radius / h_hole)
    for i in range(nh):
        t = 2 * math.pi * i / nh
        pts.append((cx + radius * math.cos(t), cy + radius * math.sin(t)))
    dy = h * math.sqrt(3) / 2
    j = 0
    y = dy
    while y < height - 0.5 * h:
        x = h / 2 if j % 2 else h
        while x < width - 0.5 * h:
            r = math.hypot(x - cx, y - cy)
            if r > radius + 0.7 * h_hole + 0.3 * h and min(x, width - x, y, height - y) > 0.5 * h:
                pts.append((x, y))
            x += h
        y += dy
        j += 1
    pts = np.array(pts)
    tri = Delaunay(pts)
    cells = []
    for s in tri.simplices:
        c = pts[s].mean(axis=0)
        if math.hypot(c[0] - cx, c[1] - cy) < radius:
            continue
        a, b, d = pts[s]
        if (b[0] - a[0]) * (d[1] - a[1]) - (b[1] - a[1]) * (d[0] - a[0]) < 0:
            s = [s[0], s[2], s[1]]
        cells.append([int(v) for v in s])
    eps = 1e-9
    groups = {"bottom": [], "top": [], "left": [], "right": [], "hole": []}
    for f in boundary_facets(cells, [(0, 1), (1, 2), (2, 0)]):
        m = pts[f].mean(axis=0)
        if abs(m[1]) < eps:
            groups["bottom"].append(f)
        elif abs(m[1] - height) < eps:
            groups["top"].append(f)
        elif abs(m[0]) < eps:
            groups["left"].append(f)
        elif abs(m[0] - width) < eps:
            groups["right"].append(f)
        else:
            groups["hole"].append(f)
    area = 0.0
    for c in cells:
        a, b, d = pts[c]
        area += 0.5 * ((b[0] - a[0]) * (d[1] - a[1]) - (b[1] - a[1]) * (d[0] - a[0]))
    poly = 0.5 * nh * radius * radius * math.sin(2 * math.pi / nh)
    assert abs(area - (width * height - poly)) < 1e-9, area
    assert len(groups["hole"]) == nh
    return pts, cells, groups


# Kuhn split of the unit cube along its main diagonal; conforming on a grid.
KUHN = [(0, 1, 3, 7), (0, 3, 2, 7), (0, 2, 6, 7), (0, 6, 4, 7), (0, 4, 5, 7), (0, 5, 1, 7)]


def block(nx=10, ny=4, nz=5, h=0.1, crack_i=5, crack_k=2):
    """Structured block with a zero-width crack on the plane x = crack_i * h
    running from the top face down to z = crack_k * h. Nodes on the crack
    faces are duplicated; the crack front stays shared."""
    idx = {}
    nodes = []

    def node(i, j, k, side):
        cracked = i == crack_i and k > crack_k
        key = (i, j, k, side if cracked else 0)
        if key not in idx:
            idx[key] = len(nodes)
            nodes.append((i * h, j * h, k * h))
        return idx[key]

    cells = []
    for i in range(nx):
        side = 0 if i < crack_i else 1
        for j in range(ny):
            for k in range(nz):
                corner = [node(i + (b & 1), j + ((b >> 1) & 1), k + ((b >> 2) & 1), side) for b in range(8)]
                for t in KUHN:
                    c = [corner[v] for v in t]
                    p = np.array([nodes[v] for v in c])
                    if np.linalg.det(p[1:] - p[0]) < 0:
                        c[2], c[3] = c[3], c[2]
                    cells.append(c)
    pts = np.array(nodes)
    lx, ly, lz = nx * h, ny * h, nz * h
    eps = 1e-9
    groups = {k: [] for k in ("left", "right", "bottom", "top", "front", "back", "crack")}
    for f in boundary_facets(cells, [(1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 1, 2)]):
        m = pts[f].mean(axis=0)
        if abs(m[0]) < eps:
            groups["left"].append(f)
        elif abs(m[0] - lx) < eps:
            groups["right"].append(f)
        elif abs(m[2]) < eps:
            groups["bottom"].append(f)
        elif abs(m[1]) < eps:
            groups["front"].append(f)
        elif abs(m[1] - ly) < eps:
            groups["back"].append(f)
        elif abs(m[2] - lz) < eps:
            groups["top"].append(f)
        else:
            groups["crack"].append(f)
    assert len(groups["crack"]) == 2 * 2 * ny * (nz - crack_k)
    return pts, cells, groups


def main():
    os.makedirs(OUT, exist_ok=True)
    summary = []
    pts, cells, groups = plate()
    write_msh(os.path.join(OUT, "plate_hole.msh"), 2, pts, cells, groups)
    summary.append(f"plate_hole.msh nodes={len(pts)} elements={len(cells)}")
    pts, cells, groups = block()
    write_msh(os.path.join(OUT, "cracked_block.msh"), 3, pts, cells, groups)
    summary.append(f"cracked_block.msh nodes={len(pts)} elements={len(cells)}")
    with open(os.path.join(OUT, "COUNTS"), "w") as fh:
        fh.write("\n".join(summary) + "\n")
    print("\n".join(summary), file=sys.stderr)


if __name__ == "__main__":
    main()
