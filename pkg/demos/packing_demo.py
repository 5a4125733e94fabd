"""Crown packing on a circle and an ellipse.

On a disk of radius R the critical offset has the closed form
R sin(pi/k) / (1 + sin(pi/k)); on other convex domains it comes out of
the feasibility bisection. The crown is the equal-chord polygon on the
inner parallel curve at that offset, with chord exactly twice the
offset.
"""

import numpy as np

from spikecrown import geometry as geo
from spikecrown import packing as pk


def show_crown(name, dom, k):
    delta_star, crown = pk.critical_distance(dom, k)
    pts = crown.points
    chords = np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)
    depths = -dom.signed_distance(pts)
    print(f"{name}, k={k}: delta* = {delta_star:.12f}")
    print(f"  chords  in [{chords.min():.12f}, {chords.max():.12f}]"
          f"  (target {2 * delta_star:.12f})")
    print(f"  depths  in [{depths.min():.12f}, {depths.max():.12f}]")
    return delta_star


def main():
    disk = geo.PlanarDomain(geo.circle(1.0))
    ds = show_crown("unit disk", disk, 8)
    s = np.sin(np.pi / 8)
    print(f"  closed form: {s / (1 + s):.12f}  (diff {abs(ds - s / (1 + s)):.1e})")

    ell = geo.PlanarDomain(geo.ellipse(2.0, 1.0))
    show_crown("ellipse a=2 b=1", ell, 10)

    # sizing from a target offset instead of a fixed count
    for delta0 in (0.2, 0.3, 0.45):
        k = pk.choose_spike_count(disk, delta0)
        print(f"target offset {delta0}: k = {k}")


if __name__ == "__main__":
    main()
