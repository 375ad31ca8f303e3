"""Blow-ups of the radial solution at the contact point (r0, 0): the rescaled
fields approach the half-space solution as r shrinks."""
import argparse

from fbreg import harness
from fbreg.grid import Grid2
from fbreg.operators import LAPLACE
from fbreg.solver import ObstacleProblemSpec, boundary_field, solve


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--r0", type=float, default=0.5)
    ap.add_argument("--n-cells", type=int, default=256)
    ap.add_argument("--radii", type=float, nargs="+", default=[0.2, 0.1, 0.05, 0.025])
    args = ap.parse_args()

    grid = Grid2(1.0, args.n_cells)
    sol = solve(ObstacleProblemSpec(LAPLACE, grid, boundary_field(f"radial:r0={args.r0}", grid)))
    x = (args.r0, 0.0)
    print(f"{'r':>8} {'gamma':>10} {'e1':>10} {'e2':>10} {'sup_err':>10} {'cone s':>8}")
    for r in args.radii:
        if r < 4 * grid.h:
            print(f"{r:>8} below 4h, skipped")
            continue
        fit = harness.halfspace_fit(harness.rescale(sol.u, x, r), LAPLACE.ellipticity)
        cone = harness.monotonicity_cone(sol.u, x, r)
        print(f"{r:>8.4g} {fit.gamma:>10.5f} {fit.e[0]:>10.5f} {fit.e[1]:>10.5f} {fit.sup_err:>10.4g} "
              f"{cone.s if cone.fitted else 'unfit':>8}")


if __name__ == "__main__":
    main()
