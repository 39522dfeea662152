"""Mass extraction accuracy on RP^3 as a function of the number of radii and the extrapolation order."""
import numpy as np

from spinlab.mass_endo import default_radii, extract_mass
from spinlab.sphere_rp import RPGeometry, rp_evaluator, rp_mass_closed_form


def main():
    geom = RPGeometry(spin_sign=1)
    point = np.array([0.3, -0.2, 0.1])
    ev = rp_evaluator(geom, point)
    exact = rp_mass_closed_form(geom)
    print("levels,order,error,residual")
    for levels in (3, 4, 5, 6, 8):
        for order in (1, 2, 3):
            if order >= levels:
                continue
            m = extract_mass(ev, ev.base_scaled, radii=default_radii(ev.flat_radius, levels), order=order, tol=np.inf)
            err = np.abs(m.alpha - exact * np.eye(2)).max()
            print(f"{levels},{order},{err:.3e},{m.residual:.3e}")


if __name__ == "__main__":
    main()
