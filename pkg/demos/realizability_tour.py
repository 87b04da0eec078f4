"""A short walk through the realizability tests.

Three cases are shown:

* full Legendre moments, decided by the Hankel matrices of the equivalent
  monomial moments, including a boundary vector and its atomic witness;
* hat-function moments in slab geometry, where realizability reduces to
  positivity and the rank counts the positive blocks;
* first-order piecewise moments on a spherical triangle, where the
  analytic answer (a cone over the triangle) differs from the answer for
  the set of densities a fixed quadrature rule can represent.
"""

import numpy as np

from pwlmoments import MomentVector, check, isotropic_moment, numerically_realizable, parse_model
from pwlmoments import geometry as geo
from pwlmoments.quadrature import sphere_rule


def show(label, verdict, atoms=4):
    rank = "" if verdict.rank is None else f", rank {verdict.rank}"
    print(f"{label}: {verdict.status.value}{rank}")
    witness = verdict.witness
    if witness is None or not len(witness.weights):
        return
    for w, x in zip(witness.weights[:atoms], witness.locations[:atoms]):
        print(f"    atom weight {w:.4f} at {np.round(x, 4)}")
    if len(witness.weights) > atoms:
        print(f"    ... {len(witness.weights) - atoms} more atoms")


def legendre():
    basis, _ = parse_model("M_2")
    # moments of the isotropic density, of a point mass at mu = 1 and of a
    # vector whose first moment exceeds its mass
    show("M_2 isotropic", check(MomentVector([2.0, 0.0, 0.0], basis)))
    show("M_2 beam at mu=1", check(MomentVector([1.0, 1.0, 1.0], basis)))
    show("M_2 too anisotropic", check(MomentVector([1.0, 1.2, 1.0], basis)))


def hat():
    basis, _ = parse_model("HFM_5")
    show("HFM_5 all positive", check(MomentVector([0.1, 0.4, 0.3, 0.2, 0.1], basis)))
    # two zero entries split the positive values into separate blocks
    show("HFM_5 with gaps", check(MomentVector([0.2, 0.0, 0.3, 0.0, 0.1], basis)))


def sphere_triangle():
    basis, _ = parse_model("PMM_32", dim=3)
    # isotropic on every octant except the first, which holds a single beam
    # pointing at a surface point of its triangle
    vals = isotropic_moment(basis).values.reshape(8, 4).copy()
    tri = basis.mesh.triangle(0)
    beam = geo.project_to_sphere(np.array([0.5, 0.3, 0.2]) @ tri.vertices)
    vals[0] = [1.0, *beam]
    vec = MomentVector(vals.ravel(), basis)
    show("PMM_32 beam in the first octant", check(vec))
    # a degree-6 rule on the unrefined octants has no node exactly at the beam
    numeric = numerically_realizable(vec, sphere_rule(1, 6, 0))
    print(f"    representable by the degree-6 rule: {'yes' if numeric.realizable else 'no'}")


if __name__ == "__main__":
    legendre()
    print()
    hat()
    print()
    sphere_triangle()
