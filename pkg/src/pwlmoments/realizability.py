"""Realizability of moment vectors.

A moment vector ``u`` is realizable if some non-negative density (or
measure) ``psi`` reproduces it, ``u = <b psi>``.  The checkers below decide
membership in the closed set (non-strict) and its interior (strict) and,
where possible, return an atomic representing density together with the
rank, the smallest number of atoms needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.polynomial import legendre as npleg
from scipy import optimize, spatial

from . import geometry as geo
from .bases import AngularBasis, Family, MomentVector, dimension, evaluate, nodal_basis
from .geometry import SphericalTriangle

#: relative eigenvalue band for semi-definiteness tests
EIG_TOL = 1e-12
#: relative band for interval and hull membership
MEMBERSHIP_TOL = 1e-12
#: witnesses must reproduce moments to this relative accuracy
WITNESS_TOL = 1e-12


class Status(str, Enum):
    STRICT = "StrictlyRealizable"
    BOUNDARY = "BoundaryRealizable"
    NOT = "NotRealizable"


@dataclass(frozen=True, eq=False)
class AtomicDensity:
    """Finite sum of weighted Dirac atoms ``sum_i w_i delta(Omega - x_i)``.

    ``elements`` assigns atoms to mesh elements for piecewise bases (atoms
    on shared boundaries must say which one-sided basis sees them).
    """

    weights: np.ndarray
    locations: np.ndarray
    elements: np.ndarray | None = None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        loc = np.asarray(self.locations, dtype=float)
        if loc.ndim == 2 and loc.shape[1] == 3:
            loc = loc.reshape(-1, 3)
        else:
            loc = loc.reshape(-1)
        if len(loc) != len(w):
            raise ValueError("one location per weight required")
        if np.any(w <= 0) or not np.all(np.isfinite(w)):
            raise ValueError("atom weights must be positive")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "locations", loc)
        if self.elements is not None:
            object.__setattr__(self, "elements", np.asarray(self.elements, dtype=np.int64).reshape(-1))

    def __len__(self):
        return len(self.weights)

    @property
    def num_atoms(self) -> int:
        return len(self.weights)

    def moments(self, basis: AngularBasis) -> np.ndarray:
        """Moments ``sum_i w_i b(x_i)`` against ``basis``."""
        if len(self.weights) == 0:
            return np.zeros(dimension(basis))
        element = self.elements if basis.is_piecewise else None
        return self.weights @ np.atleast_2d(evaluate(basis, self.locations, element))

    def __repr__(self):
        atoms = ", ".join(f"{w:.6g}@{np.array2string(np.atleast_1d(x), precision=6)}"
                          for w, x in zip(self.weights, self.locations))
        return f"AtomicDensity([{atoms}])"


@dataclass(frozen=True, eq=False)
class RealizabilityVerdict:
    status: Status
    rank: int | None = None
    witness: AtomicDensity | None = None
    strict: bool = False

    @property
    def realizable(self) -> bool:
        """Answer to the question asked (interior if ``strict`` else closure)."""
        if self.strict:
            return self.status is Status.STRICT
        return self.status is not Status.NOT

    def __bool__(self):
        return self.realizable


def _values(u) -> np.ndarray:
    arr = np.asarray(u.values if isinstance(u, MomentVector) else u, dtype=float)
    if arr.ndim != 1 or not np.all(np.isfinite(arr)):
        raise ValueError("moment vector must be a finite 1-d array")
    return arr


def _scale(u: np.ndarray) -> float:
    s = float(np.max(np.abs(u))) if u.size else 0.0
    return s if s > 0 else 1.0


def _validated(witness: AtomicDensity | None, basis: AngularBasis, u: np.ndarray):
    if witness is None:
        return None
    if np.max(np.abs(witness.moments(basis) - u), initial=0.0) > WITNESS_TOL * _scale(u):
        return None
    return witness


# ---------------------------------------------------------------------------
# full moments in slab geometry
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HankelSet:
    """Hankel matrices ``A(j) = (u_{i+l})``, ``B(j) = (u_{i+l+1})``, ``C(j) = (u_{i+l})_{i,l>=1}``."""

    u: tuple

    def A(self, j: int) -> np.ndarray:
        m = np.asarray(self.u)
        i = np.arange(j + 1)
        return m[i[:, None] + i[None, :]]

    def B(self, j: int) -> np.ndarray:
        m = np.asarray(self.u)
        i = np.arange(j + 1)
        return m[i[:, None] + i[None, :] + 1]

    def C(self, j: int) -> np.ndarray:
        m = np.asarray(self.u)
        i = np.arange(1, j + 1)
        return m[i[:, None] + i[None, :]].reshape(j, j)


def legendre_to_monomial(u) -> np.ndarray:
    """Monomial moments ``<mu^i psi>`` from Legendre moments ``<P_l psi>``.

    Uses ``mu^i = sum_l a_il P_l`` with the (lower triangular) coefficients
    from :func:`numpy.polynomial.legendre.poly2leg`.
    """
    u = _values(u)
    n = len(u)
    out = np.empty(n)
    for i in range(n):
        coef = npleg.poly2leg(np.eye(n)[i])
        out[i] = coef @ u[:len(coef)]
    return out


def _definiteness(mats) -> tuple[bool, bool]:
    """(all PSD, all PD) with the relative eigenvalue band."""
    psd, pd = True, True
    for m in mats:
        if m.size == 0:
            continue
        ev = np.linalg.eigvalsh(0.5 * (m + m.T))
        band = EIG_TOL * (1.0 + max(abs(ev[-1]), 0.0))
        psd &= bool(ev[0] >= -band)
        pd &= bool(ev[0] > band)
    return psd, pd


def _is_singular(m: np.ndarray) -> bool:
    ev = np.linalg.eigvalsh(0.5 * (m + m.T))
    return bool(abs(ev[0]) <= EIG_TOL * (1.0 + abs(ev[-1])))


def full_moment_rank(m) -> int:
    """Rank of monomial moments ``m_0..m_N`` (the odd case uses ``m_0..m_{N-1}``)."""
    m = _values(m)
    big_n = len(m) - 1
    k = big_n // 2
    h = HankelSet(tuple(m))
    for j in range(1, k + 1):
        if _is_singular(h.A(j)):
            return j
    return k + 1


def _gauss_atoms(m: np.ndarray, r: int):
    """``r`` nodes and weights matching the monomial moments ``m_0..m_{2r-1}``."""
    a = np.array([[m[i + j] for j in range(r)] for i in range(r)])
    rhs = -np.array([m[i + r] for i in range(r)])
    c = np.linalg.solve(a, rhs)
    nodes = np.roots(np.concatenate([[1.0], c[::-1]]))
    if np.max(np.abs(nodes.imag), initial=0.0) > 1e-8:
        return None
    nodes = np.sort(nodes.real)
    vander = nodes[None, :] ** np.arange(len(m))[:, None]
    weights = np.linalg.lstsq(vander, m, rcond=None)[0]
    return nodes, weights


def _full_witness(m: np.ndarray, rank: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Candidate atomic representations with ``rank`` atoms."""
    big_n = len(m) - 1
    candidates = []
    if 2 * rank - 1 <= big_n:
        try:
            g = _gauss_atoms(m, rank)
        except np.linalg.LinAlgError:
            g = None
        if g is not None:
            candidates.append(g)
    if rank >= 1:
        # one atom fixed at an endpoint, the rest a Gauss rule of the modified moments
        for end in (-1.0, 1.0):
            r = rank - 1
            if r == 0:
                candidates.append((np.array([end]), np.array([m[0]])))
                continue
            mod = m[:-1] - end * m[1:]
            try:
                g = _gauss_atoms(mod, r)
            except np.linalg.LinAlgError:
                continue
            if g is None:
                continue
            nodes, wmod = g
            with np.errstate(divide="ignore", invalid="ignore"):
                w = wmod / (nodes - end)
            w_end = m[0] - np.sum(w)
            candidates.append((np.concatenate([[end], nodes]), np.concatenate([[w_end], w])))
    return candidates


def check_full_1d(u, strict: bool = False) -> RealizabilityVerdict:
    """Hankel test for full moments in slab geometry.

    ``u`` is a :class:`MomentVector` against the monomial or Legendre basis
    (Legendre moments are converted first) or a plain monomial array.
    """
    if isinstance(u, MomentVector):
        basis = u.basis
        if basis.family is Family.LEGENDRE:
            m = legendre_to_monomial(u.values)
        elif basis.family is Family.MONOMIAL:
            m = _values(u)
        else:
            raise ValueError("Hankel conditions apply to full moments in slab geometry")
    else:
        m = _values(u)
        basis = AngularBasis.monomial(len(m) - 1)
    values = _values(u)
    big_n = len(m) - 1
    if m[0] <= 0:
        # a non-negative measure without mass is the zero measure
        if m[0] == 0 and np.all(m == 0):
            return RealizabilityVerdict(Status.BOUNDARY, 0, AtomicDensity([], []), strict)
        return RealizabilityVerdict(Status.NOT, strict=strict)
    # the eigenvalue band is applied to the mass-normalised moments, so the
    # verdict does not change when u is scaled
    mass = m[0]
    m = m / mass
    h = HankelSet(tuple(m))
    if big_n % 2 == 0:
        k = big_n // 2
        mats = [h.A(k)] + ([h.A(k - 1) - h.C(k)] if k >= 1 else [])
    else:
        k = (big_n - 1) // 2
        mats = [h.A(k) - h.B(k), h.A(k) + h.B(k)]
    psd, pd = _definiteness(mats)
    if not psd:
        return RealizabilityVerdict(Status.NOT, strict=strict)
    status = Status.STRICT if pd else Status.BOUNDARY
    rank = full_moment_rank(m)
    witness = None
    for nodes, weights in _full_witness(m, rank):
        if np.any(weights <= 0) or np.any(np.abs(nodes) > 1 + 1e-10):
            continue
        cand = AtomicDensity(mass * weights, np.clip(nodes, -1.0, 1.0))
        witness = _validated(cand, basis, values)
        if witness is not None:
            break
    return RealizabilityVerdict(status, rank, witness, strict)


# ---------------------------------------------------------------------------
# hat functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PositiveBlocks:
    starts: tuple
    ends: tuple

    @property
    def orders(self) -> tuple:
        return tuple(e - s + 1 for s, e in zip(self.starts, self.ends))

    def __len__(self):
        return len(self.starts)

    def block(self, u, l: int) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        out = np.zeros_like(u)
        s, e = self.starts[l], self.ends[l]
        out[s:e + 1] = u[s:e + 1]
        return out


def positive_blocks(u) -> PositiveBlocks:
    """Start and end indices of the maximal runs of positive entries."""
    u = _values(u)
    if np.any(u < 0):
        raise ValueError("positive blocks are defined for non-negative vectors")
    pos = np.concatenate([[False], u > 0, [False]])
    d = np.diff(pos.astype(np.int8))
    starts = np.flatnonzero(d == 1)
    ends = np.flatnonzero(d == -1) - 1
    return PositiveBlocks(tuple(int(s) for s in starts), tuple(int(e) for e in ends))


def hat_rank(u) -> int:
    return sum(math.ceil(o / 2) for o in positive_blocks(u).orders)


def _hat_block_atoms(u: np.ndarray, nodes: np.ndarray, s: int, e: int):
    """Atoms for one positive block: adjacent pairs, the odd case with the last interior node doubled."""
    if s == e:
        return [(u[s], nodes[s], s)]
    idx = list(range(s, e + 1))
    mass = {i: u[i] for i in idx}
    pairs = []
    if len(idx) % 2 == 1:
        dup = e - 1
        # node ``dup`` appears twice; its moment is shared between both copies
        seq = [(i, mass[i]) for i in idx if i < dup] + [(dup, 0.5 * mass[dup]), (dup, 0.5 * mass[dup])] \
            + [(i, mass[i]) for i in idx if i > dup]
    else:
        seq = [(i, mass[i]) for i in idx]
    for (i, wi), (j, wj) in zip(seq[0::2], seq[1::2]):
        w = wi + wj
        loc = (wi * nodes[i] + wj * nodes[j]) / w
        pairs.append((w, loc, min(i, j)))
    return pairs


def _hat_1d_witness(u: np.ndarray, partition: geo.Partition1D) -> AtomicDensity:
    nodes = partition.nodes
    k = partition.num_intervals
    atoms = []
    blocks = positive_blocks(u)
    for s, e in zip(blocks.starts, blocks.ends):
        atoms.extend(_hat_block_atoms(u, nodes, s, e))
    w = np.array([a[0] for a in atoms])
    loc = np.array([a[1] for a in atoms])
    # element: the interval to the right of the left node of the pair (a lone
    # node atom goes to its left interval when there is one)
    elem = np.array([min(a[2], k - 1) if a[1] > nodes[a[2]] or a[2] == 0 else a[2] - 1
                     for a in atoms], dtype=np.int64)
    return AtomicDensity(w, loc, elem)


def _vertex_atoms(u: np.ndarray, triangulation: geo.SphericalTriangulation) -> AtomicDensity:
    """``sum_i u_i delta(Omega - v_i)``; each atom belongs to the lowest-index triangle at its vertex."""
    pos = np.flatnonzero(u > 0)
    tri = triangulation.triangles
    owner = np.array([np.flatnonzero((tri == p).any(axis=1))[0] for p in pos], dtype=np.int64)
    return AtomicDensity(u[pos], triangulation.vertices[pos], owner)


def check_hat(u: MomentVector, strict: bool = False) -> RealizabilityVerdict:
    """Sign test for hat-function moments (slab or sphere)."""
    if not isinstance(u, MomentVector) or u.basis.family not in (Family.HAT, Family.HAT_SPHERE):
        raise ValueError("check_hat needs moments against a hat-function basis")
    values = _values(u)
    if np.any(values < 0):
        return RealizabilityVerdict(Status.NOT, strict=strict)
    status = Status.STRICT if np.all(values > 0) else Status.BOUNDARY
    if u.basis.family is Family.HAT:
        witness = _validated(_hat_1d_witness(values, u.basis.mesh), u.basis, values)
        return RealizabilityVerdict(status, hat_rank(values), witness, strict)
    witness = _validated(_vertex_atoms(values, u.basis.mesh), u.basis, values)
    return RealizabilityVerdict(status, None, witness, strict)


def node_atom_witness(u: MomentVector) -> AtomicDensity:
    """The representation ``sum_i u_i delta(mu - mu_i)`` for hat moments (zeros dropped).

    Atoms on interior nodes are assigned to the interval on their left.
    """
    values = _values(u)
    if u.basis.family is not Family.HAT or np.any(values < 0):
        raise ValueError("node atoms need non-negative slab hat moments")
    pos = np.flatnonzero(values > 0)
    return AtomicDensity(values[pos], u.basis.mesh.nodes[pos], np.maximum(pos - 1, 0))


# ---------------------------------------------------------------------------
# partial moments
# ---------------------------------------------------------------------------


def check_pm_1d(u: MomentVector, strict: bool = False) -> RealizabilityVerdict:
    """Interval test for first-order partial moments in slab geometry."""
    if isinstance(u, MomentVector):
        if u.basis.family is not Family.PARTIAL:
            raise ValueError("check_pm_1d needs moments against the slab partial-moment basis")
        basis = u.basis
    else:
        raise ValueError("check_pm_1d needs a MomentVector")
    values = _values(u)
    if len(values) % 2:
        raise ValueError("partial moments come in pairs")
    nodes = basis.mesh.nodes
    u0, u1 = values[0::2], values[1::2]
    h = np.diff(nodes)
    zero = (u0 == 0) & (u1 == 0)
    positive = u0 > 0
    # distance of the mean from the interval, measured in units of u0
    lo = u1 - nodes[:-1] * u0
    hi = nodes[1:] * u0 - u1
    band = MEMBERSHIP_TOL * h * np.abs(u0)
    inside = positive & (lo >= -band) & (hi >= -band)
    interior = positive & (lo > band) & (hi > band)
    if not np.all(zero | inside):
        return RealizabilityVerdict(Status.NOT, strict=strict)
    status = Status.STRICT if np.all(interior) else Status.BOUNDARY
    idx = np.flatnonzero(positive)
    means = np.clip(u1[idx] / u0[idx], nodes[idx], nodes[idx + 1])
    witness = _validated(AtomicDensity(u0[idx], means, idx), basis, values)
    return RealizabilityVerdict(status, len(idx), witness, strict)


def pm_endpoint_witness(u: MomentVector) -> AtomicDensity:
    """Two atoms per interval, at its endpoints (zero weights dropped)."""
    values = _values(u)
    nodes = u.basis.mesh.nodes
    u0, u1 = values[0::2], values[1::2]
    h = np.diff(nodes)
    wl = np.maximum((nodes[1:] * u0 - u1) / h, 0.0)
    wr = np.maximum((u1 - nodes[:-1] * u0) / h, 0.0)
    j = np.arange(len(h))
    w = np.concatenate([wl, wr])
    loc = np.concatenate([nodes[:-1], nodes[1:]])
    elem = np.concatenate([j, j])
    keep = w > 0
    return AtomicDensity(w[keep], loc[keep], elem[keep])


def _pm_3d_atoms(u0: float, uhat: np.ndarray, tri: SphericalTriangle):
    """Atoms of a representing density for one triangle (``u0 > 0``, ``uhat`` in the hull)."""
    verts = tri.vertices
    norm = float(np.linalg.norm(uhat))
    normal = tri.normal
    plane = float(normal @ verts[0])
    if abs(norm - 1.0) <= MEMBERSHIP_TOL:
        return [u0], [uhat / norm]
    lam = np.linalg.solve(verts.T, uhat)
    if abs(float(normal @ uhat) - plane) <= MEMBERSHIP_TOL:
        lam = np.clip(lam / lam.sum(), 0.0, None)
        keep = lam > 0
        return list(u0 * lam[keep]), list(verts[keep])
    d = uhat / norm
    q = d * plane / float(normal @ d)
    qn = float(np.linalg.norm(q))
    theta = (norm - qn) / (1.0 - qn)
    lam = np.linalg.solve(verts.T, q)
    lam = np.clip(lam / lam.sum(), 0.0, None)
    weights, locs = [], []
    if theta > 0:
        weights.append(u0 * theta)
        locs.append(d)
    for l, v in zip(lam, verts):
        if l > 0 and theta < 1:
            weights.append(u0 * (1.0 - theta) * l)
            locs.append(v)
    return weights, locs


def check_pm_3d(uK, tri: SphericalTriangle, strict: bool = False) -> RealizabilityVerdict:
    """Convex-hull test for the partial moments ``(u0, u1)`` of one spherical triangle."""
    uK = _values(uK)
    if uK.shape != (4,):
        raise ValueError("partial moments on a triangle have four components")
    if uK[0] < 0:
        raise ValueError("negative mass u0")
    if uK[0] == 0:
        if np.all(uK[1:] == 0):
            return RealizabilityVerdict(Status.BOUNDARY, None, AtomicDensity([], np.zeros((0, 3))), strict)
        return RealizabilityVerdict(Status.NOT, strict=strict)
    uhat = uK[1:] / uK[0]
    if not geo.in_spherical_hull(tri, uhat, strict=False, tol=MEMBERSHIP_TOL):
        return RealizabilityVerdict(Status.NOT, strict=strict)
    status = Status.STRICT if geo.in_spherical_hull(tri, uhat, strict=True, tol=MEMBERSHIP_TOL) \
        else Status.BOUNDARY
    w, loc = _pm_3d_atoms(float(uK[0]), uhat, tri)
    witness = AtomicDensity(w, np.array(loc).reshape(-1, 3), np.zeros(len(w), dtype=np.int64))
    moments = witness.weights @ np.concatenate([np.ones((len(w), 1)), witness.locations], axis=1)
    if np.max(np.abs(moments - uK)) > WITNESS_TOL * _scale(uK):
        witness = None
    return RealizabilityVerdict(status, None, witness, strict)


def check_pm_sphere(u: MomentVector, strict: bool = False) -> RealizabilityVerdict:
    """Triangle-wise hull test for partial moments on a spherical triangulation."""
    if u.basis.family is not Family.PARTIAL_SPHERE:
        raise ValueError("check_pm_sphere needs moments against the spherical partial-moment basis")
    values = _values(u).reshape(-1, 4)
    mesh = u.basis.mesh
    statuses, weights, locs, elems = [], [], [], []
    complete = True
    for t, uK in enumerate(values):
        if uK[0] < 0:
            return RealizabilityVerdict(Status.NOT, strict=strict)
        v = check_pm_3d(uK, mesh.triangle(t), strict)
        if v.status is Status.NOT:
            return RealizabilityVerdict(Status.NOT, strict=strict)
        statuses.append(v.status)
        if v.witness is None:
            complete = False
            continue
        weights.extend(v.witness.weights)
        locs.extend(v.witness.locations)
        elems.extend([t] * len(v.witness))
    status = Status.STRICT if all(s is Status.STRICT for s in statuses) else Status.BOUNDARY
    witness = None
    if complete:
        witness = _validated(AtomicDensity(weights, np.array(locs).reshape(-1, 3), elems),
                             u.basis, _values(u))
    return RealizabilityVerdict(status, None, witness, strict)


def check(u: MomentVector, strict: bool = False) -> RealizabilityVerdict:
    """Dispatch to the analytic checker of the basis family."""
    f = u.basis.family
    if f in (Family.MONOMIAL, Family.LEGENDRE):
        return check_full_1d(u, strict)
    if f in (Family.HAT, Family.HAT_SPHERE):
        return check_hat(u, strict)
    if f is Family.PARTIAL:
        return check_pm_1d(u, strict)
    if f is Family.PARTIAL_SPHERE:
        return check_pm_sphere(u, strict)
    raise NotImplementedError("no analytic realizability test for spherical harmonics; "
                              "use numerically_realizable")


# ---------------------------------------------------------------------------
# numerically realizable set
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class NumericalVerdict:
    """Membership in the set of moments reproducible by a non-negative nodal density.

    ``nodal_density`` (shape ``(E, q)`` like the rule weights) is a witness
    with ``sum w b psi = u`` when one was constructed.
    """

    realizable: bool
    nodal_density: np.ndarray | None = None

    def __bool__(self):
        return self.realizable


def _endpoint_nodes(rule, partition: geo.Partition1D):
    """Rule positions ``(element, node)`` of every model interval's two endpoints."""
    nodes = rule.nodes
    parent = rule.parent
    k = partition.num_intervals
    left, right = [], []
    for j in range(k):
        elems = np.flatnonzero(parent == j)
        if elems.size == 0:
            raise ValueError(f"no quadrature element in interval {j}")
        lo, hi = partition.interval(j)
        li = np.flatnonzero(nodes[elems] == lo)
        ri = np.flatnonzero(nodes[elems] == hi)
        if li.size == 0 or ri.size == 0:
            raise ValueError(f"interval {j}: the endpoints are not nodes of the quadrature")
        li, ri = np.unravel_index(li[0], (elems.size, nodes.shape[1])), \
            np.unravel_index(ri[0], (elems.size, nodes.shape[1]))
        left.append((int(elems[li[0]]), int(li[1])))
        right.append((int(elems[ri[0]]), int(ri[1])))
    return left, right


def numerically_realizable(u: MomentVector, rule, strict: bool = False) -> NumericalVerdict:
    """Is ``u`` realizable by a non-negative density on the nodes of ``rule``?

    Slab hat and partial-moment bases: identical to the analytic set when
    every interval endpoint is a node of the rule; the witness puts the
    endpoint atoms of the two-atom-per-interval representation on those
    nodes.  Spherical partial moments: per triangle ``u1/u0`` must lie in the
    convex hull of the rule's nodes on that triangle.  Other bases fall back
    to a linear-programming feasibility test.

    Raises
    ------
    ValueError
        For slab piecewise bases whose interval endpoints are not rule nodes.
    """
    basis = u.basis
    values = _values(u)
    if basis.family in (Family.HAT, Family.PARTIAL):
        left, right = _endpoint_nodes(rule, basis.mesh)
        verdict = check(u, strict)
        if not verdict.realizable:
            return NumericalVerdict(False)
        nodes = basis.mesh.nodes
        h = np.diff(nodes)
        if basis.family is Family.HAT:
            # node i carries u_i; it is assigned to its left interval (interval 0 for i = 0)
            wl = np.zeros(len(h))
            wr = np.zeros(len(h))
            wl[0] = values[0]
            wr[:] = values[1:]
        else:
            u0, u1 = values[0::2], values[1::2]
            wl = np.maximum((nodes[1:] * u0 - u1) / h, 0.0)
            wr = np.maximum((u1 - nodes[:-1] * u0) / h, 0.0)
        psi = np.zeros(rule.weights.shape)
        for j in range(len(h)):
            e, q = left[j]
            psi[e, q] += wl[j] / rule.weights[e, q]
            e, q = right[j]
            psi[e, q] += wr[j] / rule.weights[e, q]
        achieved = nodal_basis(basis, rule).moments(psi)
        if np.max(np.abs(achieved - values)) > WITNESS_TOL * _scale(values):
            raise RuntimeError("nodal witness does not reproduce the moments")
        return NumericalVerdict(True, psi)
    if basis.family is Family.PARTIAL_SPHERE:
        return NumericalVerdict(_pm_sphere_numerical(values.reshape(-1, 4), rule, strict))
    return _lp_realizable(u, rule, strict)


def _pm_sphere_numerical(values: np.ndarray, rule, strict: bool) -> bool:
    nodes = rule.nodes
    for t, uK in enumerate(values):
        if uK[0] < 0:
            return False
        if uK[0] == 0:
            if strict or np.any(uK[1:] != 0):
                return False
            continue
        pts = nodes[rule.parent == t].reshape(-1, 3)
        hull = spatial.ConvexHull(pts)
        uhat = uK[1:] / uK[0]
        dist = hull.equations[:, :3] @ uhat + hull.equations[:, 3]
        if strict:
            if np.any(dist >= -MEMBERSHIP_TOL):
                return False
        elif np.any(dist > MEMBERSHIP_TOL):
            return False
    return True


def _lp_realizable(u: MomentVector, rule, strict: bool) -> NumericalVerdict:
    """Feasibility of ``sum w b psi = u, psi >= 0``; strict: ``psi >= t > 0`` is attainable."""
    nb = nodal_basis(u.basis, rule)
    values = _values(u)
    n = len(values)
    size = rule.size
    mat = np.zeros((n, size))
    flat_w = rule.weights.ravel()
    vals = nb.values.reshape(size, -1)
    if nb.index is None:
        mat[:, :] = (vals * flat_w[:, None]).T
    else:
        idx = np.repeat(nb.index, rule.points_per_element, axis=0)
        for c in range(vals.shape[1]):
            np.add.at(mat, (idx[:, c], np.arange(size)), vals[:, c] * flat_w)
    scale = _scale(values)
    if not strict:
        res = optimize.linprog(np.zeros(size), A_eq=mat, b_eq=values / scale,
                               bounds=(0, None), method="highs")
        ok = res.status == 0
        psi = res.x.reshape(rule.weights.shape) * scale if ok else None
        return NumericalVerdict(bool(ok), psi)
    # maximise t subject to psi_i >= t, t <= 1
    c = np.zeros(size + 1)
    c[-1] = -1.0
    a_eq = np.hstack([mat, np.zeros((n, 1))])
    a_ub = np.hstack([-np.eye(size), np.ones((size, 1))])
    res = optimize.linprog(c, A_ub=a_ub, b_ub=np.zeros(size), A_eq=a_eq, b_eq=values / scale,
                           bounds=[(0, None)] * size + [(None, 1.0)], method="highs")
    ok = res.status == 0 and -res.fun > MEMBERSHIP_TOL
    psi = res.x[:-1].reshape(rule.weights.shape) * scale if ok else None
    return NumericalVerdict(bool(ok), psi)
