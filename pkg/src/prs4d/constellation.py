"""4D modulation formats: polarization-ring-switching, PM-8QAM and 2A8PSK.

All constellations are represented as an M x 4 real matrix (columns
[Re X, Im X, Re Y, Im Y]) with an M x m bit-label matrix, normalized to
unit average 4D symbol energy. Rows are ordered by label value with the
first bit as MSB, so row index == integer value of the label.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import cos, pi, sin, sqrt

import numpy as np


class DegenerateGeometryError(ValueError):
    """Raised when geometry parameters collapse two constellation points."""


@dataclass(frozen=True)
class PrsParams:
    """Free geometry parameters of the ring-switching format.

    rho is the outer/inner ring ratio R2/R1; theta is the relative phase
    between inner- and outer-ring points. Beyond theta = pi/4 the inner
    8-point set self-coincides by symmetry, hence the open interval.
    """

    rho: float
    theta: float

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError(f"rho must be > 0, got {self.rho}")
        if not 0 < self.theta < pi / 4:
            raise ValueError(f"theta must be in (0, pi/4), got {self.theta}")


@dataclass(frozen=True)
class Constellation4D:
    """Immutable 4D constellation with bit labeling.

    points: M x 4 float matrix, labels: M x m uint8 matrix. The labeling
    is a bijection between {0,1}^m and rows; with the canonical row order
    labels[i] is the binary expansion of i (b1 = MSB).
    """

    points: np.ndarray
    labels: np.ndarray
    name: str

    def __post_init__(self):
        pts = np.ascontiguousarray(np.asarray(self.points, dtype=np.float64))
        labs = np.ascontiguousarray(np.asarray(self.labels, dtype=np.uint8))
        if pts.ndim != 2 or pts.shape[1] != 4:
            raise ValueError("points must be M x 4")
        if labs.shape[0] != pts.shape[0]:
            raise ValueError("labels/points row mismatch")
        m = labs.shape[1]
        if pts.shape[0] != 2**m:
            raise ValueError("M must equal 2^m")
        vals = labs @ (1 << np.arange(m - 1, -1, -1))
        if len(np.unique(vals)) != pts.shape[0]:
            raise ValueError("labels must be a bijection")
        pts.flags.writeable = False
        labs.flags.writeable = False
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "labels", labs)

    @property
    def M(self) -> int:
        return self.points.shape[0]

    @property
    def m(self) -> int:
        return self.labels.shape[1]

    def label_values(self) -> np.ndarray:
        """Integer value of each row's label (b1 = MSB)."""
        m = self.m
        return self.labels @ (1 << np.arange(m - 1, -1, -1))

    def label_strings(self) -> list[str]:
        return ["".join(str(b) for b in row) for row in self.labels]


def _canonical_labels(m: int) -> np.ndarray:
    """M x m matrix whose row i is the binary expansion of i, MSB first."""
    vals = np.arange(2**m)
    return ((vals[:, None] >> np.arange(m - 1, -1, -1)) & 1).astype(np.uint8)


def min_pairwise_distance(points: np.ndarray) -> float:
    """Smallest Euclidean distance between any two rows."""
    d2 = np.sum((points[:, None, :] - points[None, :, :]) ** 2, axis=-1)
    np.fill_diagonal(d2, np.inf)
    return float(np.sqrt(d2.min()))


def build_4d64prs(params: PrsParams) -> Constellation4D:
    """Construct the 64-point polarization-ring-switching constellation.

    One polarization of every point sits on the inner ring (radius R1)
    and the other on the outer ring (radius R2), giving constant 4D
    modulus. Normalization fixes R1^2 + R2^2 = 1 so every point has unit
    energy. Bits [b3, b6] select one of the four sign-pattern families;
    bits [b1, b2, b4, b5] select the 4D orthant (coordinate signs
    [(-1)^b2, (-1)^b1, (-1)^b4, (-1)^b5]).
    """
    rho, theta = params.rho, params.theta
    r1 = 1.0 / sqrt(1.0 + rho * rho)
    r2 = rho * r1
    phi2 = pi / 4 - theta  # phi1 fixed at pi/4
    nu1 = r1 * cos(phi2)
    nu3 = r1 * sin(phi2)
    nu2 = r2 / sqrt(2.0)

    families = np.array(
        [
            [nu1, nu3, nu2, nu2],
            [nu3, nu1, nu2, nu2],
            [nu2, nu2, nu1, nu3],
            [nu2, nu2, nu3, nu1],
        ]
    )

    labels = _canonical_labels(6)
    # columns of labels are [b1, b2, b3, b4, b5, b6]
    b1, b2, b3, b4, b5, b6 = (labels[:, k] for k in range(6))
    fam = 2 * b3 + b6
    signs = np.stack(
        [(-1.0) ** b2, (-1.0) ** b1, (-1.0) ** b4, (-1.0) ** b5], axis=1
    )
    points = signs * families[fam]

    if min_pairwise_distance(points) < 1e-9:
        raise DegenerateGeometryError(
            f"rho={rho}, theta={theta} collapses constellation points"
        )
    return Constellation4D(points=points, labels=labels, name="4d64prs")


# Star 8QAM: inner QPSK plus outer QPSK rotated 45 degrees.
_STAR8_RING_RATIO = 1.0 + sqrt(3.0)


def _star8_points() -> np.ndarray:
    """Unnormalized star 8QAM, complex, indices 0-3 inner and 4-7 outer."""
    inner = np.exp(1j * (np.arange(4) * pi / 2))
    outer = _STAR8_RING_RATIO * np.exp(1j * (np.arange(4) * pi / 2 + pi / 4))
    return np.concatenate([inner, outer])


def _star8_labeling() -> np.ndarray:
    """Best ring-respecting 3-bit labeling of the star 8QAM.

    The first bit selects the ring (0 = inner); the remaining two bits
    are assigned by exhaustive search over the 4! x 4! per-ring
    permutations, minimizing total Hamming distance across
    nearest-neighbor pairs. Ties are broken by lexicographic order of
    the label assignment, so the result is deterministic.
    """
    pts = _star8_points()
    d = np.abs(pts[:, None] - pts[None, :])
    np.fill_diagonal(d, np.inf)
    # nearest-neighbor adjacency: every pair achieving a point's own minimum
    edges = set()
    for p in range(8):
        dmin = d[p].min()
        for q in range(8):
            if d[p, q] <= dmin * (1 + 1e-9):
                edges.add((min(p, q), max(p, q)))
    edges = sorted(edges)

    best = None
    best_cost = None
    for perm_in in itertools.permutations(range(4)):
        for perm_out in itertools.permutations(range(4)):
            # labels[point] = 3-bit value
            lab = [0] * 8
            for k in range(4):
                lab[k] = perm_in[k]  # ring bit 0
                lab[4 + k] = 4 + perm_out[k]  # ring bit 1
            cost = sum(bin(lab[p] ^ lab[q]).count("1") for p, q in edges)
            key = (cost, tuple(lab))
            if best_cost is None or key < (best_cost, best):
                best, best_cost = tuple(lab), cost
    return np.array(best)


def build_pm8qam() -> Constellation4D:
    """Polarization-multiplexed star 8QAM as a 4D Cartesian product.

    64 points, 6-bit labels formed by concatenating the two 3-bit
    per-polarization labels (X first).
    """
    pts2d = _star8_points()
    lab2d = _star8_labeling()
    # invert: symbol index for each 3-bit label value
    point_of_label = np.empty(8, dtype=int)
    point_of_label[lab2d] = np.arange(8)

    labels = _canonical_labels(6)
    vals = labels @ (1 << np.arange(5, -1, -1))
    vx, vy = vals >> 3, vals & 7
    cx = pts2d[point_of_label[vx]]
    cy = pts2d[point_of_label[vy]]
    points = np.stack([cx.real, cx.imag, cy.real, cy.imag], axis=1)
    points /= sqrt(np.mean(np.sum(points**2, axis=1)))
    return Constellation4D(points=points, labels=labels, name="pm8qam")


def _gray_phase_index(v: np.ndarray) -> np.ndarray:
    """Map a 3-bit label value to an 8PSK phase index with Gray adjacency."""
    # inverse of gray(k) = k ^ (k >> 1)
    inv = np.empty(8, dtype=int)
    for k in range(8):
        inv[k ^ (k >> 1)] = k
    return inv[v]


def xor_ring_rule(bits: np.ndarray) -> np.ndarray:
    """Default ring selector: XOR of all six bits."""
    return np.bitwise_xor.reduce(bits, axis=-1)


def build_6b4d_2a8psk(ring_ratio: float, ring_rule=xor_ring_rule) -> Constellation4D:
    """Two-amplitude 8PSK over both polarizations, 6 bit/4D-sym.

    Three Gray bits per polarization select the 8PSK phase; ring_rule
    maps the 6 bits to the X-polarization ring index, and Y takes the
    complementary ring, so the 4D modulus is constant.
    """
    if not ring_ratio > 0:
        raise ValueError(f"ring_ratio must be > 0, got {ring_ratio}")
    radii = np.array([1.0, ring_ratio]) / sqrt(1.0 + ring_ratio**2)

    labels = _canonical_labels(6)
    vals = labels @ (1 << np.arange(5, -1, -1))
    vx, vy = vals >> 3, vals & 7
    phx = _gray_phase_index(vx) * pi / 4
    phy = _gray_phase_index(vy) * pi / 4
    ring_x = np.asarray(ring_rule(labels)).astype(int)
    rx = radii[ring_x]
    ry = radii[1 - ring_x]
    points = np.stack(
        [rx * np.cos(phx), rx * np.sin(phx), ry * np.cos(phy), ry * np.sin(phy)],
        axis=1,
    )
    if min_pairwise_distance(points) < 1e-9:
        raise DegenerateGeometryError(
            f"ring_ratio={ring_ratio} with the given ring rule collapses points"
        )
    return Constellation4D(points=points, labels=labels, name="6b4d_2a8psk")


def map_bits_to_symbols(bits: np.ndarray, c: Constellation4D):
    """Map a flat bit array onto constellation symbols.

    Returns (indices, points): consecutive m-bit groups interpreted MSB
    first and looked up through the constellation labeling.
    """
    bits = np.asarray(bits).ravel()
    if bits.size % c.m != 0:
        raise ValueError(f"bit count {bits.size} not divisible by m={c.m}")
    groups = bits.reshape(-1, c.m).astype(np.int64)
    vals = groups @ (1 << np.arange(c.m - 1, -1, -1))
    # row index for each label value (identity for canonical ordering)
    row_of_val = np.empty(c.M, dtype=np.int64)
    row_of_val[c.label_values()] = np.arange(c.M)
    indices = row_of_val[vals]
    return indices, c.points[indices]


def export_csv(c: Constellation4D, path) -> None:
    """Write the constellation as CSV: index,label_bits,s1,s2,s3,s4."""
    lines = ["index,label_bits,s1,s2,s3,s4"]
    for i, (lab, row) in enumerate(zip(c.label_strings(), c.points)):
        coords = ",".join(f"{v:.17g}" for v in row)
        lines.append(f"{i},{lab},{coords}")
    with open(path, "w", newline="\n") as f:
        f.write("\n".join(lines) + "\n")


# Shipped defaults: output of optimize_prs_params over DEFAULT_PRS_GRID at
# DEFAULT_PRS_SNR_DB, the SNR where the best AWGN GMI is about 4.55 bit/4D-sym.
# Regenerated by tests; do not edit by hand.
DEFAULT_PRS_SNR_DB = 8.1
DEFAULT_PRS_GRID = {
    "rho_range": (1.2, 2.0),
    "theta_range": (0.25, 0.65),
    "steps": 9,
}
DEFAULT_PRS_RHO = 1.6
DEFAULT_PRS_THETA = 0.45


def optimize_prs_params(snr_db: float, grid: dict) -> tuple[PrsParams, float]:
    """Grid search over (rho, theta) maximizing AWGN GMI at snr_db.

    grid: {"rho_range": (lo, hi), "theta_range": (lo, hi), "steps": n}.
    Degenerate grid points are skipped; ties broken by smaller rho then
    smaller theta (scan order), so the result is deterministic and
    independent of any evaluation parallelism.
    """
    from . import demapper  # deferred: demapper needs Constellation4D

    steps = int(grid["steps"])
    if steps < 1:
        raise ValueError("grid must contain at least one point")
    rhos = np.linspace(*grid["rho_range"], steps)
    thetas = np.linspace(*grid["theta_range"], steps)

    best = None
    best_gmi = -np.inf
    for rho in rhos:
        for theta in thetas:
            try:
                params = PrsParams(rho=float(rho), theta=float(theta))
                c = build_4d64prs(params)
            except ValueError:
                continue
            gmi = demapper.awgn_gmi_reference(c, snr_db,
                                              method="quadrature", n_nodes=5)
            if gmi > best_gmi:
                best, best_gmi = params, gmi
    if best is None:
        raise DegenerateGeometryError("all grid points are degenerate")
    return best, best_gmi


def default_prs_params() -> PrsParams:
    return PrsParams(rho=DEFAULT_PRS_RHO, theta=DEFAULT_PRS_THETA)


def build_format(name: str, prs_rho: float | None = None,
                 prs_theta: float | None = None,
                 ring_ratio: float = 0.65 ** -1) -> Constellation4D:
    """Build a constellation by format name used in configs and the CLI."""
    if name == "4d64prs":
        if prs_rho is None or prs_theta is None:
            p = default_prs_params()
        else:
            p = PrsParams(rho=prs_rho, theta=prs_theta)
        return build_4d64prs(p)
    if name == "pm8qam":
        return build_pm8qam()
    if name == "6b4d_2a8psk":
        return build_6b4d_2a8psk(ring_ratio)
    raise ValueError(f"unknown format {name!r}; expected one of "
                     "4d64prs, pm8qam, 6b4d_2a8psk")
