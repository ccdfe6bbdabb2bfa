"""Rademacher block randomization of initial data.

A draw assigns one independent sign to every (channel, block) pair, channel
"eps" for the position datum phi0 and "nu" for the velocity datum phi1.  The
randomized datum is the signed resummation of the unit-block projections,

    phi0_rand = sum_k eps_k P_k phi0,      phi1_rand = sum_k nu_k P_k phi1.

Signs come from a counter-based generator keyed by (seed, sample_index), with
both channels drawn for all blocks in sorted order, so a draw depends only on
(seed, sample_index, block set) -- never on scheduling, worker count, or
whether phi1 is present.

Built-in data families: a Gaussian bump (physical-space, effectively compactly
supported), a band-limited random field with prescribed homogeneous-H^1 norm
(spectrally exact on the grid, the canonical test family), and file input via
:func:`picardlab.grid.load_field`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Field, Grid, SPECTRAL, as_spectral, sobolev_norm
from .multipliers import UnitPartition, unit_projection

__all__ = [
    "RademacherDraw",
    "RandomizedData",
    "draw_rademacher",
    "active_blocks",
    "randomize",
    "gaussian_bump",
    "band_limited_field",
    "support_radius",
]

CHANNELS = ("eps", "nu")
BLOCK_NORM_THRESHOLD = 1e-14


@dataclass(frozen=True)
class RademacherDraw:
    """Signs for every (channel, block): values[(channel, k)] in {-1, +1}."""

    seed: int
    sample_index: int
    blocks: tuple[tuple[int, int], ...]
    values: dict[tuple[str, tuple[int, int]], int]

    def eps(self, k: tuple[int, int]) -> int:
        return self.values[("eps", k)]

    def nu(self, k: tuple[int, int]) -> int:
        return self.values[("nu", k)]


def draw_rademacher(
    seed: int,
    blocks: "set[tuple[int, int]] | tuple[tuple[int, int], ...] | list[tuple[int, int]]",
    sample_index: int = 0,
) -> RademacherDraw:
    """Independent +-1 per (block, channel) from a counter-based stream.

    Identical (seed, sample_index, blocks) reproduce the draw exactly; distinct
    sample indices give disjoint Philox streams, so Monte Carlo samples can be
    generated in any order or in parallel.
    """
    block_list = tuple(sorted((int(k[0]), int(k[1])) for k in blocks))
    if not block_list:
        raise ValueError("draw_rademacher needs a nonempty block set")
    bitgen = np.random.Philox(seed=np.random.SeedSequence((int(seed), int(sample_index))))
    rng = np.random.Generator(bitgen)
    raw = rng.integers(0, 2, size=(len(block_list), len(CHANNELS))) * 2 - 1
    values = {
        (channel, k): int(raw[i, j])
        for i, k in enumerate(block_list)
        for j, channel in enumerate(CHANNELS)
    }
    return RademacherDraw(int(seed), int(sample_index), block_list, values)


def _spectral_bbox_blocks(phi_hat: np.ndarray, grid: Grid) -> list[tuple[int, int]]:
    """Candidate blocks from the bounding box of the nonzero spectrum."""
    part = UnitPartition(grid)
    lo, hi = part.k_range
    mag = np.abs(phi_hat)
    scale = mag.max()
    if scale == 0.0:
        return []
    xi = grid.xi1[:, 0]
    active = mag > BLOCK_NORM_THRESHOLD * scale
    xi1_hit = xi[active.any(axis=1)]
    xi2_hit = xi[active.any(axis=0)]
    k1_lo = max(lo, int(np.ceil(xi1_hit.min() - 0.75)))
    k1_hi = min(hi, int(np.floor(xi1_hit.max() + 0.75)))
    k2_lo = max(lo, int(np.ceil(xi2_hit.min() - 0.75)))
    k2_hi = min(hi, int(np.floor(xi2_hit.max() + 0.75)))
    return [(k1, k2) for k1 in range(k1_lo, k1_hi + 1) for k2 in range(k2_lo, k2_hi + 1)]


def active_blocks(phi0: Field, phi1: Field | None = None,
                  threshold: float = BLOCK_NORM_THRESHOLD) -> tuple[tuple[int, int], ...]:
    """Blocks k with ||P_k phi0||_2 + ||P_k phi1||_2 above the sparsity threshold."""
    g0 = as_spectral(phi0)
    grid = g0.grid
    candidates = set(_spectral_bbox_blocks(g0.values, grid))
    g1 = None
    if phi1 is not None:
        g1 = as_spectral(phi1)
        if g1.grid != grid:
            raise ValueError("phi0 and phi1 live on different grids")
        candidates |= set(_spectral_bbox_blocks(g1.values, grid))
    part = UnitPartition(grid)
    dx = grid.dx
    out = []
    for k in sorted(candidates):
        w = part.weight(k)
        total = dx * np.linalg.norm(w * g0.values)
        if g1 is not None:
            total += dx * np.linalg.norm(w * g1.values)
        if total > threshold:
            out.append(k)
    return tuple(out)


@dataclass(frozen=True, eq=False)
class RandomizedData:
    """Block decomposition of (phi0, phi1) plus their signed resummation."""

    draw: RademacherDraw
    phi0_blocks: dict[tuple[int, int], Field]
    phi1_blocks: dict[tuple[int, int], Field]
    phi0_rand: Field
    phi1_rand: Field

    @property
    def grid(self) -> Grid:
        return self.phi0_rand.grid

    @property
    def blocks(self) -> tuple[tuple[int, int], ...]:
        return self.draw.blocks

    @property
    def phi1_is_zero(self) -> bool:
        return not np.any(self.phi1_rand.values)


def randomize(phi0: Field, phi1: Field | None, draw: RademacherDraw) -> RandomizedData:
    """Assemble the randomized data for a given draw.

    ``phi1=None`` means the zero velocity datum (the default throughout the
    iterate machinery); all nu-channel content is then zero.
    """
    g0 = as_spectral(phi0)
    grid = g0.grid
    g1 = as_spectral(phi1) if phi1 is not None else None
    if g1 is not None and g1.grid != grid:
        raise ValueError("phi0 and phi1 live on different grids")

    part = UnitPartition(grid)
    phi0_blocks: dict[tuple[int, int], Field] = {}
    phi1_blocks: dict[tuple[int, int], Field] = {}
    sum0 = np.zeros_like(g0.values)
    sum1 = np.zeros_like(g0.values)
    for k in draw.blocks:
        w = part.weight(k)
        b0 = Field(grid, w * g0.values, SPECTRAL)
        phi0_blocks[k] = b0
        sum0 += draw.eps(k) * b0.values
        if g1 is not None:
            b1 = Field(grid, w * g1.values, SPECTRAL)
            phi1_blocks[k] = b1
            sum1 += draw.nu(k) * b1.values
    return RandomizedData(
        draw=draw,
        phi0_blocks=phi0_blocks,
        phi1_blocks=phi1_blocks,
        phi0_rand=Field(grid, sum0, SPECTRAL),
        phi1_rand=Field(grid, sum1, SPECTRAL),
    )


# ---------------------------------------------------------------------------
# Data families
# ---------------------------------------------------------------------------

def gaussian_bump(grid: Grid, sigma: float = 2.0, amplitude: float = 1.0,
                  center: tuple[float, float] | None = None) -> Field:
    """Gaussian bump exp(-|x - x0|^2 / (2 sigma^2)), centered in the box by default."""
    if center is None:
        c = grid.box_length / 2.0
        center = (c, c)
    r2 = (grid.x1 - center[0]) ** 2 + (grid.x2 - center[1]) ** 2
    return Field(grid, amplitude * np.exp(-r2 / (2.0 * sigma**2)), "physical")


def support_radius(f: Field, tol: float = 1e-13) -> float:
    """Radius around the box center beyond which |f| stays below tol * max|f|.

    Used by the harness to validate the finite-propagation condition
    T < L/2 - radius for physically localized data.
    """
    from .grid import as_physical

    p = as_physical(f)
    a = np.abs(p.values)
    scale = a.max()
    if scale == 0.0:
        return 0.0
    c = p.grid.box_length / 2.0
    r = np.sqrt((p.grid.x1 - c) ** 2 + (p.grid.x2 - c) ** 2)
    hit = a > tol * scale
    return float(r[hit].max()) if hit.any() else 0.0


def band_limited_field(grid: Grid, band: float, seed: int,
                       h1_norm: float = 1.0) -> Field:
    """Random real field with spectrum confined to 0 < |xi| <= band.

    Amplitudes are complex Gaussian, conjugate-symmetrized so the field is
    real, then rescaled to the requested homogeneous-H^1 norm.  Spectrally
    exact on the grid: every mode outside the band is identically zero, so the
    block decomposition has finitely many active blocks with no truncation
    error.
    """
    if band <= 0 or band > grid.xi_max / 2:
        raise ValueError(f"band must lie in (0, {grid.xi_max / 2:g}], got {band}")
    rng = np.random.Generator(np.random.Philox(
        seed=np.random.SeedSequence((int(seed), 0x0DA7A))))
    n = grid.n_points
    raw = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    mask = (grid.abs_xi <= band) & (grid.abs_xi > 0.0)
    raw[~mask] = 0.0
    # Hermitian part of the coefficient array: c(-xi) = conj(c(xi)).
    idx = (-np.arange(n)) % n
    sym = 0.5 * (raw + np.conj(raw[np.ix_(idx, idx)]))
    f = Field(grid, sym, SPECTRAL)
    cur = sobolev_norm(f, 1.0)
    if cur == 0.0:
        raise ValueError("band contains no lattice modes")
    return Field(grid, sym * (h1_norm / cur), SPECTRAL)
