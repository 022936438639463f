"""Static-hedging portfolios as signed measures.

A portfolio is an absolutely continuous part with signed density ``w`` on a
finite strike interval plus finitely many point masses. Positive weight is a
long position, negative weight a short one.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .quadrature import integrate


def _zero(x):
    return np.zeros_like(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class SignedMeasure:
    """Signed measure ``rho(A) = int_A w dK + sum of atom weights in A``.

    ``density`` is a vectorized callable that is only ever evaluated inside
    ``domain``; ``breakpoints`` are quadrature panel seeds (kinks, support
    edges). ``atoms`` maps distinct locations to nonzero weights.
    """

    density: object = None
    domain: tuple = None
    atoms: tuple = ()
    breakpoints: tuple = field(default=(), repr=False)

    def __post_init__(self):
        locs = [loc for loc, _ in self.atoms]
        if len(set(locs)) != len(locs):
            raise ValueError("atom locations must be distinct")
        if self.density is not None and self.domain is None:
            raise ValueError("a density part needs a domain")

    @classmethod
    def from_grid(cls, nodes, weights, atoms=()):
        """Piecewise-linear density through ``(nodes, weights)``, zero outside."""
        nodes = np.asarray(nodes, dtype=float)
        weights = np.asarray(weights, dtype=float)

        def w(x):
            x = np.asarray(x, dtype=float)
            return np.interp(x, nodes, weights, left=0.0, right=0.0)

        return cls(w, (float(nodes[0]), float(nodes[-1])), tuple(atoms), tuple(nodes))

    @classmethod
    def from_atoms(cls, atoms):
        return cls(None, None, tuple((float(a), float(b)) for a, b in atoms if b != 0.0))

    @property
    def panels(self):
        if self.density is None:
            return np.array([])
        lo, hi = self.domain
        pts = np.asarray(self.breakpoints, dtype=float)
        pts = pts[(pts >= lo) & (pts <= hi)]
        return np.unique(np.concatenate([[lo, hi], pts]))

    def w(self, x):
        """Density of the absolutely continuous part (zero outside the domain)."""
        x = np.asarray(x, dtype=float)
        if self.density is None:
            return _zero(x)
        lo, hi = self.domain
        inside = (x >= lo) & (x <= hi)
        out = np.zeros_like(x)
        if np.any(inside):
            out[inside] = np.asarray(self.density(x[inside]), dtype=float)
        return out

    def to_json(self, samples=257):
        """``{"ac": [[K, w], ...], "atoms": [[loc, wt], ...]}``; the density is sampled."""
        ac = []
        if self.density is not None:
            grid = self.panels
            if grid.size < samples:
                extra = np.linspace(*self.domain, samples)
                grid = np.unique(np.concatenate([grid, extra]))
            ac = [[float(k), float(v)] for k, v in zip(grid, self.w(grid))]
        return {"ac": ac, "atoms": [[float(a), float(b)] for a, b in self.atoms]}

    @classmethod
    def from_json(cls, data):
        if isinstance(data, str):
            data = json.loads(data)
        atoms = tuple((float(a), float(b)) for a, b in data.get("atoms", []))
        ac = data.get("ac", [])
        if not ac:
            return cls(None, None, atoms)
        arr = np.asarray(ac, dtype=float)
        return cls.from_grid(arr[:, 0], arr[:, 1], atoms)


def integrate_measure(f, rho, rtol=1e-11, atol=1e-13):
    """``int f d(rho)``: quadrature over the density part plus the atom sum."""
    total = 0.0
    if rho.density is not None:
        res = integrate(lambda x: np.asarray(f(x), dtype=float) * rho.w(x), rho.panels,
                        rtol=rtol, atol=atol)
        total += res.value
    if rho.atoms:
        locs = np.array([a for a, _ in rho.atoms])
        wts = np.array([b for _, b in rho.atoms])
        total += float(np.sum(np.asarray(f(locs), dtype=float) * wts))
    return total


def total_variation(rho, rtol=1e-11, atol=1e-13):
    """``|rho| = int |w| dK + sum |atom weights|``."""
    out = sum(abs(b) for _, b in rho.atoms)
    if rho.density is not None:
        out += integrate(lambda x: np.abs(rho.w(x)), rho.panels, rtol=rtol, atol=atol).value
    return float(out)


def combine(rho1, c1, rho2, c2):
    """Linear combination ``c1 * rho1 + c2 * rho2``.

    Atoms merge only at bitwise-equal locations; merged weights that cancel
    to exactly zero are dropped.
    """
    merged = {}
    for rho, c in ((rho1, c1), (rho2, c2)):
        for loc, wt in rho.atoms:
            merged[loc] = merged.get(loc, 0.0) + c * wt
    atoms = tuple(sorted((loc, wt) for loc, wt in merged.items() if wt != 0.0))

    parts = [(rho, c) for rho, c in ((rho1, c1), (rho2, c2)) if rho.density is not None and c != 0.0]
    if not parts:
        return SignedMeasure(None, None, atoms)
    lo = min(rho.domain[0] for rho, _ in parts)
    hi = max(rho.domain[1] for rho, _ in parts)

    def w(x):
        out = np.zeros_like(np.asarray(x, dtype=float))
        for rho, c in parts:
            out = out + c * rho.w(x)
        return out

    bps = tuple(np.unique(np.concatenate([rho.panels for rho, _ in parts])))
    return SignedMeasure(w, (lo, hi), atoms, bps)
