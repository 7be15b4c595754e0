"""Tabular datasets behind the standard comparison plots.

Each dataset is a header plus rows of numbers, with exact values and the
matching asymptotic curves side by side wherever both exist.

=====  ======================================================================
id     content (columns)
=====  ======================================================================
2      H matrices, long format: ``scheme, m, n, H``
3      coherent-state Holevo variance vs ``beta``: ``V_<scheme>`` and
       ``V_<scheme>_asym`` for all four schemes
4      excess variance vs ``beta`` for the dyne schemes: ``excess_<scheme>``
       and ``excess_<scheme>_asym`` (``2 h(beta^2)``)
5      minimum variance vs ``N``: ``Vmin_<scheme>``, ``Vmin_<scheme>_asym`` and
       ``<scheme>_asym_valid`` (1 once ``N`` exceeds the asymptotic threshold)
6      coherent phase densities: ``beta, phi, log10P_<scheme>`` for
       ``beta`` in {1, 2, 3.5, 5}
7      M-ary error of coherent states vs ``beta``: ``log10E_<scheme>`` and
       ``log10E_<scheme>_asym``
8      minimum M-ary error vs ``N``: ``log10Emin_<scheme>`` for all four schemes
=====  ======================================================================
"""

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import asymptotics
from .errors import ValidationError
from .optimal import error_probability, min_error_state, optimal_variance_state
from .phasestats import excess_variance, holevo_variance, mu_from_H, phase_distribution
from .pom import SCHEMES, build_h
from .states import coherent_state, required_truncation

FIGURE_IDS = (2, 3, 4, 5, 6, 7, 8)
DYNE_SCHEMES = ("heterodyne", "mark1", "mark2")
FIG6_BETAS = (1.0, 2.0, 3.5, 5.0)
# Error probabilities reach ~1e-15; the discarded coherent tail must be far smaller.
ERROR_TAIL_CAP = 1e-20

__all__ = ["FigureDataset", "figure_dataset", "FIGURE_IDS", "format_float"]


def format_float(x):
    """17 significant digits; infinities as ``inf``/``-inf``."""
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return "%.17g" % x


def _cell(x):
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format_float(x)


def _json_value(x):
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return int(x)
    x = float(x)
    return format_float(x) if not math.isfinite(x) else x


@dataclass(frozen=True)
class FigureDataset:
    figure_id: int
    columns: tuple
    rows: list
    meta: dict = field(default_factory=dict)

    def column(self, name):
        j = self.columns.index(name)
        return np.array([r[j] for r in self.rows])

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([_cell(x) for x in r])
        return buf.getvalue()

    def to_json(self):
        return json.dumps(
            {
                "figure": self.figure_id,
                "meta": self.meta,
                "columns": list(self.columns),
                "rows": [[_json_value(x) for x in r] for r in self.rows],
            }
        )


def _beta_grid(start, stop, step):
    n = int(round((stop - start) / step))
    return [start + k * step for k in range(n + 1)]


def _coherent_dim(betas, dim, tail_cap=1e-10):
    need = max(required_truncation(b, tail_cap) for b in betas)
    return max(int(dim or 0), need)


def _log10(x):
    return math.log10(x) if x > 0 else -math.inf


def _fig2(dim, series_terms, **_):
    dim = dim or 20
    rows = []
    for s in SCHEMES:
        h = build_h(s, dim, series_terms=series_terms if s == "mark2" else None)
        for m in range(dim + 1):
            for n in range(dim + 1):
                rows.append((s, m, n, float(h.entries[m, n])))
    return ("scheme", "m", "n", "H"), rows, {"dim": dim}


def _fig3(dim, series_terms, betas=None, **_):
    betas = betas or _beta_grid(1.0, 5.0, 0.25)
    d = _coherent_dim(betas, dim or 100)
    hs = {s: build_h(s, d, series_terms=series_terms if s == "mark2" else None) for s in SCHEMES}
    cols = ["beta"] + [f"V_{s}" for s in SCHEMES] + [f"V_{s}_asym" for s in SCHEMES]
    rows = []
    for b in betas:
        st = coherent_state(b, truncation=d)
        exact = [holevo_variance(mu_from_H(hs[s], st)) for s in SCHEMES]
        asym = [asymptotics.coherent_variance_asymptotic(s, b) for s in SCHEMES]
        rows.append(tuple([b] + exact + asym))
    return tuple(cols), rows, {"dim": d}


def _fig4(dim, series_terms, betas=None, **_):
    betas = betas or _beta_grid(1.0, 5.0, 0.25)
    d = _coherent_dim(betas, dim or 100)
    hs = {s: build_h(s, d, series_terms=series_terms if s == "mark2" else None) for s in DYNE_SCHEMES}
    cols = ["beta"] + [f"excess_{s}" for s in DYNE_SCHEMES] + [f"excess_{s}_asym" for s in DYNE_SCHEMES]
    rows = []
    for b in betas:
        st = coherent_state(b, truncation=d)
        exact = [excess_variance(hs[s], st) for s in DYNE_SCHEMES]
        asym = [asymptotics.coherent_excess_asymptotic(s, b) for s in DYNE_SCHEMES]
        rows.append(tuple([b] + exact + asym))
    return tuple(cols), rows, {"dim": d}


def _fig5(nmax, series_terms, **_):
    nmax = nmax or 100
    hs = {s: build_h(s, nmax, series_terms=series_terms if s == "mark2" else None) for s in SCHEMES}
    cols = (
        ["N"]
        + [f"Vmin_{s}" for s in SCHEMES]
        + [f"Vmin_{s}_asym" for s in SCHEMES]
        + [f"{s}_asym_valid" for s in SCHEMES]
    )
    rows = []
    for N in range(1, nmax + 1):
        exact = [optimal_variance_state(hs[s], N).value for s in SCHEMES]
        asym = [asymptotics.vmin_asymptotic(s, N) for s in SCHEMES]
        valid = [int(asymptotics.validity("vmin", s, N=N)["valid"]) for s in SCHEMES]
        rows.append(tuple([N] + exact + asym + valid))
    thresholds = {s: asymptotics.asymptotic_threshold(s) for s in SCHEMES}
    return tuple(cols), rows, {"nmax": nmax, "asymptotic_threshold": thresholds}


def _fig6(dim, series_terms, grid, betas=None, **_):
    betas = betas or list(FIG6_BETAS)
    grid = grid or 512
    d = _coherent_dim(betas, dim or 100)
    hs = {s: build_h(s, d, series_terms=series_terms if s == "mark2" else None) for s in SCHEMES}
    cols = ["beta", "phi"] + [f"log10P_{s}" for s in SCHEMES]
    rows = []
    for b in betas:
        st = coherent_state(b, truncation=d)
        dists = [phase_distribution(hs[s], st, grid) for s in SCHEMES]
        for k in range(grid):
            # plot on [-pi, pi): shift the grid by half a period
            j = (k + grid // 2) % grid
            phi = dists[0].grid[j] - (2.0 * math.pi if j >= grid // 2 else 0.0)
            rows.append(tuple([b, phi] + [_log10(dd.density[j]) for dd in dists]))
    return tuple(cols), rows, {"dim": d, "grid": grid}


def _fig7(dim, series_terms, M, betas=None, **_):
    betas = betas or _beta_grid(0.5, 8.0, 0.5)
    d = _coherent_dim(betas, dim or 100, ERROR_TAIL_CAP)
    hs = {s: build_h(s, d, series_terms=series_terms if s == "mark2" else None) for s in SCHEMES}
    cols = ["beta"] + [f"log10E_{s}" for s in SCHEMES] + [f"log10E_{s}_asym" for s in SCHEMES]
    rows = []
    for b in betas:
        st = coherent_state(b, truncation=d, tail_cap=ERROR_TAIL_CAP)
        exact = [_log10(error_probability(hs[s], M, st)) for s in SCHEMES]
        asym = [asymptotics.error_asymptotic(s, b, M) / math.log(10.0) for s in SCHEMES]
        rows.append(tuple([b] + exact + asym))
    meta = {
        "dim": d,
        "M": M,
        "tail_cap": ERROR_TAIL_CAP,
        "note": "exact values below ~1e-16 are at the rounding floor of F_C and may print as -inf",
        "crossover_beta": asymptotics.crossover_beta(M),
        "mark2_regime_switch": asymptotics.mark2_regime_switch(M),
    }
    return tuple(cols), rows, meta


def _fig8(nmax, series_terms, M, **_):
    nmax = nmax or 100
    hs = {s: build_h(s, nmax, series_terms=series_terms if s == "mark2" else None) for s in SCHEMES}
    cols = ["N"] + [f"log10Emin_{s}" for s in SCHEMES]
    rows = []
    for N in range(1, nmax + 1):
        rows.append(tuple([N] + [_log10(min_error_state(hs[s], M, N).value) for s in SCHEMES]))
    return tuple(cols), rows, {"nmax": nmax, "M": M}


_BUILDERS = {2: _fig2, 3: _fig3, 4: _fig4, 5: _fig5, 6: _fig6, 7: _fig7, 8: _fig8}


def figure_dataset(figure_id, dim=None, nmax=None, M=4, grid=None, series_terms=None, betas=None):
    """Build the dataset of one comparison plot.

    Parameters
    ----------
    figure_id : int
        One of 2..8 (see module docstring for the columns).
    dim : int, optional
        H-matrix dimension for coherent-state figures (raised automatically to
        the truncation the largest ``beta`` needs); matrix size for id 2.
    nmax : int, optional
        Largest photon number for the optimal-state figures 5 and 8.
    M : int
        Alphabet size for figures 7 and 8.
    grid : int, optional
        Phase grid for figure 6.
    series_terms : int, optional
        Mark II series length.
    betas : sequence of float, optional
        Override the default amplitude grid of figures 3, 4, 6 and 7.
    """
    try:
        fid = int(figure_id)
    except (TypeError, ValueError):
        raise ValidationError(f"figure id must be an integer in {FIGURE_IDS}") from None
    if fid not in _BUILDERS:
        raise ValidationError(f"unsupported figure id {figure_id!r}; expected one of {FIGURE_IDS}")
    M = int(M)
    if M < 2:
        raise ValidationError("M must be >= 2")
    if betas is not None:
        betas = [float(b) for b in betas]
        if any(b <= 0 for b in betas):
            raise ValidationError("beta values must be positive")
    cols, rows, meta = _BUILDERS[fid](
        dim=dim, nmax=nmax, M=M, grid=grid, series_terms=series_terms, betas=betas
    )
    return FigureDataset(fid, cols, rows, meta)
