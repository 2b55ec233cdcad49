"""Built-in experiment configurations, one per reproduced figure panel."""

from __future__ import annotations

import copy
import math

__all__ = ["PRESETS", "list_presets", "get_preset"]

SCHEMA_VERSION = 1

_M1 = {"model": "I", "t2": 0.5}
_FIG2_SWEEP = [{"t1": 0.0}, {"t1": 0.3}, {"t1": 0.5}, {"t1": 0.6}]


def _cfg(kind, description, model, **kw):
    return {"schema_version": SCHEMA_VERSION, "kind": kind, "description": description,
            "model": model, **kw}


_fig2_scaling = _cfg(
    "scaling",
    "Edge height and bulk decay laws, L=200, x0=150, t1 in {0, 0.3, 0.5, 0.6}",
    {**_M1, "t1": 0.0, "gamma": 0.5},
    geometry={"L": 200, "boundary": "OBC"},
    x0=150,
    sweep=_FIG2_SWEEP,
)

PRESETS = {
    "fig1b": _cfg("profile", "Loss profile without burst, t1=0.63, L=60, x0=50",
                  {**_M1, "t1": 0.63, "gamma": 0.8}, geometry={"L": 60, "boundary": "OBC"}, x0=50),
    "fig1c": _cfg("profile", "Loss profile with edge burst, t1=0.4, L=60, x0=50",
                  {**_M1, "t1": 0.4, "gamma": 0.8}, geometry={"L": 60, "boundary": "OBC"}, x0=50),
    "fig1d": _cfg("profile", "Relative height versus t1 for x0=50 and 25, L=60",
                  {**_M1, "t1": 0.4, "gamma": 0.8}, geometry={"L": 60, "boundary": "OBC"}, x0=[25, 50],
                  sweep=[{"t1": round(0.05 * i, 2)} for i in range(0, 17)]),
    "fig1e": _cfg("profile", "Relative height versus x0 in [40, 140], L=150, t1 in {0.63, 0.40}",
                  {**_M1, "t1": 0.4, "gamma": 0.8}, geometry={"L": 150, "boundary": "OBC"},
                  x0=list(range(40, 141, 10)), sweep=[{"t1": 0.63}, {"t1": 0.4}]),
    "fig2a": copy.deepcopy(_fig2_scaling),
    "fig2b": copy.deepcopy(_fig2_scaling),
    "fig2c": copy.deepcopy(_fig2_scaling),
    "fig2d": copy.deepcopy(_fig2_scaling),
    "fig2e": _cfg("spectrum", "PBC spectra for t1 in {0, 0.3, 0.5, 0.6}",
                  {**_M1, "t1": 0.0, "gamma": 0.5}, Nk=512, sweep=_FIG2_SWEEP),
    "fig2f": _cfg("gbz", "GBZ for t1 in {0, 0.3, 0.5, 0.6} from L=60 open chains",
                  {**_M1, "t1": 0.0, "gamma": 0.5}, geometry={"L": 60, "boundary": "OBC"}, sweep=_FIG2_SWEEP),
    "fig3a": _cfg("greens", "Infinite-chain loss versus an L=50 chain, t1=0.3, gamma=2, x0=41",
                  {**_M1, "t1": 0.3, "gamma": 2.0}, geometry={"L": 50, "boundary": "OBC"}, x0=41,
                  displacements=list(range(-40, 10)), compare_profile=True,
                  edge_decay={"t_end": 2000.0}),
    "fig3b": _cfg("greens", "Mirror case t1=-0.3 with the burst at the right edge, x0=11",
                  {**_M1, "t1": -0.3, "gamma": 2.0}, geometry={"L": 50, "boundary": "OBC"}, x0=11,
                  displacements=list(range(-10, 40)), compare_profile=True,
                  edge_decay={"t_end": 2000.0}),
    "fig4-bipolar": _cfg("profile", "Bipolar skin effect: bursts at both edges, L=60, x0=31",
                         {"model": "II", "t1": 0.8, "t2": 2.0, "t3": 2.0, "alpha": math.pi / 5, "gamma": 2.0},
                         geometry={"L": 60, "boundary": "OBC"}, x0=31),
    "fig4-gbz": _cfg("gbz", "Bipolar model GBZ with gap-closing points inside and outside",
                     {"model": "II", "t1": 0.8, "t2": 2.0, "t3": 2.0, "alpha": math.pi / 5, "gamma": 2.0},
                     geometry={"L": 60, "boundary": "OBC"}),
    "figS1": _cfg("greens", "|beta_L(omega)| scans and local expansion exponents, t1 in {0.6, 0.5, 0.3, 0}",
                  {**_M1, "t1": 0.3, "gamma": 0.5},
                  omega_scan={"start": -1.5, "stop": 1.5, "num": 601}, expansion=True,
                  sweep=[{"t1": 0.6}, {"t1": 0.5}, {"t1": 0.3}, {"t1": 0.0}]),
    "figS2-random-start": _cfg("profile", "Uniform random starting cell, L=100",
                               {**_M1, "t1": 0.4, "gamma": 0.8}, geometry={"L": 100, "boundary": "OBC"},
                               p_s="uniform"),
    "figS3c": _cfg("profile", "k-dependent loss, case 1 (gamma=0, gamma'=0.3): no burst",
                   {"model": "III", "t": 0.8, "gamma": 0.0, "gamma_prime": 0.3},
                   geometry={"L": 30, "boundary": "OBC"}, x0=15),
    "figS3d": _cfg("profile", "k-dependent loss, case 2 (gamma=0.5, gamma'=0): burst",
                   {"model": "III", "t": 0.8, "gamma": 0.5, "gamma_prime": 0.0},
                   geometry={"L": 30, "boundary": "OBC"}, x0=15),
    "figS3-modelIII": _cfg("profile", "Both k-dependent loss cases, t=0.8",
                           {"model": "III", "t": 0.8, "gamma": 0.0, "gamma_prime": 0.3},
                           geometry={"L": 30, "boundary": "OBC"}, x0=15,
                           sweep=[{"gamma": 0.0, "gamma_prime": 0.3}, {"gamma": 0.5, "gamma_prime": 0.0}]),
}


def list_presets() -> dict[str, str]:
    """Preset names mapped to one-line descriptions."""
    return {name: cfg["description"] for name, cfg in PRESETS.items()}


def get_preset(name: str) -> dict:
    try:
        return copy.deepcopy(PRESETS[name])
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}") from None
