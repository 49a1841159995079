"""Catalog of reproducible experiments with their default parameters.

Defaults are desk scale: every experiment fits a single core and a few GB.
``paper_scale`` restores the published sample sizes of each experiment
setup where memory allows.
"""

from __future__ import annotations

import copy

from ..errors import ConfigError

DENSITY_124 = {"kind": "piecewise", "weights": [1, 2, 4]}
UNIFORM_S1 = {"kind": "uniform", "d": 2}

CATALOG = {
    "fig1": {
        "title": "Frequency bias under uniform and 1:40 densities (depth-10 network)",
        "figure": "Figure 1",
        "criteria": [9],
        "setup": "L=10, m=256, n=10000, batch 100, target 0.4cos(16x)+cos(x)",
        "runtime_s": 150, "memory_mb": 300,
        "defaults": {
            "density": {"kind": "piecewise", "weights": [1, 40]},
            "n": 10000, "seed": 0,
            "target": {"kind": "composite", "terms": [[0.4, 16, 0.0], [1.0, 1, 0.0]]},
            "net": {"depth": 10, "width": 256, "tau": 1.0, "dtype": "float32"},
            "train": {"eta": 0.05, "batch": 100, "epochs": 40, "loss": "mean"},
            "sweep": {"compare_uniform": True, "eval_points": 1000, "low_kappa": 1, "high_kappa": 16,
                      "mse_threshold": 0.1},
        },
        "paper": {},
    },
    "fig2": {
        "title": "Eigenvectors of the two-layer kernel under a 1:2:4 density, with analytic modes",
        "figure": "Figure 2",
        "criteria": [3],
        "setup": "density 3/(2pi){1/7,2/7,4/7}, two-layer kernel",
        "runtime_s": 20, "memory_mb": 300,
        "defaults": {"density": DENSITY_124, "n": 4000, "seed": 0, "k": 20,
                     "kernel": {"kind": "two_layer", "depth": 1}},
        "paper": {"n": 10000},
    },
    "fig3": {
        "title": "Local frequency per region for the two-layer and depth-10 kernels",
        "figure": "Figure 3",
        "criteria": [2],
        "setup": "density 3/(2pi){1/7,2/7,4/7}; FFT per region",
        "runtime_s": 90, "memory_mb": 300,
        "defaults": {"density": DENSITY_124, "n": 4000, "seed": 1, "k": 30,
                     "sweep": {"depths": [1, 10], "method": "fit"}},
        "paper": {"n": 10000},
    },
    "fig4": {
        "title": "Closed-form eigenvalues against Gram eigenvalues",
        "figure": "Figure 4",
        "criteria": [1],
        "setup": "two-layer kernel, 50K points at full scale",
        "runtime_s": 120, "memory_mb": 1100,
        "defaults": {"n": 8000, "seed": 0, "k": 40,
                     "sweep": {"densities": [UNIFORM_S1, DENSITY_124]}},
        "paper": {"n": 50000},
    },
    "fig5": {
        "title": "Eigenvectors under the continuous density (3cos(2x+pi)+4.5)/(9pi)",
        "figure": "Figure 5",
        "criteria": [2],
        "setup": "two-layer kernel, continuous density",
        "runtime_s": 15, "memory_mb": 100,
        "defaults": {"density": {"kind": "continuous"}, "n": 2000, "seed": 0, "k": 12,
                     "kernel": {"kind": "two_layer", "depth": 1}},
        "paper": {"n": 10000},
    },
    "fig6": {
        "title": "Projection of sin(14x) on the analytic eigenfunctions and the tail index",
        "figure": "Figure 6",
        "criteria": [4],
        "setup": "density 3/(2pi){1/7,2/7,4/7}, g(x)=sin(14x)",
        "runtime_s": 5, "memory_mb": 50,
        "defaults": {"density": DENSITY_124, "seed": 0, "target": {"kind": "sine", "kappa": 14},
                     "sweep": {"modes": 121, "tail_kappas": [8, 14], "eps": 0.1}},
        "paper": {},
    },
    "fig7": {
        "title": "Per-region convergence times on the circle (two-layer network, 1:2:4)",
        "figure": "Figure 7",
        "criteria": [5],
        "setup": "m=4000, eta=0.004, n=734, tau=0.2, delta=0.05, zero bias",
        "runtime_s": 1500, "memory_mb": 100,
        "defaults": {"density": DENSITY_124, "n": 734, "seed": 0,
                     "net": {"width": 4000, "tau": 0.2, "bias_init": "zero"},
                     "train": {"eta": 0.004, "delta": 0.05, "loss": "sum", "max_iters": 1000000},
                     "sweep": {"kappas": [4, 6, 8, 10, 12, 14], "target": "sine"}},
        "paper": {"train": {"max_iters": 20000000}},
    },
    "fig8": {
        "title": "Eigenvectors on the 2-sphere with hemispheres of density ratio 12:1",
        "figure": "Figure 8",
        "criteria": [6],
        "setup": "two-layer kernel, hemisphere densities 12:1",
        "runtime_s": 15, "memory_mb": 100,
        "defaults": {"density": {"kind": "hemisphere", "ratio": 12.0}, "n": 2000, "seed": 0, "k": 16,
                     "kernel": {"kind": "two_layer", "depth": 1}},
        "paper": {"n": 10000},
    },
    "fig9": {
        "title": "Per-hemisphere convergence times on the 2-sphere",
        "figure": "Figure 9",
        "criteria": [6],
        "setup": "m=8000, tau=0.2, eta=0.004; 300 and 300*ratio points",
        "runtime_s": 240, "memory_mb": 100,
        "defaults": {"seed": 0, "n": 300,
                     "net": {"width": 8000, "tau": 0.2, "bias_init": "zero"},
                     "train": {"eta": 0.004, "delta": 0.05, "loss": "sum", "max_iters": 60000},
                     "sweep": {"ratios": [2, 3, 4], "ells": [1, 2, 3, 4]}},
        "paper": {},
    },
    "fig10": {
        "title": "Eigenvectors of the depth-10 kernel under the uniform density",
        "figure": "Figure 10",
        "criteria": [8],
        "setup": "deep kernel L=10, uniform on the circle",
        "runtime_s": 15, "memory_mb": 100,
        "defaults": {"density": UNIFORM_S1, "n": 2000, "seed": 0, "k": 16,
                     "kernel": {"kind": "deep", "depth": 10}},
        "paper": {"n": 10000},
    },
    "fig11": {
        "title": "Measured against kernel-predicted training times",
        "figure": "Figure 11",
        "criteria": [7],
        "setup": "deep network m=256, eta=0.05 (η=0.05), delta=0.05; n=630 on S^1, n=1000 on S^2",
        "runtime_s": 900, "memory_mb": 200,
        "defaults": {"seed": 0,
                     "net": {"width": 256, "tau": 1.0, "dtype": "float32"},
                     "train": {"eta": 0.05, "delta": 0.05, "loss": "mean"},
                     "sweep": {"domains": ["S1"], "depths": [3], "kappas": [2, 3, 4, 5, 6, 7, 8, 9, 10],
                               "n_s1": 630, "n_s2": 1000, "iter_cap_factor": 2.0,
                               "two_layer": {"n": 256, "width": 4096, "kappa": 4, "eta": 0.002,
                                             "iters": 1000, "tau": 0.2}}},
        "paper": {"sweep": {"domains": ["S1", "S2"], "depths": [3, 7]}},
    },
    "fig12": {
        "title": "Log-log eigenvalue decay for several depths",
        "figure": "Figure 12",
        "criteria": [8],
        "setup": "uniform densities on S^1 and S^2",
        "runtime_s": 60, "memory_mb": 200,
        "defaults": {"seed": 0, "grid_size": 65536,
                     "sweep": {"depths": [3, 5, 10, 20, 50], "s1_kappa_min": 50, "s1_kappa_max": 1000,
                               "s2_n": 2000, "s2_depths": [3], "s2_kappa_min": 10, "s2_kappa_max": 20}},
        "paper": {"sweep": {"s2_n": 20000, "s2_depths": [3, 5, 10, 20, 50]}},
    },
    "custom": {
        "title": "Sample, Gram eigen-system and analytic modes for a user density",
        "figure": "-",
        "criteria": [10],
        "setup": "user supplied",
        "runtime_s": 10, "memory_mb": 100,
        "defaults": {"kernel": {"kind": "two_layer", "depth": 1}, "k": 10, "seed": 0},
        "paper": {},
    },
}


def _merge(base, over):
    out = copy.deepcopy(base)
    for key, val in over.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def defaults_for(exp_id, paper_scale=False):
    if exp_id not in CATALOG:
        raise ConfigError("unknown experiment id %r" % (exp_id,))
    entry = CATALOG[exp_id]
    params = copy.deepcopy(entry["defaults"])
    params["id"] = exp_id
    if paper_scale:
        params = _merge(params, entry["paper"])
        params["paper_scale"] = True
    return params


def list_experiments():
    """Catalog rows: id, figure, title, setup, criteria, runtime and memory."""
    rows = []
    for exp_id, entry in CATALOG.items():
        rows.append({
            "id": exp_id,
            "figure": entry["figure"],
            "title": entry["title"],
            "setup": entry["setup"],
            "criteria": list(entry["criteria"]),
            "runtime_s": entry["runtime_s"],
            "memory_mb": entry["memory_mb"],
        })
    return rows
