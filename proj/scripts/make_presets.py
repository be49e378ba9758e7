#!/usr/bin/env python3
"""Regenerates the bundled experiment configurations in configs/.

All random draws use fixed seeds, so rerunning reproduces the files exactly.
"""
import json
import pathlib

import numpy as np

OUT = pathlib.Path(__file__).resolve().parent.parent / "configs"

N_AGENTS = {"net1": 10, "net2": 20, "net3": 20}
# Per-agent SNR range and mean (dB) for the first level; the other two levels
# scale every noise variance by 20 and 180.
SNR1 = (1.6673, 3.5724, 2.7946)
SNR_NOISE_FACTOR = {"snr1": 1.0, "snr2": 20.0, "snr3": 180.0}
SX_BASE = 10.0
TARGET_NORM = 0.4
SCHEMES = {"pn": ("power_normalized", {0.002: 0.002, 0.01: 0.01}),
           "sr": ("sign_regressor", {0.002: 0.001, 0.01: 0.015})}


def snr_draws(rng, n, lo, hi, mean):
    """n values in [lo, hi] hitting lo, hi and the mean exactly."""
    u = rng.uniform(size=n)
    u[0], u[1] = 0.0, 1.0
    rng.shuffle(u)
    target = (mean - lo) / (hi - lo)
    a, b = 1e-3, 1e3
    for _ in range(200):
        p = (a * b) ** 0.5
        if np.mean(u ** p) > target:
            a = p
        else:
            b = p
    return lo + (hi - lo) * u ** p


def signal_power(w, regressor):
    r = np.eye(2) if regressor == "white" else np.array([[1.0, 0.5], [0.5, 1.0]])
    return float(w @ r @ w)


def validation_agents(net):
    rng = np.random.default_rng({"net1": 101, "net2": 202, "net3": 303}[net])
    n = N_AGENTS[net]
    w = rng.standard_normal(2)
    w *= TARGET_NORM / np.linalg.norm(w)
    sx = SX_BASE * rng.uniform(0.8, 1.2, size=n)
    snr = snr_draws(rng, n, *SNR1)
    return w, sx, snr


def validation_config(net, snr_level, regressor, mu, scheme):
    w, sx, snr = validation_agents(net)
    sz = sx * signal_power(w, regressor) / 10 ** (snr / 10) * SNR_NOISE_FACTOR[snr_level]
    name, nus = SCHEMES[scheme]
    return {
        "name": f"{net}_{snr_level}_{regressor}_mu{mu}_{scheme}",
        "topology": net,
        "filter_len": 2,
        "agents": {"regressor": regressor, "sigma_x2": sx.round(6).tolist(), "sigma_z2": sz.round(9).tolist()},
        "targets": {"transition_len": 500, "stages": [{"start": 0, "w": w.round(9).tolist()}]},
        "components": [{"a2": "identity", "mu": mu}, {"a2": "averaging", "mu": mu}],
        "combiner": {"scheme": name, "nu": nus[mu], "epsilon": 0.05, "eta": 0.95},
        "horizon": 20000,
        "runs": 100,
        "seed": 20190601,
        "steady_window": 2000,
    }


def tracking_base():
    rng = np.random.default_rng(404)
    n, L = 10, 50
    sx = rng.uniform(0.8, 1.2, size=n)
    sz = rng.uniform(0.01, 0.05, size=n)
    one = rng.standard_normal(L)
    two = rng.standard_normal((2, L))
    three = rng.standard_normal((3, L))
    final = rng.standard_normal(L)
    groups2 = [0] * 5 + [1] * 5
    groups3 = [0] * 3 + [1] * 3 + [2] * 4
    stages = [
        {"start": 0, "w": one.round(9).tolist()},
        {"start": 1000, "w": [two[g].round(9).tolist() for g in groups2]},
        {"start": 2500, "w": [three[g].round(9).tolist() for g in groups3]},
        {"start": 4000, "w": final.round(9).tolist()},
    ]
    return {
        "topology": "net1",
        "filter_len": L,
        "agents": {"regressor": "white", "sigma_x2": sx.round(6).tolist(), "sigma_z2": sz.round(6).tolist()},
        "targets": {"transition_len": 500, "stages": stages},
        "horizon": 7000,
        "runs": 100,
        "seed": 20190602,
        "steady_window": 500,
    }


TRACKING_MU = 0.01
TRACKING_TAU = 0.1


def tracking_config(adaptive, scheme, nu=None):
    cfg = tracking_base()
    if adaptive:
        comps = [{"a2_mode": "adaptive_projection", "mu": TRACKING_MU},
                 {"a2_mode": "adaptive_relative_variance", "mu": TRACKING_MU, "tau": TRACKING_TAU}]
        default_nu = {"pn": 0.04, "sr": 0.03}[scheme]
    else:
        comps = [{"a2": "identity", "mu": TRACKING_MU}, {"a2": "averaging", "mu": TRACKING_MU}]
        default_nu = {"pn": 0.01, "sr": 0.015}[scheme]
    nu = default_nu if nu is None else nu
    kind = "adaptive" if adaptive else "static"
    cfg = {"name": f"tracking_{kind}_{scheme}" + ("" if nu == default_nu else f"_nu{nu}"), **cfg}
    cfg["components"] = comps
    cfg["combiner"] = {"scheme": SCHEMES[scheme][0], "nu": nu, "epsilon": 0.05, "eta": 0.95}
    return cfg


def multi_config():
    cfg = tracking_base()
    cfg = {"name": "tracking_multi3", **cfg}
    cfg["components"] = [{"a2": "identity", "mu": TRACKING_MU}, {"a2": "averaging", "mu": TRACKING_MU},
                         {"a2": "metropolis", "mu": TRACKING_MU}]
    cfg["combiner"] = {"scheme": "multi_sign", "nu": 0.01, "delta": 0.01}
    return cfg


def write(cfg):
    OUT.mkdir(exist_ok=True)
    (OUT / f"{cfg['name']}.json").write_text(json.dumps(cfg, indent=1) + "\n")


def main():
    for net in N_AGENTS:
        for level in SNR_NOISE_FACTOR:
            for regressor in ("white", "ar1"):
                for mu in (0.002, 0.01):
                    for scheme in SCHEMES:
                        write(validation_config(net, level, regressor, mu, scheme))
    for adaptive in (False, True):
        for scheme in ("pn", "sr"):
            write(tracking_config(adaptive, scheme))
    for nu in (0.001, 0.005, 0.05):
        write(tracking_config(False, "pn", nu))
    for nu in (0.001, 0.005, 0.05):
        write(tracking_config(False, "sr", nu))
    write(multi_config())


if __name__ == "__main__":
    main()
