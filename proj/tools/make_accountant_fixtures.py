#!/usr/bin/env python3
"""Regenerate tests/fixtures/privacy_oracle.json.

Evaluates every closed-form accountant quantity with 60-digit arithmetic,
independently of the C++ implementation. The test suite requires the C++
results to match these values to a relative 1e-10.
"""

import json
import pathlib
import random

import mpmath as mp

mp.mp.dps = 60


def eps_terms(m, sigma, n_l, gmin, gmax, tmin, tmax, tau_b, alpha):
    m, sigma, gmin, gmax, tmin, tmax, tau_b, alpha = map(
        mp.mpf, (m, sigma, gmin, gmax, tmin, tmax, tau_b, alpha)
    )
    lo = gmin * tmin
    hi = gmax * tmax
    first = 2 * alpha / (m * sigma**2) * (hi * tau_b) ** 2 / lo**2
    out = {
        "equal_cov": first,
        "saturating": 2 * alpha / (m * sigma**2) * tau_b**2,
        "sensitivity": 2 / m * tau_b * gmax * tmax / mp.sqrt(n_l),
    }
    denom = (m + 1) * lo**2 - hi**2
    if denom > 0:
        log_term = n_l * alpha / (2 * (alpha - 1)) * mp.log(m * lo**2 / denom)
        out["main"] = first + log_term
        out["main_conservative"] = n_l * first + log_term
    alt_arg = (m - 1) / m + hi**2 / (m * lo**2)
    out["alt_log"] = first + n_l * alpha / (2 * (alpha - 1)) * mp.log(alt_arg)
    return out


def renyi_diag(mean1, var1, mean2, var2, alpha):
    alpha = mp.mpf(alpha)
    total = mp.mpf(0)
    for m1, v1, m2, v2 in zip(mean1, var1, mean2, var2):
        m1, v1, m2, v2 = map(mp.mpf, (m1, v1, m2, v2))
        s = alpha * v2 + (1 - alpha) * v1
        if s <= 0:
            return None
        total += alpha / 2 * (m1 - m2) ** 2 / s
        total -= (mp.log(s) - (1 - alpha) * mp.log(v1) - alpha * mp.log(v2)) / (
            2 * (alpha - 1)
        )
    return total


def main():
    rng = random.Random(20240917)
    fixture = {"eps_cases": [], "rdp_cases": [], "renyi_cases": [], "compose_cases": []}

    pinned = [
        # the worked examples: equal lo/hi collapses main onto saturating
        dict(m=256, sigma=0.1, n_l=512, gamma_min=1.0, gamma_max=1.0,
             tau_h_min=1.0, tau_h_max=1.0, tau_b=1.0, alpha=2.0),
        dict(m=256, sigma=0.1, n_l=512, gamma_min=0.5, gamma_max=1.0,
             tau_h_min=1.0, tau_h_max=1.0, tau_b=1.0, alpha=2.0),
        dict(m=256, sigma=0.1, n_l=512, gamma_min=0.9, gamma_max=1.0,
             tau_h_min=0.9, tau_h_max=1.0, tau_b=1.0, alpha=8.0),
    ]
    cases = list(pinned)
    for _ in range(60):
        m = rng.randrange(2, 1024)
        ratio = rng.uniform(1.0, 0.95 * (m + 1) ** 0.5)
        split = rng.random()
        gmin = rng.uniform(0.05, 1.0)
        tmin = rng.uniform(0.05, 1.0)
        cases.append(dict(
            m=m,
            sigma=rng.uniform(0.01, 3.0),
            n_l=rng.randrange(1, 2048),
            gamma_min=gmin,
            gamma_max=gmin * ratio**split,
            tau_h_min=tmin,
            tau_h_max=tmin * ratio ** (1.0 - split),
            tau_b=rng.uniform(0.05, 3.0),
            alpha=rng.uniform(1.01, 128.0),
        ))
    for case in cases:
        values = eps_terms(case["m"], case["sigma"], case["n_l"], case["gamma_min"],
                           case["gamma_max"], case["tau_h_min"], case["tau_h_max"],
                           case["tau_b"], case["alpha"])
        fixture["eps_cases"].append({
            "params": case,
            "values": {k: mp.nstr(v, 25) for k, v in values.items()},
        })

    rdp_inputs = [(2.0, 1.0, 1e-5), (1.5, 0.25, 1e-6), (64.0, 3.5, 1e-8),
                  (1.01, 10.0, 0.5)]
    for _ in range(20):
        rdp_inputs.append((rng.uniform(1.001, 128.0), rng.uniform(0.0, 50.0),
                           rng.uniform(1e-12, 0.99)))
    for alpha, eps, delta in rdp_inputs:
        value = mp.mpf(eps) + mp.log(1 / mp.mpf(delta)) / (mp.mpf(alpha) - 1)
        fixture["rdp_cases"].append({
            "alpha": alpha, "eps": eps, "delta": delta, "value": mp.nstr(value, 25),
        })

    for _ in range(30):
        dim = rng.randrange(1, 6)
        mean1 = [rng.uniform(-2, 2) for _ in range(dim)]
        mean2 = [rng.uniform(-2, 2) for _ in range(dim)]
        var1 = [rng.uniform(0.05, 3.0) for _ in range(dim)]
        var2 = [rng.uniform(0.05, 3.0) for _ in range(dim)]
        alpha = rng.uniform(1.01, 8.0)
        value = renyi_diag(mean1, var1, mean2, var2, alpha)
        fixture["renyi_cases"].append({
            "mean1": mean1, "var1": var1, "mean2": mean2, "var2": var2,
            "alpha": alpha,
            "value": mp.nstr(value, 25) if value is not None else "inf",
        })

    compose_inputs = [
        dict(eps=[1.0], widths=[1], steps=1),
        dict(eps=[0.25, 0.5], widths=[784, 512], steps=3150),
        dict(eps=[0.1, 0.2, 0.3], widths=[785, 513, 513], steps=15),
    ]
    for case in compose_inputs:
        total = mp.mpf(0)
        for e, w in zip(case["eps"], case["widths"]):
            total += mp.mpf(case["steps"]) * w * mp.mpf(e)
        fixture["compose_cases"].append({**case, "value": mp.nstr(total, 25)})

    out = pathlib.Path(__file__).resolve().parent.parent / "tests" / "fixtures"
    out.mkdir(parents=True, exist_ok=True)
    (out / "privacy_oracle.json").write_text(json.dumps(fixture, indent=1))
    print(f"wrote {out / 'privacy_oracle.json'} "
          f"({len(fixture['eps_cases'])} eps cases)")


if __name__ == "__main__":
    main()
