#!/usr/bin/env python3
"""Regenerates the bundled benchmark datasets. All outputs are deterministic."""
import os

import numpy as np
from sklearn.datasets import load_breast_cancer, load_digits, make_moons

HERE = os.path.dirname(os.path.abspath(__file__))


def write_csv(name, header, rows):
    path = os.path.join(HERE, name)
    with open(path, "w") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(row) + "\n")
    print(f"{name}: {len(rows)} rows")


def num(v):
    return repr(float(v))


def write_libsvm(name, X, y):
    path = os.path.join(HERE, name)
    with open(path, "w") as f:
        for xi, yi in zip(X, y):
            cells = [str(int(yi))]
            for j, v in enumerate(xi):
                if v != 0.0:
                    cells.append(f"{j + 1}:{float(v)!r}")
            f.write(" ".join(cells) + "\n")
    print(f"{name}: {len(y)} rows")


def breast():
    data = load_breast_cancer()
    names = [n.replace(" ", "_") for n in data.feature_names]
    rows = [[num(v) for v in x] + [str(int(t))] for x, t in zip(data.data, data.target)]
    write_csv("breast.csv", names + ["label"], rows)


def digits_even_odd():
    data = load_digits()
    write_libsvm("digits.libsvm", data.data, data.target % 2)


def gauss():
    # 96 dimensions with a wide class separation: a handful of clean samples
    # misestimates the direction (so small trusted sets underfit), while the
    # full training pool approaches the Bayes rate (~96%).
    rng = np.random.default_rng(42)
    n, d = 1400, 96
    y = (rng.uniform(size=n) < 0.35).astype(int)
    mu = rng.normal(0, 1, size=d)
    mu *= 1.75 / np.linalg.norm(mu)
    X = rng.normal(0, 1, size=(n, d)) + np.where(y[:, None] == 1, mu, -mu)
    write_libsvm("gauss.libsvm", X, y)


def moons():
    # Two informative dimensions buried in 38 nuisance ones; 60/40 balance.
    X, y = make_moons(n_samples=(660, 440), noise=0.15, random_state=7)
    rng = np.random.default_rng(70)
    X = np.hstack([X, rng.normal(0, 1, size=(len(y), 38))])
    order = rng.permutation(len(y))
    X, y = X[order], y[order]
    rows = [[num(v) for v in x] + [str(int(t))] for x, t in zip(X, y)]
    write_csv("moons.csv", [f"x{j}" for j in range(X.shape[1])] + ["label"], rows)


def credit():
    # Messy tabular fixture: mixed numeric/categorical columns plus missing
    # tokens.  The concept is a linear score over the standardized numerics so
    # a few dozen labeled rows can estimate its direction; categoricals only
    # nudge the boundary.  Label sampling keeps an irreducible error floor.
    rng = np.random.default_rng(11)
    n = 2600
    log_income = rng.normal(10.0, 0.5, size=n)
    age = rng.uniform(20, 70, size=n)
    balance = rng.normal(0, 1500, size=n)
    debt_ratio = rng.beta(2, 5, size=n)
    open_lines = rng.poisson(6, size=n)
    utilization = rng.beta(2, 3, size=n)
    purpose = rng.choice(["car", "house", "education"], size=n, p=[0.45, 0.35, 0.2])
    housing = rng.choice(["own", "rent"], size=n, p=[0.55, 0.45])
    employment = rng.choice(["full", "part", "self"], size=n, p=[0.6, 0.25, 0.15])
    score = (
        0.9 * (log_income - 10.0) / 0.5
        + 0.35 * (age - 45.0) / 14.43
        + 0.6 * balance / 1500.0
        - 1.0 * (debt_ratio - 0.2857) / 0.16
        - 0.7 * (utilization - 0.4) / 0.2
        + 0.25 * (open_lines - 6.0) / 2.449
    )
    score = 8.0 * score - 1.85
    score += np.where(purpose == "house", 0.15, 0.0)
    score += np.where(purpose == "education", -0.1, 0.0)
    score += np.where(housing == "own", 0.12, -0.08)
    score += np.where(employment == "self", -0.15, np.where(employment == "full", 0.1, 0.0))
    y = (rng.uniform(size=n) < 1.0 / (1.0 + np.exp(-score))).astype(int)
    rows = []
    for i in range(n):
        inc = "" if rng.uniform() < 0.03 else num(log_income[i])
        bal = "NA" if rng.uniform() < 0.03 else num(balance[i])
        dr = "" if rng.uniform() < 0.02 else num(debt_ratio[i])
        rows.append(
            [inc, num(age[i]), bal, dr, str(int(open_lines[i])), num(utilization[i]),
             purpose[i], housing[i], employment[i], str(y[i])]
        )
    write_csv(
        "credit.csv",
        ["log_income", "age", "balance", "debt_ratio", "open_lines", "utilization",
         "purpose", "housing", "employment", "label"],
        rows,
    )


def twonorm():
    rng = np.random.default_rng(5)
    n, d = 1300, 120
    y = rng.integers(0, 2, size=n)
    a = 2.0 / np.sqrt(d)
    X = rng.normal(0, 1, size=(n, d)) + np.where(y[:, None] == 1, a, -a)
    rows = [[num(v) for v in x] + [str(int(t))] for x, t in zip(X, y)]
    write_csv("twonorm.csv", [f"f{j}" for j in range(d)] + ["label"], rows)


if __name__ == "__main__":
    breast()
    digits_even_odd()
    gauss()
    moons()
    credit()
    twonorm()
