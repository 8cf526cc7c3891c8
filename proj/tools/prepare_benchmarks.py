#!/usr/bin/env python3
"""Export the four public survival benchmarks to the CSV layout `addhaz` reads.

The DeepSurv-processed METABRIC and SUPPORT tables are redistributed in the
`survival_datasets` wheel (pycox layout, anonymised x0..xN columns). The
Rotterdam & GBSG combination is rebuilt from the Rotterdam node-positive
subset and the GBSG2 trial (both shipped by `survivors`), and WHAS uses the
WHAS500 cohort from `scikit-survival` restricted to the DeepSurv covariates.

Usage: python3 tools/prepare_benchmarks.py [--out data] [--wheels /tmp/wheels]
"""
import argparse
import io
import pathlib
import re
import subprocess
import sys
import zipfile

import pandas as pd

WHEELS = {
    "survival_datasets": "survival-datasets==0.1.5",
    "survivors": "survivors==1.8.0",
    "sksurv": "scikit-survival==0.25.0",
}

METABRIC_NAMES = ["mki67", "egfr", "pgr", "erbb2", "hormone_treatment",
                  "radiotherapy", "chemotherapy", "er_positive", "age"]
SUPPORT_NAMES = ["age", "sex", "n_comorbidities", "race", "diabetes", "dementia",
                 "cancer", "mean_bp", "heart_rate", "resp_rate", "temperature",
                 "sodium", "wbc", "creatinine"]

# GBSG follow-up ends near seven years; Rotterdam is censored there as well.
GBSG_ADMIN_CENSOR_MONTHS = 84.0
DAYS_PER_MONTH = 365.25 / 12.0


def fetch(spec, dest):
    dest.mkdir(parents=True, exist_ok=True)
    subprocess.run([sys.executable, "-m", "pip", "download", spec, "--no-deps",
                    "--timeout", "300", "-d", str(dest)], check=True)
    name = spec.split("==")[0].lower().replace("-", "_")
    for whl in dest.glob("*.whl"):
        if whl.name.lower().startswith(name):
            return zipfile.ZipFile(whl)
    raise FileNotFoundError(spec)


def finish(df, features):
    out = df[features + ["duration", "event"]].copy()
    out["event"] = out["event"].astype(int)
    return out.reset_index(drop=True)


def metabric(z):
    df = pd.read_feather(io.BytesIO(z.read("survdata/metabric.feather")))
    df = df.rename(columns={f"x{i}": n for i, n in enumerate(METABRIC_NAMES)})
    return finish(df, METABRIC_NAMES)


def support(z):
    df = pd.read_feather(io.BytesIO(z.read("survdata/support.feather")))
    df = df.rename(columns={f"x{i}": n for i, n in enumerate(SUPPORT_NAMES)})
    return finish(df, SUPPORT_NAMES)


def gbsg(z):
    base = "survivors/datasets/data/"
    rott = pd.read_csv(io.BytesIO(z.read(base + "rott2.csv")))
    rott = rott[rott["num_nodes"] > 0]
    r = pd.DataFrame({
        "hormone_treatment": (rott["fac_hormon"] == "yes").astype(int),
        "grade": rott["fac_grade"].astype(int),
        "menopause": (rott["fac_meno"] == "post").astype(int),
        "age": rott["num_age"],
        "positive_nodes": rott["num_nodes"],
        "progesterone": rott["num_progesterone"],
        "estrogen": rott["num_estrogen"],
        "duration": rott["time"],
        "event": rott["event"],
    })
    late = r["duration"] > GBSG_ADMIN_CENSOR_MONTHS
    r.loc[late, "duration"] = GBSG_ADMIN_CENSOR_MONTHS
    r.loc[late, "event"] = 0

    g = pd.read_csv(io.BytesIO(z.read(base + "GBSG.csv")))
    t = pd.DataFrame({
        "hormone_treatment": g["htreat"].astype(int),
        "grade": g["tumgrad"].astype(int),
        "menopause": (g["menostat"] == 2).astype(int),
        "age": g["age"],
        "positive_nodes": g["posnodal"],
        "progesterone": g["prm"],
        "estrogen": g["esm"],
        "duration": g["rfst"] / DAYS_PER_MONTH,
        "event": g["cens"],
    })
    df = pd.concat([r, t], ignore_index=True)
    return finish(df, [c for c in df.columns if c not in ("duration", "event")])


def whas(z):
    text = z.read("sksurv/datasets/data/whas500.arff").decode()
    cols = re.findall(r"@ATTRIBUTE\s+(\w+)", text)
    body = text.split("@DATA", 1)[1]
    df = pd.read_csv(io.StringIO(body), header=None, names=cols)
    out = pd.DataFrame({
        "age": df["age"],
        "sex": df["gender"].astype(int),
        "bmi": df["bmi"],
        "chf": df["chf"].astype(int),
        "miord": df["miord"].astype(int),
        "duration": df["lenfol"],
        "event": df["fstat"],
    })
    return finish(out, ["age", "sex", "bmi", "chf", "miord"])


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="data")
    ap.add_argument("--wheels", default="/tmp/addhaz-wheels")
    args = ap.parse_args()
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    wheels = pathlib.Path(args.wheels)

    sd = fetch(WHEELS["survival_datasets"], wheels)
    sv = fetch(WHEELS["survivors"], wheels)
    sk = fetch(WHEELS["sksurv"], wheels)
    tables = {"metabric": metabric(sd), "support": support(sd),
              "gbsg": gbsg(sv), "whas": whas(sk)}
    for name, df in tables.items():
        path = out / f"{name}.csv"
        df.to_csv(path, index=False, float_format="%.10g")
        print(f"{path}: {len(df)} rows, {df.shape[1] - 2} features, "
              f"{df['event'].mean():.4f} event rate")


if __name__ == "__main__":
    main()
