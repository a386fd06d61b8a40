"""Export the small public datasets of the desk suite to data/public/*.csv.

Needs scikit-learn and statsmodels (both ship these tables offline).
"""
import pathlib

import pandas as pd
import statsmodels.api as sm
from sklearn import datasets

OUT = pathlib.Path(__file__).resolve().parent.parent / "data" / "public"


def breast_cancer():
    b = datasets.load_breast_cancer(as_frame=True)
    df = b.data.copy()
    df.columns = [c.replace(" ", "_") for c in df.columns]
    df["class"] = [b.target_names[t] for t in b.target]
    return df


def digits():
    d = datasets.load_digits(as_frame=True)
    df = d.data.copy()
    df["class"] = ["d%d" % t for t in d.target]
    return df


def anes96():
    df = sm.datasets.anes96.load_pandas().data.drop(columns=["logpopul"])
    df["PID"] = ["pid%d" % int(v) for v in df["PID"]]
    df["educ"] = ["educ%d" % int(v) for v in df["educ"]]
    df["class"] = ["dole" if v else "clinton" for v in df["vote"]]
    return df.drop(columns=["vote"])


def modechoice():
    df = sm.datasets.modechoice.load_pandas().data.drop(columns=["individual"])
    names = {1: "air", 2: "train", 3: "bus", 4: "car"}
    df["mode"] = [names[int(v)] for v in df["mode"]]
    df["class"] = ["chosen" if v else "not_chosen" for v in df["choice"]]
    return df.drop(columns=["choice"])


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    for name, fn in [("breast_cancer", breast_cancer), ("digits", digits), ("anes96", anes96),
                     ("modechoice", modechoice)]:
        df = fn()
        df.to_csv(OUT / f"{name}.csv", index=False, float_format="%.10g")
        print(name, df.shape)


if __name__ == "__main__":
    main()
