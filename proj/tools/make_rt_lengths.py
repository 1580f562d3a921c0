#!/usr/bin/env python3
# Copyright 2026 The rtbe-sim Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Writes data/rt_lengths.csv, a synthetic stand-in for chat length pairs.

Lengths are lognormal with parameters matched to the target moments
(prompt 222.76 +- 256.36, output 234.51 +- 268.50), clipped to [1, 2048].
"""

import argparse
import csv
import math

import numpy as np

TARGETS = {"prompt": (222.76, 256.36), "output": (234.51, 268.50)}


def lognormal_params(mean, std):
    sigma2 = math.log(1.0 + (std / mean) ** 2)
    return math.log(mean) - sigma2 / 2.0, math.sqrt(sigma2)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="data/rt_lengths.csv")
    ap.add_argument("--count", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=11)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    cols = {}
    for name, (mean, std) in TARGETS.items():
        mu, sigma = lognormal_params(mean, std)
        raw = rng.lognormal(mu, sigma, args.count)
        cols[name] = np.clip(np.rint(raw), 1, 2048).astype(int)

    with open(args.out, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["prompt_len", "output_len"])
        for p, o in zip(cols["prompt"], cols["output"]):
            w.writerow([p, o])

    for name, (mean, std) in TARGETS.items():
        c = cols[name]
        print(f"{name}: mean {c.mean():.2f} (target {mean}), std {c.std():.2f} (target {std})")


if __name__ == "__main__":
    main()
