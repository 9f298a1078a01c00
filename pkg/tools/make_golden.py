"""Regenerate the CLI golden fixture from the rational-arithmetic oracle in tests/oracle.py.

    python tools/make_golden.py

Writes tests/data/golden_{gt,pred,eval}.json.  Run only when the fixture
itself should change; the evaluator never touches these values.
"""
import json
import os
import sys

import numpy as np

HERE = os.path.dirname(os.path.abspath(__file__))
sys.path.insert(0, os.path.join(HERE, "..", "tests"))

import oracle  # noqa: E402

SEED = 7


def main():
    out = os.path.join(HERE, "..", "tests", "data")
    os.makedirs(out, exist_ok=True)
    doc, res, images, gts, dets = oracle.random_instance(np.random.default_rng(SEED))
    expected = oracle.evaluate(images, gts, dets)
    for name, obj in (("golden_gt.json", doc), ("golden_pred.json", res), ("golden_eval.json", expected)):
        with open(os.path.join(out, name), "w", encoding="utf-8") as fh:
            json.dump(obj, fh, indent=1)
            fh.write("\n")


if __name__ == "__main__":
    main()
