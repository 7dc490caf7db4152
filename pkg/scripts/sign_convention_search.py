"""Try every combination of the free choices in the higher brackets and
report the ternary L-infinity residual for each. The choices are the overall
sign, the per-slot sign, and an extra 1/l! on m_l for l >= 3. Exactly one
combination should vanish: the one the library uses.

    python3 scripts/sign_convention_search.py [--seed 7] [--r 3]
"""
import argparse
import itertools
import math
from unittest import mock

from shla import algebroid
from shla.algebroid import LInftyContext, linfty_residual
from shla.randgen import random_form, random_torus_chart, rng_for


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--r", type=int, default=3)
    args = ap.parse_args()

    chart = random_torus_chart(1, args.r, args.seed, nterms=1)
    rng = rng_for(args.seed)
    pts = chart.sample(30, args.seed)
    inputs = {
        "deg 1,1,1": [random_form(chart, 1, rng, nterms=1) for _ in range(3)],
    }
    if args.r >= 4:
        inputs["deg 1,2,1"] = [random_form(chart, d, rng, nterms=1) for d in (1, 2, 1)]

    real_slot, real_m = algebroid.slot_sign, algebroid.m_ell

    def m_sym(ctx, forms):
        out = real_m(ctx, forms)
        return out if len(forms) < 3 else out.scale(1 / math.factorial(len(forms)))

    print(f"{'higher_sign':>11} {'slot_sign':>9} {'1/l!':>5} {'inputs':>10}  residual")
    for hs, use_slot, sym in itertools.product((1, -1), (True, False), (False, True)):
        slot = real_slot if use_slot else (lambda degrees: 1)
        with mock.patch.object(algebroid, "slot_sign", slot), \
                mock.patch.object(algebroid, "m_ell", m_sym if sym else real_m):
            ctx = LInftyContext(chart, higher_sign=hs)
            for label, xs in inputs.items():
                res = linfty_residual(ctx, 3, xs, points=pts)
                print(f"{hs:>11} {str(use_slot):>9} {str(sym):>5} {label:>10}  {res:.3e}")


if __name__ == "__main__":
    main()
