"""Innovation dynamics: new ideas per period under twelve normal shocks.

Fits one third-order Hermite expansion per period with a variance cap and
sampled positivity rows, then compares the quartiles of the surrogate with
direct simulation.  Takes roughly half an hour on one core.

    python3 demos/innovation.py --out results/innovation
"""
import argparse
from dataclasses import replace

import numpy as np

from chaosfit import pipeline as pl


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="results/innovation")
    parser.add_argument("--mc", type=int, default=20000)
    args = parser.parse_args(argv)

    cfg = replace(pl.RunConfig.for_model("innovation"), out_dir=args.out)
    result = pl.run_pipeline(cfg)
    report = pl.validate(result.models, cfg, model_samples=args.mc, pce_samples=args.mc)
    pl.write_validation(args.out, report)

    periods = cfg.model_config().periods
    print(f"{'period':>6} {'q25/med/q75 (pce)':>22} {'q25/med/q75 (mc)':>22} {'var':>8}")
    for r in report["rows"]:
        pce = "/".join(f"{r[k + '_pce']:.2f}" for k in ("q25", "median", "q75"))
        mc = "/".join(f"{r[k + '_mc']:.2f}" for k in ("q25", "median", "q75"))
        print(f"{periods[r['time_index']]:6d} {pce:>22} {mc:>22} {r['variance_exact']:8.3f}")
    var = [r["variance_exact"] for r in report["rows"]]
    print(f"\nsurrogate variance peaks at period {periods[int(np.argmax(var))]}")


if __name__ == "__main__":
    main()
