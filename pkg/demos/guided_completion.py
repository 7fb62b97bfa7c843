"""Sparse-to-dense completion with and without color guidance.

Captures a textured two-depth scene at a small sample budget, completes it
once with the RGB guidance term enabled and once with it disabled, and
compares error metrics on the dense result.  Guidance keeps samples from
bleeding across the color edge that separates the two depths.
"""

import math
from pathlib import Path

import numpy as np

from memslidar.completion import GuidedFillParams, complete
from memslidar.lidar_sim import CaptureConfig, capture
from memslidar.metrics import METRICS_CSV_HEADER, compute
from memslidar.scan_engine import MirrorModel, gen_full_fov
from memslidar.scene_io import Primitive, SyntheticSpec, generate_synthetic

OUT = Path(__file__).parent / "out"
DIMS = (96, 72)


def two_region_frame():
    # near quad covers the left part of the image and differs in color
    spec = SyntheticSpec(
        width=DIMS[0], height=DIMS[1], n_frames=1,
        primitives=(
            Primitive(kind="plane", z_m=2.4, texture="noise",
                      color=(200, 160, 60)),
            Primitive(kind="quad", z_m=1.2, center_xy_m=(-0.14, 0.0),
                      size_xy_m=(0.28, 0.5), texture="noise",
                      color=(40, 80, 200)),
        ),
    )
    return generate_synthetic(spec, seed=11).frames[0]


def main():
    frame = two_region_frame()
    model = MirrorModel(fov_rad=math.radians(25.0),
                        sample_rate_hz=1500.0, frame_overhead_s=0.0)
    pattern = gen_full_fov(model, 10.0, DIMS)
    sparse = capture(frame, pattern, CaptureConfig(), noise_seed=4)
    print(f"captured {len(sparse.samples)} of {DIMS[0] * DIMS[1]} pixels "
          f"({100 * len(sparse.samples) / (DIMS[0] * DIMS[1]):.1f}%)")

    variants = {
        "guided": GuidedFillParams(),
        "unguided": GuidedFillParams(sigma_color=float("inf")),
    }
    OUT.mkdir(exist_ok=True)
    rows = ["variant," + METRICS_CSV_HEADER]
    for name, params in variants.items():
        dense = complete(sparse, frame.rgb, params)
        report = compute(dense.depth_m, frame.depth_gt)
        rows.append(f"{name},{report.to_csv_row()}")
        print(f"  {name:9s} MRE {report.mre_pct:5.2f}%   RMSE {report.rmse_m:.3f} m"
              f"   d1 {report.delta1_pct:.1f}%")
    (OUT / "completion_comparison.csv").write_text("\n".join(rows) + "\n")
    print(f"color guidance localizes the depth discontinuity that pure "
          f"spatial interpolation smears; table -> "
          f"{OUT / 'completion_comparison.csv'}")


if __name__ == "__main__":
    main()
