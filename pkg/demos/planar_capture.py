"""Validate the range-noise model against flat-wall scans.

Scans synthetic planes between 0.5 m and 3 m, fits a plane to each sparse
cloud by SVD, and tabulates the orthogonal residual.  With the default
coefficient the residual grows linearly with range, matching the bench
anchor of roughly 0.069 m at 3 m.
"""

from pathlib import Path

import numpy as np

from memslidar.lidar_sim import CaptureConfig, capture
from memslidar.metrics import depth_to_points, planar_rmse
from memslidar.scan_engine import MirrorModel, gen_full_fov
from memslidar.scene_io import Primitive, SyntheticSpec, generate_synthetic

OUT = Path(__file__).parent / "out"
DIMS = (64, 48)


def plane_frame(z_m: float):
    spec = SyntheticSpec(
        width=DIMS[0], height=DIMS[1], n_frames=1,
        primitives=(Primitive(kind="plane", z_m=z_m, texture="flat"),),
    )
    return generate_synthetic(spec, seed=0).frames[0]


def main():
    import math

    model = MirrorModel(fov_rad=math.radians(25.0),
                        sample_rate_hz=2300.0, frame_overhead_s=0.0)
    pattern = gen_full_fov(model, 10.0, DIMS)
    config = CaptureConfig(z_max_m=10.0)  # gate off so far planes survive
    n_seeds = 10

    OUT.mkdir(exist_ok=True)
    rows = ["z_m,mean_planar_rmse_m,rel_pct,n_samples"]
    print(f"{len(pattern.samples)} samples per frame, {n_seeds} seeds per plane")
    print("   z_m   planar rmse   rmse/z")
    for z in np.linspace(0.5, 3.0, 6):
        frame = plane_frame(float(z))
        intr = frame.intrinsics
        rmses = []
        for seed in range(n_seeds):
            sparse = capture(frame, pattern, config, noise_seed=seed)
            pts = depth_to_points(sparse.depth_m, intr.fx_px, intr.fy_px,
                                  intr.cx_px, intr.cy_px)
            rmses.append(planar_rmse(pts))
        mean = float(np.mean(rmses))
        rows.append(f"{z:.2f},{mean:.6f},{100 * mean / z:.3f},{len(pts)}")
        print(f"  {z:5.2f}   {mean:9.4f} m   {100 * mean / z:5.2f}%")
    (OUT / "planar_validation.csv").write_text("\n".join(rows) + "\n")
    print(f"\nresidual scales with range at the noise coefficient "
          f"({config.noise_coeff:.3f}); table -> {OUT / 'planar_validation.csv'}")


if __name__ == "__main__":
    main()
