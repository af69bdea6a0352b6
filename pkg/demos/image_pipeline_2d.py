"""
From a scan to a treatment plan
===============================

Turn a grayscale image into a triangle mesh and initial density, optimize
the dose on it and write VTK snapshots for ParaView.
"""

import sys
from pathlib import Path

import numpy as np

from rdoptctl import (ExportSpec, GridImage, IngestConfig, ModelParams, OptimizeConfig,
                      Problem, TimeGrid, build_initial_condition, compare_with_constant,
                      export_control_csv, export_snapshots, ingestion_summary)

###############################################################################
# A synthetic blob stands in for a segmented slice. Any PGM or CSV image can
# be loaded with :func:`rdoptctl.read_image` instead.

n = 32
yy, xx = np.mgrid[0:n, 0:n]
r = np.hypot(xx - n / 2, yy - n / 2) / 14
image = GridImage(np.clip(1 - r ** 2, 0, None) * 200)

mesh, u0 = build_initial_condition(image, IngestConfig(threshold=0.05))
for key, value in ingestion_summary(mesh, u0).items():
    print(f"{key} = {value}")

###############################################################################
# Optimize on the image mesh with pixel spacing as the length unit. Slow
# growth and diffusion over a long horizon, with a heavy dose penalty since
# the burden integrates over hundreds of pixels.

problem = Problem(mesh, ModelParams(0.012, 0.002), TimeGrid(42.0, 420), u0)
cmp = compare_with_constant(problem, OptimizeConfig(alpha=1e6))
print(f"J* = {cmp.J_optimal:.4f}  J_const = {cmp.J_constant:.4f}  "
      f"iterations = {cmp.report.iterations}  converged = {cmp.report.converged}")

###############################################################################
# Write the optimal dose and four tumour snapshots.

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")
out.mkdir(parents=True, exist_ok=True)
export_control_csv(problem.grid, cmp.report.final_control, out / "control.csv", cmp.report)
for path in export_snapshots(cmp.report.final_state, ExportSpec(out)):
    print("wrote", path)
