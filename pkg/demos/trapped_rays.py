"""Two disks that trap a ray.

Two small disks face each other across the x-axis. The damper is one
everywhere except for a thin strip joining them, and that strip is exactly
where a ray can bounce back and forth forever. The ray certifier should
find it; a single disk with a radial damper should pass.
"""
import numpy as np

from dampwave import domain as dm
from dampwave import scenarios as sc
from dampwave.config import with_overrides
from dampwave.rays import Ray, check_egc, trace_ray

trap = with_overrides(sc.TWO_DISK_TRAP, damper={"gcc_n_pos": 80, "gcc_n_dir": 32})
rep = sc.gcc_report(trap)
print(rep.to_text())

ray = rep.worst_ray
print("worst ray starts at", np.round(ray.position, 3), "heading", np.round(ray.direction, 3))

# follow it: every bounce lands back on the axis
segs = trace_ray(ray, list(trap.domain_spec().obstacles), 20.0)
for s in segs[:6]:
    x, y = s.start.position
    print(f"  segment from ({x:+.3f}, {y:+.3f}) length {s.length:.3f}")

# nudge the direction a little and the ray escapes into the damper
tilted = Ray((0.0, 0.0), (np.cos(0.2), np.sin(0.2)))
segs = trace_ray(tilted, list(trap.domain_spec().obstacles), 20.0)
print("tilted ray ends at", np.round(segs[-1].point(segs[-1].length), 2))

disk = with_overrides(sc.GCC_DISK, damper={"gcc_n_pos": 80, "gcc_n_dir": 32})
print()
print(sc.gcc_report(disk).to_text())

# without any damper a single disk still lets rays escape to infinity
spec = disk.domain_spec()
grid = dm.build_grid(spec)
print(check_egc(dm.sample_damper(dm.Zero(), spec, grid), spec, (80, 32), escape_radius=5.0,
                grid=grid).to_text())
