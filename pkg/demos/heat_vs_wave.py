"""Damped waves behave like heat at large times.

With a = 1 everywhere, the damped wave started from (u0, u1) ends up close
to the heat flow started from u0 + u1. The gap between them shrinks faster
than either solution does.
"""
from dampwave import scenarios as sc
from dampwave.config import with_overrides

cfg = with_overrides(sc.FREE_SPACE, domain={"R_box": 45.0, "h": 0.5},
                     run={"T_end": 120.0, "fit_tmin": 15.0, "fit_tmax": 108.0})
wave, heat, gap = sc.diffusion_pair(cfg)

print("     t     ||u||     ||v||   ||u-v||")
for t, nu, nv, g in zip(gap.times, gap.norm_u, gap.norm_v, gap.gap):
    if t >= 5:
        print(f"{t:6.1f}  {nu:8.4f}  {nv:8.4f}  {g:8.5f}")

fits = gap.fits(cfg.fit_window())
for k, f in fits.items():
    print(f"{k:>5}: t^-{f.exponent:.3f}")
print("extra decay of the gap:", round(fits["gap"].exponent - fits["u"].exponent, 3))
