"""Walk through the wavelet front end: color transform, decomposition,
perfect reconstruction, and energy bookkeeping."""

import numpy as np

from wavetok import (
    YCbCrImage,
    decompose,
    gen_synthetic_image,
    reconstruct,
    rgb_to_ycbcr,
)
from wavetok.wavelet import coefficient_energy

rgb = gen_synthetic_image(seed=1, height=64, width=64)
print(f"input image: {rgb.shape[1]}x{rgb.shape[2]}, 3 channels")

ycbcr = rgb_to_ycbcr(rgb)
print(f"chroma is zero-centered: mean cb = {ycbcr.cb.mean():+.4f}")

for levels in (1, 2, 3):
    pyr = decompose(ycbcr, levels, dtype=np.float64)
    recon = reconstruct(pyr)
    err = np.abs(recon.stack() - ycbcr.stack()).max()
    print(f"L={levels}: LL is {pyr.ll.shape[1]}x{pyr.ll.shape[2]}, "
          f"round-trip max error {err:.2e}")

# the transform is orthonormal, so coefficient energy equals pixel energy
pyr = decompose(ycbcr, 3, dtype=np.float64)
pixel_energy = (ycbcr.stack() ** 2).sum()
print(f"energy ratio (coefficients / pixels): "
      f"{coefficient_energy(pyr) / pixel_energy:.12f}")

# a constant image has no detail anywhere: every detail subband is exactly 0
flat = decompose(YCbCrImage.from_stack(np.full((3, 32, 32), 0.5)), 3, dtype=np.float64)
all_zero = all(
    np.all(b == 0.0)
    for bands in flat.details
    for b in (bands.lh, bands.hl, bands.hh)
)
print(f"constant image detail subbands all exactly zero: {all_zero}")
