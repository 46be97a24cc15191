"""Regenerates tests/data/natural/ from images bundled with scikit-image."""
import pathlib

import numpy as np
import skimage.data
from skimage.transform import resize
from skimage.io import imsave

NAMES = ["astronaut", "chelsea", "coffee", "rocket", "hubble_deep_field",
         "immunohistochemistry", "retina", "camera", "brick", "grass",
         "gravel", "coins"]
OUT_H, OUT_W = 120, 160


def center_crop(img, aspect):
    h, w = img.shape[:2]
    if w / h > aspect:
        nw = int(round(h * aspect))
        x0 = (w - nw) // 2
        return img[:, x0:x0 + nw]
    nh = int(round(w / aspect))
    y0 = (h - nh) // 2
    return img[y0:y0 + nh]


def main():
    out = pathlib.Path(__file__).resolve().parent.parent / "tests" / "data" / "natural"
    out.mkdir(parents=True, exist_ok=True)
    for name in NAMES:
        img = getattr(skimage.data, name)()
        if img.ndim == 2:
            img = np.stack([img] * 3, axis=-1)
        img = center_crop(img[..., :3], OUT_W / OUT_H)
        img = resize(img, (OUT_H, OUT_W), anti_aliasing=True, preserve_range=True)
        imsave(out / f"{name}.png", np.clip(np.rint(img), 0, 255).astype(np.uint8),
               check_contrast=False)


if __name__ == "__main__":
    main()
