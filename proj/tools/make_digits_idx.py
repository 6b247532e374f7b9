#!/usr/bin/env python3
"""Generate a small handwritten-digit stand-in corpus in IDX format.

Renders the glyphs 0-9 in several fonts, applies seeded random affine
distortions (shift, rotation, shear, scale) plus mild blur and intensity
jitter, and writes the four standard IDX files (28x28 grayscale,
white-on-black) into the output directory:

    train-images-idx3-ubyte   train-labels-idx1-ubyte
    t10k-images-idx3-ubyte    t10k-labels-idx1-ubyte

The corpus is for engine validation where no real digit data is on disk;
it is easier than the real thing but exercises the identical input path.

Usage: tools/make_digits_idx.py [--train 3000] [--test 1000]
                                [--seed 5] [--out data/digits]
"""

import argparse
import random
import struct

from PIL import Image, ImageDraw, ImageFilter, ImageFont

FONTS = [
    "/usr/share/fonts/truetype/dejavu/DejaVuSans.ttf",
    "/usr/share/fonts/truetype/dejavu/DejaVuSans-Bold.ttf",
    "/usr/share/fonts/truetype/dejavu/DejaVuSansMono.ttf",
    "/usr/share/fonts/truetype/dejavu/DejaVuSansMono-Bold.ttf",
    "/usr/share/fonts/truetype/dejavu/DejaVuSerif.ttf",
    "/usr/share/fonts/truetype/dejavu/DejaVuSerif-Bold.ttf",
]

SIZE = 28
CANVAS = 64  # render large, distort, then downsample


def render_digit(digit: int, rng: random.Random) -> bytes:
    font_path = rng.choice(FONTS)
    font = ImageFont.truetype(font_path, rng.randint(34, 46))
    img = Image.new("L", (CANVAS, CANVAS), 0)
    draw = ImageDraw.Draw(img)
    left, top, right, bottom = draw.textbbox((0, 0), str(digit), font=font)
    x = (CANVAS - (right - left)) / 2 - left
    y = (CANVAS - (bottom - top)) / 2 - top
    draw.text((x, y), str(digit), fill=255, font=font)

    # Random affine map about the canvas center: rotation, shear, scale,
    # translation. PIL's matrix maps output pixels to input pixels.
    import math

    angle = math.radians(rng.uniform(-12.0, 12.0))
    shear = rng.uniform(-0.25, 0.25)
    sx = rng.uniform(0.85, 1.15)
    sy = rng.uniform(0.85, 1.15)
    dx = rng.uniform(-3.0, 3.0)
    dy = rng.uniform(-3.0, 3.0)
    ca, sa = math.cos(angle), math.sin(angle)
    # inverse of translate(center+d) . rotate . shear . scale . translate(-center)
    a = ca / sx
    b = (sa + shear * ca) / sy
    c_ = -sa / sx
    d = (ca - shear * sa) / sy
    cx = cy = CANVAS / 2
    e = cx - a * (cx + dx) - b * (cy + dy)
    f = cy - c_ * (cx + dx) - d * (cy + dy)
    img = img.transform((CANVAS, CANVAS), Image.AFFINE, (a, b, e, c_, d, f),
                        resample=Image.BILINEAR, fillcolor=0)

    img = img.filter(ImageFilter.GaussianBlur(rng.uniform(0.3, 0.8)))
    img = img.resize((SIZE, SIZE), Image.BILINEAR)

    # Saturating contrast stretch: real digit scans are bimodal (background
    # 0, stroke cores at full intensity, a thin antialiased ramp between);
    # plain downsampling leaves uniformly gray strokes instead.
    gain = rng.uniform(1.6, 2.4)
    px = bytes(min(255, int(p * gain)) for p in img.tobytes())
    return px


def write_idx(images_path, labels_path, images, labels):
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">IIII", 2051, len(images), SIZE, SIZE))
        for img in images:
            fh.write(img)
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">II", 2049, len(labels)))
        fh.write(bytes(labels))


def make_split(count: int, rng: random.Random):
    images, labels = [], []
    for i in range(count):
        digit = i % 10  # balanced classes
        images.append(render_digit(digit, rng))
        labels.append(digit)
    order = list(range(count))
    rng.shuffle(order)
    return [images[i] for i in order], [labels[i] for i in order]


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--train", type=int, default=3000)
    ap.add_argument("--test", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=5)
    ap.add_argument("--out", default="data/digits")
    args = ap.parse_args()

    import os

    os.makedirs(args.out, exist_ok=True)
    rng = random.Random(args.seed)
    tr_img, tr_lab = make_split(args.train, rng)
    te_img, te_lab = make_split(args.test, rng)
    write_idx(os.path.join(args.out, "train-images-idx3-ubyte"),
              os.path.join(args.out, "train-labels-idx1-ubyte"),
              tr_img, tr_lab)
    write_idx(os.path.join(args.out, "t10k-images-idx3-ubyte"),
              os.path.join(args.out, "t10k-labels-idx1-ubyte"),
              te_img, te_lab)
    print(f"wrote {args.train} train / {args.test} test images to {args.out}")


if __name__ == "__main__":
    main()
