#!/usr/bin/env python3
"""Rebuild IDX files from the digit JSON shipped in the `mnist` npm package.

The npm package (MIT) carries the first 10,000 images of the official MNIST
training set, grouped by digit, with pixels stored as round(byte / 255, 3).
Three decimals are enough to recover every byte exactly via round(v * 255).

Usage:
    npm pack mnist && tar xzf mnist-*.tgz
    python3 scripts/mnist_from_npm.py package/src/digits data/mnist-10k
"""
import gzip
import json
import pathlib
import struct
import sys


def main(src: str, dst: str) -> None:
    src_dir, out = pathlib.Path(src), pathlib.Path(dst)
    out.mkdir(parents=True, exist_ok=True)
    pixels, labels = bytearray(), bytearray()
    for digit in range(10):
        data = json.loads((src_dir / f"{digit}.json").read_text())["data"]
        assert len(data) % 784 == 0
        for v in data:
            b = round(v * 255)
            assert abs(v * 255 - b) < 0.5 and 0 <= b <= 255
            pixels.append(b)
        labels.extend([digit] * (len(data) // 784))
    count = len(labels)
    images = struct.pack(">IIII", 0x803, count, 28, 28) + bytes(pixels)
    label_bytes = struct.pack(">II", 0x801, count) + bytes(labels)
    for name, payload in [
        ("train-images-idx3-ubyte.gz", images),
        ("train-labels-idx1-ubyte.gz", label_bytes),
    ]:
        with open(out / name, "wb") as fh:
            with gzip.GzipFile(filename="", mode="wb", fileobj=fh, mtime=0) as gz:
                gz.write(payload)
    print(f"wrote {count} images to {out}")


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
