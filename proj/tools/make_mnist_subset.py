#!/usr/bin/env python3
"""Builds the bundled 10k-digit MNIST subset as gzipped IDX files.

Source: the `mnist` npm package (github.com/cazala/mnist), which ships
10,000 MNIST digits as JSON arrays of pixel/255 rounded to three decimals.
The rounding is injective over 0..255, so the original bytes are recovered
with round(v * 255).

Usage:
    npm pack mnist && tar xzf mnist-*.tgz
    python3 tools/make_mnist_subset.py package/src/digits data/
"""

import gzip
import json
import pathlib
import struct
import sys


def main() -> int:
    if len(sys.argv) != 3:
        print(__doc__)
        return 1
    digits_dir = pathlib.Path(sys.argv[1])
    out_dir = pathlib.Path(sys.argv[2])
    out_dir.mkdir(parents=True, exist_ok=True)

    images = bytearray()
    labels = bytearray()
    count = 0
    for digit in range(10):
        values = json.loads((digits_dir / f"{digit}.json").read_text())["data"]
        if len(values) % 784:
            raise SystemExit(f"{digit}.json: length {len(values)} not a multiple of 784")
        for v in values:
            b = round(v * 255)
            if not 0 <= b <= 255:
                raise SystemExit(f"pixel out of range: {v}")
            images.append(b)
        n = len(values) // 784
        labels.extend([digit] * n)
        count += n

    img_header = struct.pack(">IIII", 0x00000803, count, 28, 28)
    lbl_header = struct.pack(">II", 0x00000801, count)
    # mtime=0 keeps the archives byte-reproducible.
    with gzip.GzipFile(out_dir / "mnist10k-images-idx3-ubyte.gz", "wb", mtime=0) as f:
        f.write(img_header + bytes(images))
    with gzip.GzipFile(out_dir / "mnist10k-labels-idx1-ubyte.gz", "wb", mtime=0) as f:
        f.write(lbl_header + bytes(labels))
    print(f"wrote {count} images to {out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
