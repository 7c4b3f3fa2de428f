#!/usr/bin/env python3
"""Convert torchvision ResNet-152 weights to a gramufen archive.

The classifier layer (fc.*) and BatchNorm step counters are dropped; every
other tensor keeps its torchvision name.

    convert_resnet152.py --output resnet152.gmf                # ImageNet weights
    convert_resnet152.py --state-dict r152.pth --output r.gmf  # local state dict
    convert_resnet152.py --random-init --probe 64 --output t.gmf

--probe N also stores a fixed N x N input and the float64 trunk features it
produces, under probe.input / probe.features, so the C++ side can be
checked against torchvision.
"""

import argparse
import json
import struct
import sys

import numpy as np
import torch
import torchvision

MAGIC = b"GMFNARC1"


def write_archive(path, metadata, arrays):
    with open(path, "wb") as f:
        f.write(MAGIC)
        meta = json.dumps(metadata).encode()
        f.write(struct.pack("<Q", len(meta)))
        f.write(meta)
        f.write(struct.pack("<Q", len(arrays)))
        for name in sorted(arrays):
            a = np.ascontiguousarray(arrays[name], dtype="<f8")
            raw = name.encode()
            f.write(struct.pack("<I", len(raw)))
            f.write(raw)
            f.write(struct.pack("<I", a.ndim))
            for d in a.shape:
                f.write(struct.pack("<Q", d))
            f.write(a.tobytes())


def build_model(args):
    if args.random_init:
        torch.manual_seed(args.seed)
        return torchvision.models.resnet152(weights=None)
    model = torchvision.models.resnet152(weights=None)
    if args.state_dict:
        state = torch.load(args.state_dict, map_location="cpu")
    else:
        weights = torchvision.models.ResNet152_Weights.IMAGENET1K_V1
        state = weights.get_state_dict(progress=True)
    model.load_state_dict(state)
    return model


def trunk_features(model, x):
    m = model
    x = m.maxpool(m.relu(m.bn1(m.conv1(x))))
    for layer in (m.layer1, m.layer2, m.layer3, m.layer4):
        x = layer(x)
    return torch.flatten(m.avgpool(x), 1)


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--output", required=True)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--state-dict", help="torch state dict (.pth) instead of the torchvision download")
    src.add_argument("--random-init", action="store_true", help="seeded random weights, for testing")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--probe", type=int, default=0, metavar="N", help="store an N x N probe input and its features")
    args = p.parse_args()

    model = build_model(args).double().eval()
    arrays = {
        name: t.detach().numpy()
        for name, t in model.state_dict().items()
        if not name.startswith("fc.") and not name.endswith("num_batches_tracked")
    }
    metadata = {"format": "resnet152-trunk", "source": "torchvision"}
    if args.probe:
        g = torch.Generator().manual_seed(args.seed + 1)
        x = torch.randn(1, 3, args.probe, args.probe, generator=g, dtype=torch.float64)
        with torch.no_grad():
            feats = trunk_features(model, x)
        arrays["probe.input"] = x.numpy()
        arrays["probe.features"] = feats.numpy()
        metadata["probe"] = args.probe
    write_archive(args.output, metadata, arrays)
    print(f"wrote {len(arrays)} arrays to {args.output}", file=sys.stderr)


if __name__ == "__main__":
    main()
