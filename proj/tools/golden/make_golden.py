#!/usr/bin/env python3
"""Writes the small golden trace set used by the conformance tests.

Stands in for real captured activations: 8 examples, l=2, d=4, every
question and answer position captured. Residual identities hold exactly in
float32. Also writes the expected a-end spectral features, computed here with
a plain DFT, so the C++ side is checked against an independent implementation.
"""

import cmath
import json
import math
import random
import struct
import sys
from pathlib import Path

L, D, M, N = 2, 4, 4, 4
EXAMPLES = 8


def f32(x):
    return struct.unpack("<f", struct.pack("<f", x))[0]


def make_trace(idx, rng):
    hallucinated = idx % 2 == 1
    caps = []
    for pos in range(M + N):
        layers = []
        h_prev = [f32(rng.uniform(-1, 1)) for _ in range(D)]
        for j in range(L):
            wobble = 1.5 if (hallucinated and pos >= M) else 0.2
            ah = [f32(rng.uniform(-1, 1) + wobble * (-1) ** j) for _ in range(D)]
            mh = [f32(rng.uniform(-1, 1) - wobble * (-1) ** j) for _ in range(D)]
            rh = [f32(a + b) for a, b in zip(h_prev, ah)]
            h = [f32(a + b) for a, b in zip(rh, mh)]
            layers.append((ah, rh, mh, h))
            h_prev = h
        caps.append((pos, 0 if pos < M else 1, layers))
    return {"id": "golden-%d" % idx, "caps": caps, "hallucinated": hallucinated}


def encode(traces):
    out = bytearray(b"HSADTRC1")
    out += struct.pack("<II", 1, len(traces))
    for t in traces:
        for s in (t["id"], "golden-fixture"):
            b = s.encode()
            out += struct.pack("<I", len(b)) + b
        out += struct.pack("<IIIII", L, D, M, N, len(t["caps"]))
        for pos, role, layers in t["caps"]:
            out += struct.pack("<IB", pos, role)
            for ah, rh, mh, h in layers:
                for vec in (ah, rh, mh, h):
                    out += struct.pack("<%df" % D, *vec)
    return bytes(out)


def a_end_features(t):
    # rows: layers descending, each block h, mh, rh, ah
    _, _, layers = t["caps"][M + N - 1]
    feats = []
    for i in range(D):
        x = []
        for j in reversed(range(L)):
            ah, rh, mh, h = layers[j]
            x += [h[i], mh[i], rh[i], ah[i]]
        n = len(x)
        amps = [abs(sum(x[s] * cmath.exp(-2j * math.pi * k * s / n) for s in range(n)))
                for k in range(n // 2 + 1)]
        feats.append(max(amps[1:]))
    return feats


def main():
    out_dir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parents[2] / "tests" / "data"
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = random.Random(20240601)
    traces = [make_trace(i, rng) for i in range(EXAMPLES)]
    (out_dir / "golden_trace.bin").write_bytes(encode(traces))
    with open(out_dir / "golden_manifest.jsonl", "w") as f:
        for t in traces:
            rec = {
                "example_id": t["id"],
                "question": "golden question %s" % t["id"][-1],
                "generated_answer": "answer",
                "reference_answer": "answer",
                "similarity_score": 0.2 if t["hallucinated"] else 0.8,
                "source": "fixture",
            }
            f.write(json.dumps(rec) + "\n")
    with open(out_dir / "golden_features.tsv", "w") as f:
        for t in traces:
            f.write(t["id"] + "\t" + "\t".join("%.17g" % v for v in a_end_features(t)) + "\n")


if __name__ == "__main__":
    main()
