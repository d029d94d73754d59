"""Dataset fixtures shared by the evaluation and CLI tests."""

import numpy as np

from lesion_locus.imaging import write_mask, write_rgb
from lesion_locus.manifest import write_manifest
from lesion_locus.synthetic import make_suite


def write_dataset(root, n, seed=42, width=160, height=120, frame=6, edge_sigma=2.0):
    """Write ``n`` synthetic images with mask ground truth and a manifest."""
    root.mkdir(parents=True, exist_ok=True)
    cases = make_suite(n, seed=seed, width=width, height=height, frame=frame, edge_sigma=edge_sigma)
    rows = []
    for i, c in enumerate(cases):
        write_rgb(root / f"img{i:02d}.png", c.image)
        write_mask(root / f"img{i:02d}_gt.png", c.gt_mask)
        rows.append((f"img{i:02d}.png", f"img{i:02d}_gt.png", "mask"))
    write_manifest(root / "manifest.csv", rows)
    return root / "manifest.csv", cases


def planted_pairs(n=428, slope=0.9, intercept=-15000.0, noise_frac=0.02, seed=0):
    """Points on a known line with Gaussian noise of a given fraction of the y range."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(40000, 250000, n)
    y_true = slope * x + intercept
    sigma = noise_frac * (y_true.max() - y_true.min())
    y = y_true + rng.normal(0.0, sigma, n)
    return list(zip(x.tolist(), y.tolist()))
