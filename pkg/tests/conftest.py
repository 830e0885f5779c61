"""Shared fixtures: the procedural dataset and a small trained bundle.

Both are built once per session; dataset generation is fully seeded so
every test run sees identical bytes.
"""

import pytest

from wxhier.cli import main as cli_main
from wxhier.dataset import load_manifest
from wxhier.synthetic import generate_dataset


@pytest.fixture(scope="session")
def synth_root(tmp_path_factory):
    """Default procedural dataset: 11 classes x 50 images, 64x64, pinned seed."""
    root = tmp_path_factory.mktemp("synth")
    generate_dataset(root)
    return root


@pytest.fixture(scope="session")
def synth_entries(synth_root):
    return load_manifest((synth_root / "manifest.csv").read_bytes())


@pytest.fixture(scope="session")
def small_data(tmp_path_factory):
    """Tiny dataset (8 per class, 40px) for cheap CLI round-trips."""
    root = tmp_path_factory.mktemp("small")
    generate_dataset(root, per_class=8, size=40, seed=77)
    return root


@pytest.fixture(scope="session")
def small_bundle(small_data, tmp_path_factory):
    """Hierarchical bundle trained through the CLI on the tiny dataset."""
    out = tmp_path_factory.mktemp("small_run")
    rc = cli_main(
        [
            "train",
            "--manifest",
            str(small_data / "manifest.csv"),
            "--root",
            str(small_data),
            "--output-dir",
            str(out),
            "--arch",
            "hierarchical",
            "--scale",
            "micro",
            "--input-size",
            "16",
            "--epochs",
            "5",
            "--seed",
            "3",
        ]
    )
    assert rc == 0
    return out / "bundle"
