"""End-to-end corpus pipeline: outputs, determinism, failure isolation."""

from __future__ import annotations

import json
import os
import warnings

import pytest

from visfid.corpus import generate_corpus
from visfid.pipeline import PipelineConfig, run_pipeline


@pytest.fixture(scope="module")
def tiny_manifest(tmp_path_factory):
    d = tmp_path_factory.mktemp("pipe")
    return generate_corpus(str(d), budget=400, n_objects=2)


def run(manifest, out_dir, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return run_pipeline(PipelineConfig(manifest=manifest, out_dir=str(out_dir),
                                           samples=5000, **kw))


class TestPipeline:
    def test_outputs(self, tiny_manifest, tmp_path):
        res = run(tiny_manifest, tmp_path / "out")
        assert res.ok and not res.failures
        assert len(res.measures) == 8  # 2 objects x 4 pairs
        assert len(res.predictions) == 12  # 2 objects x 6 measures
        out = tmp_path / "out"
        for fname in ("measures.csv", "predictions.csv", "config.json"):
            assert (out / fname).exists()
        cfg = json.loads((out / "config.json").read_text())
        assert "achieved_faces" in cfg
        # per-object artifacts
        assert (out / "blob" / "meshes" / "blob_s.off").exists()
        assert (out / "blob" / "images" / "blob_q5.pgm").exists()

    def test_deterministic_bytes(self, tiny_manifest, tmp_path):
        run(tiny_manifest, tmp_path / "a")
        run(tiny_manifest, tmp_path / "b")
        for fname in ("measures.csv", "predictions.csv"):
            assert (tmp_path / "a" / fname).read_bytes() == \
                   (tmp_path / "b" / fname).read_bytes()

    def test_skip_images(self, tiny_manifest, tmp_path):
        res = run(tiny_manifest, tmp_path / "out", write_images=False)
        assert res.ok
        assert not (tmp_path / "out" / "blob" / "images").exists()

    def test_failure_isolated(self, tiny_manifest, tmp_path):
        # corrupt one mesh file: the other object must still be processed
        import shutil

        d = tmp_path / "broken"
        shutil.copytree(os.path.dirname(tiny_manifest), d)
        (d / "meshes" / "blob.off").write_text("OFF\nnot a mesh\n")
        res = run(str(d / "manifest.yaml"), tmp_path / "out")
        assert not res.ok
        assert "blob" in res.failures
        assert {m.object for m in res.measures} == {"ring"}

    def test_parallel_matches_serial(self, tiny_manifest, tmp_path):
        run(tiny_manifest, tmp_path / "serial", workers=1)
        run(tiny_manifest, tmp_path / "par", workers=2)
        assert (tmp_path / "serial" / "measures.csv").read_bytes() == \
               (tmp_path / "par" / "measures.csv").read_bytes()
