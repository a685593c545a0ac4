"""
Tests for the global and local decoders and their checkpoints.
"""
import shutil
import tempfile
from pathlib import Path

import pytest
import torch

from oneshot_landmarks.decoders import (
    GlobalDecoder,
    LocalDecoder,
    checkpoint_digest,
    decode_batch,
    extract_global_region,
    fuse_features,
    global_decode,
    init_decoder,
    load_decoder,
    local_decode,
    resample_to_frame,
    save_decoder,
)
from oneshot_landmarks.errors import DecoderError
from oneshot_landmarks.models.geometry import CoordTransform
from oneshot_landmarks.models.grids import FeatureMap


class TestDecoders:
    """Construction, shapes and geometry."""

    def setup_method(self):
        torch.manual_seed(0)
        self.features = FeatureMap(
            data=torch.randn(6, 7, 9),
            transform=CoordTransform(scale=4.0, offset=(3.5, 3.5)),
        )

    def test_init_is_deterministic_per_seed(self):
        a = init_decoder("global", 6, out_dim=8, seed=3)
        b = init_decoder("global", 6, out_dim=8, seed=3)
        c = init_decoder("global", 6, out_dim=8, seed=4)
        for (name, pa), (_, pb) in zip(a.state_dict().items(), b.state_dict().items()):
            assert torch.equal(pa, pb), name
        assert not torch.equal(a.conv1.weight, c.conv1.weight)

    def test_stage_classes_and_widths(self):
        g = init_decoder("global", 6, out_dim=8, hidden_dim=5)
        loc = init_decoder("local", 6, out_dim=8)
        assert isinstance(g, GlobalDecoder) and g.stage == "global"
        assert isinstance(loc, LocalDecoder) and loc.stage == "local"
        assert g.widths == [6, 5, 8]
        assert loc.widths == [6, 8, 8]

    def test_unknown_stage(self):
        with pytest.raises(DecoderError) as exc_info:
            init_decoder("middle", 6)
        assert exc_info.value.code == "invalid-decoder-stage"

    def test_global_decode_reaches_target_size(self):
        decoder = init_decoder("global", 6, out_dim=8)
        out = global_decode(self.features, decoder, 32, 40)
        assert tuple(out.data.shape) == (8, 32, 40)
        assert out.transform == CoordTransform.identity()

    def test_local_decode_reaches_crop_size(self):
        decoder = init_decoder("local", 6, out_dim=8)
        out = local_decode(self.features, decoder, 32, 32)
        assert tuple(out.data.shape) == (8, 32, 32)

    def test_wrong_stage(self):
        decoder = init_decoder("local", 6, out_dim=8)
        with pytest.raises(DecoderError) as exc_info:
            global_decode(self.features, decoder, 32, 40)
        assert exc_info.value.code == "wrong-decoder-stage"

    def test_target_smaller_than_grid(self):
        decoder = init_decoder("global", 6, out_dim=8)
        with pytest.raises(DecoderError) as exc_info:
            decode_batch(decoder, self.features.data.unsqueeze(0), self.features.transform, 5, 40)
        assert exc_info.value.code == "invalid-upsample-target"

    def test_output_transform_of_two_stages(self):
        decoder = init_decoder("global", 6, out_dim=8)
        t = decoder.output_transform(CoordTransform(scale=4.0, offset=(3.5, 3.5)))
        # output index j sits over input index j/4 - 0.375
        assert t.scale == 1.0
        assert t.offset == pytest.approx((2.0, 2.0))

    def test_decode_is_differentiable(self):
        decoder = init_decoder("global", 6, out_dim=8)
        out = global_decode(self.features, decoder, 32, 40)
        out.data.sum().backward()
        assert decoder.conv1.weight.grad is not None


class TestResampling:
    """Exact resampling and region extraction."""

    def test_identity_resample_is_exact(self):
        x = torch.arange(12, dtype=torch.float64).reshape(1, 1, 3, 4)
        out = resample_to_frame(x, CoordTransform.identity(), 3, 4)
        assert torch.allclose(out, x)

    def test_resample_interpolates_midpoints(self):
        x = torch.tensor([[[[0.0, 2.0]]]], dtype=torch.float64).expand(1, 1, 2, 2).contiguous()
        out = resample_to_frame(x, CoordTransform(scale=2.0, offset=(0.0, 0.0)), 2, 3)
        assert out[0, 0, 0].tolist() == pytest.approx([0.0, 1.0, 2.0])

    def test_extract_region_of_identity_frame(self):
        data = torch.arange(100, dtype=torch.float64).reshape(1, 10, 10)
        global_map = FeatureMap(data=data)
        crop = CoordTransform(scale=1.0, offset=(2.0, 3.0))
        region = extract_global_region(global_map, crop, 4, 4)
        assert tuple(region.data.shape) == (1, 4, 4)
        assert torch.allclose(region.data[0], data[0, 3:7, 2:6])

    def test_fuse_adds_region(self):
        local = FeatureMap(data=torch.ones(3, 4, 4))
        region = FeatureMap(data=torch.full((3, 4, 4), 2.0))
        fused = fuse_features(local, region)
        assert torch.equal(fused.data, torch.full((3, 4, 4), 3.0))

    def test_fuse_dim_mismatch(self):
        with pytest.raises(DecoderError) as exc_info:
            fuse_features(FeatureMap(data=torch.ones(3, 4, 4)), FeatureMap(data=torch.ones(2, 4, 4)))
        assert exc_info.value.code == "fuse-dim-mismatch"


class TestCheckpoints:
    """safetensors decoder checkpoints."""

    def setup_method(self):
        self.test_dir = Path(tempfile.mkdtemp())

    def teardown_method(self):
        shutil.rmtree(self.test_dir)

    def test_saved_decoder_decodes_identically(self):
        decoder = init_decoder("local", 5, out_dim=4, seed=9)
        path = save_decoder(decoder, self.test_dir / "local.safetensors", config_digest="abc")
        loaded = load_decoder(path)
        assert loaded.stage == "local"
        assert loaded.widths == decoder.widths
        assert loaded.seed == 9
        assert checkpoint_digest(path) == "abc"

        x = torch.randn(1, 5, 6, 6)
        with torch.no_grad():
            assert torch.equal(decoder(x), loaded(x))

    def test_missing_checkpoint(self):
        with pytest.raises(DecoderError) as exc_info:
            load_decoder(self.test_dir / "nope.safetensors")
        assert exc_info.value.code == "checkpoint-missing"
