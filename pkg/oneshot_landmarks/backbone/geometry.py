"""
Overlapping-patch grid geometry.
"""
from oneshot_landmarks.errors import BackboneError
from oneshot_landmarks.models.geometry import CoordTransform
from oneshot_landmarks.models.specs import BackboneSpec, PatchGridGeometry


def grid_geometry(h: int, w: int, spec: BackboneSpec) -> PatchGridGeometry:
    """
    Compute the patch grid produced by a backbone on an h x w image.

    Grid index (row, col) corresponds to the receptive-field center
    ``(col * stride + (patch - 1) / 2, row * stride + (patch - 1) / 2)``.

    Args:
        h: Image height in pixels
        w: Image width in pixels
        spec: Backbone specification

    Returns:
        Grid size and grid-to-image transform

    Raises:
        BackboneError: ``image-too-small`` if the image cannot hold one patch
    """
    if h < spec.patch_size or w < spec.patch_size:
        raise BackboneError(
            "image-too-small",
            f"{w}x{h} image is smaller than one {spec.patch_size}x{spec.patch_size} patch",
        )
    center = (spec.patch_size - 1) / 2.0
    return PatchGridGeometry(
        grid_h=(h - spec.patch_size) // spec.stride + 1,
        grid_w=(w - spec.patch_size) // spec.stride + 1,
        transform=CoordTransform(scale=float(spec.stride), offset=(center, center)),
    )
