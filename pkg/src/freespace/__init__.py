"""Voxel-grid radiance fields with free-space floater cleanup."""

from .errors import (CheckpointError, InputDomainError, ManifestParseError, TrainingDiverged,
                     ValidationError)
from .field import (VoxelRadianceField, init_field, inject_floater, load_checkpoint, query,
                    query_backward, save_checkpoint)
from .render import composite, composite_backward, render_image, render_ray, sample_ray
from .scene import (Box, Camera, Dataset, Ray, Sphere, SyntheticScene, generate_ray,
                    load_dataset, render_dataset, save_dataset, trace_oracle)

__version__ = "0.1.0"
