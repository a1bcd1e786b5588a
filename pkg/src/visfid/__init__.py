"""Visual-fidelity toolkit for simplified triangle meshes.

Builds simplification stimuli (quadric edge collapse and vertex
clustering), renders them with a deterministic software rasterizer,
computes automatic fidelity measures (a perceptual image-difference
measure, image MSE, and surface-distance/volume measures), derives
preference predictors, serves a three-task psychophysics protocol over
HTTP, and analyses the resulting responses.
"""

__version__ = "0.1.0"

from .mesh import TriMesh, load_mesh, save_off
from .simplify import Algorithm, SimplifySpec, build_family, qem_simplify, vclust_to_target

__all__ = [
    "TriMesh",
    "load_mesh",
    "save_off",
    "Algorithm",
    "SimplifySpec",
    "qem_simplify",
    "vclust_to_target",
    "build_family",
    "__version__",
]
