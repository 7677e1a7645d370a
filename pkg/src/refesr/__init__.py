"""Reference-guided ensemble super-resolution.

Combine the outputs of several component super-resolvers for one LR image
by solving a constrained least-squares problem that balances a
reconstruction constraint against a weight prior learned from a reference
dataset.
"""

__version__ = "0.1.0"

from .errors import RefESRError
from .image import Image, ImageMeta, load_image, rgb_to_luma, save_image
from .metrics import MetricReport, compare, psnr, ssim
from .resample import DegradationModel, add_gaussian_noise, downsample, upsample_bicubic

__all__ = [
    "__version__",
    "RefESRError",
    "Image",
    "ImageMeta",
    "load_image",
    "save_image",
    "rgb_to_luma",
    "MetricReport",
    "compare",
    "psnr",
    "ssim",
    "DegradationModel",
    "downsample",
    "upsample_bicubic",
    "add_gaussian_noise",
]
