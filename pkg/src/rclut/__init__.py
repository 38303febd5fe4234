"""rclut: look-up-table super-resolution.

Train a tiny reference network, cache it into sampled 1D/4D tables, and
upscale images with integer table lookups only.  See the submodules:

* ``imagecore``  - PNG I/O, color conversion, resampling, rotation
* ``refnet``     - the float network with hand-written backprop
* ``trainer``    - datasets, Adam loop, LUT-aware finetuning
* ``lutpack``    - network -> tables, the .rclt container, size math
* ``lutengine``  - integer LUT inference (the deployable path)
* ``metrics``    - Y-channel PSNR/SSIM evaluation
* ``cli``        - the ``rclut`` command
"""

from .errors import (
    ConfigError,
    CorruptPackError,
    DataError,
    EmptyImageError,
    RclutError,
    UnsupportedImageError,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "CorruptPackError",
    "DataError",
    "EmptyImageError",
    "RclutError",
    "UnsupportedImageError",
    "__version__",
]
