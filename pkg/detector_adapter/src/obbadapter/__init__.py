"""obbadapter: run an oriented-box vehicle detector over image tiles and
emit the canonical detection JSON consumed by the estimation pipeline."""

from .adapter import AdapterConfig, detect_image, write_detection_file
from .tiling import tile_plan

__version__ = "0.1.0"

__all__ = ["AdapterConfig", "detect_image", "tile_plan",
           "write_detection_file", "__version__"]
