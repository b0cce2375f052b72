"""Point-cloud single-object tracking with point-track-transformer attention."""

from .geometry import OrientedBox3, PointCloud, iou_3d
from .attention import PTTConfig, SeedSet, ptt_forward
from .network import TrackerConfig, TrackerNet

__version__ = "0.1.0"

__all__ = ["OrientedBox3", "PointCloud", "iou_3d", "PTTConfig", "SeedSet", "ptt_forward",
           "TrackerConfig", "TrackerNet"]
