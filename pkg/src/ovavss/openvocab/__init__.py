from .crop import CROP_STRATEGIES, CropSpec, crop_object, crop_resize, mask_bbox, square_crop  # noqa: F401
from .encoder import FrozenImageEncoder  # noqa: F401
from .table import EmbeddingTable, build_class_table, load_table  # noqa: F401
from .classify import Classification, classify, classify_track, similarity  # noqa: F401
