from .roster import AUDIO_DIM, ClassSpec, build_roster  # noqa: F401
from .samples import ObjectTrack, VideoSample, load_sample, save_sample, semantic_gt  # noqa: F401
from .generator import (  # noqa: F401
    SPLITS,
    AsyncDatasetWriter,
    DatasetManifest,
    draw_sample,
    generate_dataset,
    load_manifest,
    split_dirs,
)
