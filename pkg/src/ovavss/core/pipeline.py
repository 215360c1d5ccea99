"""Two-stage inference: localize sounding objects, then name them."""

import logging
from dataclasses import dataclass, field

import numpy as np
from pydantic import BaseModel
from scipy.special import expit

from ovavss.config import RunConfig
from ovavss.data.roster import ClassSpec
from ovavss.data.samples import VideoSample
from ovavss.metrics.semantic import assemble_semantic
from ovavss.model.localizer import SoundLocalizer
from ovavss.numcore.nn import resize_array
from ovavss.numcore.tensor import no_grad
from ovavss.openvocab.classify import classify_track
from ovavss.openvocab.encoder import FrozenImageEncoder
from ovavss.openvocab.table import EmbeddingTable, build_class_table

logger = logging.getLogger(__name__)


class ObjectMeta(BaseModel):
    query: int
    class_id: int
    name: str
    score: float
    sounding_score: float
    sounding_frames: list[int]


@dataclass
class DetectedObject:
    meta: ObjectMeta
    masks: np.ndarray  # (T, H, W) bool


@dataclass
class Segmentation:
    semantic: np.ndarray  # (T, H, W) class ids
    objects: list[DetectedObject] = field(default_factory=list)


class OpenVocabPipeline:
    def __init__(self, cfg: RunConfig, model: SoundLocalizer, classes: list[ClassSpec]):
        self.cfg = cfg
        self.model = model
        self.classes = classes
        self.ids = {c.name: c.class_id for c in classes}
        self.encoder = FrozenImageEncoder.from_config(cfg.classifier, cfg.model)
        clf = cfg.classifier
        self.table: EmbeddingTable = build_class_table(
            classes,
            provider=clf.provider,
            encoder=self.encoder,
            views=clf.views,
            size=clf.crop_size,
            temperature=clf.temperature,
            embedding_file=clf.embedding_file,
        )

    def name_masks(self, frames: np.ndarray, masks: np.ndarray):
        return classify_track(
            frames, masks, self.table, self.encoder, self.cfg.ablation.crop, self.cfg.classifier.crop_size
        )

    def segment(self, sample: VideoSample) -> Segmentation:
        size = sample.size
        thresholds = self.cfg.thresholds
        with no_grad():
            final = self.model(sample.frames, sample.audio_feats)[-1]
        sounding = final.sounding.data
        classes: list[int | None] = [None] * len(sounding)
        named = []
        for i in np.flatnonzero(sounding > thresholds.sounding):
            masks = expit(resize_array(final.mask_logits.data[i], size)) > thresholds.mask
            label = self.name_masks(sample.frames, masks)
            if label is None:
                continue
            classes[i] = self.ids[label.name]
            named.append((int(i), label, masks))
        semantic = assemble_semantic(final, classes, size, thresholds)

        objects = []
        for i, label, masks in named:
            # sounding in frame t when the object owns pixels of the semantic map there
            owned = [(semantic[t][masks[t]] == classes[i]).any() for t in range(sample.num_frames)]
            meta = ObjectMeta(
                query=i,
                class_id=classes[i],
                name=label.name,
                score=label.score,
                sounding_score=float(sounding[i]),
                sounding_frames=[t for t, hit in enumerate(owned) if hit],
            )
            objects.append(DetectedObject(meta=meta, masks=masks))
        logger.debug(f"{sample.sample_id}: {len(objects)} sounding objects")
        return Segmentation(semantic=semantic, objects=objects)
