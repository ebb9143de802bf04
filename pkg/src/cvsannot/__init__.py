"""Annotation platform for building critical-view-of-safety datasets from
laparoscopic cholecystectomy videos: screening, keyframe sampling, multi-rater
criteria assessment, polygon segmentation, QA metrics, and dataset export."""

__version__ = "0.1.0"
