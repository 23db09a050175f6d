"""Quadrilateral region-proposal toolkit for oriented object detection."""

from .anchors import Anchor, AnchorSpec, anchor_shapes, grid_anchors, pyramid_anchors
from .boxcoder import (AnchorLabel, Delta8, assign_targets, decode, encode,
                       sample_minibatch)
from .dota_io import (ABBREVIATIONS, CATEGORIES, AnnotationRecord, ParseStats,
                      TileWindow, crop_annotations, merge_tiles,
                      parse_annotations, parse_detections, read_pgm, tile_plan,
                      write_annotations, write_detections, write_pgm)
from .errors import (ConfigError, DegenerateQuad, ParseError, PlacementError,
                     QuadpropError, ShapeError)
from .evaluation import (ClassAP, PRPoint, average_precision, evaluate,
                         match_detections, mean_ap, pr_curve)
from .geometry import Point, Quad, aabb, area, canonicalize, intersection_area, iou
from .model import (FeatureMap, PyramidSpec, backbone_forward, fpn_fuse,
                    rpn_head, smooth_l1, softmax_ce)
from .postprocess import Detection, filter_detections, quad_nms
from .synth import Scene, generate_scene, oracle_score

__version__ = "0.1.0"
