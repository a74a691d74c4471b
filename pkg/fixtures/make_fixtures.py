"""Regenerate the shipped fixture documents: python3 fixtures/make_fixtures.py"""
import json
import math
from pathlib import Path

from curliso.shapes import circle, d_shape, half_disc, rectangle
from curliso.xsection import CrossSection

HERE = Path(__file__).parent


def cs_doc(outer, holes=()):
    return {"format_version": 1, **CrossSection(outer, tuple(holes)).to_json()}


def write(name, doc):
    (HERE / name).write_text(json.dumps(doc, indent=1) + "\n")


write("ball.json", cs_doc(half_disc(1.0, 1024)))
write("torus.json", cs_doc(circle((2.0, 0.0), 0.5, 512)))
write("rectangle.json", cs_doc(rectangle(1.0, 3.0, 0.0, 1.0)))
write("axis_touching.json", cs_doc(rectangle(0.0, 1.0, 0.0, 1.0)))
write("d_shape.json", cs_doc(d_shape(1024)))
write("annulus_big_hole.json", cs_doc(circle((5.0, 0.0), 3.0, 2048), [circle((5.0, 0.0), 2.0, 2048)]))
write("annulus_small_hole.json", cs_doc(circle((5.0, 0.0), 3.0, 2048), [circle((5.0, 0.0), 0.1, 2048)]))
write("holed_torus.json", cs_doc(circle((2.0, 0.0), 0.5, 256), [circle((2.0, 0.0), 0.15, 128)]))
write("sweep_torus_center.json", {"format_version": 1, "kind": "torus_center", "radius": 0.5,
                                  "centers": [1.5, 2.0, 3.0, 4.0], "n": 512})
write("sweep_scale.json", {"format_version": 1, "kind": "scale", "base": cs_doc(circle((2.0, 0.0), 0.5, 512)),
                           "scales": [1.0, 2.0, 4.0], "volume_normalize": True})
write("sweep_ellipse_aspect.json", {"format_version": 1, "kind": "ellipse_aspect", "center": [3.0, 0.0],
                                    "area": math.pi * 0.25, "aspects": [1.0, 1.5, 2.0], "n": 512})
