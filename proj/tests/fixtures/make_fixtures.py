#!/usr/bin/env python3
"""Regenerates the JSON fixtures in this directory. Output is deterministic."""

import json
import random
from pathlib import Path

HERE = Path(__file__).resolve().parent

CATEGORIES = [
    {"id": 1, "name": "person", "supercategory": "person"},
    {"id": 18, "name": "dog", "supercategory": "animal"},
]


def dump(name, obj):
    (HERE / name).write_text(json.dumps(obj, indent=1) + "\n")


def image(i, w=200, h=200):
    return {"id": i, "width": w, "height": h, "file_name": f"{i:012d}.jpg"}


def ann(aid, img, bbox, cat=1, crowd=0):
    x, y, w, h = bbox
    return {"id": aid, "image_id": img, "category_id": cat, "bbox": bbox,
            "area": float(w * h), "iscrowd": crowd}


def evaluation():
    gts = [
        (1, [10, 10, 20, 20]), (1, [100, 100, 50, 50]),
        (2, [0, 0, 120, 100]),
        (3, [10, 10, 50, 50]),
        (4, [20, 20, 20, 20]), (4, [60, 60, 40, 40]),
        (5, [0, 0, 100, 100]),
        (6, [10, 10, 30, 30]), (6, [50, 50, 50, 50]),
    ]
    anns = [ann(i + 1, img, box) for i, (img, box) in enumerate(gts)]
    anns.insert(4, ann(100, 3, [100, 100, 80, 80], crowd=1))
    anns.append(ann(200, 1, [150, 10, 30, 30], cat=18))
    dump("eval_gt.json", {"images": [image(i) for i in range(1, 7)],
                          "annotations": anns, "categories": CATEGORIES})

    dets = [
        (1, [10, 10, 20, 20], 0.95),
        (1, [100, 100, 50, 40], 0.9),
        (2, [0, 0, 120, 100], 0.85),
        (2, [0, 0, 120, 100], 0.3),
        (3, [10, 10, 50, 50], 0.8),
        (3, [110, 110, 40, 40], 0.75),
        (4, [150, 150, 30, 30], 0.7),
        (4, [60, 60, 40, 24], 0.6),
        (5, [0, 0, 100, 60], 0.65),
        (6, [10, 10, 30, 30], 0.5),
    ]
    out = [{"image_id": i, "category_id": 1, "bbox": b, "score": s} for i, b, s in dets]
    out.append({"image_id": 1, "category_id": 18, "bbox": [150, 10, 30, 30], "score": 0.99})
    dump("eval_dets.json", out)

    perfect = [{"image_id": img, "category_id": 1, "bbox": box, "score": 1.0} for img, box in gts]
    dump("perfect_dets.json", perfect)


def roc():
    # One 20x20 person per image; a detection on the person is a true
    # positive, one in the far corner a false positive.
    n = 1000
    images = [image(i, 100, 100) for i in range(1, n + 1)]
    anns = [ann(i, i, [10, 10, 20, 20]) for i in range(1, n + 1)]
    dump("roc_gt.json", {"images": images, "annotations": anns, "categories": CATEGORIES[:1]})

    def dets(scores_tp, scores_fp):
        out = []
        for i, (a, b) in enumerate(zip(scores_tp, scores_fp), start=1):
            out.append({"image_id": i, "category_id": 1, "bbox": [10, 10, 20, 20], "score": a})
            out.append({"image_id": i, "category_id": 1, "bbox": [70, 70, 20, 20], "score": b})
        return out

    dump("roc_separated_dets.json",
         dets([0.6 + 0.01 * i for i in range(40)], [0.01 * i for i in range(40)]))

    # Scores drawn first, then dealt to true and false positives by a random
    # permutation: labels carry no information about the score.
    rng = random.Random(7)
    scores = [round(rng.random(), 6) for _ in range(2 * n)]
    rng.shuffle(scores)
    dump("roc_shuffled_dets.json", dets(scores[:n], scores[n:]))

    ties = [0.9, 0.8, 0.8, 0.7, 0.5, 0.5, 0.4, 0.3]
    dump("roc_curve_dets.json", dets(ties * 5, [0.85, 0.8, 0.6, 0.5, 0.45, 0.3, 0.2, 0.1] * 5))


def subset():
    images = [image(1), image(2), image(3)]
    anns = [
        ann(1, 1, [10, 10, 40, 80]), ann(2, 1, [60, 10, 40, 80]), ann(3, 1, [120, 20, 30, 30], cat=18),
        ann(4, 2, [30, 30, 60, 120]),
        ann(5, 3, [50, 50, 50, 40], cat=18),
    ]
    dump("subset_coco.json", {"info": {"description": "subset fixture"}, "images": images,
                              "annotations": anns, "categories": CATEGORIES})


def coco_official():
    rng = random.Random(2014)
    cats = [
        {"supercategory": "person", "id": 1, "name": "person"},
        {"supercategory": "vehicle", "id": 2, "name": "bicycle"},
        {"supercategory": "animal", "id": 18, "name": "dog"},
    ]
    images, anns = [], []
    aid = 1000
    for i in range(20):
        iid = 391895 + 17 * i
        w, h = rng.choice([(640, 480), (480, 640), (640, 427)])
        images.append({"license": rng.randint(1, 6), "file_name": f"{iid:012d}.jpg",
                       "coco_url": f"http://images.cocodataset.org/val2017/{iid:012d}.jpg",
                       "height": h, "width": w, "date_captured": "2013-11-14 11:18:45",
                       "flickr_url": f"http://farm9.staticflickr.com/8186/{iid}_a.jpg", "id": iid})
        n_person = [0, 1, 1, 2, 3][i % 5]
        for k in range(n_person + rng.randint(0, 2)):
            cat = 1 if k < n_person else rng.choice([2, 18])
            bw, bh = round(rng.uniform(10, w / 3), 2), round(rng.uniform(10, h / 3), 2)
            x, y = round(rng.uniform(0, w - bw), 2), round(rng.uniform(0, h - bh), 2)
            poly = [x, y, x + bw, y, x + bw, y + bh, x, y + bh]
            aid += 1
            anns.append({"segmentation": [[round(v, 2) for v in poly]], "area": round(bw * bh * 0.8, 4),
                         "iscrowd": 0, "image_id": iid, "bbox": [x, y, bw, bh],
                         "category_id": cat, "id": aid})
        if i == 7:
            aid += 1
            anns.append({"segmentation": {"counts": [272, 2, 4, 4, 4, 4, 2, 9], "size": [h, w]},
                         "area": 1224.0, "iscrowd": 1, "image_id": iid,
                         "bbox": [20.0, 30.0, 80.0, 60.0], "category_id": 1, "id": 900100})
    dump("coco_val_sample.json", {
        "info": {"description": "COCO-format sample", "version": "1.0", "year": 2017,
                 "contributor": "fixture", "date_created": "2017/09/01"},
        "licenses": [{"url": "http://creativecommons.org/licenses/by-nc-sa/2.0/", "id": k,
                      "name": "Attribution-NonCommercial-ShareAlike License"} for k in range(1, 7)],
        "images": images, "annotations": anns, "categories": cats})


if __name__ == "__main__":
    evaluation()
    roc()
    subset()
    coco_official()
