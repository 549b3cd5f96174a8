#!/usr/bin/env python3
"""Regenerate fixtures/: two toy competitions plus scripted provider replies
and simulated execution results that drive a full run without a model or a
Python training stack.

    python3 tools/make_fixtures.py [--out fixtures]

Output is deterministic; re-running must leave git clean.
"""
import argparse
import hashlib
import io
import json
import shutil
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw


def fmt(v):
    return repr(round(float(v), 6))


def csv(header, rows):
    return ",".join(header) + "\n" + "".join(",".join(str(c) for c in r) + "\n" for r in rows)


def validation_ids(ids):
    """Mirror of the engine's split: first hash byte below 0x33."""
    def h(i):
        return hashlib.sha256(("valid:" + i).encode()).hexdigest()
    keep = sorted(i for i in ids if int(h(i)[:2], 16) < 0x33)
    if not keep and ids:
        keep = [min(ids)]
    if len(keep) == len(ids) and len(keep) > 1:
        keep = keep[:-1]
    return keep


def code(tag, body="run()"):
    return "```python\n# sim-tag: " + tag + "\n" + body + "\n```"


def sim(tag, files=None, duration=1.0, exit_status=0, stdout="", stderr=""):
    return {"tag": tag,
            "result": {"exit_status": exit_status, "duration": duration, "stdout": stdout, "stderr": stderr},
            "files": files or {}}


def write_jsonl(path, records):
    path.write_text("".join(json.dumps(r, sort_keys=True) + "\n" for r in records))


def write_json(path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def usage_rows(ids, values, col_values=None):
    return [[i, fmt(v), "Public" if k % 2 == 0 else "Private"] for k, (i, v) in enumerate(zip(ids, values))]


def common_setup_replies(modalities):
    return [
        {"template": "summarise_competition", "response": "Notes: rows are samples, one numeric target."},
        {"template": "understand_competition",
         "response": json.dumps({"task_summary": "Predict the target for each test id.",
                                 "data_summary": "data/train.csv holds inputs and target; data/test.csv inputs only."})},
        {"template": "think_modalities", "response": "The inputs are " + ", ".join(
            k for k, v in modalities.items() if v) + "."},
        {"template": "plan_setup", "response": "Build the maps, the target transform, submission format and metric."},
        {"template": "detect_modalities", "response": json.dumps(modalities)},
        {"template": "plan_stage", "response": "Read the raw csv, keep the id column, write the file."},
        {"template": "identify_stage", "response": "Targets are continuous; identity transform suffices."},
        {"template": "analyse_error", "response": "The target column name is misspelled; use the header of train.csv."},
    ]


def tail_replies(summary, selected, metric_values, direction):
    out = [
        {"template": "summarise_solution", "response": "Draft summary of the trained solution."},
        {"template": "output_solution_summary", "response": summary},
        {"template": "think_ensemble", "response": "The two strongest candidates disagree most; average them."},
        {"template": "select_ensemble", "response": json.dumps({"selected": selected, "method": "mean"})},
    ]
    for k in range(1, 6):
        tag = "tree:bug" if k == 2 else "tree:draft:%d" % k
        out.append({"template": "tree_draft", "response": code(tag, "train_and_predict()")})
    out.append({"template": "tree_improve", "response": code("tree:improve", "train_and_predict(better=True)")})
    out.append({"template": "tree_debug", "response": code("tree:debug", "train_and_predict(fixed=True)")})
    for v in metric_values:
        out.append({"template": "tree_review",
                    "response": json.dumps({"success": True, "metric": v, "direction": direction})})
    return out


def tree_sims(metric_name, values, sub_header, test_ids, truth, noise_fn):
    out = []
    for k, v in values.items():
        preds = noise_fn(truth, k)
        out.append(sim(k, {"submission.csv": csv(sub_header, [[i, fmt(p)] for i, p in zip(test_ids, preds)])},
                       duration=2.0, stdout="epoch 1\nValidation %s: %s\n" % (metric_name, fmt(v))))
    out.append(sim("tree:bug", duration=2.0, exit_status=1,
                   stderr="Traceback (most recent call last):\n  File \"_node.py\", line 3\nNameError: name 'modle' is not defined"))
    return out


def harness_sims(target_col, target_rows, sample_header, test_ids):
    trip = [[i, v, v] for i, v in target_rows]
    return [
        sim("harness:transform_roundtrip",
            {"_transform_roundtrip.csv": csv(["id", target_col, target_col + "__roundtrip"], trip)}, duration=0.5),
        sim("harness:metric", {"_metric_check.json": "{\"value\": 0.0}"}, duration=0.5),
        sim("harness:submission_format",
            {"_submission_check.csv": csv(sample_header, [[i, 0] for i in test_ids])}, duration=0.5),
    ]


def tabular(root):
    rng = np.random.default_rng(11)
    d = root / "tabular"
    b = d / "bundle"
    (b / "data").mkdir(parents=True)
    train_ids = ["%d" % i for i in range(1, 81)]
    test_ids = ["%d" % i for i in range(1001, 1041)]
    def make(n):
        x1, x2 = rng.normal(size=n), rng.uniform(0, 4, size=n)
        return x1, x2, 10 + 3 * x1 - 2 * x2 + rng.normal(scale=0.5, size=n)
    a1, a2, y = make(len(train_ids))
    t1, t2, ty = make(len(test_ids))
    (b / "data/train.csv").write_text(csv(["id", "x1", "x2", "price"],
                                          [[i, fmt(p), fmt(q), fmt(v)] for i, p, q, v in zip(train_ids, a1, a2, y)]))
    (b / "data/test.csv").write_text(csv(["id", "x1", "x2"], [[i, fmt(p), fmt(q)] for i, p, q in zip(test_ids, t1, t2)]))
    (b / "sample_submission.csv").write_text(csv(["id", "price"], [[i, 0] for i in test_ids]))
    (b / "solution.csv").write_text(csv(["id", "price", "Usage"], usage_rows(test_ids, ty)))
    board = np.round(np.linspace(0.3, 3.2, 60), 4)
    (b / "leaderboard.csv").write_text(csv(["team", "private_score"], [["team%02d" % k, v] for k, v in enumerate(board)]))
    write_json(b / "manifest.json", {"competition_id": "tab-house", "metric": "rmse", "direction": "minimize",
                                     "k_c": 2, "deadline": "2023-05-01", "class": "tabular"})
    (b / "description.md").write_text(
        "# House prices (toy)\n\nPredict `price` for every id in data/test.csv from the numeric columns x1 and x2.\n"
        "Submissions are scored by root mean squared error.\n")

    valid = validation_ids(train_ids)
    yv = {i: v for i, v in zip(train_ids, y)}
    inputs = csv(["id", "x1", "x2"], [[i, fmt(p), fmt(q)] for i, p, q in zip(train_ids, a1, a2)])
    targets = [[i, fmt(v)] for i, v in zip(train_ids, y)]
    sims = [
        sim("ws:train_tab_input_map", {"train_tab_input_map.csv": inputs}),
        sim("ws:train_target_map", {"train_tab_target_map.csv": csv(["id", "price"], targets)}),
        sim("ws:bad_target_map", exit_status=1,
            stderr="Traceback (most recent call last):\n  File \"code_train_tab_target_map.py\", line 4\nKeyError: 'prise'"),
        sim("ws:test_tab_input_map", {"test_tab_input_map.csv": csv(["id", "x1", "x2"],
                                                                    [[i, fmt(p), fmt(q)] for i, p, q in zip(test_ids, t1, t2)])}),
    ] + harness_sims("price", targets, ["id", "price"], test_ids)
    for preset, scale in (("ridge", 0.55), ("knn", 0.8), ("mean", None)):
        if scale is None:
            vp = np.full(len(valid), float(np.mean(y)))
            tp = np.full(len(test_ids), float(np.mean(y)))
        else:
            vp = np.array([yv[i] for i in valid]) + rng.normal(scale=scale, size=len(valid))
            tp = ty + rng.normal(scale=scale, size=len(test_ids))
        sims.append(sim("tool:tabular:" + preset, {
            "${KOLB_OUT}/valid.csv": csv(["id", "price"], [[i, fmt(v)] for i, v in zip(valid, vp)]),
            "${KOLB_OUT}/submission.csv": csv(["id", "price"], [[i, fmt(v)] for i, v in zip(test_ids, tp)]),
        }, duration=3.0, stdout="preset %s rows %d\n" % (preset, len(test_ids))))
    values = {"tree:draft:1": 0.9, "tree:draft:3": 0.8, "tree:draft:4": 0.75, "tree:draft:5": 1.1,
              "tree:improve": 0.5, "tree:debug": 0.7}
    noise = {k: i for i, k in enumerate(values)}
    sims += tree_sims("rmse", values, ["id", "price"], test_ids, ty,
                      lambda t, k: t + np.random.default_rng(100 + noise[k]).normal(scale=values[k], size=len(t)))
    write_jsonl(d / "sim.jsonl", sims)

    ws_codes = ["ws:train_tab_input_map", "ws:train_target_map", "ws:transform", "ws:test_tab_input_map",
                "ws:submission_format", "ws:metric"]
    mods = {"tabular": True, "image": False, "text": False}
    summary = "Ridge regression on standardised x1 and x2 predicts price; k-NN and the mean baseline trail it."
    tail = tail_replies(summary, ["tool_ridge", "tool_knn"], [0.9, 0.8, 0.75, 1.1, 0.5], "minimize")
    def provider(codes):
        return common_setup_replies(mods) + [{"template": "write_stage_code", "response": code(c)} for c in codes] + tail
    write_jsonl(d / "provider.jsonl", provider(ws_codes))
    base_cfg = {"provider": {"kind": "script", "script_path": "provider.jsonl"}, "seed": 7,
                "budget": {"scale": 1440}, "executor": {"kind": "simulated", "sim_script": "sim.jsonl"},
                "run_dir": "../../runs"}
    write_json(d / "config.json", base_cfg)

    r = root / "tabular_retry"
    r.mkdir()
    write_jsonl(r / "provider.jsonl", provider(ws_codes[:1] + ["ws:bad_target_map", "ws:bad_target_map"] + ws_codes[1:]))
    write_json(r / "config.json", dict(base_cfg, executor={"kind": "simulated", "sim_script": "../tabular/sim.jsonl"}))

    e = root / "tabular_budget"
    e.mkdir()
    # Every code reply is the first stage's, so timeout retries replay it.
    write_jsonl(e / "provider.jsonl", provider(ws_codes[:1]))
    cfg = dict(base_cfg, executor={"kind": "simulated", "sim_script": "../tabular/sim.jsonl"}, budget={"scale": 200000})
    write_json(e / "config.json", cfg)


def png(shape, rng):
    img = Image.new("L", (8, 8), int(rng.integers(0, 40)))
    draw = ImageDraw.Draw(img)
    if shape:
        draw.ellipse([1, 1, 6, 6], fill=220)
    else:
        draw.rectangle([2, 2, 5, 5], fill=220)
    buf = io.BytesIO()
    img.save(buf, format="PNG", optimize=False)
    return buf.getvalue()


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def image(root):
    rng = np.random.default_rng(23)
    d = root / "image"
    b = d / "bundle"
    (b / "data/img").mkdir(parents=True)
    train_ids = ["img%03d" % i for i in range(1, 61)]
    test_ids = ["tst%03d" % i for i in range(1, 41)]
    ytr = rng.integers(0, 2, size=len(train_ids))
    yte = rng.integers(0, 2, size=len(test_ids))
    yte[:2] = [0, 1]
    for i, lab in list(zip(train_ids, ytr)) + list(zip(test_ids, yte)):
        (b / "data/img" / (i + ".png")).write_bytes(png(int(lab), rng))
    (b / "data/train.csv").write_text(csv(["id", "image", "round"],
                                          [[i, "img/%s.png" % i, int(l)] for i, l in zip(train_ids, ytr)]))
    (b / "data/test.csv").write_text(csv(["id", "image"], [[i, "img/%s.png" % i] for i in test_ids]))
    (b / "sample_submission.csv").write_text(csv(["id", "round"], [[i, 0.5] for i in test_ids]))
    # Public rows alternate so both splits hold both classes.
    (b / "solution.csv").write_text(csv(["id", "round", "Usage"],
                                        [[i, int(l), "Public" if k % 4 < 2 else "Private"]
                                         for k, (i, l) in enumerate(zip(test_ids, yte))]))
    board = np.round(np.linspace(0.99, 0.5, 80), 4)
    (b / "leaderboard.csv").write_text(csv(["team", "private_score"], [["team%02d" % k, v] for k, v in enumerate(board)]))
    write_json(b / "manifest.json", {"competition_id": "img-shapes", "metric": "auc", "direction": "maximize",
                                     "k_c": 2, "class": "cv"})
    (b / "description.md").write_text(
        "# Round or square (toy)\n\nEach 8x8 grey image shows one shape. Predict the probability that the shape is\n"
        "round. The images are under data/img; data/train.csv lists the labels. Scored by ROC AUC.\n")

    valid = validation_ids(train_ids)
    lab = {i: int(l) for i, l in zip(train_ids, ytr)}
    targets = [[i, int(l)] for i, l in zip(train_ids, ytr)]
    sims = [
        sim("ws:train_img_input_map", {"train_img_input_map.csv": csv(["id", "image"],
                                                                      [[i, "data/img/%s.png" % i] for i in train_ids])}),
        sim("ws:train_target_map", {"train_tab_target_map.csv": csv(["id", "round"], targets)}),
        sim("ws:test_img_input_map", {"test_img_input_map.csv": csv(["id", "image"],
                                                                    [[i, "data/img/%s.png" % i] for i in test_ids])}),
    ] + harness_sims("round", targets, ["id", "round"], test_ids)
    for base in ("feature_engineering_img", "embedder_img", "class_imbalance", "model_head"):
        sims.append(sim("design:" + base, {"_check_%s.json" % base: json.dumps({"shape": [2, 16]})}))

    def outputs(strength, seed):
        g = np.random.default_rng(seed)
        vp = sigmoid(strength * (2 * np.array([lab[i] for i in valid]) - 1) + g.normal(size=len(valid)))
        tp = sigmoid(strength * (2 * yte - 1) + g.normal(size=len(test_ids)))
        return {"${KOLB_OUT}/valid.csv": csv(["id", "round"], [[i, fmt(v)] for i, v in zip(valid, vp)]),
                "${KOLB_OUT}/submission.csv": csv(["id", "round"], [[i, fmt(v)] for i, v in zip(test_ids, tp)])}
    for r in range(1, 4):
        for t in range(1, 21):
            s = 0.05 + 0.7 * ((t * 7 + r * 3) % 20) / 19.0
            sims.append(sim("train:r%d:search:%d" % (r, t), outputs(s, 1000 * r + t), duration=0.8,
                            stdout="epoch 1 loss %s\ndone search\n" % fmt(1.0 / (1 + s))))
    sims.append(sim("train:fold", outputs(0.6, 7), duration=0.8, stdout="done fold\n"))
    sims.append(sim("train:tta", outputs(0.65, 9), duration=0.8, stdout="done tta\n"))
    values = {"tree:draft:1": 0.81, "tree:draft:3": 0.86, "tree:draft:4": 0.9, "tree:draft:5": 0.7,
              "tree:improve": 0.93, "tree:debug": 0.84}
    noise = {k: i for i, k in enumerate(values)}
    sims += tree_sims("auc", values, ["id", "round"], test_ids, yte,
                      lambda t, k: sigmoid(2 * values[k] * (2 * t - 1) +
                                           np.random.default_rng(200 + noise[k]).normal(size=len(t))))
    write_jsonl(d / "sim.jsonl", sims)

    mods = {"tabular": False, "image": True, "text": False}
    ws_codes = ["ws:train_img_input_map", "ws:train_target_map", "ws:transform", "ws:test_img_input_map",
                "ws:submission_format", "ws:metric"]
    design = ["design:feature_engineering_img", "design:embedder_img", "design:class_imbalance", "design:model_head"] * 3
    summary = "A small convolutional embedder with a linear head separates round from square shapes."
    replies = common_setup_replies(mods) + [{"template": "write_stage_code", "response": code(c)}
                                            for c in ws_codes + design]
    replies += tail_replies(summary, ["r1_cv", "r2_cv", "r3_tta"], [0.81, 0.86, 0.9, 0.7, 0.93], "maximize")
    write_jsonl(d / "provider.jsonl", replies)
    write_json(d / "config.json", {"provider": {"kind": "script", "script_path": "provider.jsonl"}, "seed": 7,
                                   "budget": {"scale": 1440},
                                   "executor": {"kind": "simulated", "sim_script": "sim.jsonl"},
                                   "run_dir": "../../runs"})


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "fixtures"))
    args = ap.parse_args()
    root = Path(args.out)
    if root.exists():
        shutil.rmtree(root)
    root.mkdir(parents=True)
    tabular(root)
    image(root)
    (root / "README.md").write_text(
        "Generated by `tools/make_fixtures.py`; edit the generator, not these files.\n\n"
        "- `tabular/`: tabular competition scored by RMSE, tool route.\n"
        "- `tabular_retry/`: same bundle; the target-map stage fails twice before passing.\n"
        "- `tabular_budget/`: same bundle under a budget too small for setup.\n"
        "- `image/`: image competition scored by AUC, deep route with TTA.\n")


if __name__ == "__main__":
    main()
