#include "kolb/orch/drivers.hpp"

namespace kolb::orch {

// Contract with the agent's solution modules:
//   code_feature_engineering_<m>.py  transform(df) -> DataFrame or ndarray
//   code_embedder_<m>.py             make_embedder(example) -> nn.Module with out_dim
//   code_class_imbalance.py          sample_weights(targets_df) -> array or None
//   code_model_head.py               make_head(in_dim, n_targets) -> nn.Module,
//                                    loss_fn(pred, target) -> scalar tensor
// Outputs: $KOLB_OUT/valid.csv on the ids of _valid_ids.csv and
// $KOLB_OUT/submission.csv in the sample submission's layout.
const char* const kTrainDriver = R"PY(import importlib.util, json, os, sys, time
import numpy as np
import pandas as pd
import torch

def load(name):
    path = os.path.join(os.getcwd(), name)
    if not os.path.exists(path):
        return None
    spec = importlib.util.spec_from_file_location(name[:-3], path)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    return mod

out = os.environ["KOLB_OUT"]
os.makedirs(out, exist_ok=True)
lr = float(os.environ.get("KOLB_LR", "1e-3"))
opt_name = os.environ.get("KOLB_OPTIMIZER", "Adam")
max_epochs = int(os.environ.get("KOLB_MAX_EPOCHS", "30"))
batch = int(os.environ.get("KOLB_BATCH_SIZE", "32"))
max_time = float(os.environ.get("KOLB_MAX_TIME", "36000"))
mode = os.environ.get("KOLB_MODE", "search")
fold = int(os.environ.get("KOLB_FOLD", "0"))
k_folds = int(os.environ.get("KOLB_K_FOLDS", "5"))
seed = int(os.environ.get("KOLB_SEED", "0")) + fold
torch.manual_seed(seed)
np.random.seed(seed)

mods = [m for m in ("tab", "img", "txt") if os.path.exists(f"train_{m}_input_map.csv")]
targets = pd.read_csv("train_tab_target_map.csv")
target_cols = [c for c in targets.columns if c != "id"]
valid_ids = set(pd.read_csv("_valid_ids.csv")["id"].astype(str))
transform = load("code_transform_tab_target_train.py")
imbalance = load("code_class_imbalance.py")
head_mod = load("code_model_head.py")

def features(split):
    parts = []
    for m in mods:
        df = pd.read_csv(f"{split}_{m}_input_map.csv")
        fe = load(f"code_feature_engineering_{m}.py")
        x = fe.transform(df.drop(columns=["id"])) if fe else df.drop(columns=["id"])
        parts.append((df["id"].astype(str).values, np.asarray(x, dtype=np.float32)))
    return parts[0][0], [p[1] for p in parts]

train_ids, train_x = features("train")
test_ids, test_x = features("test")
y_df = targets.set_index(targets["id"].astype(str)).loc[train_ids, target_cols]
y = np.asarray(transform.transform(y_df) if transform else y_df, dtype=np.float32)
is_valid = np.array([i in valid_ids for i in train_ids])
pool = np.where(~is_valid)[0]
if mode == "fold":
    rng = np.random.default_rng(0)
    order = rng.permutation(pool)
    pool = np.setdiff1d(pool, order[fold::k_folds])

embedders = torch.nn.ModuleList()
for m, x in zip(mods, train_x):
    emb = load(f"code_embedder_{m}.py")
    embedders.append(emb.make_embedder(torch.from_numpy(x[:2])))
in_dim = sum(e.out_dim for e in embedders)
head = head_mod.make_head(in_dim, y.shape[1])
params = list(embedders.parameters()) + list(head.parameters())
opt = {"Adam": torch.optim.Adam, "SGD": torch.optim.SGD, "AdamW": torch.optim.AdamW}[opt_name](params, lr=lr)
weights = imbalance.sample_weights(y_df) if imbalance and hasattr(imbalance, "sample_weights") else None
weights = None if weights is None else np.asarray(weights, dtype=np.float64)[pool]

def forward(xs, idx):
    return head(torch.cat([e(torch.from_numpy(x[idx])) for e, x in zip(embedders, xs)], dim=1))

start = time.time()
for epoch in range(max_epochs):
    order = pool[np.random.permutation(len(pool))] if weights is None else np.random.choice(
        pool, size=len(pool), p=weights / weights.sum())
    for b in range(0, len(order), batch):
        idx = order[b:b + batch]
        opt.zero_grad()
        loss = head_mod.loss_fn(forward(train_x, idx), torch.from_numpy(y[idx]))
        loss.backward()
        opt.step()
    print(f"epoch {epoch + 1} loss {float(loss):.6f}", flush=True)
    if time.time() - start > max_time:
        break

def predict(xs, ids, idx):
    with torch.no_grad():
        p = forward(xs, idx).numpy()
    df = pd.DataFrame(p, columns=target_cols)
    df = transform.inverse_transform(df) if transform else df
    df.insert(0, "id", ids[idx])
    return df

valid = predict(train_x, train_ids, np.where(is_valid)[0])
valid.to_csv(os.path.join(out, "valid.csv"), index=False)
sub = load("code_submission_format.py")
test = predict(test_x, test_ids, np.arange(len(test_ids)))
(sub.format_submission(test) if sub else test).to_csv(os.path.join(out, "submission.csv"), index=False)
print("done", mode, json.dumps({"lr": lr, "optimizer": opt_name}))
)PY";

// Preset-driven baseline for tabular-only competitions: mean, ridge or
// k-nearest-neighbour regression on the numeric input columns.
const char* const kTabularBaseline = R"PY(import os
import numpy as np
import pandas as pd

out = os.environ["KOLB_OUT"]
os.makedirs(out, exist_ok=True)
preset = os.environ.get("KOLB_PRESET", "ridge")
x_tr = pd.read_csv("train_tab_input_map.csv")
x_te = pd.read_csv("test_tab_input_map.csv")
y = pd.read_csv("train_tab_target_map.csv")
valid_ids = set(pd.read_csv("_valid_ids.csv")["id"].astype(str))
x_tr["id"] = x_tr["id"].astype(str)
y["id"] = y["id"].astype(str)
data = x_tr.merge(y, on="id")
targets = [c for c in y.columns if c != "id"]
feats = [c for c in x_tr.columns if c != "id" and pd.api.types.is_numeric_dtype(x_tr[c])]
mask = data["id"].isin(valid_ids).values
fit, val = data[~mask], data[mask]

def design(df, mu, sd):
    x = (df[feats].fillna(0.0).to_numpy(float) - mu) / sd
    return np.hstack([np.ones((len(x), 1)), x])

mu = fit[feats].fillna(0.0).to_numpy(float).mean(axis=0) if feats else np.zeros(0)
sd = fit[feats].fillna(0.0).to_numpy(float).std(axis=0) + 1e-9 if feats else np.ones(0)
yf = fit[targets].to_numpy(float)

def predict(df):
    if preset == "mean" or not feats:
        return np.repeat(yf.mean(axis=0, keepdims=True), len(df), axis=0)
    a, b = design(fit, mu, sd), design(df, mu, sd)
    if preset == "knn":
        d = ((b[:, None, 1:] - a[None, :, 1:]) ** 2).sum(axis=2)
        k = min(5, len(a))
        nn = np.argsort(d, axis=1)[:, :k]
        return yf[nn].mean(axis=1)
    w = np.linalg.solve(a.T @ a + 1.0 * np.eye(a.shape[1]), a.T @ yf)
    return b @ w

v = pd.DataFrame(predict(val), columns=targets)
v.insert(0, "id", val["id"].values)
v.to_csv(os.path.join(out, "valid.csv"), index=False)
t = pd.DataFrame(predict(x_te), columns=targets)
t.insert(0, "id", x_te["id"].values)
sample = pd.read_csv("sample_submission.csv")
t = t.rename(columns=dict(zip(targets, [c for c in sample.columns if c != sample.columns[0]])))
t = t.rename(columns={"id": sample.columns[0]})
t.to_csv(os.path.join(out, "submission.csv"), index=False)
print("preset", preset, "rows", len(t))
)PY";

}  // namespace kolb::orch
