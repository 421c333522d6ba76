"""Per-substructure probability predictors.

For every frequent query substructure we train an independent binary
classifier that estimates the probability that a question's (unknown)
query contains that substructure. Questions are lowercased, stripped of
punctuation, and entity mentions are replaced by the special token
``<entity>`` before prediction.

Two interchangeable predictor families are provided: the attention
BiLSTM (default) and a deterministic bag-of-words logistic baseline.
Training a substructure with only positive or only negative examples
falls back to a constant predictor at the clamped label prevalence.
"""

from __future__ import annotations

import hashlib
import json
import re
import warnings
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import minimize

from . import nn
from .canon import StructureKey
from .mining import SubstructureCatalog, contained_frequent_keys

ENTITY_TOKEN = "<entity>"
UNK_TOKEN = "<unk>"

_WORD_RE = re.compile(r"[a-z0-9']+")


class DegenerateLabelWarning(UserWarning):
    pass


@dataclass(frozen=True)
class TokenSequence:
    tokens: tuple[str, ...]

    def __post_init__(self):
        if not self.tokens:
            raise ValueError("empty token sequence")


def preprocess(question: str, mention_spans=()) -> TokenSequence:
    """Tokenize a question, collapsing each mention span to one
    ``<entity>`` token. Spans are (start, end) character offsets and must
    not overlap."""
    spans = sorted((int(s), int(e)) for s, e in mention_spans)
    for (s1, e1), (s2, _) in zip(spans, spans[1:]):
        if s2 < e1:
            raise ValueError("overlapping mention spans")
    tokens: list[str] = []
    pos = 0
    for s, e in spans:
        tokens.extend(_WORD_RE.findall(question[pos:s].lower()))
        tokens.append(ENTITY_TOKEN)
        pos = e
    tokens.extend(_WORD_RE.findall(question[pos:].lower()))
    if not tokens:
        tokens = [UNK_TOKEN]
    return TokenSequence(tuple(tokens))


def mention_spans_of(pair) -> list[tuple[int, int]]:
    return [(m.start, m.end) for m in pair.mentions]


@dataclass
class TrainConfig:
    d_e: int = 100
    d_h: int = 128
    learning_rate: float = 1e-3
    epochs: int = 50
    batch_size: int = 32
    patience: int = 5
    seed: int = 13
    arch: str = "bilstm"  # or "bow"
    dev_fraction: float = 0.1
    unk_rate: float = 0.3

    def __post_init__(self):
        if self.d_e <= 0 or self.d_h <= 0:
            raise ValueError("dimensions must be positive")
        if self.arch not in ("bilstm", "bow"):
            raise ValueError(f"unknown arch {self.arch!r}")


def build_vocab(sequences) -> dict[str, int]:
    counts: dict[str, int] = {}
    for seq in sequences:
        for tok in seq.tokens:
            counts[tok] = counts.get(tok, 0) + 1
    vocab = {ENTITY_TOKEN: 0, UNK_TOKEN: 1}
    for tok in sorted(counts):
        if tok not in vocab:
            vocab[tok] = len(vocab)
    return vocab


def encode(seq: TokenSequence, vocab: dict[str, int]) -> list[int]:
    unk = vocab[UNK_TOKEN]
    return [vocab.get(tok, unk) for tok in seq.tokens]


def _model_seed(base_seed: int, key: StructureKey) -> np.random.Generator:
    digest = hashlib.sha256(key.canonical.encode()).digest()
    return np.random.default_rng([base_seed, int.from_bytes(digest[:8], "big")])


# ---------------------------------------------------------------------------
# predictor implementations


@dataclass
class PredictorModel:
    """Learned parameters of one substructure's attention-BiLSTM predictor."""

    vocab: dict[str, int]
    params: dict[str, np.ndarray]
    d_e: int
    d_h: int
    substructure_key: StructureKey
    dev_accuracy: float = float("nan")

    def forward(self, seq: TokenSequence):
        """Probability that the substructure is contained, plus the
        attention weights over the tokens."""
        cache = nn.forward(self.params, encode(seq, self.vocab), self.d_h)
        return cache["prob"], cache["alpha"].copy()

    def predict_proba(self, seq: TokenSequence) -> float:
        return self.forward(seq)[0]


@dataclass
class BowLogisticModel:
    """Bag-of-words logistic regression over the same vocabulary."""

    vocab: dict[str, int]
    weights: np.ndarray  # (|vocab| + 1,), last entry is the bias
    substructure_key: StructureKey
    dev_accuracy: float = float("nan")

    def _features(self, seq: TokenSequence) -> np.ndarray:
        x = np.zeros(len(self.vocab) + 1)
        for i in encode(seq, self.vocab):
            x[i] = 1.0
        x[-1] = 1.0
        return x

    def forward(self, seq: TokenSequence):
        p = self.predict_proba(seq)
        n = len(seq.tokens)
        return p, np.full(n, 1.0 / n)

    def predict_proba(self, seq: TokenSequence) -> float:
        z = float(self._features(seq) @ self.weights)
        # keep strictly inside (0, 1)
        return float(np.clip(nn.sigmoid(np.array([z]))[0], 1e-12, 1.0 - 1e-12))


@dataclass
class ConstantModel:
    """Fallback when a substructure has a degenerate label set."""

    probability: float
    substructure_key: StructureKey
    dev_accuracy: float = float("nan")

    def forward(self, seq: TokenSequence):
        n = len(seq.tokens)
        return self.probability, np.full(n, 1.0 / n)

    def predict_proba(self, seq: TokenSequence) -> float:
        return self.probability


# ---------------------------------------------------------------------------
# training


def _split_dev(items, dev_fraction: float, rng: np.random.Generator):
    idx = rng.permutation(len(items))
    n_dev = max(1, int(round(len(items) * dev_fraction))) if len(items) > 4 else 0
    dev_idx = set(idx[:n_dev].tolist())
    train = [items[i] for i in range(len(items)) if i not in dev_idx]
    dev = [items[i] for i in sorted(dev_idx)]
    return train, dev


def _accuracy(model, examples) -> float:
    if not examples:
        return float("nan")
    hits = sum(1 for seq, y in examples if (model.predict_proba(seq) >= 0.5) == bool(y))
    return hits / len(examples)


def _train_bilstm(key, train_ex, dev_ex, vocab, singleton_ids, cfg: TrainConfig):
    rng = _model_seed(cfg.seed, key)
    params = nn.init_params(len(vocab), cfg.d_e, cfg.d_h, 1, rng)
    opt = nn.Adam(params, lr=cfg.learning_rate)
    encoded = [(np.array(encode(seq, vocab)), float(y)) for seq, y in train_ex]
    dev_encoded = [(np.array(encode(seq, vocab)), float(y)) for seq, y in dev_ex]
    unk = vocab[UNK_TOKEN]

    best_loss = np.inf
    best_params = {k: v.copy() for k, v in params.items()}
    stale = 0
    for _epoch in range(cfg.epochs):
        order = rng.permutation(len(encoded))
        for start in range(0, len(order), cfg.batch_size):
            batch = [encoded[i] for i in order[start:start + cfg.batch_size]]
            seqs = []
            for ids, _y in batch:
                if cfg.unk_rate > 0 and singleton_ids.size:
                    drop = rng.random(len(ids)) < cfg.unk_rate
                    ids = np.where(drop & np.isin(ids, singleton_ids), unk, ids)
                seqs.append(ids)
            labels = [y for _ids, y in batch]
            if cfg.learning_rate == 0:
                continue
            _loss, grads = nn.batch_loss_and_grads(params, seqs, labels, cfg.d_h)
            for name in grads:
                grads[name] /= len(batch)
            opt.step(grads)
        if dev_encoded:
            dev_loss = nn.batch_loss(params, [ids for ids, _ in dev_encoded],
                                     [y for _, y in dev_encoded], cfg.d_h)
            if dev_loss < best_loss - 1e-9:
                best_loss = dev_loss
                best_params = {k: v.copy() for k, v in params.items()}
                stale = 0
            else:
                stale += 1
                if stale > cfg.patience:
                    break
    if dev_encoded:
        params = best_params
    model = PredictorModel(vocab, params, cfg.d_e, cfg.d_h, key)
    model.dev_accuracy = _accuracy(model, dev_ex if dev_ex else train_ex)
    return model


def _train_bow(key, train_ex, dev_ex, vocab, cfg: TrainConfig):
    X = np.zeros((len(train_ex), len(vocab) + 1))
    y = np.zeros(len(train_ex))
    for row, (seq, label) in enumerate(train_ex):
        for i in encode(seq, vocab):
            X[row, i] = 1.0
        X[row, -1] = 1.0
        y[row] = label
    lam = 1e-3

    def objective(w):
        z = X @ w
        loss = np.sum(np.maximum(z, 0) - z * y + np.log1p(np.exp(-np.abs(z))))
        loss += 0.5 * lam * float(w @ w)
        grad = X.T @ (nn.sigmoid(z) - y) + lam * w
        return loss, grad

    res = minimize(objective, np.zeros(len(vocab) + 1), jac=True, method="L-BFGS-B",
                   options={"maxiter": 200})
    model = BowLogisticModel(vocab, res.x, key)
    model.dev_accuracy = _accuracy(model, dev_ex if dev_ex else train_ex)
    return model


def train(pairs, catalog: SubstructureCatalog, cfg: TrainConfig,
          dev_pairs=None) -> dict[StructureKey, object]:
    """Train one independent predictor per frequent substructure.

    Labels come from substructure containment in each pair's gold query.
    When ``dev_pairs`` is omitted a deterministic slice of the training
    pairs is held out for early stopping.
    """
    pairs = list(pairs)
    if not catalog.substructures:
        raise ValueError("catalog has no frequent substructures")

    def example(pair):
        return (preprocess(pair.question, mention_spans_of(pair)),
                contained_frequent_keys(pair.query, catalog))

    if dev_pairs is None:
        rng = np.random.default_rng(cfg.seed)
        train_pairs, dev_split = _split_dev(pairs, cfg.dev_fraction, rng)
    else:
        train_pairs, dev_split = pairs, list(dev_pairs)

    train_items = [example(p) for p in train_pairs]
    dev_items = [example(p) for p in dev_split]
    vocab = build_vocab(seq for seq, _ in train_items)
    counts: dict[str, int] = {}
    for seq, _ in train_items:
        for tok in seq.tokens:
            counts[tok] = counts.get(tok, 0) + 1
    singleton_ids = np.array(sorted(vocab[t] for t, c in counts.items() if c == 1),
                             dtype=int)

    models: dict[StructureKey, object] = {}
    for key in catalog.frequent_keys:
        train_ex = [(seq, 1.0 if key in contained else 0.0)
                    for seq, contained in train_items]
        dev_ex = [(seq, 1.0 if key in contained else 0.0)
                  for seq, contained in dev_items]
        labels = {y for _, y in train_ex}
        if len(labels) < 2:
            prevalence = train_ex[0][1] if train_ex else 0.5
            prob = float(np.clip(prevalence, 0.05, 0.95))
            warnings.warn(
                f"substructure {key.canonical!r} has a degenerate label set; "
                f"using constant probability {prob}", DegenerateLabelWarning)
            models[key] = ConstantModel(prob, key)
            continue
        if cfg.arch == "bow":
            models[key] = _train_bow(key, train_ex, dev_ex, vocab, cfg)
        else:
            models[key] = _train_bilstm(key, train_ex, dev_ex, vocab,
                                        singleton_ids, cfg)
    return models


def predict_all(models: dict[StructureKey, object],
                seq: TokenSequence) -> dict[StructureKey, float]:
    """One probability per frequent substructure."""
    return {key: model.predict_proba(seq) for key, model in models.items()}


# ---------------------------------------------------------------------------
# whole-structure multi-class classifier (the rank-without-substructures
# ablation): one softmax over all mined structures instead of independent
# per-substructure predictors


@dataclass
class StructureClassifier:
    vocab: dict[str, int]
    params: dict[str, np.ndarray]
    d_h: int
    keys: list[StructureKey]
    dev_accuracy: float = float("nan")

    def probabilities(self, seq: TokenSequence) -> np.ndarray:
        cache = nn.forward(self.params, encode(seq, self.vocab), self.d_h)
        return cache["class_probs"]

    def rank(self, seq: TokenSequence, catalog: SubstructureCatalog):
        from .ranking import EXISTING, ScoredStructure

        probs = self.probabilities(seq)
        scored = []
        for i, key in enumerate(self.keys):
            entry = catalog.structures[key]
            scored.append(ScoredStructure(key, entry.representative, float(probs[i]),
                                          EXISTING, entry.count))
        scored.sort(key=ScoredStructure.rank_key)
        return scored


def train_structure_classifier(pairs, catalog: SubstructureCatalog,
                               cfg: TrainConfig, dev_pairs=None) -> StructureClassifier:
    from .canon import canonical_key

    pairs = list(pairs)
    keys = sorted(catalog.structures, key=StructureKey.sort_key)
    index = {k: i for i, k in enumerate(keys)}

    def example(pair):
        return (preprocess(pair.question, mention_spans_of(pair)),
                index[canonical_key(pair.query)])

    if dev_pairs is None:
        rng = np.random.default_rng(cfg.seed)
        train_pairs, dev_split = _split_dev(pairs, cfg.dev_fraction, rng)
    else:
        train_pairs, dev_split = pairs, list(dev_pairs)
    train_items = [example(p) for p in train_pairs]
    dev_items = [example(p) for p in dev_split]
    vocab = build_vocab(seq for seq, _ in train_items)

    rng = np.random.default_rng([cfg.seed, len(keys)])
    params = nn.init_params(len(vocab), cfg.d_e, cfg.d_h, len(keys), rng)
    opt = nn.Adam(params, lr=cfg.learning_rate)
    encoded = [(np.array(encode(seq, vocab)), y) for seq, y in train_items]
    dev_encoded = [(np.array(encode(seq, vocab)), y) for seq, y in dev_items]

    best_loss = np.inf
    best_params = {k: v.copy() for k, v in params.items()}
    stale = 0
    for _epoch in range(cfg.epochs):
        order = rng.permutation(len(encoded))
        for start in range(0, len(order), cfg.batch_size):
            batch = [encoded[i] for i in order[start:start + cfg.batch_size]]
            if cfg.learning_rate == 0:
                continue
            _loss, grads = nn.batch_loss_and_grads(
                params, [ids for ids, _ in batch], [y for _, y in batch], cfg.d_h)
            for name in grads:
                grads[name] /= len(batch)
            opt.step(grads)
        if dev_encoded:
            dev_loss = nn.batch_loss(params, [ids for ids, _ in dev_encoded],
                                     [y for _, y in dev_encoded], cfg.d_h)
            if dev_loss < best_loss - 1e-9:
                best_loss = dev_loss
                best_params = {k: v.copy() for k, v in params.items()}
                stale = 0
            else:
                stale += 1
                if stale > cfg.patience:
                    break
    if dev_encoded:
        params = best_params
    clf = StructureClassifier(vocab, params, cfg.d_h, keys)
    eval_items = dev_items if dev_items else train_items
    if eval_items:
        hits = sum(1 for seq, y in eval_items
                   if int(np.argmax(clf.probabilities(seq))) == y)
        clf.dev_accuracy = hits / len(eval_items)
    return clf


# ---------------------------------------------------------------------------
# persistence

MODEL_VERSION = 1


def _key_doc(key: StructureKey) -> dict:
    return {"canonical": key.canonical, "triple_count": key.triple_count,
            "agg_count": key.agg_count}


def _key_from_doc(doc) -> StructureKey:
    return StructureKey(doc["canonical"], doc["triple_count"], doc["agg_count"])


def save_models(models: dict[StructureKey, object], directory,
                cfg: TrainConfig | None = None) -> None:
    """One .npz file per substructure plus a manifest.json index."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {"version": MODEL_VERSION,
                "train_config": asdict(cfg) if cfg else None,
                "models": []}
    for i, key in enumerate(sorted(models, key=StructureKey.sort_key)):
        model = models[key]
        fname = f"model_{i:04d}.npz"
        meta = {"key": _key_doc(key), "dev_accuracy": model.dev_accuracy}
        arrays = {}
        if isinstance(model, PredictorModel):
            meta.update(kind="bilstm", d_e=model.d_e, d_h=model.d_h,
                        vocab=model.vocab)
            arrays = model.params
        elif isinstance(model, BowLogisticModel):
            meta.update(kind="bow", vocab=model.vocab)
            arrays = {"weights": model.weights}
        elif isinstance(model, ConstantModel):
            meta.update(kind="constant", probability=model.probability)
        else:
            raise TypeError(f"cannot save {type(model).__name__}")
        np.savez(directory / fname, __meta__=np.frombuffer(
            json.dumps(meta).encode(), dtype=np.uint8), **arrays)
        manifest["models"].append({"file": fname, "key": _key_doc(key),
                                   "dev_accuracy": model.dev_accuracy,
                                   "kind": meta["kind"]})
    with open(directory / "manifest.json", "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=1)


def load_models(directory) -> dict[StructureKey, object]:
    directory = Path(directory)
    with open(directory / "manifest.json", encoding="utf-8") as f:
        manifest = json.load(f)
    if manifest.get("version") != MODEL_VERSION:
        raise ValueError(f"unsupported model version {manifest.get('version')!r}")
    models: dict[StructureKey, object] = {}
    for item in manifest["models"]:
        data = np.load(directory / item["file"])
        meta = json.loads(bytes(data["__meta__"]).decode())
        key = _key_from_doc(meta["key"])
        if meta["kind"] == "bilstm":
            params = {k: data[k] for k in data.files if k != "__meta__"}
            model = PredictorModel(meta["vocab"], params, meta["d_e"], meta["d_h"],
                                   key, meta["dev_accuracy"])
        elif meta["kind"] == "bow":
            model = BowLogisticModel(meta["vocab"], data["weights"], key,
                                     meta["dev_accuracy"])
        else:
            model = ConstantModel(meta["probability"], key, meta["dev_accuracy"])
        models[key] = model
    return models
