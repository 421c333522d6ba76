"""Attention BiLSTM text classifier in plain numpy, with exact gradients.

The network embeds a token sequence, runs an LSTM in both directions,
pools the per-token states with a learned attention (a softmax over
v_att . tanh(W_att h_t + b_att)) and maps the pooled vector through a
linear output head: one sigmoid unit for binary prediction, or a softmax
layer for multi-class. The backward pass is written by hand and verified
against central finite differences in the test suite, so everything runs
in float64.

Parameter names (H = hidden units per direction, E = embedding size):
  emb (V,E);  W_f,W_b (4H,E+H);  b_f,b_b (4H,)   gate order i,f,o,g
  W_att (2H,2H); b_att,v_att (2H,);  W_out (n_out,2H); b_out (n_out,)
"""

from __future__ import annotations

import numpy as np


def sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(x):
    e = np.exp(x - np.max(x))
    return e / e.sum()


def init_params(vocab_size: int, d_e: int, d_h: int, n_out: int,
                rng: np.random.Generator) -> dict[str, np.ndarray]:
    def glorot(shape):
        bound = np.sqrt(6.0 / (shape[0] + shape[-1]))
        return rng.uniform(-bound, bound, size=shape)

    params = {
        "emb": rng.normal(0.0, 0.1, size=(vocab_size, d_e)),
        "W_f": glorot((4 * d_h, d_e + d_h)),
        "b_f": np.zeros(4 * d_h),
        "W_b": glorot((4 * d_h, d_e + d_h)),
        "b_b": np.zeros(4 * d_h),
        "W_att": glorot((2 * d_h, 2 * d_h)),
        "b_att": np.zeros(2 * d_h),
        "v_att": glorot((2 * d_h,)),
        "W_out": glorot((n_out, 2 * d_h)),
        "b_out": np.zeros(n_out),
    }
    # start with an open forget gate
    params["b_f"][d_h:2 * d_h] = 1.0
    params["b_b"][d_h:2 * d_h] = 1.0
    return params


def zeros_like_params(params):
    return {name: np.zeros_like(p) for name, p in params.items()}


def _lstm_forward(X, W, b, d_h):
    T = X.shape[0]
    H = np.zeros((T, d_h))
    cache = []
    h = np.zeros(d_h)
    c = np.zeros(d_h)
    for t in range(T):
        zcat = np.concatenate([X[t], h])
        z = W @ zcat + b
        i = sigmoid(z[:d_h])
        f = sigmoid(z[d_h:2 * d_h])
        o = sigmoid(z[2 * d_h:3 * d_h])
        g = np.tanh(z[3 * d_h:])
        c_prev = c
        c = f * c_prev + i * g
        h = o * np.tanh(c)
        H[t] = h
        cache.append((zcat, i, f, o, g, c_prev, c))
    return H, cache


def _lstm_backward(dH, cache, W, d_h, d_e):
    T = dH.shape[0]
    dW = np.zeros_like(W)
    db = np.zeros(4 * d_h)
    dX = np.zeros((T, d_e))
    dh_next = np.zeros(d_h)
    dc_next = np.zeros(d_h)
    for t in range(T - 1, -1, -1):
        zcat, i, f, o, g, c_prev, c = cache[t]
        tc = np.tanh(c)
        dh = dH[t] + dh_next
        do = dh * tc
        dc = dh * o * (1.0 - tc * tc) + dc_next
        di = dc * g
        df = dc * c_prev
        dg = dc * i
        dz = np.concatenate([
            di * i * (1.0 - i),
            df * f * (1.0 - f),
            do * o * (1.0 - o),
            dg * (1.0 - g * g),
        ])
        dW += np.outer(dz, zcat)
        db += dz
        dzcat = W.T @ dz
        dX[t] = dzcat[:d_e]
        dh_next = dzcat[d_e:]
        dc_next = dc * f
    return dX, dW, db


def forward(params: dict, token_ids, d_h: int) -> dict:
    """Run the network over one token-id sequence.

    Returns a cache holding every intermediate needed by :func:`backward`,
    plus ``prob`` (binary head), ``class_probs`` (softmax head), and the
    attention weights ``alpha``.
    """
    ids = np.asarray(token_ids, dtype=int)
    X = params["emb"][ids]
    d_e = X.shape[1]
    Hf, cache_f = _lstm_forward(X, params["W_f"], params["b_f"], d_h)
    Hb_rev, cache_b = _lstm_forward(X[::-1], params["W_b"], params["b_b"], d_h)
    Hb = Hb_rev[::-1]
    H2 = np.concatenate([Hf, Hb], axis=1)

    U = np.tanh(H2 @ params["W_att"].T + params["b_att"])
    scores = U @ params["v_att"]
    alpha = softmax(scores)
    q = alpha @ H2
    logits = params["W_out"] @ q + params["b_out"]

    out = {
        "ids": ids, "X": X, "d_e": d_e, "d_h": d_h,
        "cache_f": cache_f, "cache_b": cache_b, "H2": H2,
        "U": U, "alpha": alpha, "q": q, "logits": logits,
    }
    if logits.shape[0] == 1:
        out["prob"] = float(sigmoid(logits)[0])
    else:
        out["class_probs"] = softmax(logits)
    return out


def loss_from_cache(cache: dict, y) -> float:
    """Stable loss of one example: binary cross-entropy on the logit, or
    multi-class cross-entropy."""
    logits = cache["logits"]
    if logits.shape[0] == 1:
        l = logits[0]
        return float(max(l, 0.0) - l * y + np.log1p(np.exp(-abs(l))))
    m = logits.max()
    lse = m + np.log(np.exp(logits - m).sum())
    return float(lse - logits[int(y)])


def backward(params: dict, cache: dict, y) -> dict:
    """Gradients of the single-example loss for every parameter tensor."""
    d_h = cache["d_h"]
    d_e = cache["d_e"]
    H2 = cache["H2"]
    alpha = cache["alpha"]
    U = cache["U"]
    logits = cache["logits"]

    if logits.shape[0] == 1:
        dlogits = np.array([sigmoid(logits)[0] - y])
    else:
        dlogits = softmax(logits)
        dlogits[int(y)] -= 1.0

    grads = zeros_like_params(params)
    grads["W_out"] = np.outer(dlogits, cache["q"])
    grads["b_out"] = dlogits
    dq = params["W_out"].T @ dlogits

    dalpha = H2 @ dq
    dH2 = np.outer(alpha, dq)
    dscores = alpha * (dalpha - float(alpha @ dalpha))
    grads["v_att"] = U.T @ dscores
    dU = np.outer(dscores, params["v_att"])
    dpre = dU * (1.0 - U * U)
    grads["W_att"] = dpre.T @ H2
    grads["b_att"] = dpre.sum(axis=0)
    dH2 += dpre @ params["W_att"]

    dX_f, dW_f, db_f = _lstm_backward(dH2[:, :d_h], cache["cache_f"],
                                      params["W_f"], d_h, d_e)
    dX_b_rev, dW_b, db_b = _lstm_backward(dH2[::-1, d_h:], cache["cache_b"],
                                          params["W_b"], d_h, d_e)
    grads["W_f"], grads["b_f"] = dW_f, db_f
    grads["W_b"], grads["b_b"] = dW_b, db_b

    dX = dX_f + dX_b_rev[::-1]
    np.add.at(grads["emb"], cache["ids"], dX)
    return grads


def batch_loss_and_grads(params: dict, sequences, labels, d_h: int):
    """Summed loss and summed gradients over a batch of sequences."""
    total = 0.0
    grads = zeros_like_params(params)
    for ids, y in zip(sequences, labels):
        cache = forward(params, ids, d_h)
        total += loss_from_cache(cache, y)
        g = backward(params, cache, y)
        for name in grads:
            grads[name] += g[name]
    return total, grads


def batch_loss(params: dict, sequences, labels, d_h: int) -> float:
    return sum(loss_from_cache(forward(params, ids, d_h), y)
               for ids, y in zip(sequences, labels))


class Adam:
    """Adam optimizer over a named-parameter dict, updating in place."""

    def __init__(self, params: dict, lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = zeros_like_params(params)
        self.v = zeros_like_params(params)

    def step(self, grads: dict) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        corr1 = 1.0 - b1 ** self.t
        corr2 = 1.0 - b2 ** self.t
        for name, p in self.params.items():
            g = grads[name]
            self.m[name] = b1 * self.m[name] + (1.0 - b1) * g
            self.v[name] = b2 * self.v[name] + (1.0 - b2) * g * g
            m_hat = self.m[name] / corr1
            v_hat = self.v[name] / corr2
            p -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
