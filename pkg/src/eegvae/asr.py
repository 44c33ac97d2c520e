"""Downstream recognizers and metrics.

Two recognizers run on either 30-dim baseline features or 1-dim extracted
features:

* an isolated-utterance classifier — TCN (128 filters) -> dropout ->
  GRU(32) last step -> Dense softmax — trained with cross entropy and Adam;
* a continuous CTC recognizer — GRU(128) encoder -> per-frame Dense ->
  log-softmax over word vocabulary + blank — decoded greedily or by prefix
  beam search fused with an add-one-smoothed bigram language model.

Metrics: classification accuracy and word error rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import FeasibilityError, ParameterError
from .nn import ParamStore, layers, losses, optim

_STREAM_INIT = 301
_STREAM_TRAIN = 302

DEFAULT_BEAM_WIDTH = 16
DEFAULT_LM_WEIGHT = 0.5


# ---------------------------------------------------------------------------
# Isolated-utterance classifier
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IsolatedConfig:
    input_dim: int
    n_classes: int = 2
    tcn_filters: int = 128
    tcn_kernel: int = 3
    tcn_dilations: tuple[int, ...] = (1, 2, 4)
    gru_hidden: int = 32
    dropout_rate: float = 0.2

    def validate(self) -> None:
        if self.n_classes < 2:
            raise ParameterError(f"n_classes must be >= 2, got {self.n_classes}")
        if self.input_dim < 1:
            raise ParameterError(f"input_dim must be >= 1, got {self.input_dim}")


class IsolatedModel:
    def __init__(self, config: IsolatedConfig, init_seed: int = 0):
        config.validate()
        self.config = config
        store = ParamStore()
        self.tcn = layers.TCN(
            store,
            "tcn",
            config.input_dim,
            config.tcn_filters,
            kernel_size=config.tcn_kernel,
            dilations=config.tcn_dilations,
        )
        self.drop = layers.Dropout(config.dropout_rate)
        self.gru = layers.GRU(store, "gru", config.tcn_filters, config.gru_hidden)
        self.head = layers.Dense(store, "head", config.gru_hidden, config.n_classes)
        store.allocate(np.random.default_rng([init_seed, _STREAM_INIT]))
        self.store = store

    def forward(
        self, x: np.ndarray, train: bool = False, rng: np.random.Generator | None = None
    ) -> np.ndarray:
        """Class probabilities for one (T, input_dim) sequence."""
        h = self.tcn.forward(x)
        h = self.drop.forward(h, train, rng)
        h = self.gru.forward(h)
        logits = self.head.forward(h[-1:])
        return losses.softmax(logits[0])

    def backward(self, dlogits: np.ndarray, seq_len: int) -> None:
        d = self.head.backward(dlogits[None, :])
        dh = np.zeros((seq_len, self.config.gru_hidden))
        dh[-1] = d[0]
        d = self.gru.backward(dh)
        d = self.drop.backward(d)
        self.tcn.backward(d)

    def predict(self, x: np.ndarray) -> int:
        return int(np.argmax(self.forward(x)))


def train_isolated(
    dataset: list[tuple[np.ndarray, int]],
    epochs: int = 200,
    batch: int = 200,
    seed: int = 0,
    config: IsolatedConfig | None = None,
) -> tuple[IsolatedModel, list[float]]:
    """Adam on mean cross entropy over mini-batches.

    A requested batch larger than the dataset clamps to the full dataset
    (one update per epoch).  Returns the model and the per-epoch mean CE
    curve.  Deterministic given seed.
    """
    if not dataset:
        raise ParameterError("empty training set")
    if config is None:
        n_classes = max(int(label) for _, label in dataset) + 1
        config = IsolatedConfig(input_dim=int(dataset[0][0].shape[1]), n_classes=max(2, n_classes))
    model = IsolatedModel(config, init_seed=seed)
    for _, label in dataset:
        if not 0 <= int(label) < config.n_classes:
            raise ParameterError(f"label {label} outside [0, {config.n_classes})")
    rng = np.random.default_rng([seed, _STREAM_TRAIN])
    opt = optim.Adam(model.store.size)
    n = len(dataset)
    batch = min(batch, n)
    curve: list[float] = []
    for _ in range(epochs):
        order = rng.permutation(n)
        epoch_ce = 0.0
        for start in range(0, n, batch):
            members = order[start : start + batch]
            model.store.zero_grads()
            for i in members:
                x, label = dataset[int(i)]
                probs = model.forward(x, train=True, rng=rng)
                onehot = np.zeros(config.n_classes)
                onehot[int(label)] = 1.0
                ce, dlogits = losses.ce_loss(probs, onehot)
                model.backward(dlogits / len(members), seq_len=x.shape[0])
                epoch_ce += ce
            opt.step(model.store.flat, model.store.flat_grad)
        curve.append(epoch_ce / n)
    return model, curve


def accuracy(model: IsolatedModel, test_set: list[tuple[np.ndarray, int]]) -> float:
    """Fraction of argmax predictions that match (ties go to the lower index)."""
    if not test_set:
        raise ParameterError("empty test set")
    correct = sum(int(model.predict(x) == int(label)) for x, label in test_set)
    return correct / len(test_set)


# ---------------------------------------------------------------------------
# Bigram language model
# ---------------------------------------------------------------------------

START_TOKEN = "<s>"


class BigramLm:
    """Add-one-smoothed bigram model over a word vocabulary."""

    def __init__(self, corpus: list[str]):
        if not corpus:
            raise ParameterError("empty language-model corpus")
        sentences = [s.split() for s in corpus]
        words = sorted({w for s in sentences for w in s})
        if not words:
            raise ParameterError("corpus contains no words")
        self.vocab = words
        self._index = {w: i for i, w in enumerate(words)}
        self.bigram_counts: dict[str, dict[str, int]] = {}
        self.history_totals: dict[str, int] = {}
        for s in sentences:
            hist = START_TOKEN
            for w in s:
                row = self.bigram_counts.setdefault(hist, {})
                row[w] = row.get(w, 0) + 1
                self.history_totals[hist] = self.history_totals.get(hist, 0) + 1
                hist = w

    def log_prob(self, word: str, history: str | None) -> float:
        """log P(word | history) with add-one smoothing over the vocabulary.

        Words outside the training vocabulary score like an unseen event
        (count 0); normalization holds over the training vocabulary itself.
        """
        hist = START_TOKEN if history is None else history
        count = self.bigram_counts.get(hist, {}).get(word, 0)
        total = self.history_totals.get(hist, 0)
        return math.log((count + 1) / (total + len(self.vocab)))

    def sentence_log_prob(self, words: list[str]) -> float:
        lp = 0.0
        hist: str | None = None
        for w in words:
            lp += self.log_prob(w, hist)
            hist = w
        return lp


def train_lm(corpus: list[str]) -> BigramLm:
    return BigramLm(corpus)


# ---------------------------------------------------------------------------
# CTC recognizer
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CtcConfig:
    input_dim: int
    vocab: tuple[str, ...]
    encoder_hidden: int = 128

    def validate(self) -> None:
        if self.input_dim < 1:
            raise ParameterError(f"input_dim must be >= 1, got {self.input_dim}")
        if len(self.vocab) < 1:
            raise ParameterError("vocabulary must be non-empty")
        if len(set(self.vocab)) != len(self.vocab):
            raise ParameterError("vocabulary contains duplicates")


class CtcModel:
    """GRU encoder with a per-frame projection to V word tokens + blank."""

    def __init__(self, config: CtcConfig, init_seed: int = 0):
        config.validate()
        self.config = config
        self.vocab = list(config.vocab)
        self._index = {w: i for i, w in enumerate(self.vocab)}
        store = ParamStore()
        self.gru = layers.GRU(store, "enc", config.input_dim, config.encoder_hidden)
        self.head = layers.Dense(store, "head", config.encoder_hidden, len(self.vocab) + 1)
        store.allocate(np.random.default_rng([init_seed, _STREAM_INIT]))
        self.store = store
        self._logits_cache: np.ndarray | None = None

    @property
    def blank(self) -> int:
        return len(self.vocab)

    def tokens_of(self, transcript: str) -> list[int]:
        words = transcript.split()
        missing = [w for w in words if w not in self._index]
        if missing:
            raise ParameterError(f"words not in vocabulary: {missing}")
        return [self._index[w] for w in words]

    def log_probs(self, x: np.ndarray) -> np.ndarray:
        """Per-frame log-probabilities, shape (T, V+1); rows sum to 1 in probs."""
        h = self.gru.forward(x)
        logits = self.head.forward(h)
        self._logits_cache = logits
        return losses.log_softmax(logits)

    def backward_from_log_probs(self, d_log_probs: np.ndarray) -> None:
        """Chain d(loss)/d(log p) through the per-frame log-softmax."""
        logits = self._logits_cache
        p = losses.softmax(logits)
        dlogits = d_log_probs - p * d_log_probs.sum(axis=1, keepdims=True)
        dh = self.head.backward(dlogits)
        self.gru.backward(dh)

    def transcribe(
        self,
        x: np.ndarray,
        lm: BigramLm | None = None,
        beam_width: int = DEFAULT_BEAM_WIDTH,
        lm_weight: float = DEFAULT_LM_WEIGHT,
    ) -> str:
        lp = self.log_probs(x)
        if lm is None:
            return ctc_greedy_decode(lp, self.vocab)
        return ctc_beam_decode(lp, lm, self.vocab, beam_width=beam_width, lm_weight=lm_weight)


def train_ctc(
    dataset: list[tuple[np.ndarray, str]],
    epochs: int = 200,
    batch: int = 200,
    seed: int = 0,
    encoder_hidden: int = 128,
) -> tuple[CtcModel, list[float]]:
    """Adam on CTC loss over the word vocabulary of the training transcripts."""
    if not dataset:
        raise ParameterError("empty training set")
    vocab = tuple(sorted({w for _, transcript in dataset for w in transcript.split()}))
    config = CtcConfig(
        input_dim=int(dataset[0][0].shape[1]), vocab=vocab, encoder_hidden=encoder_hidden
    )
    model = CtcModel(config, init_seed=seed)
    # Validate feasibility upfront so a bad example is named, not buried.
    for idx, (x, transcript) in enumerate(dataset):
        tokens = model.tokens_of(transcript)
        n_rep = sum(1 for a, b in zip(tokens, tokens[1:]) if a == b)
        if not losses.ctc_feasible(len(tokens), n_rep, int(x.shape[0])):
            raise FeasibilityError(
                f"example {idx}: transcript {transcript!r} needs at least "
                f"{len(tokens) + n_rep} frames, sequence has {x.shape[0]}"
            )
    rng = np.random.default_rng([seed, _STREAM_TRAIN])
    opt = optim.Adam(model.store.size)
    n = len(dataset)
    batch = min(batch, n)
    curve: list[float] = []
    for _ in range(epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, batch):
            members = order[start : start + batch]
            model.store.zero_grads()
            for i in members:
                x, transcript = dataset[int(i)]
                lp = model.log_probs(x)
                loss, d_lp = losses.ctc_loss(lp, model.tokens_of(transcript))
                model.backward_from_log_probs(d_lp / len(members))
                epoch_loss += loss
            opt.step(model.store.flat, model.store.flat_grad)
        curve.append(epoch_loss / n)
    return model, curve


# ---------------------------------------------------------------------------
# Decoding
# ---------------------------------------------------------------------------


def collapse_path(path: list[int], blank: int) -> list[int]:
    """Merge consecutive repeats, then drop blanks."""
    out: list[int] = []
    prev = None
    for s in path:
        if s != prev and s != blank:
            out.append(s)
        prev = s
    return out


def ctc_greedy_decode(log_probs: np.ndarray, vocab: list[str]) -> str:
    """Best-path decoding: per-frame argmax, collapse repeats, drop blanks."""
    lp = np.asarray(log_probs)
    blank = lp.shape[1] - 1
    path = [int(i) for i in np.argmax(lp, axis=1)]
    return " ".join(vocab[t] for t in collapse_path(path, blank))


def ctc_beam_decode(
    log_probs: np.ndarray,
    lm: BigramLm | None,
    vocab: list[str],
    beam_width: int = DEFAULT_BEAM_WIDTH,
    lm_weight: float = DEFAULT_LM_WEIGHT,
) -> str:
    """Prefix beam search with shallow bigram fusion.

    Prefixes merge by labeling; each carries separate blank-ending and
    nonblank-ending log masses.  Fusion adds lm_weight * log P(word | prev)
    when a prefix is extended; ranking and the final choice use
    log(P_blank + P_nonblank) + the accumulated LM score.  With a beam at
    least as wide as the number of reachable prefixes the search is exact.
    """
    if beam_width < 1:
        raise ParameterError(f"beam_width must be >= 1, got {beam_width}")
    lp = np.asarray(log_probs, dtype=np.float64)
    T, V1 = lp.shape
    blank = V1 - 1
    neg_inf = -np.inf

    # prefix (tuple of token ids) -> [log p ending in blank, log p ending in nonblank, lm score]
    beams: dict[tuple[int, ...], list[float]] = {(): [0.0, neg_inf, 0.0]}
    for t in range(T):
        nxt: dict[tuple[int, ...], list[float]] = {}

        def bucket(prefix: tuple[int, ...], lm_score: float) -> list[float]:
            entry = nxt.get(prefix)
            if entry is None:
                entry = [neg_inf, neg_inf, lm_score]
                nxt[prefix] = entry
            return entry

        for prefix, (pb, pnb, lm_score) in beams.items():
            total = np.logaddexp(pb, pnb)
            # Stay on blank.
            e = bucket(prefix, lm_score)
            e[0] = np.logaddexp(e[0], total + lp[t, blank])
            # Repeat the last symbol without extending the labeling.
            if prefix:
                e[1] = np.logaddexp(e[1], pnb + lp[t, prefix[-1]])
            # Extend by each symbol.
            for c in range(blank):
                ext = prefix + (c,)
                if prefix and c == prefix[-1]:
                    mass = pb + lp[t, c]  # repeat labels need a blank bridge
                else:
                    mass = total + lp[t, c]
                if mass == neg_inf:
                    continue
                step_lm = 0.0
                if lm is not None and lm_weight != 0.0:
                    hist = vocab[prefix[-1]] if prefix else None
                    step_lm = lm_weight * lm.log_prob(vocab[c], hist)
                e2 = bucket(ext, lm_score + step_lm)
                e2[1] = np.logaddexp(e2[1], mass)

        ranked = sorted(
            nxt.items(),
            key=lambda kv: np.logaddexp(kv[1][0], kv[1][1]) + kv[1][2],
            reverse=True,
        )
        beams = dict(ranked[:beam_width])

    best = max(beams.items(), key=lambda kv: np.logaddexp(kv[1][0], kv[1][1]) + kv[1][2])
    return " ".join(vocab[t] for t in best[0])


def fused_score(
    log_probs: np.ndarray,
    transcript: str,
    vocab: list[str],
    lm: BigramLm | None = None,
    lm_weight: float = DEFAULT_LM_WEIGHT,
) -> float:
    """log P_ctc(transcript) + lm_weight * log P_lm(transcript)."""
    index = {w: i for i, w in enumerate(vocab)}
    words = transcript.split()
    try:
        tokens = [index[w] for w in words]
    except KeyError as exc:
        raise ParameterError(f"word {exc.args[0]!r} not in vocabulary") from None
    try:
        loss, _ = losses.ctc_loss(np.asarray(log_probs), tokens)
    except FeasibilityError:
        return -np.inf
    score = -loss
    if lm is not None and lm_weight != 0.0:
        score += lm_weight * lm.sentence_log_prob(words)
    return score


# ---------------------------------------------------------------------------
# Word error rate
# ---------------------------------------------------------------------------


def wer(reference: str, hypothesis: str) -> float:
    """Word-level Levenshtein distance divided by reference word count."""
    ref = reference.split()
    hyp = hypothesis.split()
    if not ref:
        raise ParameterError("WER undefined for an empty reference")
    prev = list(range(len(hyp) + 1))
    for i, rw in enumerate(ref, start=1):
        cur = [i] + [0] * len(hyp)
        for j, hw in enumerate(hyp, start=1):
            cost = 0 if rw == hw else 1
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost)
        prev = cur
    return prev[-1] / len(ref)
