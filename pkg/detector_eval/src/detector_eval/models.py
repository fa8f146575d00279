"""Small sequence classifiers: one per architecture family.

Every model stays well under 1e5 parameters and trains in seconds on CPU;
the harness measures direction of effect, not headline scores.  Seeding is
strict: same seed and data, same trained weights.
"""

from __future__ import annotations

import numpy as np
import torch
from sklearn.linear_model import LogisticRegression
from torch import nn

from .data import InsufficientData, Record, Vocabulary

MAX_LEN = 24
MAX_PARAMS = 100_000


class RecurrentDetector(nn.Module):
    def __init__(self, vocab_size: int, embed: int = 16, hidden: int = 32):
        super().__init__()
        self.embed = nn.Embedding(vocab_size, embed, padding_idx=0)
        self.rnn = nn.LSTM(embed, hidden, batch_first=True)
        self.head = nn.Linear(hidden, 1)

    def forward(self, x):
        lengths = (x != 0).sum(dim=1).clamp(min=1)
        packed = nn.utils.rnn.pack_padded_sequence(
            self.embed(x), lengths.cpu(), batch_first=True,
            enforce_sorted=False)
        _, (h, _) = self.rnn(packed)
        return self.head(h[-1]).squeeze(-1)


class ConvDetector(nn.Module):
    def __init__(self, vocab_size: int, embed: int = 16, channels: int = 32):
        super().__init__()
        self.embed = nn.Embedding(vocab_size, embed, padding_idx=0)
        self.conv = nn.Conv1d(embed, channels, kernel_size=3, padding=1)
        self.head = nn.Linear(channels, 1)

    def forward(self, x):
        emb = self.embed(x).transpose(1, 2)
        feats = torch.relu(self.conv(emb)).max(dim=2).values
        return self.head(feats).squeeze(-1)


class AttentionDetector(nn.Module):
    def __init__(self, vocab_size: int, embed: int = 16):
        super().__init__()
        self.embed = nn.Embedding(vocab_size, embed, padding_idx=0)
        self.attn = nn.MultiheadAttention(embed, num_heads=1,
                                          batch_first=True)
        self.head = nn.Linear(embed, 1)

    def forward(self, x):
        emb = self.embed(x)
        mask = x == 0
        attended, _ = self.attn(emb, emb, emb, key_padding_mask=mask)
        keep = (~mask).unsqueeze(-1).float()
        pooled = (attended * keep).sum(1) / keep.sum(1).clamp(min=1.0)
        return self.head(pooled).squeeze(-1)


TORCH_FAMILIES = {
    "recurrent": RecurrentDetector,
    "convolutional": ConvDetector,
    "attention": AttentionDetector,
}
MODEL_FAMILIES = tuple(TORCH_FAMILIES) + ("ngram-logistic",)


def parameter_count(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())


def _check_classes(records: list[Record]) -> None:
    if len({r.anomalous for r in records}) < 2:
        raise InsufficientData("training split holds a single class")


def _tensors(records: list[Record], vocab: Vocabulary):
    x = torch.tensor([vocab.encode(r, MAX_LEN) for r in records],
                     dtype=torch.long)
    y = torch.tensor([float(r.anomalous) for r in records])
    return x, y


def train_torch_model(family: str, train: list[Record], vocab: Vocabulary,
                      seed: int, epochs: int = 12):
    _check_classes(train)
    torch.manual_seed(seed)
    model = TORCH_FAMILIES[family](len(vocab))
    assert parameter_count(model) <= MAX_PARAMS
    x, y = _tensors(train, vocab)
    optimizer = torch.optim.Adam(model.parameters(), lr=5e-3)
    loss_fn = nn.BCEWithLogitsLoss()
    generator = torch.Generator().manual_seed(seed)
    model.train()
    for _ in range(epochs):
        order = torch.randperm(len(x), generator=generator)
        for start in range(0, len(x), 32):
            idx = order[start:start + 32]
            optimizer.zero_grad()
            loss = loss_fn(model(x[idx]), y[idx])
            loss.backward()
            optimizer.step()
    model.eval()
    return model


def predict_torch_model(model, records: list[Record], vocab: Vocabulary):
    x, _ = _tensors(records, vocab)
    with torch.no_grad():
        return (torch.sigmoid(model(x)) >= 0.5).numpy().astype(int)


def _ngram_matrix(records: list[Record], vocab: Vocabulary) -> np.ndarray:
    """Unigram+bigram count features over event ids."""
    v = len(vocab)
    out = np.zeros((len(records), v + v * 8), dtype=np.float32)
    for row, record in enumerate(records):
        ids = [vocab.index.get(f, 0) for f in record.fingerprints]
        for i in ids:
            out[row, i] += 1.0
        for a, b in zip(ids, ids[1:]):
            out[row, v + (a * 8 + b) % (v * 8)] += 1.0
    return out


def train_ngram_logistic(train: list[Record], vocab: Vocabulary, seed: int):
    _check_classes(train)
    x = _ngram_matrix(train, vocab)
    y = np.array([int(r.anomalous) for r in train])
    model = LogisticRegression(max_iter=500, random_state=seed)
    model.fit(x, y)
    return model


def predict_ngram_logistic(model, records: list[Record], vocab: Vocabulary):
    return model.predict(_ngram_matrix(records, vocab)).astype(int)


def fit_predict(family: str, train: list[Record], test: list[Record],
                vocab: Vocabulary, seed: int, epochs: int = 12) -> np.ndarray:
    if family == "ngram-logistic":
        model = train_ngram_logistic(train, vocab, seed)
        return predict_ngram_logistic(model, test, vocab)
    if family not in TORCH_FAMILIES:
        raise ValueError(f"unknown model family {family!r}")
    model = train_torch_model(family, train, vocab, seed, epochs)
    return predict_torch_model(model, test, vocab)
