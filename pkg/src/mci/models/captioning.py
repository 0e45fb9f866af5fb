"""Semantic change branch: BI3-refined scale-4 features bridged into a
token grid, decoded autoregressively by a small post-norm transformer."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..data.vocab import Vocabulary
from .bi3 import Bi3Config, Bi3Stack


def sinusoidal_positions(length: int, dim: int) -> torch.Tensor:
    """Standard fixed sin/cos table, shape (length, dim)."""
    pos = torch.arange(length, dtype=torch.float32).unsqueeze(1)
    idx = torch.arange(0, dim, 2, dtype=torch.float32)
    div = torch.exp(-idx * math.log(10000.0) / dim)
    table = torch.zeros(length, dim)
    table[:, 0::2] = torch.sin(pos * div)
    table[:, 1::2] = torch.cos(pos * div[: dim // 2])
    return table


class DomainBridge(nn.Module):
    """F1 = conv1x1([x1,x2]); F2 = conv3x3(ReLU(BN(conv1x1(F1)))); F1 + conv1x1(F2)."""

    def __init__(self, in_dim: int, out_dim: int):
        super().__init__()
        self.merge = nn.Conv2d(2 * in_dim, out_dim, 1)
        self.squeeze = nn.Conv2d(out_dim, out_dim, 1)
        self.bn = nn.BatchNorm2d(out_dim)
        self.spread = nn.Conv2d(out_dim, out_dim, 3, padding=1)
        self.out_conv = nn.Conv2d(out_dim, out_dim, 1)

    def forward(self, x1: torch.Tensor, x2: torch.Tensor) -> torch.Tensor:
        if x1.shape != x2.shape:
            raise ValueError(f"x1 shape {tuple(x1.shape)} != x2 shape {tuple(x2.shape)}")
        f1 = self.merge(torch.cat([x1, x2], dim=1))
        f2 = self.spread(F.relu(self.bn(self.squeeze(f1))))
        return f1 + self.out_conv(f2)


class MultiHeadAttention(nn.Module):
    """Plain MHA with the four projections exposed as attributes."""

    def __init__(self, dim: int, heads: int):
        super().__init__()
        if dim % heads != 0:
            raise ValueError(f"dim {dim} not divisible by heads {heads}")
        self.dim = dim
        self.heads = heads
        self.head_dim = dim // heads
        self.q_proj = nn.Linear(dim, dim)
        self.k_proj = nn.Linear(dim, dim)
        self.v_proj = nn.Linear(dim, dim)
        self.out_proj = nn.Linear(dim, dim)

    def forward(
        self,
        query: torch.Tensor,
        key: torch.Tensor,
        value: torch.Tensor,
        attn_mask: torch.Tensor | None = None,
    ) -> torch.Tensor:
        b, lq, _ = query.shape
        lk = key.shape[1]
        q = self.q_proj(query).view(b, lq, self.heads, self.head_dim).transpose(1, 2)
        k = self.k_proj(key).view(b, lk, self.heads, self.head_dim).transpose(1, 2)
        v = self.v_proj(value).view(b, lk, self.heads, self.head_dim).transpose(1, 2)
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.head_dim)
        if attn_mask is not None:
            scores = scores.masked_fill(attn_mask, float("-inf"))
        out = torch.softmax(scores, dim=-1) @ v
        out = out.transpose(1, 2).reshape(b, lq, self.dim)
        return self.out_proj(out)


class DecoderLayer(nn.Module):
    """Post-norm: attn -> add&norm -> cross -> add&norm -> mlp -> add&norm."""

    def __init__(self, dim: int, heads: int, mlp_ratio: float = 4.0):
        super().__init__()
        self.self_attn = MultiHeadAttention(dim, heads)
        self.cross_attn = MultiHeadAttention(dim, heads)
        hidden = int(round(dim * mlp_ratio))
        self.mlp = nn.Sequential(nn.Linear(dim, hidden), nn.ReLU(), nn.Linear(hidden, dim))
        self.norm_self = nn.LayerNorm(dim)
        self.norm_cross = nn.LayerNorm(dim)
        self.norm_mlp = nn.LayerNorm(dim)

    def forward(
        self, x: torch.Tensor, memory: torch.Tensor, causal_mask: torch.Tensor
    ) -> torch.Tensor:
        x = self.norm_self(x + self.self_attn(x, x, x, causal_mask))
        x = self.norm_cross(x + self.cross_attn(x, memory, memory))
        return self.norm_mlp(x + self.mlp(x))


@dataclass
class CaptionConfig:
    vocab_size: int
    feature_dim: int = 256
    embed_dim: int = 512
    num_layers: int = 2
    heads: int = 8
    max_len: int = 40
    max_grid: int = 32
    mlp_ratio: float = 4.0
    bi3: Bi3Config = field(default_factory=lambda: Bi3Config(dim=256))

    def __post_init__(self):
        if self.vocab_size < 5:
            raise ValueError("vocab must hold the specials plus at least one word")
        if self.embed_dim % self.heads != 0:
            raise ValueError("embed_dim must be divisible by heads")
        if self.max_len < 2:
            raise ValueError("max_len must be at least 2")
        if self.bi3.dim != self.feature_dim:
            raise ValueError("bi3 dim must equal feature_dim")


class CaptionHead(nn.Module):
    PAD, BOS, EOS = 0, 1, 2

    def __init__(self, cfg: CaptionConfig):
        super().__init__()
        self.cfg = cfg
        e = cfg.embed_dim
        self.bi3_stack = Bi3Stack(cfg.bi3)
        self.bridge = DomainBridge(cfg.feature_dim, e)
        self.row_pos = nn.Parameter(torch.zeros(cfg.max_grid, e))
        self.col_pos = nn.Parameter(torch.zeros(cfg.max_grid, e))
        nn.init.normal_(self.row_pos, std=0.02)
        nn.init.normal_(self.col_pos, std=0.02)
        self.token_embed = nn.Embedding(cfg.vocab_size, e, padding_idx=self.PAD)
        self.register_buffer(
            "word_pos", sinusoidal_positions(cfg.max_len, e), persistent=False
        )
        self.layers = nn.ModuleList(
            DecoderLayer(e, cfg.heads, cfg.mlp_ratio) for _ in range(cfg.num_layers)
        )
        self.out_proj = nn.Linear(e, cfg.vocab_size)

    def encode(self, x1: torch.Tensor, x2: torch.Tensor) -> torch.Tensor:
        """Scale-4 feature pair -> memory tokens (B, h*w, E)."""
        z1, z2 = self.bi3_stack(x1, x2)
        grid = self.bridge(z1, z2)
        b, e, h, w = grid.shape
        if h > self.cfg.max_grid or w > self.cfg.max_grid:
            raise ValueError(f"feature grid {h}x{w} exceeds max_grid {self.cfg.max_grid}")
        pos = self.row_pos[:h, None, :] + self.col_pos[None, :w, :]
        tokens = grid.flatten(2).transpose(1, 2) + pos.reshape(h * w, e)
        return tokens

    def _run_decoder(self, memory: torch.Tensor, ids: torch.Tensor) -> torch.Tensor:
        """Token ids (B, L) -> logits (B, L, V); position t predicts token t+1."""
        if ids.ndim != 2 or ids.shape[1] == 0:
            raise ValueError("prefix must be a nonempty (B, L) id tensor")
        if ids.shape[1] > self.cfg.max_len:
            raise ValueError(f"prefix length {ids.shape[1]} exceeds max_len {self.cfg.max_len}")
        length = ids.shape[1]
        x = self.token_embed(ids) + self.word_pos[:length]
        mask = torch.ones(length, length, dtype=torch.bool, device=ids.device).triu(1)
        for layer in self.layers:
            x = layer(x, memory, mask)
        return self.out_proj(x)

    def decode_step(self, memory: torch.Tensor, prefix: torch.Tensor) -> torch.Tensor:
        """Next-token logits (B, V) given a BOS-led prefix."""
        return self._run_decoder(memory, prefix)[:, -1]

    def forward_teacher(
        self, memory: torch.Tensor, ids: torch.Tensor
    ) -> tuple[torch.Tensor, torch.Tensor]:
        """Teacher forcing: returns (logits over ids[:,1:], targets ids[:,1:])."""
        if ids.shape[1] < 2:
            raise ValueError("teacher forcing needs at least BOS plus one target token")
        return self._run_decoder(memory, ids[:, :-1]), ids[:, 1:]

    @torch.no_grad()
    def greedy(self, memory: torch.Tensor, max_len: int | None = None) -> list[list[int]]:
        max_len = max_len or self.cfg.max_len
        b = memory.shape[0]
        ids = torch.full((b, 1), self.BOS, dtype=torch.long, device=memory.device)
        done = torch.zeros(b, dtype=torch.bool, device=memory.device)
        while ids.shape[1] < max_len and not bool(done.all()):
            logits = self.decode_step(memory, ids)
            nxt = logits.topk(1, dim=-1).indices.squeeze(-1)
            nxt = torch.where(done, torch.full_like(nxt, self.PAD), nxt)
            ids = torch.cat([ids, nxt.unsqueeze(1)], dim=1)
            done = done | (nxt == self.EOS)
        out = []
        for row in ids.tolist():
            if self.EOS in row:
                row = row[: row.index(self.EOS) + 1]
            out.append(row)
        return out

    @torch.no_grad()
    def beam(self, memory: torch.Tensor, beam_size: int, max_len: int | None = None) -> list[list[int]]:
        """Length-normalized beam search, one sample at a time."""
        if beam_size < 1:
            raise ValueError("beam_size must be positive")
        max_len = max_len or self.cfg.max_len
        results = []
        for i in range(memory.shape[0]):
            mem = memory[i : i + 1]
            live = [([self.BOS], 0.0)]
            finished: list[tuple[list[int], float]] = []
            while live and len(live[0][0]) < max_len:
                prefixes = torch.tensor([seq for seq, _ in live], device=memory.device)
                logp = F.log_softmax(
                    self.decode_step(mem.expand(len(live), -1, -1), prefixes), dim=-1
                )
                scores = torch.tensor([s for _, s in live], device=logp.device)
                flat = (scores.unsqueeze(1) + logp).reshape(-1)
                top = flat.topk(min(beam_size, flat.numel()))
                nxt_live = []
                for val, idx in zip(top.values.tolist(), top.indices.tolist()):
                    seq = live[idx // logp.shape[1]][0] + [idx % logp.shape[1]]
                    if seq[-1] == self.EOS:
                        finished.append((seq, val / (len(seq) - 1)))
                    else:
                        nxt_live.append((seq, val))
                live = nxt_live[:beam_size]
            for seq, val in live:
                finished.append((seq, val / (len(seq) - 1)))
            finished.sort(key=lambda item: item[1], reverse=True)
            results.append(finished[0][0])
        return results

    def generate(
        self,
        memory: torch.Tensor,
        method: str = "greedy",
        beam_size: int = 1,
        max_len: int | None = None,
    ) -> list[list[int]]:
        if method == "greedy":
            return self.greedy(memory, max_len)
        if method == "beam":
            return self.beam(memory, beam_size, max_len)
        raise ValueError(f"unknown decode method {method!r}")


def ids_to_sentence(ids: list[int], vocab: Vocabulary) -> str:
    return " ".join(vocab.decode(ids))
