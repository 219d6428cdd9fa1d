"""Writes torch_tcn.txt: a small weight-normed TCN run through PyTorch.

Each record is a header line `name dim...` followed by the flattened values.
Conv weights use torch's tap order (tap j reads x[t - (k-1-j)d]).

    python torch_tcn.py > torch_tcn.txt
"""
import sys

import torch
import torch.nn as nn
from torch.nn.utils import weight_norm


class Chomp(nn.Module):
    def __init__(self, c):
        super().__init__()
        self.c = c

    def forward(self, x):
        return x[:, :, : -self.c].contiguous()


class Block(nn.Module):
    def __init__(self, i, o, k, d):
        super().__init__()
        p = (k - 1) * d
        self.c1 = weight_norm(nn.Conv1d(i, o, k, padding=p, dilation=d))
        self.c2 = weight_norm(nn.Conv1d(o, o, k, padding=p, dilation=d))
        self.net = nn.Sequential(self.c1, Chomp(p), nn.ReLU(), self.c2, Chomp(p), nn.ReLU())
        self.down = nn.Conv1d(i, o, 1) if i != o else None
        self.c1.weight_v.data.normal_(0, 0.01)
        self.c2.weight_v.data.normal_(0, 0.01)
        if self.down is not None:
            self.down.weight.data.normal_(0, 0.01)
        for m in [self.c1, self.c2, self.down]:
            if m is not None:
                m.bias.data.zero_()

    def forward(self, x):
        r = x if self.down is None else self.down(x)
        return torch.relu(self.net(x) + r)


class TCN(nn.Module):
    def __init__(self, i, h, n, k):
        super().__init__()
        self.blocks = nn.Sequential(*[Block(i if l == 0 else h, h, k, 2**l) for l in range(n)])
        self.lin = nn.Linear(h, 1)
        self.lin.weight.data.normal_(0, 0.01)
        self.lin.bias.data.zero_()

    def forward(self, x):
        return self.lin(self.blocks(x)[:, :, -1])


def adding(n, t, g):
    x = torch.rand(n, 2, t, generator=g)
    x[:, 1] = 0
    for i in range(n):
        m = torch.randperm(t, generator=g)[:2]
        x[i, 1, m] = 1
    y = (x[:, 0] * x[:, 1]).sum(1, keepdim=True)
    return x, y


def write(name, t):
    out = sys.stdout
    out.write(name + " " + " ".join(map(str, t.shape)) + "\n")
    out.write(" ".join(repr(v) for v in t.detach().flatten().double().tolist()) + "\n")


torch.manual_seed(0)
torch.set_num_threads(1)
torch.manual_seed(3)
m = TCN(2, 8, 3, 3)
# Move away from the init so every gradient is non-trivial.
for p in m.parameters():
    p.data += 0.1 * torch.randn_like(p)
x, y = adding(4, 20, torch.Generator().manual_seed(5))
out = m(x)
loss = ((out - y) ** 2).mean()
loss.backward()

write("input", x)
write("target", y)
write("out", out)
write("loss", loss.reshape(1))
for i, b in enumerate(m.blocks):
    for c, mod in [("conv1", b.c1), ("conv2", b.c2)]:
        write(f"block{i}.{c}.v", mod.weight_v)
        write(f"block{i}.{c}.g", mod.weight_g.flatten())
        write(f"block{i}.{c}.b", mod.bias)
        write(f"grad.block{i}.{c}.v", mod.weight_v.grad)
        write(f"grad.block{i}.{c}.g", mod.weight_g.grad.flatten())
        write(f"grad.block{i}.{c}.b", mod.bias.grad)
    if b.down is not None:
        write(f"block{i}.downsample.w", b.down.weight)
        write(f"block{i}.downsample.b", b.down.bias)
        write(f"grad.block{i}.downsample.w", b.down.weight.grad)
        write(f"grad.block{i}.downsample.b", b.down.bias.grad)
write("head.w", m.lin.weight)
write("head.b", m.lin.bias)
write("grad.head.w", m.lin.weight.grad)
write("grad.head.b", m.lin.bias.grad)
