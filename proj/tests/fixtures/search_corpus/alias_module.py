import torch.nn.functional as F


def probs(x):
    return F.softmax(x, dim=-1)
