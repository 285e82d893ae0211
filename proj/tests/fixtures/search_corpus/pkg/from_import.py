from torch.nn import functional


def probs(x):
    return functional.softmax(x, dim=1)
