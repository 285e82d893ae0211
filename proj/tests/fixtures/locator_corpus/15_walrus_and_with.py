import numpy as np
from torch.optim.swa_utils import AveragedModel


def walrus(net, state):
    if (avg := AveragedModel(net)) is not None:
        avg.load_state_dict(state)


def context(path):
    with open(path) as fh:
        return np.full(len(fh.read()), 0)
