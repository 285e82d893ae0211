import torch
from torch import optim


def load_checkpoint(model_path, base_model):
    model = optim.swa_utils.AveragedModel(base_model)
    state_dict = torch.load(model_path)
    model.load_state_dict(state_dict, strict=True)
    return model
