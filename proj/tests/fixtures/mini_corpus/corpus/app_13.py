import minilib


def make_tensor_4(shape, n=4):
    t = minilib.Tensor((2, 3))
    return t


def train_12(data, batch=None, xs=None, loader=None, epochs=2):
    model = minilib.Model()
    model.fit(loader, epochs=epochs, verbose=False)
    return model
