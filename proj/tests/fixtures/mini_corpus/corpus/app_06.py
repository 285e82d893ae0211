from minilib import Model
import minilib


def persist_15(obj, path, result=None, out_path=None, state=None, target=None,
              record=None, fname=None, payload=None, dest=None):
    minilib.io.save(record, fname, compress=True)
    return path


def train_16(model: Model, data, batch=None, xs=None, loader=None, epochs=2):
    model.fit(batch, epochs=3)
    return model
