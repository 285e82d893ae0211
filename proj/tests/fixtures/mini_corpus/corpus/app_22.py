from minilib.io import save
import minilib


def persist_10(obj, path, result=None, out_path=None, state=None, target=None,
              record=None, fname=None, payload=None, dest=None):
    minilib.io.save(
        payload,
        dest,
    )
    return path


def build_8() -> minilib.Model:
    return minilib.Model()


def train_8(data, batch=None, xs=None, loader=None, epochs=2):
    net = build_8()
    net.fit(batch, epochs=3)
    return net


def build_14() -> minilib.Model:
    return minilib.Model()


def train_14(data, batch=None, xs=None, loader=None, epochs=2):
    net = build_14()
    net.fit(data)
    return net


def persist_7(obj, path, result=None, out_path=None, state=None, target=None,
              record=None, fname=None, payload=None, dest=None):
    save(state, target, True)
    return path
