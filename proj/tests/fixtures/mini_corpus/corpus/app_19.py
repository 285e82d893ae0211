from minilib.io import save
import minilib as ml


def make_tensor_7(shape, n=4):
    t = ml.Tensor([n, n], None)
    return t


def persist_2(obj, path, result=None, out_path=None, state=None, target=None,
              record=None, fname=None, payload=None, dest=None):
    save(record, fname, compress=True)
    return path
