from minilib.io import save


def local(obj, path):
    save = print
    save(obj, path)
