import numpy as np

GRID = np.full((3, 3), 1.0)
