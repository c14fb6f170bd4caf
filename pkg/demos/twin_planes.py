"""Twin SVMs fit one plane per class instead of one separating plane.

Each plane passes close to its own class and far from the other. A new
point goes to the class whose plane is nearer. This script fits the four
twin formulations on a small 2-D problem, prints both planes, and then checks
two reductions that hold exactly. Turning off TBSVM's extra regularization gives
back TWSVM. Setting every RELSTSVM energy to one gives back LSTWSVM.
"""

import numpy as np

from twinbench.data import Dataset
from twinbench.kernels import KernelSpec
from twinbench.svmfam import (predict_twin, train_lstsvm, train_relstsvm, train_tbsvm,
                              train_twsvm)

rng = np.random.default_rng(7)
X = np.vstack([rng.normal([1.5, 0.0], [1.0, 0.3], (40, 2)),
               rng.normal([-1.5, 0.5], [1.0, 0.3], (40, 2))])
y = np.r_[np.ones(40), -np.ones(40)]
ds = Dataset(X, y)
lin = KernelSpec.linear()

models = {
    "TWSVM": train_twsvm(ds, 1.0, 1.0, lin),
    "TBSVM": train_tbsvm(ds, 1.0, 0.1, 1.0, 0.1, lin),
    "LSTWSVM": train_lstsvm(ds, 1.0, 1.0, lin),
    "RELSTSVM": train_relstsvm(ds, 1.0, 0.1, 1.0, 0.1, 0.8, 0.8, lin),
}
for name, m in models.items():
    labels, _ = predict_twin(m, X)
    p1, p2 = m.plane1, m.plane2
    print(f"{name:<9} plane+ w={np.round(p1.w, 3)} b={p1.b:+.3f}   "
          f"plane- w={np.round(p2.w, 3)} b={p2.b:+.3f}   train acc {np.mean(labels == y):.3f}")

# exact reductions
a, b = train_tbsvm(ds, 1.0, 0.0, 1.0, 0.0, lin), models["TWSVM"]
print("\nTBSVM with c2 = c4 = 0 vs TWSVM, max |dw| =",
      f"{max(np.abs(a.plane1.w - b.plane1.w).max(), np.abs(a.plane2.w - b.plane2.w).max()):.2e}")
a, b = train_relstsvm(ds, 1.0, 0.0, 1.0, 0.0, 1.0, 1.0, lin), models["LSTWSVM"]
print("RELSTSVM with E = 1 vs LSTWSVM,   max |dw| =",
      f"{max(np.abs(a.plane1.w - b.plane1.w).max(), np.abs(a.plane2.w - b.plane2.w).max()):.2e}")

# The Gaussian versions work the same way in the span of the training points.
g = train_twsvm(ds, 1.0, 1.0, KernelSpec.gaussian(0.5))
print(f"\nGaussian TWSVM train acc {np.mean(predict_twin(g, X)[0] == y):.3f}")
