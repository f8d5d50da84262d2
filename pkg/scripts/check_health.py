import sys, pathlib
sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent))

import numpy as np

from linalg_core import validate_psd
from ness_boson import ness_report_boson
from ness_fermion import SystemSpec, ness_report
from perturbative import verify_design_saturation

# Closed forms for single-mode systems: fermion a=d=1 gives J=1, boson a=1/4, d=1 gives J=2/3
fermion = ness_report(SystemSpec.from_arrays([[0.0]], [[1.0]], [[1.0]]))
print('fermion m=1 a=d=1:      J =', fermion.J, ' J_max =', fermion.J_bound)

boson = ness_report_boson(SystemSpec.from_arrays([[0.0]], [[0.25]], [[1.0]], statistics='boson'))
print('boson   m=1 a=1/4 d=1:  J =', boson.J, ' J_min =', boson.J_min)

swap = np.array([[0.0, 1.0], [1.0, 0.0]])
design = verify_design_saturation(swap, validate_psd([[1.0, 0.2], [0.2, 0.4]], 'A'), [-1.0, 1.0])
print('swap-symmetric design:  J_inf/J_max =', design.ratio)

checks = {
    'fermion': abs(fermion.J - 1.0) < 1e-12,
    'boson': abs(boson.J - 2.0 / 3.0) < 1e-12 and abs(boson.ratio - 1.0) < 1e-9,
    'design': design.saturated,
}
for name, ok in checks.items():
    print(f'{name:8s}', 'ok' if ok else 'FAILED')
sys.exit(0 if all(checks.values()) else 1)
