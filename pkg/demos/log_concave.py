"""Log-concave density estimate of a skewed sample.

Fits the log-concave MLE to 500 draws from Gamma(3, 1), prints the knots,
the certificate and a few density values next to the true density.
"""

import numpy as np
from scipy import stats

from shapemle import Setting, SolverConfig, evaluate, fit, ingest

rng = np.random.default_rng(7)
x = np.round(rng.gamma(3.0, 1.0, 500), 4)
res = fit(ingest(zip(x, np.ones(x.size))), SolverConfig(Setting.log_concave()))
cert = res.certificate

print(f"n = {x.size}, converged = {res.converged}, L = {res.loglik:.6f}")
print(f"{res.model.dset.size} kinks at {np.round(res.model.dset, 3)}")
print(f"Newton steps {res.newton_steps}, local searches {res.local_searches}, "
      f"certificate {'passed' if cert.passed else 'FAILED'}")
print(f"{'x':>6} {'fitted':>10} {'Gamma(3,1)':>10}")
for z in np.linspace(0.5, 8.0, 8):
    print(f"{z:6.2f} {np.exp(evaluate(res.params, z)):10.5f} {stats.gamma.pdf(z, 3.0):10.5f}")
