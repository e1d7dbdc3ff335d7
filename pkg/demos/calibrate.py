"""Fit a WVAG-OU model to one simulated path.

Two steps.  First ``lam`` and ``eta`` are read off exactly: consecutive
jump-free steps lie on the same line, so the slope repeats.  Then the
remaining parameters maximize the mixture likelihood, which splits into
two one-dimensional problems plus a final joint search.

Smaller Fourier grids are used here to keep the run near a minute; the
defaults are finer.

Run:  python demos/calibrate.py
"""

import time

from ldoup.estimation import fit_wvagou, recover_lambda_eta, theta_dict
from ldoup.params import reference_model
from ldoup.sampling import make_rng, sample_path

model = reference_model("wvag-ou")
obs = sample_path(model, 1000, make_rng(3)).observations()

rec = recover_lambda_eta(obs)
print(f"lam = {rec.lambda_hat:.12f}, eta = {rec.eta_hat} from {rec.n_matches} repeated slopes")

t0 = time.perf_counter()
res = fit_wvagou(obs, rec.lambda_hat, rec.eta_hat, grid_points=(2**11, 2**8))
print(f"fit took {time.perf_counter() - t0:.0f} s, {res.n_evals} likelihood evaluations\n")

truth = theta_dict(model)
print(f"{'':8s} {'true':>8s} {'fitted':>8s}")
for k in ("a", "alpha1", "alpha2", "sigma11", "sigma22", "sigma12"):
    print(f"{k:8s} {truth[k]:8.4f} {res.theta_hat[k]:8.4f}")
