"""The bipartite linkage model on its own: prior, Gibbs sweeps, posterior modes.

Run with: python demos/02_linkage_gibbs.py
"""

import math

import numpy as np

from linkcausal import (MixtureParams, build_comparisons, generate_population,
                        log_prior_z, posterior_mode_links, sample_z_chain,
                        LinkageState, SimConfig, sim_schema)

# The marginal prior over assignments: with alpha_pi = beta_pi = 1 the
# implied number of links is uniform on 0..n_B.
state0 = LinkageState.empty(3, 3)
state2 = LinkageState.from_links({0: 1, 2: 0}, 3, 3)
print("log prior, no links:  ", round(log_prior_z(state0, 1, 1), 4))
print("log prior, two links: ", round(log_prior_z(state2, 1, 1), 4))

# A small synthetic population with perturbed identifiers.
bundle = generate_population(SimConfig(n_a=80, n_b=80, overlap=0.6, seed=4))
store = build_comparisons(bundle.file_a, bundle.file_b, sim_schema())

# Fix well-separated mixture parameters and run the z chain alone.
mix = MixtureParams(np.full(4, 0.88), np.full(4, 0.02))
draws = sample_z_chain(store, mix, None, 1.0, 1.0, 4000,
                       np.random.default_rng(0))
modal = posterior_mode_links(draws[1000:], store.n_a)

links = {j: q for j, (q, _) in modal.items() if q >= 0}
correct = sum(1 for j, i in links.items() if bundle.true_links.get(j) == i)
print(f"\ntrue links: {len(bundle.true_links)}, modal links: {len(links)}, "
      f"correct: {correct}")

uncertain = sorted(modal.items(), key=lambda kv: kv[1][1])[:5]
print("least certain records (j, modal state, posterior frequency):")
for j, (q, p) in uncertain:
    print(f"  j={j:3d}  q={'no link' if q < 0 else q}  p={p:.3f}")
