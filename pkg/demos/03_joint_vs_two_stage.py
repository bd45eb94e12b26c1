"""Joint vs two-stage linkage on one synthetic replication.

The joint chain feeds outcome evidence into the linkage update; the
two-stage pipeline links first (ignoring outcomes) and then runs the causal
chain on the modal links.  Run with: python demos/03_joint_vs_two_stage.py
(takes a couple of minutes at n=500).
"""

from dataclasses import replace

import numpy as np

from linkcausal import (AtelPosterior, RunConfig, SimConfig,
                        build_comparisons, compute_mse, compute_ppv_npv,
                        generate_population, run_chain,
                        run_two_stage_pipeline, sim_schema)
from linkcausal.causal import AtelPosterior

cfg = RunConfig(iterations=800, burn_in=400, seed=19)
bundle = generate_population(
    SimConfig(n_a=500, n_b=500, overlap=0.9, scheme="L",
              typo_prob=0.25, digit_swap_prob=0.12, name_zipf=1.2, seed=19))
store = build_comparisons(bundle.file_a, bundle.file_b, sim_schema())
n_b = len(bundle.file_b)

known = run_chain(bundle.file_a, bundle.file_b, store,
                  replace(cfg, mode="known_link"),
                  true_links=bundle.true_links)
atel0 = AtelPosterior.from_draws(known.post_burnin_atel()).mean
print(f"benchmark effect from the true links: {atel0:.3f} (truth is 4)")

joint = run_chain(bundle.file_a, bundle.file_b, store, replace(cfg, mode="joint"))
ppv, npv = compute_ppv_npv(joint.modal_links(), bundle.true_links, n_b)
post = AtelPosterior.from_draws(joint.post_burnin_atel())
print(f"joint:     PPV={ppv:.3f} NPV={npv:.3f} "
      f"ATEL={post.q500:.3f} [{post.q025:.3f}, {post.q975:.3f}] "
      f"MSE={compute_mse(post.draws, atel0):.4f}")

links, stage2, stage1 = run_two_stage_pipeline(
    bundle.file_a, bundle.file_b, store, replace(cfg, mode="two_stage"))
ppv, npv = compute_ppv_npv(stage1.modal_links(), bundle.true_links, n_b)
post = AtelPosterior.from_draws(stage2.post_burnin_atel())
print(f"two-stage: PPV={ppv:.3f} NPV={npv:.3f} "
      f"ATEL={post.q500:.3f} [{post.q025:.3f}, {post.q975:.3f}] "
      f"MSE={compute_mse(post.draws, atel0):.4f}")
