import numpy as np
import pytest

from linkcausal import simgen
from linkcausal.comparators import ComparisonStore, build_comparisons
from linkcausal.records import (CovariateRecord, LinkFieldSpec, OutcomeRecord,
                                RunConfig)
from linkcausal.sampler import (ChainError, load_trace_csv, run_chain,
                                run_two_stage_pipeline)

from .oracles import (exact_posterior_integrated_params, total_variation,
                      z_rows_to_states)


def tiny_inputs(n=2, seed=0, w_value=None, y=None):
    rng = np.random.default_rng(seed)
    bits = rng.integers(0, 2, size=(n, n, 2)).astype(np.uint8)
    y = rng.normal(size=n) if y is None else np.asarray(y, dtype=float)
    file_a = [OutcomeRecord(i, ("a",), float(y[i])) for i in range(n)]
    w = rng.integers(0, 2, size=n) if w_value is None else np.full(n, w_value)
    file_b = [CovariateRecord(j, ("b",), (0.1 * j, -0.2), int(w[j]))
              for j in range(n)]
    return file_a, file_b, ComparisonStore(bits)


def small_simulated(seed=3, overlap=0.6, n=60, **kw):
    cfg = simgen.SimConfig(n_a=n, n_b=n, overlap=overlap, seed=seed, **kw)
    bundle = simgen.generate_population(cfg)
    cs = build_comparisons(bundle.file_a, bundle.file_b, simgen.sim_schema())
    return bundle, cs


def test_known_link_mode_keeps_z_fixed():
    bundle, cs = small_simulated()
    cfg = RunConfig(mode="known_link", iterations=40, burn_in=10, seed=5)
    trace = run_chain(bundle.file_a, bundle.file_b, cs, cfg,
                      true_links=bundle.true_links)
    expect = np.array([bundle.true_links.get(j, len(bundle.file_a) + j)
                       for j in range(len(bundle.file_b))])
    assert (trace.z_draws == expect).all()
    assert trace.mode == "known_link"
    assert trace.iterations == 40 and trace.burn_in == 10


def test_known_link_requires_truth():
    bundle, cs = small_simulated()
    cfg = RunConfig(mode="known_link", iterations=5, burn_in=1)
    with pytest.raises(ValueError, match="true_links"):
        run_chain(bundle.file_a, bundle.file_b, cs, cfg)


def test_fixed_seed_reproduces_trace_bit_for_bit(tmp_path):
    bundle, cs = small_simulated()
    cfg = RunConfig(mode="joint", iterations=60, burn_in=20, seed=17)
    t1 = run_chain(bundle.file_a, bundle.file_b, cs, cfg)
    t2 = run_chain(bundle.file_a, bundle.file_b, cs, cfg)
    assert np.array_equal(t1.z_draws, t2.z_draws)
    assert np.array_equal(t1.atel, t2.atel, equal_nan=True)
    for name in t1.params:
        assert np.array_equal(t1.params[name], t2.params[name], equal_nan=True)
    p1, p2 = tmp_path / "t1.csv", tmp_path / "t2.csv"
    t1.write_csv(p1, z_every=25)
    t2.write_csv(p2, z_every=25)
    assert p1.read_bytes() == p2.read_bytes()
    assert (tmp_path / "t1.csv.z").read_bytes() == (tmp_path / "t2.csv.z").read_bytes()


def test_trace_round_trip_via_csv(tmp_path):
    bundle, cs = small_simulated()
    cfg = RunConfig(mode="two_stage", iterations=50, burn_in=30, seed=2)
    trace = run_chain(bundle.file_a, bundle.file_b, cs, cfg)
    path = tmp_path / "trace.csv"
    trace.write_csv(path)
    back = load_trace_csv(path)
    assert back["mode"] == "two_stage" and back["seed"] == 2
    assert np.array_equal(back["all_atel"], trace.atel, equal_nan=True)
    assert np.array_equal(back["atel"], trace.atel[30:], equal_nan=True)
    assert np.array_equal(back["n_links"], trace.n_links)


def test_missing_outcomes_imputed_with_variation():
    bundle, cs = small_simulated(seed=8, overlap=0.8)
    rng = np.random.default_rng(1)
    file_a = simgen.inject_missing_outcomes(bundle.file_a, 0.1, rng)
    cfg = RunConfig(mode="joint", iterations=80, burn_in=40, seed=3)
    trace = run_chain(file_a, bundle.file_b, cs, cfg)
    assert len(trace.missing_rows) == round(0.1 * len(file_a))
    spread = trace.missing_draws[40:].std(axis=0)
    assert (spread > 0).all()


def test_propensity_failure_fraction_aborts_run():
    bundle, cs = small_simulated(seed=9, overlap=0.7)
    one_armed = [CovariateRecord(r.row_id, r.link_fields, r.x, 1)
                 for r in bundle.file_b]
    cfg = RunConfig(mode="joint", iterations=30, burn_in=10, seed=4)
    with pytest.raises(ChainError, match="propensity"):
        run_chain(bundle.file_a, one_armed, cs, cfg)


def test_two_stage_pipeline_with_perfect_identifiers():
    # clean fields and high overlap: stage 1 modal links must equal truth and
    # stage 2 must be byte-identical to a known-link chain on the same stream
    bundle, cs = small_simulated(seed=12, overlap=0.8, typo_prob=0.0,
                                 digit_swap_prob=0.0)
    cfg = RunConfig(mode="two_stage", iterations=300, burn_in=150, seed=31)
    links, stage2, stage1 = run_two_stage_pipeline(
        bundle.file_a, bundle.file_b, cs, cfg)
    assert links == bundle.true_links
    ss = np.random.SeedSequence(cfg.seed)
    _, child2 = ss.spawn(2)
    from dataclasses import replace
    ref = run_chain(bundle.file_a, bundle.file_b, cs,
                    replace(cfg, mode="known_link"),
                    true_links=bundle.true_links,
                    rng=np.random.default_rng(child2))
    assert np.array_equal(stage2.atel, ref.atel, equal_nan=True)


def test_two_stage_modal_extraction_uses_post_burn_in_only():
    bundle, cs = small_simulated(seed=12, overlap=0.8, typo_prob=0.0,
                                 digit_swap_prob=0.0)
    cfg = RunConfig(mode="two_stage", iterations=120, burn_in=100, seed=7)
    trace = run_chain(bundle.file_a, bundle.file_b, cs, cfg)
    assert trace.post_burnin_z().shape == (20, len(bundle.file_b))
    modal = trace.modal_links()
    z_last = trace.post_burnin_z()
    for j, (q, prob) in modal.items():
        counts = np.bincount(z_last[:, j], minlength=cs.n_a + cs.n_b)
        assert prob == counts.max() / 20


def test_two_stage_zero_links_raises():
    # one completely uninformative field: links churn across partners every
    # sweep, so no record keeps a modal link and the causal stage cannot run
    rng = np.random.default_rng(0)
    file_a = [OutcomeRecord(i, ("x",), float(rng.normal())) for i in range(40)]
    file_b = [CovariateRecord(j, ("x",), (float(rng.normal()), 0.1), j % 2)
              for j in range(40)]
    schema = (LinkFieldSpec("name", "nominal"),)
    cs = build_comparisons(file_a, file_b, schema)
    cfg = RunConfig(mode="two_stage", iterations=300, burn_in=100, seed=5)
    with pytest.raises(ChainError, match="zero modal links"):
        run_two_stage_pipeline(file_a, file_b, cs, cfg)


def test_outcome_params_held_while_nothing_is_linked():
    # the linked-outcome sampler is skipped exactly when the state entering
    # an iteration carries no links: theta_c must stay put on those steps
    file_a = [OutcomeRecord(i, (f"aa{i}",), float(i)) for i in range(6)]
    file_b = [CovariateRecord(j, (f"zz{j}",), (0.2 * j, 0.1), j % 2)
              for j in range(6)]
    schema = (LinkFieldSpec("name", "string", 0.95),)
    cs = build_comparisons(file_a, file_b, schema)
    cfg = RunConfig(mode="joint", iterations=60, burn_in=10, seed=6)
    trace = run_chain(file_a, file_b, cs, cfg,
                      propensity_override=np.full(6, 0.5))
    sigma2 = trace.params["sigma2"]
    assert sigma2[0] == 1.0  # initial state has no links, so first step holds
    empty_before = trace.n_links[:-1] == 0
    assert empty_before.any() and (~empty_before).any()
    held = sigma2[1:][empty_before] == sigma2[:-1][empty_before]
    assert held.all()
    moved = sigma2[1:][~empty_before] != sigma2[:-1][~empty_before]
    assert moved.all()
    assert np.isnan(trace.atel[trace.n_links == 0]).all()


def test_modes_present_in_trace_params():
    bundle, cs = small_simulated()
    cfg = RunConfig(mode="joint", iterations=30, burn_in=10, seed=1,
                    outcome_model="spline")
    trace = run_chain(bundle.file_a, bundle.file_b, cs, cfg)
    assert "lambda1_sq" in trace.params
    assert np.isfinite(trace.params["sigma2"][10:]).all()


@pytest.mark.slow
def test_joint_chain_matches_posterior_with_parameters_integrated():
    # 2x2 instance, all File B records sharing one design point so the exact
    # posterior is computable by quadrature with every parameter integrated
    y = np.array([0.3, 1.7])
    file_a, file_b, cs = tiny_inputs(n=2, seed=14, w_value=1, y=y)
    e_fixed = 0.5
    states, probs = exact_posterior_integrated_params(
        cs.bits, y, e_fixed, 1.0, alpha_pi=1.0, beta_pi=1.0)

    cfg = RunConfig(mode="joint", iterations=1_000_000, burn_in=10_000, seed=77)
    trace = run_chain(file_a, file_b, cs, cfg,
                      propensity_override=np.full(2, e_fixed),
                      label_guard=False)
    sampled = z_rows_to_states(trace.post_burnin_z(), 2)
    tv = total_variation(states, probs, sampled)
    assert tv < 0.05, f"TV against integrated posterior = {tv:.4f}"
