import pytest

from linkcausal import records
from linkcausal.records import (ConfigError, DataFileError, Hyperparameters,
                                LinkFieldSpec, RunConfig, load_config,
                                load_file_a, load_file_b, load_link_schema,
                                write_file_a, write_file_b)

SCHEMA = (
    LinkFieldSpec("first_name", "string", 0.95),
    LinkFieldSpec("last_name", "string", 0.95),
    LinkFieldSpec("birth_year", "nominal"),
)


def test_field_spec_threshold_rules():
    with pytest.raises(ValueError):
        LinkFieldSpec("f", "string")  # threshold required
    with pytest.raises(ValueError):
        LinkFieldSpec("f", "string", 1.5)
    with pytest.raises(ValueError):
        LinkFieldSpec("f", "nominal", 0.9)  # nominal takes none
    with pytest.raises(ValueError):
        LinkFieldSpec("f", "fuzzy")


def test_load_file_a_parses_missing_token(tmp_path):
    path = tmp_path / "a.csv"
    path.write_text(
        "first_name,last_name,birth_year,y\n"
        "Ana,Berg,1960,1.0\nBo,Crag,1970,2.0\nCy,Dorn,1980,NA\n")
    recs = load_file_a(path, SCHEMA, "y")
    assert [r.y for r in recs] == [1.0, 2.0, None]
    assert [r.row_id for r in recs] == [0, 1, 2]
    assert recs[0].link_fields == ("Ana", "Berg", "1960")


def test_load_file_a_rejects_bad_outcome(tmp_path):
    path = tmp_path / "a.csv"
    path.write_text("first_name,last_name,birth_year,y\nAna,Berg,1960,abc\n")
    with pytest.raises(DataFileError, match="row 2"):
        load_file_a(path, SCHEMA, "y")


def test_duplicate_header_rejected(tmp_path):
    path = tmp_path / "a.csv"
    path.write_text("y,y,first_name,last_name,birth_year\n1,2,a,b,c\n")
    with pytest.raises(DataFileError, match="duplicate"):
        load_file_a(path, SCHEMA, "y")


def test_empty_file_rejected(tmp_path):
    path = tmp_path / "a.csv"
    path.write_text("")
    with pytest.raises(DataFileError):
        load_file_a(path, SCHEMA, "y")
    path.write_text("first_name,last_name,birth_year,y\n")
    with pytest.raises(DataFileError, match="no data rows"):
        load_file_a(path, SCHEMA, "y")


def test_load_file_b_parses_and_validates(tmp_path):
    path = tmp_path / "b.csv"
    path.write_text(
        "first_name,last_name,birth_year,x1,x2,w\n"
        "Ana,Berg,1960,0.5,-0.2,1\n")
    recs = load_file_b(path, SCHEMA, ("x1", "x2"), "w")
    assert recs[0].w == 1 and recs[0].x == (0.5, -0.2)

    path.write_text("first_name,last_name,birth_year,x1,x2,w\nAna,Berg,1960,0.5,-0.2,2\n")
    with pytest.raises(DataFileError, match="treatment"):
        load_file_b(path, SCHEMA, ("x1", "x2"), "w")

    path.write_text("first_name,last_name,birth_year,x1,x2,w\nAna,Berg,1960,,1.0,1\n")
    with pytest.raises(DataFileError, match="covariate"):
        load_file_b(path, SCHEMA, ("x1", "x2"), "w")


def test_round_trip_identity_on_generated_files(tmp_path):
    from linkcausal import simgen

    bundle = simgen.generate_population(
        simgen.SimConfig(n_a=1000, n_b=1000, overlap=0.5, missing_frac=0.05, seed=3))
    schema = simgen.sim_schema()
    pa, pb = tmp_path / "a.csv", tmp_path / "b.csv"
    write_file_a(pa, bundle.file_a, schema)
    write_file_b(pb, bundle.file_b, schema)
    back_a = load_file_a(pa, schema, "y")
    back_b = load_file_b(pb, schema, ("x1", "x2"), "w")
    assert back_a == bundle.file_a
    assert back_b == bundle.file_b
    # second round trip is bit-identical at file level too
    pa2, pb2 = tmp_path / "a2.csv", tmp_path / "b2.csv"
    write_file_a(pa2, back_a, schema)
    write_file_b(pb2, back_b, schema)
    assert pa2.read_bytes() == pa.read_bytes()
    assert pb2.read_bytes() == pb.read_bytes()


def test_empty_config_gives_documented_defaults(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# nothing but a comment\n")
    cfg = load_config(path)
    assert cfg.iterations == 2000 and cfg.burn_in == 1500
    assert cfg.outcome_model == "parametric" and cfg.mode == "joint"
    hyper = cfg.hyper
    assert all(
        getattr(hyper, name) == 1.0
        for name in ("a", "b", "alpha_pi", "beta_pi", "a_sigma", "b_sigma",
                     "a_sigma1", "b_sigma1", "r1", "r2", "delta1", "delta2"))
    assert cfg.spline.s == 2 and cfg.spline.m_knots == 15


def test_config_invariants_and_unknown_keys(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("iterations = 2000\nburn_in = 2500\n")
    with pytest.raises(ConfigError, match="burn_in"):
        load_config(path)
    path.write_text("not_a_key = 3\n")
    with pytest.raises(ConfigError, match="unknown key"):
        load_config(path)
    path.write_text("a_sigma = -1\n")
    with pytest.raises(ConfigError, match="a_sigma"):
        load_config(path)


def test_config_deterministic(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("seed = 42\nmode = two_stage\n")
    assert load_config(path) == load_config(path)


def test_hyperparameters_positive():
    with pytest.raises(ValueError):
        Hyperparameters(alpha_pi=0.0)


def test_run_config_validation():
    with pytest.raises(ValueError):
        RunConfig(mode="bogus")
    with pytest.raises(ValueError):
        RunConfig(iterations=10, burn_in=10)


def test_link_schema_parsing(tmp_path):
    path = tmp_path / "schema.cfg"
    path.write_text(
        "link_fields = fn:string:0.95, ln:string:0.9, by:nominal\n"
        "outcome_column = spend\n"
        "covariate_columns = inc, wealth\n"
        "treatment_column = card\n")
    schema = load_link_schema(path)
    assert [f.name for f in schema.link_fields] == ["fn", "ln", "by"]
    assert schema.link_fields[1].string_threshold == 0.9
    assert schema.outcome_column == "spend"
    assert schema.covariate_columns == ("inc", "wealth")

    path.write_text("outcome_column = y\n")
    with pytest.raises(ConfigError, match="link_fields"):
        load_link_schema(path)
    path.write_text("link_fields = fn:fuzzy:0.9\n")
    with pytest.raises(ConfigError):
        load_link_schema(path)
