import textwrap

import pytest

from circmech.config import (
    ConfigFileNotFound,
    ConfigSyntaxError,
    MissingKeyError,
    TypeMismatchError,
    UnknownKeyError,
    parse_config,
    parse_config_text,
)
from circmech.rng import SEED_MAX, derive_seed, substream


def parse(text):
    return parse_config_text(textwrap.dedent(text))


def test_minimal_config_fills_defaults():
    cfg = parse("""\
        scenario: comparative_statics
        seed: 42
        params:
          tau_grid: [0, 1, 2]
    """)
    assert cfg.seed == 42
    assert cfg.params["tau_grid"] == [0.0, 1.0, 2.0]
    assert cfg.params["enforcement"]["risk_scale"] == 100.0
    assert (cfg.output_dir, cfg.output_format) == ("out", "csv")
    assert len(cfg.sha256) == 64


def test_unknown_key_suggests_nearest():
    with pytest.raises(UnknownKeyError) as info:
        parse("""\
            scenario: disclosure_equilibrium
            seed: 1
            params:
              n_agents: 10
              tau: 1.0
              gian: 0.1
        """)
    err = info.value
    assert (err.key, err.line, err.suggestion) == ("params.gian", 6, "gain")
    assert "gian" in str(err) and "gain" in str(err)


def test_missing_required_key_names_it():
    with pytest.raises(MissingKeyError) as info:
        parse("""\
            scenario: saito_epoch
            seed: 1
            params:
              nodes: 4
        """)
    assert info.value.key == "params.rounds"
    assert info.value.line == 4


def test_missing_params_section():
    with pytest.raises(MissingKeyError) as info:
        parse("scenario: elicitation\nseed: 3\n")
    assert info.value.key == "params"


@pytest.mark.parametrize(
    "text, key",
    [
        ("scenario: elicitation\nseed: x\nparams: {n_agents: 2}\n", "seed"),
        ("scenario: elicitation\nseed: 1\nparams: {n_agents: 2.5}\n", "params.n_agents"),
        ("scenario: elicitation\nseed: 1\nparams: {n_agents: true}\n", "params.n_agents"),
        ("scenario: elicitation\nseed: 1\nparams: {n_agents: 2, value: abc}\n", "params.value"),
        ("scenario: comparative_statics\nseed: 1\nparams: {tau_grid: 3}\n", "params.tau_grid"),
        ("scenario: elicitation\nseed: 1\noutput: {format: xml}\nparams: {n_agents: 2}\n", "output.format"),
        ("scenario: elicitation\nseed: -1\nparams: {n_agents: 2}\n", "seed"),
        ("scenario: elicitation\nseed: %d\nparams: {n_agents: 2}\n" % (SEED_MAX + 1), "seed"),
        ("scenario: nope\nseed: 1\n", "scenario"),
    ],
)
def test_type_mismatches(text, key):
    with pytest.raises(TypeMismatchError) as info:
        parse_config_text(text)
    assert info.value.key == key
    assert info.value.line is not None


def test_syntax_error_has_line():
    with pytest.raises(ConfigSyntaxError) as info:
        parse_config_text("scenario: elicitation\nseed: [1\n")
    assert info.value.line is not None


def test_missing_file(tmp_path):
    with pytest.raises(ConfigFileNotFound):
        parse_config(tmp_path / "nope.yaml")


def test_nested_unknown_key():
    with pytest.raises(UnknownKeyError) as info:
        parse("""\
            scenario: comparative_statics
            seed: 1
            params:
              tau_grid: [0]
              enforcement:
                cost_coef: 2
        """)
    assert info.value.suggestion == "cost_coeff"
    assert info.value.line == 6


def test_seed_accepts_full_range():
    cfg = parse_config_text("scenario: elicitation\nseed: %d\nparams: {n_agents: 2}\n" % SEED_MAX)
    assert cfg.seed == SEED_MAX


def test_substreams_are_independent_and_stable():
    assert derive_seed(1, "saito_sim") == derive_seed(1, "saito_sim")
    seeds = {derive_seed(1, label, i) for label in ("a", "b") for i in range(3)}
    assert len(seeds) == 6
    assert substream(5, "x").random() == substream(5, "x").random()
    assert substream(5, "x").random() != substream(5, "y").random()
