"""Configuration-name parser tests: token mapping, value tables,
conflict detection, and coverage of the known historical names."""

import pytest

from xmlc.sgm import BackgroundKind
from xmlc.templates import (
    BM25C_VARIANTS,
    BM_TI_B,
    BM_TI_LETTER,
    CS_LEVELS,
    IW_LEVELS,
    JM_LEVELS,
    KDP_LEVELS,
    MC_LEVELS,
    MLC_LEVELS,
    PCI_LEVELS,
    PCT_LEVELS,
    PS_DENOMINATOR,
    TF_LEVELS,
    parse_template_name,
)
from xmlc.weighting import WeightingScheme

from known_configs import KNOWN_CONFIG_NAMES


def test_all_known_configs_parse():
    assert len(KNOWN_CONFIG_NAMES) == 54
    for name in KNOWN_CONFIG_NAMES:
        cfg = parse_template_name(name)
        assert cfg.measure in ("mafs", "mafs2", "mafs3", "mifs", "mjac", "ndcg5")
        assert cfg.fold is not None
        assert cfg.canonical_name() == name


def test_known_config_row_seven_field_assignment():
    cfg = parse_template_name(KNOWN_CONFIG_NAMES[7])
    assert cfg.measure == "mafs3"
    assert cfg.fold == 1
    assert cfg.background is BackgroundKind.UNIFORM_COLLECTION
    assert cfg.jm_level == 3
    assert cfg.scheme_kind == "bm_ti"
    assert cfg.scheme_number == 18
    assert cfg.scheme_variant == ""
    assert cfg.pci_level == 7
    assert cfg.pct_level == 0
    assert cfg.ps_search and cfg.ps_level is None
    assert cfg.fb
    assert cfg.iw_level == 2
    assert cfg.unknown == ()


def test_walkthrough_name_with_threads():
    cfg = parse_template_name("mnb_mafs2_s8_lp_u_jm2_bm18ti_pct0_ps5_thr16.template")
    assert cfg.measure == "mafs2"
    assert cfg.fold == 8
    assert cfg.lp
    assert cfg.background is BackgroundKind.UNIFORM
    assert cfg.workers == 16
    assert cfg.jm_lambda == pytest.approx(0.98)
    assert cfg.prior_scale == pytest.approx(0.625)
    # Engine marker and file suffix are stripped from the canonical form.
    assert cfg.canonical_name() == "mafs2_s8_lp_u_jm2_bm18ti_pct0_ps5_thr16"


def test_empty_name_rejected():
    with pytest.raises(ValueError):
        parse_template_name("")
    with pytest.raises(ValueError):
        parse_template_name("mnb")
    with pytest.raises(ValueError):
        parse_template_name("___")


def test_name_must_start_with_measure():
    with pytest.raises(ValueError):
        parse_template_name("s1_u_jm2")


def test_background_conflict():
    with pytest.raises(ValueError, match="conflict"):
        parse_template_name("mafs_s1_u_uc1_jm2")


def test_duplicate_token_conflict():
    with pytest.raises(ValueError, match="conflict"):
        parse_template_name("mafs_s1_u_jm2_jm3")
    with pytest.raises(ValueError, match="conflict"):
        parse_template_name("mafs_s1_s2_u")
    with pytest.raises(ValueError, match="measure"):
        parse_template_name("mafs_mjac_s1_u")


def test_ps_search_conflicts_with_ps_level():
    with pytest.raises(ValueError, match="ps"):
        parse_template_name("mafs_s1_u_jm2_ps3_psX")


def test_nobo_requires_kd():
    with pytest.raises(ValueError, match="nobo"):
        parse_template_name("mafs_s1_nobo_bm25c2")
    cfg = parse_template_name("mafs_s1_kd_nobo_bm25c2")
    assert cfg.kd and cfg.nobo


def test_unknown_tokens_preserved_in_order():
    cfg = parse_template_name("mafs_s6_kd_u_jm3_kdp1_bm18ti_mc0_pci1_pct0_ps5_lt5_mr1_tk2_ch80")
    assert cfg.unknown == ("lt5", "mr1", "tk2", "ch80")
    assert cfg.canonical_name().endswith("lt5_mr1_tk2_ch80")


def test_out_of_table_scheme_numbers_are_unknown():
    assert "bm17ti" in parse_template_name("mafs_s1_u_bm17ti").unknown
    assert "bm25c9" in parse_template_name("mafs_s1_u_bm25c9").unknown
    assert "tiX9" in parse_template_name("mafs_s1_u_tiX9").unknown


def test_out_of_range_known_level_rejected():
    with pytest.raises(ValueError, match="out of range"):
        parse_template_name("mafs_s1_u_jm9")
    with pytest.raises(ValueError, match="out of range"):
        parse_template_name("mafs_s1_u_jm2_iw5")


def test_level_tables_resolve_to_values():
    cfg = parse_template_name("mafs_s3_kd_u_jm3_kdp5_bm18ti_mc1_mlc2_pct2_pci3_ps4_cs1_iw1")
    assert cfg.jm_lambda == JM_LEVELS[3]
    assert cfg.dirichlet_mu == KDP_LEVELS[5]
    assert cfg.prior_scale == 4 / PS_DENOMINATOR
    pruning = cfg.pruning_config()
    assert pruning.min_count == MC_LEVELS[1]
    assert pruning.min_label_count == MLC_LEVELS[2]
    assert pruning.precomputed_prune == PCT_LEVELS[2]
    assert pruning.online_prune == PCI_LEVELS[3]
    smoothing = cfg.smoothing_config()
    assert smoothing.hierarchy_mix == CS_LEVELS[1]
    assert cfg.instantiate_config().instantiate_weight == IW_LEVELS[1]


def test_level_tables_are_monotone():
    for table in (JM_LEVELS, KDP_LEVELS, IW_LEVELS, MC_LEVELS, MLC_LEVELS, PCT_LEVELS, PCI_LEVELS, CS_LEVELS, TF_LEVELS):
        assert list(table) == sorted(table)
    assert list(BM_TI_B) == sorted(BM_TI_B)


def test_weighting_config_bm_ti_variants():
    base = parse_template_name("mafs_s1_u_bm18ti").weighting_config()
    assert base.scheme is WeightingScheme.BM18TI
    assert base.b == BM_TI_B[18]
    assert (base.length_exponent, base.idf_exponent) == BM_TI_LETTER[""]
    lettered = parse_template_name("mafs_s1_u_bm18tid").weighting_config()
    assert (lettered.length_exponent, lettered.idf_exponent) == BM_TI_LETTER["d"]
    flat = parse_template_name("mafs_s1_u_bm15ti").weighting_config()
    assert flat.b == 0.0


def test_weighting_config_bm25c_and_tix():
    c2 = parse_template_name("mafs_s1_kd_nobo_bm25c2").weighting_config()
    assert c2.scheme is WeightingScheme.BM25C
    assert (c2.k1, c2.b) == BM25C_VARIANTS[2]
    tix = parse_template_name("mafs_s1_u_tiX5").weighting_config()
    assert tix.scheme is WeightingScheme.TIX
    assert tix.tf_exponent == TF_LEVELS[5]


def test_model_flags_and_kernel_inference():
    flags = parse_template_name("mafs_s1_kd_nobo_bm25c2").model_flags()
    assert flags.kd and flags.nobo and flags.bm25_kernel
    flags = parse_template_name("mafs_s1_kd_u_jm3_kdp5_bm18ti").model_flags()
    assert flags.kd and not flags.nobo and not flags.bm25_kernel
    flags = parse_template_name("mafs_s1_lp_u_jm2_bm18ti").model_flags()
    assert flags.lp and not flags.kd


def test_search_parameters():
    assert parse_template_name("mafs_s1_u_jm2_psX").search_parameters() == ("prior_scale",)
    assert parse_template_name("mafs_s1_u_jm2_tXiX2").search_parameters() == (
        "tf_exponent",
        "idf_exponent",
    )
    assert parse_template_name("mafs_s1_u_jm2_ps3").search_parameters() == ()


def test_measure_variant_letter():
    cfg = parse_template_name("ndcg5b_s3_kd_u_jm2_kdp5_bm18tib_mc0_ps6")
    assert cfg.measure == "ndcg5"
    assert cfg.measure_variant == "b"


def test_fb_and_je_parse_without_effect():
    cfg = parse_template_name("mjac_s0_u_jm3_bm18ti_pct0_ps5_je")
    assert cfg.je
    cfg = parse_template_name("mafs_s0_lp_u_jm2_bm18tic_fb3_mc0_pct0_ps6")
    assert cfg.fb and cfg.fb_level == 3
    # Neither flag changes the derived model, smoothing, or search setup.
    plain = parse_template_name("mjac_s0_u_jm3_bm18ti_pct0_ps5")
    flagged = parse_template_name("mjac_s0_u_jm3_bm18ti_pct0_ps5_je")
    assert plain.model_flags() == flagged.model_flags()
    assert plain.smoothing_config() == flagged.smoothing_config()
    assert plain.search_parameters() == flagged.search_parameters()


def test_defaults_without_optional_tokens():
    cfg = parse_template_name("mjac_s0_lp_bm25c1_mc0_mlc0_ps3")
    assert cfg.background is None
    assert cfg.smoothing_config().background_kind is BackgroundKind.UNIFORM
    assert cfg.workers == 1
    assert cfg.thr is None
    assert cfg.prior_scale == 3 / PS_DENOMINATOR


def test_ps_search_leaves_prior_scale_neutral():
    cfg = parse_template_name("mafs3_s1_uc1_jm3_bm18ti_pci7_pct0_psX_fb_iw2")
    assert cfg.prior_scale == 1.0
