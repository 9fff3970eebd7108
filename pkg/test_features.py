import numpy as np
import pytest
from numpy.testing import assert_allclose

from dga.features import (
    FEATURE_NAMES,
    GasRecord,
    LabeledRecord,
    Level1Label,
    Level2Label,
    NormalizationParams,
    TdcgVariant,
    compute_tdcg,
    denormalize,
    fit_normalizer,
    normalize,
    record_features,
    to_arrays,
)


def make_record(value=1.0, **gases):
    fields = {g: value for g in ('ch4', 'c2h6', 'c2h4', 'c2h2', 'h2', 'co', 'co2', 'n2', 'o2')}
    fields.update(gases)
    return GasRecord(**fields)


def test_tdcg_variants():
    record = GasRecord(ch4=10, c2h6=20, c2h4=30, c2h2=40, h2=50, co=100, co2=1000, n2=5000, o2=3000)
    assert compute_tdcg(record, TdcgVariant.STANDARD) == 250.0
    assert compute_tdcg(record, TdcgVariant.WITHOUT_CO) == 150.0
    assert record_features(record)[-1] == 250.0
    assert len(record_features(record)) == len(FEATURE_NAMES)


def test_record_rejects_negative_and_nan():
    with pytest.raises(ValueError, match='c2h2'):
        make_record(c2h2=-1.0)
    with pytest.raises(ValueError, match='h2'):
        make_record(h2=float('nan'))


def test_labels_must_agree():
    with pytest.raises(ValueError):
        LabeledRecord(make_record(), Level1Label.FAULTY)
    with pytest.raises(ValueError):
        LabeledRecord(make_record(), Level1Label.NORMAL, Level2Label.THERMAL)


def test_normalize_maps_fit_set_into_unit_box():
    records = [make_record(1.0), make_record(3.0), make_record(2.0)]
    params = fit_normalizer(records)
    assert_allclose(normalize(records[0], params), np.zeros(10))
    assert_allclose(normalize(records[1], params), np.ones(10))
    assert_allclose(normalize(records[2], params), np.full(10, 0.5))


def test_normalize_clamps_out_of_envelope_values():
    params = fit_normalizer([make_record(1.0), make_record(3.0)])
    high = normalize(make_record(10.0), params)
    low = normalize(make_record(0.0), params)
    assert np.all(high == 1.0)
    assert np.all(low == 0.0)


def test_degenerate_feature_maps_to_half():
    records = [make_record(1.0, ch4=5.0), make_record(2.0, ch4=5.0)]
    params = fit_normalizer(records)
    assert params.degenerate[0]
    assert normalize(make_record(1.5, ch4=99.0), params)[0] == 0.5


def test_empty_fitting_set():
    with pytest.raises(ValueError, match='empty'):
        fit_normalizer([])


def test_variant_mismatch_rejected():
    params = fit_normalizer([make_record(1.0), make_record(2.0)], TdcgVariant.WITHOUT_CO)
    with pytest.raises(ValueError):
        normalize(make_record(1.5), params, variant=TdcgVariant.STANDARD)


def test_denormalize_inverts_inside_envelope():
    params = fit_normalizer([make_record(1.0), make_record(5.0)])
    raw = record_features(make_record(2.5))
    assert_allclose(denormalize(normalize(make_record(2.5), params), params), raw)


def test_params_dict_round_trip():
    params = fit_normalizer([make_record(1.0), make_record(4.0, o2=7.0)], TdcgVariant.WITHOUT_CO)
    restored = NormalizationParams.from_dict(params.to_dict())
    assert restored == params


def test_to_arrays_encodes_labels():
    samples = [
        LabeledRecord(make_record(1.0), Level1Label.NORMAL),
        LabeledRecord(make_record(2.0), Level1Label.FAULTY, Level2Label.UNKNOWN_SOURCE),
    ]
    params = fit_normalizer([s.record for s in samples])
    X, y1, y2 = to_arrays(samples, params)
    assert X.shape == (2, 10)
    assert y1.tolist() == [0, 1]
    assert y2.tolist() == [-1, 2]


def test_tdcg_variant_alias():
    assert TdcgVariant('PaperLiteral') is TdcgVariant.WITHOUT_CO
    assert TdcgVariant('WithoutCO') is TdcgVariant.WITHOUT_CO
    with pytest.raises(ValueError):
        TdcgVariant('NoSuchVariant')
