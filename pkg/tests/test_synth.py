import math
from datetime import date

import numpy as np
import pytest

from tfaml import ingest, spectral, synth, tffeatures
from tfaml.synth import SynthConfig


def cohens_d(a, b):
    a, b = np.asarray(a), np.asarray(b)
    pooled = ((len(a) - 1) * a.var(ddof=1) + (len(b) - 1) * b.var(ddof=1)) / (len(a) + len(b) - 2)
    return (b.mean() - a.mean()) / math.sqrt(pooled)


def test_config_validation():
    with pytest.raises(ValueError):
        SynthConfig(positive_fraction=1.0)
    with pytest.raises(ValueError):
        SynthConfig(mix=(0.5, 0.5, 0.5))
    assert SynthConfig().n_positive == 1945


def test_normal_customer_salary_schedule():
    series, crm = synth.gen_normal(synth.customer_rng(0, 0))
    assert len(series) == 180
    # salary is the only inflow for a salaried customer; spending only flows out
    assert np.count_nonzero(series.values > 0) == 6
    start = series.start_date.toordinal()
    days = [date.fromordinal(start + int(d)) for d in np.flatnonzero(series.values > 0)]
    assert [d.day for d in days] == [15] * 6
    assert [d.month for d in days] == [1, 2, 3, 4, 5, 6]
    assert crm.age >= 18


def test_generators_deterministic():
    a, _ = synth.gen_suspicious(synth.customer_rng(5, 1), "smurfing")
    b, _ = synth.gen_suspicious(synth.customer_rng(5, 1), "smurfing")
    assert np.array_equal(a.values, b.values)
    with pytest.raises(ValueError):
        synth.gen_suspicious(synth.customer_rng(0, 0), "ponzi")


@pytest.mark.parametrize("archetype", synth.ARCHETYPES)
def test_archetypes_have_both_flows(archetype):
    s, crm = synth.gen_suspicious(synth.customer_rng(1, 3), archetype)
    assert s.incoming_total > 0 and s.outgoing_total > 0


def test_behaviour_change_after_changepoint():
    s, _ = synth.gen_suspicious(synth.customer_rng(8, 0), "behaviour_change")
    early = np.count_nonzero(s.values[:60] > 0)
    late = np.count_nonzero(s.values[120:] > 0)
    assert late > 5 * max(early, 1)


def test_exact_class_counts():
    cfg = SynthConfig(n_customers=997, positive_fraction=0.3, seed=4)
    customers = synth.generate(cfg)
    assert sum(c.label for c in customers) == round(997 * 0.3)
    kinds = {c.kind for c in customers if c.label == 1}
    assert kinds == {"hidden", *synth.ARCHETYPES}


def test_files_parse_cleanly_and_are_deterministic(tmp_path):
    cfg = SynthConfig(n_customers=60, seed=2)
    a = synth.gen_dataset(cfg, tmp_path / "a")
    b = synth.gen_dataset(cfg, tmp_path / "b")
    for key in a:
        assert a[key].read_bytes() == b[key].read_bytes()
    stats = ingest.ParseStats()
    records = ingest.parse_transactions(a["transactions"], cfg.horizon, stats)
    assert stats.dropped_out_of_horizon == 0 and len(records) == stats.rows
    n_lines = len(a["transactions"].read_text().splitlines()) - 1
    assert len(records) == n_lines
    assert len(ingest.parse_crm(a["crm"])) == 60
    labels = ingest.parse_labels(a["labels"])
    assert sum(labels.values()) == cfg.n_positive
    c = synth.gen_dataset(SynthConfig(n_customers=60, seed=3), tmp_path / "c")
    assert c["transactions"].read_bytes() != a["transactions"].read_bytes()


def test_parallel_equals_sequential():
    # each customer depends only on (seed, index)
    cfg = SynthConfig(n_customers=30, seed=9)
    full = synth.generate(cfg)
    kinds = synth._assign_kinds(cfg)
    checked = 0
    for i in reversed(range(cfg.n_customers)):
        label, kind = kinds[i]
        rng = synth.customer_rng(cfg.seed, i)
        if kind in ("salaried", "irregular"):
            records = synth._draw_normal(rng, full[i].customer_id, cfg.horizon, kind)
        elif kind in synth.ARCHETYPES:
            records = synth._draw_suspicious(rng, full[i].customer_id, cfg.horizon, kind)
        else:
            continue
        assert records == full[i].records
        assert synth._gen_crm(rng, full[i].customer_id, label) == full[i].crm
        checked += 1
    assert checked > 20


def test_spectral_separability_premise():
    n = 120
    normal = [
        tffeatures.extract_all(spectral.stft(synth.gen_normal(synth.customer_rng(11, i))[0].values))
        for i in range(n)
    ]
    suspicious = [
        tffeatures.extract_all(
            spectral.stft(
                synth.gen_suspicious(synth.customer_rng(12, i), synth.ARCHETYPES[i % 3])[0].values
            )
        )
        for i in range(n)
    ]
    d_kurt = cohens_d([f.kurtosis for f in normal], [f.kurtosis for f in suspicious])
    d_tdisc = cohens_d([f.tdisc for f in normal], [f.tdisc for f in suspicious])
    assert abs(d_kurt) >= 0.5
    # normal customers are smoother in time
    assert d_tdisc >= 0.5


def test_crm_shift_is_informative():
    customers = synth.generate(SynthConfig(n_customers=800, seed=1))
    age = {k: np.mean([c.crm.age for c in customers if c.label == k]) for k in (0, 1)}
    assert age[1] < age[0]
