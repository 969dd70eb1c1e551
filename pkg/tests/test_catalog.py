import hashlib
import json
from importlib import resources

from bmameta import PriorSpec, catalog

# Frozen digest of the canonicalized embedded data; verified against the
# published subfield table at embedding time.
GOLDEN_SHA256 = "b48ab01cd1d5c7972dbfcf91fb28d24ef2459bacd457718d581badb89b4a5671"


def test_entry_counts():
    assert len(catalog.entries()) == 46
    assert catalog.pooled_entry().topic == "Pooled estimate"


def test_golden_checksum():
    raw = resources.files("bmameta").joinpath("subfield_priors.json").read_text()
    canon = json.dumps(json.loads(raw), sort_keys=True, separators=(",", ":"))
    assert hashlib.sha256(canon.encode()).hexdigest() == GOLDEN_SHA256


def test_oral_health():
    hit = catalog.lookup("Oral Health")
    assert hit.matched
    assert hit.entry.delta_prior == PriorSpec.t(0.0, 0.51, 5.0)
    assert hit.entry.tau_prior == PriorSpec.invgamma(1.79, 0.28)
    assert hit.entry.comparisons == 10
    assert hit.entry.studies == 236


def test_hepato_biliary():
    hit = catalog.lookup("Hepato-Biliary")
    assert hit.matched
    assert hit.entry.delta_prior == PriorSpec.t(0.0, 0.60, 4.0)
    assert hit.entry.tau_prior == PriorSpec.invgamma(1.56, 0.58)


def test_unknown_topic_falls_back_to_pooled():
    hit = catalog.lookup("No Such Field")
    assert not hit.matched
    assert hit.entry.delta_prior == PriorSpec.t(0.0, 0.43, 5.0)
    assert hit.entry.tau_prior == PriorSpec.invgamma(1.71, 0.40)


def test_excluded_subfield_falls_back():
    hit = catalog.lookup("Multiple Sclerosis and Rare Diseases of the CNS")
    assert not hit.matched
    assert hit.entry.topic == "Pooled estimate"


def test_lookup_case_insensitive():
    assert catalog.lookup("oral health").matched
    assert catalog.lookup("  ORAL HEALTH ").matched


def test_every_entry_shape():
    for entry in catalog.entries() + (catalog.pooled_entry(),):
        assert entry.delta_prior.family == "t"
        assert entry.delta_prior.params[0] == 0.0
        assert entry.delta_prior.params[1] > 0
        assert entry.delta_prior.params[2] > 0
        assert entry.tau_prior.family == "invgamma"
        assert entry.comparisons >= 1
        assert entry.studies >= entry.comparisons


def test_roundtrip_serialization():
    for entry in catalog.entries():
        again = catalog._entry_from_dict(json.loads(json.dumps(entry.to_dict())))
        assert again == entry


def test_topics_are_unique():
    names = catalog.topics()
    assert len(set(n.casefold() for n in names)) == len(names)
