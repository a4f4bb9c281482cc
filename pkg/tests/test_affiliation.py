import numpy as np
import pytest

from simad.errors import UndefinedMetricError
from simad.metrics import EventSet, affiliation, events_from_labels


def dist(x, event):
    s, e = event
    return np.where(x < s, s - x, np.where(x >= e, x - (e - 1), 0))


def exact_zone_scores(pred, gt):
    """Direct counting over every zone point: O(n^2) but obviously right."""
    out = []
    for (a, b), ev in zip(gt.zones(), gt.events):
        zone = np.arange(a, b)
        inside = [x for x in np.flatnonzero(pred.to_labels()) if a <= x < b]
        if not inside:
            out.append((np.nan, 0.0))
            continue
        dz = dist(zone, ev)
        prec = np.mean([(dz >= dist(np.array(x), ev)).mean() for x in inside])
        rec = np.mean([(np.abs(zone - y) >= np.min(np.abs(np.array(inside) - y))).mean()
                       for y in range(*ev)])
        out.append((prec, rec))
    return out


def random_instance(rng, n_max=200, k_max=4):
    n = int(rng.integers(20, n_max + 1))
    while True:
        gt = (rng.random(n) < rng.uniform(0.02, 0.2)).astype(int)
        ev = events_from_labels(gt)
        if 1 <= len(ev) <= k_max:
            break
        if len(ev) > k_max:
            keep = ev[:k_max]
            gt = np.zeros(n, dtype=int)
            for s, e in keep:
                gt[s:e] = 1
            break
    pred = (rng.random(n) < rng.uniform(0.01, 0.3)).astype(int)
    return EventSet.from_labels(pred), EventSet.from_labels(gt)


def test_events_and_labels_roundtrip():
    y = np.array([1, 1, 0, 0, 1, 0, 1, 1, 1])
    es = EventSet.from_labels(y)
    assert es.events == ((0, 2), (4, 5), (6, 9))
    np.testing.assert_array_equal(es.to_labels(), y)
    with pytest.raises(ValueError):
        EventSet(((0, 3), (3, 5)), 10)     # touching events would be one event


def test_zones_partition_with_ties_to_earlier_event():
    es = EventSet(((2, 4), (8, 9)), 12)
    # gap points 4..7: distances to events are (1,4), (2,3), (3,2), (4,1)
    assert es.zones() == [(0, 6), (6, 12)]
    es = EventSet(((2, 4), (7, 9)), 12)
    # gap points 4,5,6: point 5 is 2 from both and joins the earlier event
    assert es.zones() == [(0, 6), (6, 12)]
    rng = np.random.default_rng(0)
    for _ in range(100):
        _, gt = random_instance(rng)
        zones = gt.zones()
        assert zones[0][0] == 0 and zones[-1][1] == gt.n
        assert all(z1[1] == z2[0] for z1, z2 in zip(zones, zones[1:]))
        assert all(a <= s and e <= b for (a, b), (s, e) in zip(zones, gt.events))


def test_closed_form_matches_exact_counting():
    rng = np.random.default_rng(1)
    for _ in range(200):
        pred, gt = random_instance(rng)
        got = affiliation(pred, gt)
        for (p, r), zp, zr in zip(exact_zone_scores(pred, gt), got.zone_precision, got.zone_recall):
            assert (np.isnan(p) and np.isnan(zp)) or zp == pytest.approx(p, abs=1e-12)
            assert zr == pytest.approx(r, abs=1e-12)


def test_perfect_prediction():
    y = np.zeros(100, dtype=int)
    y[40:60] = 1
    assert tuple(affiliation(y, y)) == (1.0, 1.0, 1.0)


def test_empty_prediction_and_empty_truth():
    y = np.zeros(100, dtype=int)
    y[40:60] = 1
    s = affiliation(np.zeros(100, dtype=int), y)
    assert s.empty_prediction and s.precision == 0.0 and s.recall == 0.0
    with pytest.raises(UndefinedMetricError):
        affiliation(y, np.zeros(100, dtype=int))


def test_far_prediction_scores_low():
    y = np.zeros(200, dtype=int)
    y[0:10] = 1
    pred = np.zeros(200, dtype=int)
    pred[-1] = 1
    s = affiliation(pred, y)
    assert s.precision == pytest.approx(1 / 200)
    assert s.recall < 0.1


def test_zone_without_prediction_skipped_in_precision():
    y = np.zeros(100, dtype=int)
    y[10:15] = 1
    y[70:75] = 1
    pred = np.zeros(100, dtype=int)
    pred[10:15] = 1
    s = affiliation(pred, y)
    assert s.precision == 1.0
    assert s.zone_recall == [1.0, 0.0] and s.recall == 0.5
    assert np.isnan(s.zone_precision[1])
