import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fairsynth.errors import CardinalityError, EmptyInputError, IngestError, SchemaError
from fairsynth.tabular import (
    CellCounts, Dataset, Encoder, Schema, cell_counts, load_csv, read_csv, split, split_indices,
)

from conftest import make_cells


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def simple_schema(**kw):
    cols = kw.pop("columns", (("a", "numeric"), ("c", "categorical"), ("lab", "categorical"), ("grp", "categorical")))
    return Schema(cols, "lab", kw.pop("fav", "y"), "grp", kw.pop("priv", "p"), **kw)


def test_tiny6_rows_match_declared_labels_and_groups(tiny6):
    ds = load_csv(*tiny6)
    # recid column: no,yes,yes,no,yes,no -> favorable "no"
    assert ds.n == 6
    assert ds.y.tolist() == [1, 0, 0, 1, 0, 1]
    # race: cauc,other,cauc,other,other,cauc
    assert ds.g.tolist() == [1, 0, 1, 0, 0, 1]
    assert ds.feature_names == ("age", "priors", "sex=m", "sex=f")
    # age min 19 max 61
    assert ds.X[:, 0].tolist() == pytest.approx([(a - 19) / 42 for a in (25, 40, 33, 52, 19, 61)])
    assert ds.X[:, 2:].tolist() == [[1, 0], [0, 1], [0, 1], [1, 0], [1, 0], [0, 1]]


def test_constant_column_scales_to_zero(tmp_path):
    p = write(tmp_path, "a,c,lab,grp\n3,x,y,p\n3,x,n,q\n3,x,y,q\n")
    ds = load_csv(p, simple_schema())
    assert ds.X[:, 0].tolist() == [0, 0, 0]


def test_one_hot_first_appearance_order(tmp_path):
    p = write(tmp_path, "a,c,lab,grp\n1,a,y,p\n2,b,n,q\n3,a,y,q\n")
    ds = load_csv(p, simple_schema())
    assert ds.X[:, 1:].tolist() == [[1, 0], [0, 1], [1, 0]]
    assert ds.blocks == ((1, 3),)


def test_extra_csv_columns_ignored_and_quoting(tmp_path):
    p = write(tmp_path, 'zz,a,c,lab,grp\n"q,1",1,"x y",y,p\nk,2,z,n,q\n')
    ds = load_csv(p, simple_schema())
    assert ds.feature_names == ("a", "c=x y", "c=z")


def test_missing_column_named(tmp_path):
    p = write(tmp_path, "a,lab,grp\n1,y,p\n")
    with pytest.raises(SchemaError, match="'c'"):
        load_csv(p, simple_schema())


def test_unparseable_numeric_reports_line(tmp_path):
    p = write(tmp_path, "a,c,lab,grp\n1,x,y,p\noops,x,n,q\n")
    with pytest.raises(IngestError, match="line 3") as exc:
        load_csv(p, simple_schema())
    assert exc.value.line == 3


def test_missing_value_is_an_error(tmp_path):
    p = write(tmp_path, "a,c,lab,grp\n1,,y,p\n2,x,n,q\n")
    with pytest.raises(IngestError, match="missing"):
        load_csv(p, simple_schema())


def test_three_label_values_is_cardinality_error(tmp_path):
    p = write(tmp_path, "a,c,lab,grp\n1,x,y,p\n2,x,n,q\n3,x,maybe,q\n")
    with pytest.raises(CardinalityError):
        load_csv(p, simple_schema())


def test_three_group_values_is_cardinality_error(tmp_path):
    p = write(tmp_path, "a,c,lab,grp\n1,x,y,p\n2,x,n,q\n3,x,n,r\n")
    with pytest.raises(CardinalityError):
        load_csv(p, simple_schema())


def test_favorable_value_absent(tmp_path):
    p = write(tmp_path, "a,c,lab,grp\n1,x,a,p\n2,x,b,q\n")
    with pytest.raises(CardinalityError, match="does not occur"):
        load_csv(p, simple_schema())


def test_empty_file(tmp_path):
    with pytest.raises(EmptyInputError):
        load_csv(write(tmp_path, ""), simple_schema())
    with pytest.raises(EmptyInputError):
        load_csv(write(tmp_path, "a,c,lab,grp\n", "h.csv"), simple_schema())


def test_schema_requires_label_and_protected_among_columns():
    with pytest.raises(SchemaError):
        Schema((("a", "numeric"),), "lab", "y", "grp", "p")


def test_schema_yaml_keeps_string_values(tmp_path):
    from fairsynth.tabular import load_schema
    p = write(tmp_path, "columns:\n  - {name: a, kind: numeric}\n  - {name: lab, kind: categorical}\n"
              "  - {name: g, kind: categorical}\nlabel_column: lab\nfavorable_value: no\n"
              "protected_column: g\nprivileged_value: 1\n", "s.yaml")
    s = load_schema(p)
    assert s.favorable_value == "no" and s.privileged_value == "1"


def test_encoder_train_only_scaling_and_unseen_category(tmp_path):
    p = write(tmp_path, "a,c,lab,grp\n0,x,y,p\n10,z,n,q\n20,x,y,q\n30,w,n,p\n")
    raw = read_csv(p, simple_schema())
    enc = Encoder.fit(raw.subset([0, 1, 2]))
    test = enc.transform(raw.subset([3]))
    # 30 is outside the fitted range [0, 20]: no clipping
    assert test.X[0, 0] == pytest.approx(1.5)
    # unseen category "w" -> all-zero block
    assert test.X[0, 1:].tolist() == [0, 0]
    assert test.d == enc.transform(raw.subset([0])).d


def test_inverse_transform_round_trip(tiny6):
    raw = read_csv(*tiny6)
    enc = Encoder.fit(raw)
    back = enc.inverse_transform(enc.transform(raw).X)
    feats = [n for n, _ in raw.schema.feature_columns]
    for row, orig in zip(back, raw.rows):
        expect = [orig[raw.schema.names.index(n)] for n in feats]
        assert row == expect


def test_protected_as_feature_appends_indicator(tiny6):
    path, schema = tiny6
    from dataclasses import replace
    ds = load_csv(path, replace(schema, protected_as_feature=True))
    assert ds.feature_names[-1] == "race"
    assert ds.X[:, -1].tolist() == ds.g.tolist()
    assert ds.situational_X.shape[1] == ds.d - 1


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset(np.zeros((2, 1)), [0, 2], [0, 1], None)
    with pytest.raises(ValueError):
        Dataset(np.array([[np.nan], [0]]), [0, 1], [0, 1], None)
    with pytest.raises(ValueError):
        Dataset(np.zeros((2, 1)), [0, 1], [0, 1], [1, -1])
    ds = Dataset(np.zeros((2, 1)), [0, 1], [0, 1], None)
    assert ds.w.tolist() == [1, 1]
    with pytest.raises(ValueError):
        ds.X[0, 0] = 1.0


# -- cell counts ---------------------------------------------------------------


def test_cell_counts_worked_example():
    ds = Dataset(np.zeros((4, 1)), [1, 1, 0, 0], [1, 1, 1, 0], None)
    c = cell_counts(ds)
    assert (c.PF, c.PU, c.UF, c.UU) == (2, 1, 0, 1)
    assert c.r_p == pytest.approx(2 / 3)
    assert c.r_u == 0


def test_cell_counts_degenerate_group():
    c = cell_counts(Dataset(np.zeros((3, 1)), [1, 1, 1], [1, 1, 1], None))
    assert (c.PF, c.PU, c.UF, c.UU) == (3, 0, 0, 0)
    assert c.r_p == 1 and c.r_u is None and c.gap is None


def test_equal_base_rates_give_zero_gap():
    c = CellCounts(2, 2, 3, 3)
    assert c.gap == 0


# -- split -----------------------------------------------------------------------


def test_split_deterministic():
    ds = make_cells(3, 2, 2, 3)
    a = split(ds, 0.3, seed=5)
    b = split(ds, 0.3, seed=5)
    assert np.array_equal(a[1].X, b[1].X) and np.array_equal(a[0].X, b[0].X)


def test_split_size_rounding():
    ds = make_cells(1, 1, 1, 1)
    train, test = split(ds, 0.25, seed=0)
    assert (train.n, test.n) == (3, 1)


def test_round_half_up():
    tr, te = split_indices([1] * 10, [1] * 5 + [0] * 5, 0.25, 0)
    assert len(te) == 3   # 2.5 rounds up


def test_two_member_cell_keeps_one_in_train():
    ds = make_cells(2, 2, 2, 2)
    for seed in range(20):
        train, _ = split(ds, 0.5, seed)
        assert all(v >= 1 for v in (cell_counts(train).PF, cell_counts(train).PU,
                                    cell_counts(train).UF, cell_counts(train).UU))


def test_split_empty_part_rejected():
    ds = make_cells(1, 1, 1, 1)
    with pytest.raises(ValueError):
        split(ds, 0.05, 0)
    with pytest.raises(ValueError):
        split(ds, 1.0, 0)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 12), min_size=4, max_size=4).filter(lambda c: sum(c) >= 4),
       st.floats(0.1, 0.6), st.integers(0, 1000))
def test_split_partition_properties(cells, frac, seed):
    ds = make_cells(*cells, d=1, seed=seed)
    n_test = int(np.floor(ds.n * frac + 0.5))
    sizes = np.array(cells)
    if n_test < 1 or n_test > ds.n - 1 or np.where(sizes >= 2, sizes - 1, sizes).sum() < n_test:
        with pytest.raises(ValueError):
            split_indices(ds.y, ds.g, frac, seed)
        return
    tr, te = split_indices(ds.y, ds.g, frac, seed)
    assert len(te) == n_test
    assert sorted(np.concatenate([tr, te]).tolist()) == list(range(ds.n))
    train, test = ds.subset(tr), ds.subset(te)
    total = cell_counts(train) + cell_counts(test)
    assert total == cell_counts(ds)
    for name, size in zip(("PF", "PU", "UF", "UU"), cells):
        if size >= 2:
            assert getattr(cell_counts(train), name) >= 1
