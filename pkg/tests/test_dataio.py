"""Loader tests: schema mapping, drop accounting, survey modes, round trips."""

import numpy as np
import pytest

from crrkit.dataio import (
    DEFAULT_SCHEMA,
    SchemaConfig,
    SurveySchema,
    derive_survey_distribution,
    load_administrative,
    load_census,
    load_survey,
    read_model_file,
    write_administrative,
    write_encounters,
    write_model_file,
)
from crrkit.errors import (
    EmptySubsetError,
    InvalidModelError,
    MissingColumnError,
    NegativeCountError,
    UnparseableRowError,
)
from crrkit.estimate import naive_risk_ratio
from crrkit.simulate import sample_encounters, to_administrative
from crrkit.verify import TOY_MODEL

CITY_SCHEMA = SchemaConfig(
    race_column="race",
    race_map={"BLACK": 1, "WHITE": 0},
    force_column="force",
    stratum_columns=("precinct",),
)


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


class TestAdministrativeLoader:
    def test_race_mapping_and_drop_count(self, tmp_path):
        path = write(
            tmp_path,
            "admin.csv",
            "race,force,precinct\n"
            "BLACK,1,7\n"
            "WHITE,0,7\n"
            "OTHER,1,7\n"
            "BLACK,0,9\n",
        )
        data, report = load_administrative(path, CITY_SCHEMA)
        assert data.n == 3
        assert report.n_physical == 4
        assert report.n_dropped == 1
        assert report.n_unparseable == 0
        assert list(data.d) == [1, 0, 1]
        assert list(data.x) == ["7", "7", "9"]

    def test_empty_file_with_header(self, tmp_path):
        path = write(tmp_path, "admin.csv", "race,force,precinct\n")
        data, report = load_administrative(path, CITY_SCHEMA)
        assert data.n == 0
        assert report.n_physical == 0

    def test_missing_column(self, tmp_path):
        path = write(tmp_path, "admin.csv", "race,precinct\nBLACK,7\n")
        with pytest.raises(MissingColumnError):
            load_administrative(path, CITY_SCHEMA)

    def test_headerless_empty_file(self, tmp_path):
        with pytest.raises(MissingColumnError):
            load_administrative(write(tmp_path, "e.csv", ""), CITY_SCHEMA)

    def test_unparseable_row_carries_line_number(self, tmp_path):
        path = write(
            tmp_path,
            "admin.csv",
            "race,force,precinct\nBLACK,1,7\nWHITE,maybe,7\n",
        )
        with pytest.raises(UnparseableRowError) as excinfo:
            load_administrative(path, CITY_SCHEMA)
        assert excinfo.value.line == 3

    def test_row_count_conservation_with_skip(self, tmp_path):
        path = write(
            tmp_path,
            "admin.csv",
            "race,force,precinct\n"
            "BLACK,1,7\n"
            "WHITE,maybe,7\n"
            "OTHER,1,7\n"
            "BLACK,7\n"
            "WHITE,0,9\n",
        )
        data, report = load_administrative(path, CITY_SCHEMA, skip_unparseable=True)
        assert report.n_physical == 5
        assert report.n_loaded + report.n_dropped + report.n_unparseable == 5
        assert report.n_loaded == data.n == 2
        assert report.n_unparseable == 2

    def test_pooled_key_without_stratum_columns(self, tmp_path):
        schema = SchemaConfig(
            race_column="race",
            race_map={"B": 1, "W": 0},
            force_column="force",
            stratum_columns=(),
        )
        path = write(tmp_path, "admin.csv", "race,force\nB,1\nW,0\n")
        data, _ = load_administrative(path, schema)
        assert list(data.x) == ["all", "all"]

    def test_composite_stratum_key(self, tmp_path):
        schema = SchemaConfig(
            race_column="race",
            race_map={"B": 1, "W": 0},
            force_column="force",
            stratum_columns=("age", "gender"),
        )
        path = write(tmp_path, "admin.csv", "race,force,age,gender\nB,1,18-24,m\n")
        data, _ = load_administrative(path, schema)
        assert list(data.x) == ["18-24|m"]

    def test_loader_determinism(self, tmp_path):
        path = write(
            tmp_path, "admin.csv", "race,force,precinct\nBLACK,1,7\nWHITE,0,9\n"
        )
        a, _ = load_administrative(path, CITY_SCHEMA)
        b, _ = load_administrative(path, CITY_SCHEMA)
        assert np.array_equal(a.d, b.d)
        assert np.array_equal(a.y, b.y)
        assert list(a.x) == list(b.x)

    def test_race_map_is_mandatory(self):
        with pytest.raises(ValueError):
            SchemaConfig(race_map={})
        with pytest.raises(ValueError):
            SchemaConfig(race_map={"B": 2})


class TestCensusLoader:
    def test_shares(self, tmp_path):
        path = write(
            tmp_path,
            "census.csv",
            "stratum,count_d1,count_d0\np7,80,20\np9,0,0\n",
        )
        external, report = load_census(path)
        assert external.p1_for("p7") == 0.8
        assert external.p1_for("p9") is None
        assert report.n_loaded == 2

    def test_duplicate_strata_accumulate(self, tmp_path):
        path = write(
            tmp_path,
            "census.csv",
            "stratum,count_d1,count_d0\np7,30,20\np7,50,0\n",
        )
        external, _ = load_census(path)
        assert external.p1_for("p7") == 0.8

    def test_negative_count(self, tmp_path):
        path = write(tmp_path, "census.csv", "stratum,count_d1,count_d0\np7,-1,5\n")
        with pytest.raises(NegativeCountError):
            load_census(path)

    def test_missing_column(self, tmp_path):
        path = write(tmp_path, "census.csv", "stratum,count_d1\np7,5\n")
        with pytest.raises(MissingColumnError):
            load_census(path)

    def test_non_numeric_count(self, tmp_path):
        path = write(tmp_path, "census.csv", "stratum,count_d1,count_d0\np7,x,5\n")
        with pytest.raises(UnparseableRowError):
            load_census(path)

    def test_feeds_stratified_estimation(self, tmp_path):
        from crrkit.estimate import AdministrativeDataset, stratified_estimates

        path = write(
            tmp_path,
            "census.csv",
            "stratum,count_d1,count_d0\na,50,50\nb,30,70\n",
        )
        external, _ = load_census(path)
        rows = [(1, 1, "a"), (1, 0, "a"), (0, 1, "a"), (0, 0, "a")] * 5
        rows += [(1, 1, "b"), (1, 0, "b"), (0, 1, "b"), (0, 0, "b")] * 5
        results = stratified_estimates(
            AdministrativeDataset.from_rows(rows), external, replicates=50, seed=2
        )
        assert all(r.adjusted is not None for r in results)


SURVEY_HEADER = "race,stop_public,stop_vehicle,stop_other,contacts,large_metro\n"


def survey_from(tmp_path, body, schema=None):
    schema = schema or SchemaConfig(
        race_column="d",
        race_map={"1": 1, "0": 0},
        survey=SurveySchema(race_column="race", race_map={"B": 1, "W": 0}),
    )
    path = write(tmp_path, "survey.csv", SURVEY_HEADER + body)
    table, report = load_survey(path, schema)
    return table, report


class TestSurveyLoader:
    def test_weighted_share_example(self, tmp_path):
        # races (1, 0) with contact weights (3, 1): weighted share 0.75
        table, _ = survey_from(tmp_path, "B,0,0,0,3,1\nW,1,0,0,1,1\n")
        external = derive_survey_distribution(table, "weighted")
        assert external.p1_for(None) == pytest.approx(0.75)

    def test_contact_outliers_excluded(self, tmp_path):
        table, _ = survey_from(tmp_path, "B,0,0,0,31,1\nW,0,0,0,2,1\nB,0,0,0,30,1\n")
        external = derive_survey_distribution(table, "weighted")
        # the 31-contact respondent is gone; share = 30 / 32
        assert external.p1_for(None) == pytest.approx(30 / 32)

    def test_mv_stop_subset(self, tmp_path):
        table, _ = survey_from(tmp_path, "B,0,1,0,2,1\nW,1,0,1,2,1\nB,0,0,0,2,1\n")
        external = derive_survey_distribution(table, "mv-stop")
        assert external.p1_for(None) == 1.0

    def test_mv_stop_empty_subset(self, tmp_path):
        table, _ = survey_from(tmp_path, "B,1,0,0,2,1\nW,0,0,1,2,1\n")
        with pytest.raises(EmptySubsetError):
            derive_survey_distribution(table, "mv-stop")

    def test_stop_in_public_is_a_disjunction(self, tmp_path):
        table, _ = survey_from(
            tmp_path,
            "B,1,0,0,2,1\n"  # public stop
            "W,0,0,1,2,1\n"  # other stop
            "W,0,1,0,2,1\n",  # vehicle only: excluded from this measure
        )
        external = derive_survey_distribution(table, "stop-in-public")
        assert external.p1_for(None) == pytest.approx(0.5)

    def test_missing_item_excludes_respondent(self, tmp_path):
        table, _ = survey_from(tmp_path, "B,,0,1,2,1\nW,1,0,0,2,1\n")
        # first respondent's public-stop item is missing; the mode reads it
        external = derive_survey_distribution(table, "stop-in-public")
        assert external.p1_for(None) == 0.0
        # modes that do not read it keep the respondent
        assert derive_survey_distribution(table, "all").p1_for(None) == 0.5

    def test_large_metro_modes(self, tmp_path):
        table, _ = survey_from(
            tmp_path, "B,0,0,0,4,1\nW,0,0,0,2,0\nW,0,0,0,2,1\nB,0,0,0,40,1\n"
        )
        # contact counts only matter in weighted modes, so the 40-contact
        # respondent stays in the plain large-metro subset
        metro = derive_survey_distribution(table, "large-metro")
        assert metro.p1_for(None) == pytest.approx(2 / 3)
        weighted = derive_survey_distribution(table, "weighted-large-metro")
        assert weighted.p1_for(None) == pytest.approx(4 / 6)

    def test_zero_total_weight(self, tmp_path):
        table, _ = survey_from(tmp_path, "B,0,0,0,0,1\nW,0,0,0,0,1\n")
        with pytest.raises(EmptySubsetError):
            derive_survey_distribution(table, "weighted")

    def test_unknown_mode(self, tmp_path):
        table, _ = survey_from(tmp_path, "B,0,0,0,1,1\n")
        with pytest.raises(ValueError):
            derive_survey_distribution(table, "everything")

    def test_race_only_file_supports_all_mode(self, tmp_path):
        schema = SchemaConfig(
            race_column="d",
            race_map={"1": 1, "0": 0},
            survey=SurveySchema(race_column="race", race_map={"B": 1, "W": 0}),
        )
        path = write(tmp_path, "survey.csv", "race\nB\nW\nW\n")
        table, report = load_survey(path, schema)
        assert report.n_loaded == 3
        external = derive_survey_distribution(table, "all")
        assert external.p1_for(None) == pytest.approx(1 / 3)
        # item-reading modes then have nothing usable
        with pytest.raises(EmptySubsetError):
            derive_survey_distribution(table, "mv-stop")

    def test_unmapped_race_dropped_with_count(self, tmp_path):
        table, report = survey_from(tmp_path, "B,0,0,0,1,1\nX,0,0,0,1,1\n")
        assert report.n_dropped == 1
        assert table.n == 1

    def test_survey_strata(self, tmp_path):
        schema = SchemaConfig(
            race_column="d",
            race_map={"1": 1, "0": 0},
            survey=SurveySchema(
                race_column="race",
                race_map={"B": 1, "W": 0},
                stratum_columns=("age",),
            ),
        )
        path = write(
            tmp_path,
            "survey.csv",
            "race,age,contacts\nB,young,2\nW,young,2\nW,old,2\n",
        )
        table, _ = load_survey(path, schema)
        external = derive_survey_distribution(table, "all")
        assert external.p1_for("young") == 0.5
        assert external.p1_for("old") == 0.0


class TestRoundTrips:
    def test_administrative_round_trip_preserves_estimates(self, tmp_path):
        table = sample_encounters(TOY_MODEL, 30_000, seed=103)
        admin = to_administrative(table)
        path = tmp_path / "admin.csv"
        write_administrative(admin, path)
        loaded, report = load_administrative(path)  # default schema: d,y,x
        assert report.n_loaded == admin.n
        assert np.array_equal(loaded.d, admin.d)
        assert np.array_equal(loaded.y, admin.y)
        assert naive_risk_ratio(loaded) == naive_risk_ratio(admin)

    def test_encounter_export_schema(self, tmp_path):
        table = sample_encounters(TOY_MODEL, 50, seed=2)
        path = tmp_path / "enc.csv"
        write_encounters(table, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "d,s,m0,m1,y01,y11,m,y,x"
        assert len(lines) == 51
        first = lines[1].split(",")
        assert first[1] in ("al", "mi", "ma", "ne")
        assert first[8] == "all"

    def test_model_file_round_trip(self, tmp_path):
        path = tmp_path / "model.json"
        write_model_file(TOY_MODEL, path)
        assert read_model_file(path) == TOY_MODEL

    def test_model_file_rejects_garbage(self, tmp_path):
        path = write(tmp_path, "model.json", "{\"p_d\": 2.0}")
        with pytest.raises(InvalidModelError):
            read_model_file(path)

    def test_default_schema_matches_simulator_export(self):
        assert DEFAULT_SCHEMA.race_column == "d"
        assert DEFAULT_SCHEMA.force_column == "y"
        assert DEFAULT_SCHEMA.stratum_columns == ("x",)
