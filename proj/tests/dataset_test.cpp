#include "lassolens/dataset.hpp"
#include "lassolens/error.hpp"
#include "lassolens/util.hpp"
#include "support/oracles.hpp"

#include <doctest.h>

using namespace lassolens;
using lassolens::testing::data_path;
using lassolens::testing::make_dataset;

namespace {
ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return ErrorCode::io;
}
}  // namespace

TEST_CASE("column kind inference") {
    std::vector<std::string> letters = {"a", "b", "a"};
    CHECK(infer_column_kind(letters) == ColumnKind::categorical);

    std::vector<std::string> floats;
    for (int i = 0; i < 30; ++i) floats.push_back(std::to_string(1.5 + 0.9 * i));
    CHECK(infer_column_kind(floats) == ColumnKind::numerical);

    std::vector<std::string> binary = {"0", "1", "0", "1", "1", "0"};
    CHECK(infer_column_kind(binary) == ColumnKind::categorical);

    // small integer codes stay categorical, a wide integer range does not
    std::vector<std::string> codes = {"1", "2", "3", "2", "1"};
    CHECK(infer_column_kind(codes) == ColumnKind::categorical);
    std::vector<std::string> ages;
    for (int i = 18; i < 60; ++i) ages.push_back(std::to_string(i));
    CHECK(infer_column_kind(ages) == ColumnKind::numerical);

    SUBCASE("missing tokens are ignored") {
        std::vector<std::string> with_na = floats;
        with_na.push_back("NA");
        with_na.push_back("");
        CHECK(infer_column_kind(with_na) == ColumnKind::numerical);
    }
}

TEST_CASE("csv parsing handles quotes and blank lines") {
    const auto rows = parse_csv("a,b\n\"x, y\",\"he said \"\"hi\"\"\"\n\n1,2\n");
    REQUIRE(rows.size() == 3);
    CHECK(rows[1][0] == "x, y");
    CHECK(rows[1][1] == "he said \"hi\"");
    CHECK(rows[2][1] == "2");
}

TEST_CASE("structural errors") {
    CHECK(code_of([] { make_dataset("a,b\n"); }) == ErrorCode::empty_dataset);
    CHECK(code_of([] { make_dataset(""); }) == ErrorCode::empty_dataset);

    try {
        make_dataset("a,b\n1,2\n3\n4,5\n");
        FAIL("ragged row accepted");
    } catch (const RaggedRowError& e) {
        CHECK(e.row_index() == 1);
        CHECK(e.code() == ErrorCode::structural);
    }

    CHECK(code_of([] { make_dataset("a,b\n1,2\n", "zzz: not a column\n"); }) == ErrorCode::context_mismatch);
    CHECK(code_of([] { make_dataset("a,b\n1,2\n", "_label: zzz\n"); }) == ErrorCode::context_mismatch);
}

TEST_CASE("context overrides and label") {
    const auto d = make_dataset("grade,score\n1,10.5\n2,11.5\n3,12\n",
                                "_domain: exam results\n_label: grade\n_kind.grade: numerical\nscore: points scored\n");
    CHECK(d.column("grade").kind == ColumnKind::numerical);
    CHECK(d.is_label("grade"));
    REQUIRE(d.features().size() == 1);
    CHECK(d.features()[0]->name == "score");
    CHECK(d.context().domain_description == "exam results");
}

TEST_CASE("missing cells") {
    const auto d = make_dataset("x,c\n1.5,a\nNA,\n2.5,b\n3.5,a\n4.5,b\n5.5,a\n6.5,b\n7.5,a\n8.5,b\n9.5,a\n10.5,b\n11.5,a\n");
    const auto& x = d.column("x");
    CHECK(x.kind == ColumnKind::numerical);
    CHECK(x.is_missing(1));
    CHECK(x.missing_count() == 1);
    CHECK(d.column("c").missing_count() == 1);
    CHECK(d.column("c").categories == std::vector<std::string>{"a", "b"});
}

TEST_CASE("content id and canonical round trip") {
    const auto a = make_dataset("x,c\n1,a\n2,b\n", "c: a letter\n", "one");
    const auto b = make_dataset("x,c\n1,a\n2,b\n", "c: a letter\n", "two");
    const auto c = make_dataset("x,c\n1,a\n2,c\n", "c: a letter\n", "one");
    CHECK(a.id() == b.id());
    CHECK(a.id() != c.id());
    CHECK(a.id().size() == 16);

    const auto back = deserialize_canonical(serialize_canonical(a));
    CHECK(back == a);
    CHECK(back.id() == a.id());
}

TEST_CASE("penguins fixture") {
    const auto d = load_dataset(data_path("penguins.csv"), data_path("penguins.context"));
    CHECK(d.name() == "penguins");
    CHECK(d.row_count() == 333);
    CHECK(d.columns().size() == 7);
    CHECK(d.features().size() == 6);
    CHECK(d.is_label("species"));
    CHECK(d.column("island").kind == ColumnKind::categorical);
    CHECK(d.column("sex").kind == ColumnKind::categorical);
    for (const char* n : {"culmen_length_mm", "culmen_depth_mm", "flipper_length_mm", "body_mass_g"}) {
        CHECK(d.column(n).kind == ColumnKind::numerical);
    }
    CHECK(d.column("species").categories == std::vector<std::string>{"Adelie", "Chinstrap", "Gentoo"});
}

TEST_CASE("bank context matches the Kaggle bank header") {
    const std::string csv =
        "\"age\",\"job\",\"marital\",\"education\",\"default\",\"balance\",\"housing\",\"loan\",\"contact\",\"day\","
        "\"month\",\"duration\",\"campaign\",\"pdays\",\"previous\",\"poutcome\",\"deposit\"\n"
        "59,admin.,married,secondary,no,2343,yes,no,unknown,5,may,1042,1,-1,0,unknown,yes\n"
        "56,admin.,married,secondary,no,45,no,no,unknown,5,may,1467,1,-1,0,unknown,yes\n"
        "41,technician,married,secondary,no,1270,yes,no,unknown,5,may,1389,1,-1,0,unknown,no\n";
    const auto d = lassolens::parse_dataset(csv, lassolens::read_file(lassolens::testing::data_path("bank.context")), "bank");
    CHECK(d.is_label("deposit"));
    CHECK(d.features().size() == 16);
    CHECK(d.column("pdays").kind == lassolens::ColumnKind::numerical);
    CHECK(d.column("housing").kind == lassolens::ColumnKind::categorical);
}
