#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "psc/errors.hpp"
#include "psc/trec.hpp"

using namespace psc;

TEST_CASE("trec run round-trips with regenerated ranks") {
    TrecRun run;
    run.tag = "demo";
    run.queries["q1"] = {{"docB", 3.5}, {"docA", 2.0}, {"docC", 1.25}};
    run.queries["q2"] = {{"docZ", 9.0}};

    std::ostringstream out;
    write_trec_run(out, run);
    CHECK(out.str() ==
          "q1 Q0 docB 1 3.5 demo\n"
          "q1 Q0 docA 2 2 demo\n"
          "q1 Q0 docC 3 1.25 demo\n"
          "q2 Q0 docZ 1 9 demo\n");

    std::istringstream in(out.str());
    const TrecRun parsed = read_trec_run(in);
    CHECK(parsed.tag == "demo");
    REQUIRE(parsed.queries.size() == 2);
    CHECK(parsed.queries.at("q1").size() == 3);
    CHECK(parsed.queries.at("q1")[0].doc_id == "docB");
    CHECK(parsed.queries.at("q1")[2].score == 1.25);
}

TEST_CASE("emitted runs must have strictly decreasing scores") {
    TrecRun tied;
    tied.queries["q1"] = {{"a", 1.0}, {"b", 1.0}};
    std::ostringstream out;
    CHECK_THROWS_AS(write_trec_run(out, tied), ValidationError);
}

TEST_CASE("malformed run and qrels lines name the line") {
    std::istringstream five_fields("q1 Q0 doc 1 2.0\n");
    try {
        read_trec_run(five_fields);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line == 1);
    }
    std::istringstream bad_score("q1 Q0 doc 1 xyz tag\n");
    CHECK_THROWS_AS(read_trec_run(bad_score), ParseError);

    std::istringstream good_then_bad("q1 0 d1 2\nq1 0 d2\n");
    try {
        read_qrels(good_then_bad);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line == 2);
    }
}

TEST_CASE("qrels parse") {
    std::istringstream in("q1 0 d1 2\nq1 0 d2 0\nq2 0 d9 1\n");
    const Qrels qrels = read_qrels(in);
    CHECK(qrels.queries.at("q1").at("d1") == 2);
    CHECK(qrels.queries.at("q1").at("d2") == 0);
    CHECK(qrels.queries.at("q2").at("d9") == 1);
}

TEST_CASE("ndcg hand example: rels {d1:1, d2:0}, run (d2, d1)") {
    Qrels qrels;
    qrels.queries["q"] = {{"d1", 1}, {"d2", 0}};
    TrecRun run;
    run.queries["q"] = {{"d2", 2.0}, {"d1", 1.0}};
    const NdcgReport report = ndcg_at_k(run, qrels, 10);
    // DCG = 1/log2(3), IDCG = 1
    CHECK(report.per_query.at("q") == doctest::Approx(0.6309).epsilon(1e-4));
    CHECK(report.flagged.empty());
}

TEST_CASE("ideal-order runs score exactly 1") {
    Qrels qrels;
    qrels.queries["q"] = {{"d1", 3}, {"d2", 2}, {"d3", 0}};
    TrecRun run;
    run.queries["q"] = {{"d1", 3.0}, {"d2", 2.0}, {"d3", 1.0}};
    CHECK(ndcg_at_k(run, qrels, 10).per_query.at("q") == 1.0);
}

TEST_CASE("no overlap with relevant documents scores 0") {
    Qrels qrels;
    qrels.queries["q"] = {{"d1", 2}};
    TrecRun run;
    run.queries["q"] = {{"x1", 2.0}, {"x2", 1.0}};
    CHECK(ndcg_at_k(run, qrels, 10).per_query.at("q") == 0.0);
}

TEST_CASE("zero-relevant and missing queries contribute 0 and are flagged") {
    Qrels qrels;
    qrels.queries["all_zero"] = {{"d1", 0}};
    qrels.queries["absent"] = {{"d1", 1}};
    qrels.queries["scored"] = {{"d1", 1}};
    TrecRun run;
    run.queries["all_zero"] = {{"d1", 1.0}};
    run.queries["scored"] = {{"d1", 1.0}};
    const NdcgReport report = ndcg_at_k(run, qrels, 10);
    CHECK(report.per_query.at("all_zero") == 0.0);
    CHECK(report.per_query.at("absent") == 0.0);
    CHECK(report.per_query.at("scored") == 1.0);
    CHECK(report.mean == doctest::Approx(1.0 / 3.0));
    REQUIRE(report.flagged.size() == 2);
}

TEST_CASE("moving a relevant document above an irrelevant one never hurts") {
    Qrels qrels;
    qrels.queries["q"] = {{"rel", 2}, {"irr", 0}, {"other", 1}};
    TrecRun worse;
    worse.queries["q"] = {{"irr", 3.0}, {"rel", 2.0}, {"other", 1.0}};
    TrecRun better;
    better.queries["q"] = {{"rel", 3.0}, {"irr", 2.0}, {"other", 1.0}};
    const double w = ndcg_at_k(worse, qrels, 10).per_query.at("q");
    const double b = ndcg_at_k(better, qrels, 10).per_query.at("q");
    CHECK(b >= w);
    CHECK(b <= 1.0);
    CHECK(w >= 0.0);
}

TEST_CASE("ndcg respects the cutoff") {
    Qrels qrels;
    qrels.queries["q"] = {{"d1", 1}};
    TrecRun run;
    run.queries["q"] = {{"x1", 3.0}, {"x2", 2.0}, {"d1", 1.0}};
    CHECK(ndcg_at_k(run, qrels, 2).per_query.at("q") == 0.0);
    CHECK(ndcg_at_k(run, qrels, 3).per_query.at("q") > 0.0);
    CHECK_THROWS_AS(ndcg_at_k(run, qrels, 0), ValidationError);
}
