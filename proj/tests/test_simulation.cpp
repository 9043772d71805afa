#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "suite/errors.hpp"
#include "suite/simulation.hpp"

using namespace suite;
using namespace suite::sim;
using namespace suite::testing;

namespace {

// Small enough for many replicates: 2% margin, 2,500 ballots.
ContestSpec small_contest() { return two_strata(2000, 1020, 980, 500, 255, 245, 0.1); }

SimulationScenario scenario(const ContestSpec& c, PopulationKind kind, SamplePlan plan,
                            std::int64_t reps, std::uint64_t seed) {
    SimulationScenario sc;
    sc.contest = c;
    sc.population = build_population(c, {kind, {}, std::nullopt});
    sc.plan = plan;
    sc.replicates = reps;
    sc.seed = seed;
    return sc;
}

}  // namespace

TEST_SUITE("population") {
    TEST_CASE("reported correct has no overstatement") {
        const auto c = example_one();
        const auto pop = build_population(c, {});
        for (std::size_t s = 0; s < c.strata.size(); ++s) CHECK(overstatement(c, pop, s) == 0);
        CHECK(pop.cvr_rates == DiscrepancyRates{});
        CHECK(reported_outcome_correct(c, pop));
    }

    TEST_CASE("tie keeps the other pile") {
        // 10,000 ballots with 301 votes for neither candidate.
        const auto c = two_strata(1000, 600, 300, 10'000, 5'000, 4'699, 0.1);
        const auto pop = build_population(c, {PopulationKind::tied, {}, std::nullopt});
        CHECK(pop.strata[1] == StratumPopulation{4849, 4849, 302});
        CHECK(pop.strata[0] == StratumPopulation{450, 450, 100});
        CHECK_FALSE(reported_outcome_correct(c, pop));
        // 150 w votes were really l votes in the CVR stratum.
        CHECK(pop.cvr_rates.o2 == doctest::Approx(0.15));
        CHECK(pop.cvr_rates.o1 == 0.0);
    }

    TEST_CASE("derived rates for one-vote errors") {
        const auto c = two_strata(1000, 600, 300, 100, 50, 40, 0.1);
        // 20 w votes became blank, 10 blank ballots carry l votes.
        const PopulationSpec spec{PopulationKind::explicit_tallies, {{580, 310, 110}, {50, 40, 10}},
                                  std::nullopt};
        const auto pop = build_population(c, spec);
        CHECK(pop.cvr_rates.o2 == doctest::Approx(0.01));
        CHECK(pop.cvr_rates.o1 == doctest::Approx(0.01));
        CHECK(overstatement(c, pop, 0) == 30);
    }

    TEST_CASE("explicit tallies must match the stratum") {
        const auto c = small_contest();
        const PopulationSpec bad{PopulationKind::explicit_tallies, {{1000, 980, 0}, {255, 245, 1}},
                                 std::nullopt};
        CHECK_THROWS_AS(build_population(c, bad), DomainError);
        const PopulationSpec rates{PopulationKind::reported_correct, {}, DiscrepancyRates{0.6, 0.6, 0, 0}};
        CHECK_THROWS_AS(build_population(c, rates), DomainError);
    }

    TEST_CASE("unsupported layouts") {
        auto c = small_contest();
        c.losers.push_back("C");
        CHECK_THROWS_AS(build_population(c, {}), DomainError);
        auto twice = small_contest();
        twice.strata[1].kind = StratumKind::cvr;
        CHECK_THROWS_AS(build_population(twice, {}), DomainError);
    }
}

TEST_SUITE("replicates") {
    TEST_CASE("single stratum reduces to the comparison test") {
        const auto c = single_cvr(110000, 55990, 54010, 0.1);
        for (Votes n1 : {264, 265}) {
            const auto sc = scenario(c, PopulationKind::reported_correct, {n1, 0}, 1, 1);
            const double km = comparison::km_pvalue({n1, 0, 0, 0, 0, sc.gamma}, 110000, 1980, 1.0);
            const auto out = simulate_once(sc, 0);
            CHECK(out.stopped == (km <= 0.1));
            CHECK(out.max_pvalue == doctest::Approx(km));
        }
    }

    TEST_CASE("tied population rarely stops") {
        const auto sc = scenario(small_contest(), PopulationKind::tied, {400, 200}, 300, 3);
        const auto r = stopping_probability(sc, 1);
        CHECK(r.stop_probability <= 0.1 + 3 * std::sqrt(0.1 * 0.9 / 300));
    }

    TEST_CASE("one replicate") {
        const auto sc = scenario(small_contest(), PopulationKind::reported_correct, {200, 100}, 1, 9);
        const auto r = stopping_probability(sc, 1);
        CHECK((r.stop_count == 0 || r.stop_count == 1));
        CHECK((r.stop_probability == 0.0 || r.stop_probability == 1.0));
    }

    TEST_CASE("replicates depend only on seed and index") {
        const auto sc = scenario(small_contest(), PopulationKind::reported_correct, {300, 150}, 40, 5);
        const auto a = simulate_once(sc, 17);
        const auto b = simulate_once(sc, 17);
        CHECK(a.max_pvalue == b.max_pvalue);
        const auto one = stopping_probability(sc, 1);
        const auto three = stopping_probability(sc, 3);
        CHECK(format_report_json(one) == format_report_json(three));
        auto other = sc;
        other.seed = 6;
        CHECK(format_report_json(stopping_probability(other, 1)) != format_report_json(one));
    }

    TEST_CASE("scenario checks") {
        auto sc = scenario(small_contest(), PopulationKind::reported_correct, {10, 501}, 1, 0);
        CHECK_THROWS_AS(validate_scenario(sc), DomainError);
        sc.plan = {-1, 0};
        CHECK_THROWS_AS(validate_scenario(sc), DomainError);
        sc.plan = {1, 1};
        sc.replicates = 0;
        CHECK_THROWS_AS(stopping_probability(sc, 1), DomainError);
    }
}

TEST_SUITE("planning") {
    TEST_CASE("zero target") {
        PlanOptions o;
        o.target = 0.0;
        o.replicates = 10;
        const auto c = small_contest();
        const auto r = plan_sample_sizes(c, build_population(c, {}), o);
        CHECK(r.reachable);
        CHECK(r.plan == SamplePlan{0, 0});
    }

    TEST_CASE("tied population needs escalation") {
        PlanOptions o;
        o.target = 0.5;
        o.replicates = 100;
        o.max_n1 = 1500;
        o.max_n2 = 400;
        const auto c = small_contest();
        const auto r = plan_sample_sizes(c, build_population(c, {PopulationKind::tied, {}, std::nullopt}), o);
        CHECK_FALSE(r.reachable);
    }

    TEST_CASE("reported-correct plan reaches the target") {
        PlanOptions o;
        o.target = 0.8;
        o.replicates = 200;
        const auto c = two_strata(20000, 10600, 9400, 2000, 1060, 940, 0.1);
        const auto pop = build_population(c, {});
        const auto r = plan_sample_sizes(c, pop, o);
        REQUIRE(r.reachable);
        CHECK(r.plan.n1 >= r.min_n1);
        CHECK(r.stop_probability >= 0.8);
        SimulationScenario sc;
        sc.contest = c;
        sc.population = pop;
        sc.plan = r.plan;
        sc.replicates = o.replicates;
        sc.seed = o.seed;
        CHECK(stopping_probability(sc, 1).stop_probability == r.stop_probability);
    }

    TEST_CASE("invalid target") {
        PlanOptions o;
        o.target = 1.0;
        const auto c = small_contest();
        CHECK_THROWS_AS(plan_sample_sizes(c, build_population(c, {}), o), DomainError);
    }
}

TEST_SUITE("scenario json") {
    TEST_CASE("full document") {
        const auto sc = parse_scenario_json(R"({
            "contest": {"risk_limit": 0.1, "winners": ["A"], "losers": ["B"], "strata": [
                {"id": "c", "kind": "cvr", "ballots": 2000, "reported_votes": {"A": 1020, "B": 980}},
                {"id": "p", "kind": "no_cvr", "ballots": 500, "reported_votes": {"A": 255, "B": 245}}]},
            "population": {"kind": "explicit", "strata": [{"w": 1000, "l": 1000, "u": 0},
                                                          {"w": 250, "l": 250, "u": 0}],
                           "cvr_rates": {"o2": 0.01}},
            "sample_plan": {"n1": 300, "n2": 120},
            "replicates": 25, "seed": 99, "gamma": 1.1, "pvalue": "final",
            "controls": {"initial_grid_points": 11}})");
        CHECK(sc.plan == SamplePlan{300, 120});
        CHECK(sc.replicates == 25);
        CHECK(sc.seed == 99);
        CHECK(sc.gamma == 1.1);
        CHECK_FALSE(sc.running_minimum);
        CHECK(sc.controls.initial_grid_points == 11);
        CHECK(sc.population.strata[1] == StratumPopulation{250, 250, 0});
        CHECK(sc.population.cvr_rates.o2 == 0.01);
        CHECK(sc.population.cvr_rates.o1 == 0.0);
    }

    TEST_CASE("named populations") {
        const std::string contest = R"("contest": {"risk_limit": 0.1, "winners": ["A"], "losers": ["B"],
            "strata": [{"id": "c", "kind": "cvr", "ballots": 100, "reported_votes": {"A": 60, "B": 40}}]})";
        CHECK(parse_scenario_json("{" + contest + R"(, "population": "tied"})").population.strata[0] ==
              StratumPopulation{50, 50, 0});
        CHECK(parse_scenario_json("{" + contest + "}").population.strata[0] ==
              StratumPopulation{60, 40, 0});
        CHECK_THROWS_AS(parse_scenario_json("{" + contest + R"(, "population": "lopsided"})"),
                        InputError);
        CHECK_THROWS_AS(parse_scenario_json("{" + contest + R"(, "pvalue": "median"})"), InputError);
        CHECK_THROWS_AS(parse_scenario_json("{"), InputError);
        CHECK_THROWS_AS(load_scenario("/nonexistent/scenario.json"), InputError);
    }

    TEST_CASE("report format") {
        SimulationReport r;
        r.replicates = 10;
        r.stop_count = 3;
        r.stop_probability = 0.3;
        r.standard_error = std::sqrt(0.3 * 0.7 / 10);
        r.min_max_pvalue = 0.01;
        r.median_max_pvalue = 0.2;
        r.max_max_pvalue = 1.0;
        r.wall_clock_seconds = 1.5;
        const auto text = format_report_json(r);
        CHECK(text.find("wall_clock") == std::string::npos);
        CHECK(format_report_json(r, true).find("wall_clock_seconds") != std::string::npos);
        CHECK(text.find("\"stop_count\": 3") != std::string::npos);
    }
}
