#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cli.hpp"
#include "session.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using suite::cli::run;

namespace {

const std::string kData = SUITE_TEST_DATA;

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome invoke(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run(args, out, err);
    return {code, out.str(), err.str()};
}

// Fresh directory per test case, removed afterwards.
struct Scratch {
    fs::path dir;
    Scratch() {
        std::random_device rd;
        dir = fs::temp_directory_path() / ("suite-cli-" + std::to_string(rd()));
        fs::create_directories(dir);
    }
    ~Scratch() { fs::remove_all(dir); }

    std::string write(const std::string& name, const std::string& text) const {
        const auto p = dir / name;
        std::ofstream(p) << text;
        return p.string();
    }

    // `count` draws starting at index `first`, all with value `value`.
    std::string csv(const std::string& name, const std::string& column, int first, int count,
                    const std::string& value) const {
        std::string text = "draw_index," + column + "\n";
        for (int i = first; i < first + count; ++i) text += std::to_string(i) + "," + value + "\n";
        return write(name, text);
    }
};

}  // namespace

TEST_SUITE("pvalue") {
    TEST_CASE("no draws") {
        const auto r = invoke({"pvalue", "--contest", kData + "/example_one.json"});
        REQUIRE(r.code == 0);
        const auto doc = json::parse(r.out);
        CHECK(doc["decision"] == "continue");
        CHECK(doc["max_pvalue_upper"] == 1.0);
        CHECK(doc["samples"]["cvr_draws"] == 0);
    }

    TEST_CASE("clean draws stop example one") {
        Scratch s;
        const auto cvr = s.csv("cvr.csv", "discrepancy", 0, 700, "0");
        std::string poll = "draw_index,interpretation\n";
        for (int i = 0; i < 500; ++i) poll += std::to_string(i) + "," + (i % 2 ? "A" : "B") + "\n";
        s.write("poll.csv", poll);
        const auto r = invoke({"pvalue", "--contest", kData + "/example_one.json", "--cvr-sample", cvr,
                               "--polling-sample", (s.dir / "poll.csv").string()});
        REQUIRE(r.code == 0);
        const auto doc = json::parse(r.out);
        CHECK(doc["pvalue_mode"] == "running_minimum");
        CHECK(doc["pairs"].size() == 1);
        CHECK(doc["samples"]["polling_draws"] == 500);
        const double p = doc["max_pvalue_upper"];
        CHECK(p > 0.0);
        CHECK(p < 1.0);
        CHECK((doc["decision"] == "stop") == (p <= 0.1));
    }

    TEST_CASE("missing contest") {
        const auto r = invoke({"pvalue", "--contest", "/nonexistent/contest.json"});
        CHECK(r.code == 2);
        CHECK(r.out.empty());
        CHECK(r.err.find("/nonexistent/contest.json") != std::string::npos);
        CHECK(invoke({"pvalue"}).code == 2);
        CHECK(invoke({}).code == 2);
    }

    TEST_CASE("malformed sample names file and line") {
        Scratch s;
        const auto bad = s.write("bad.csv", "draw_index,discrepancy\n0,0\n1,3\n");
        const auto r = invoke({"pvalue", "--contest", kData + "/example_one.json", "--cvr-sample", bad});
        CHECK(r.code == 2);
        CHECK(r.out.empty());
        CHECK(r.err.find(bad + ":3") != std::string::npos);

        const auto header = s.write("header.csv", "index,interpretation\n0,w\n");
        const auto h = invoke({"pvalue", "--contest", kData + "/example_one.json", "--polling-sample", header});
        CHECK(h.code == 2);
        CHECK(h.err.find(header + ":1") != std::string::npos);

        const auto dup = s.write("dup.csv", "draw_index,interpretation\n0,w\n0,l\n");
        CHECK(invoke({"pvalue", "--contest", kData + "/example_one.json", "--polling-sample", dup}).code == 2);
    }

    TEST_CASE("bad options") {
        CHECK(invoke({"pvalue", "--contest", kData + "/example_one.json", "--pair", "A"}).code == 2);
        CHECK(invoke({"pvalue", "--contest", kData + "/example_one.json", "--pvalue-mode", "last"}).code == 2);
        CHECK(invoke({"pvalue", "--contest", kData + "/example_one.json", "--gamma", "0.5"}).code == 2);
        CHECK(invoke({"--help"}).code == 0);
    }
}

TEST_SUITE("escalate") {
    TEST_CASE("rounds accumulate to the single-shot answer") {
        Scratch s;
        const auto contest = kData + "/example_one.json";
        const auto session = (s.dir / "session.json").string();
        const auto cvr1 = s.csv("cvr1.csv", "discrepancy", 0, 350, "0");
        const auto cvr2 = s.csv("cvr2.csv", "discrepancy", 350, 350, "0");
        const auto poll1 = s.csv("poll1.csv", "interpretation", 0, 250, "w");
        const auto poll2 = s.csv("poll2.csv", "interpretation", 250, 250, "w");
        const auto cvr_all = s.csv("cvr.csv", "discrepancy", 0, 700, "0");
        const auto poll_all = s.csv("poll.csv", "interpretation", 0, 500, "w");

        const auto first = invoke({"escalate", "--session", session, "--contest", contest,
                                   "--cvr-sample", cvr1, "--polling-sample", poll1});
        REQUIRE(first.code == 0);
        const auto d1 = json::parse(first.out);
        CHECK(d1["round"] == 1);
        CHECK(d1["status"] == "in_progress");

        // A round with no new draws changes nothing.
        const auto idle = json::parse(invoke({"escalate", "--session", session}).out);
        CHECK(idle["round"] == 2);
        CHECK(idle["max_pvalue_upper"] == d1["max_pvalue_upper"]);
        CHECK(idle["decision"] == d1["decision"]);

        const auto second = invoke({"escalate", "--session", session, "--cvr-sample", cvr2,
                                    "--polling-sample", poll2});
        REQUIRE(second.code == 0);
        const auto d2 = json::parse(second.out);
        CHECK(d2["decision"] == "stop");
        CHECK(d2["status"] == "stopped");

        const auto single = json::parse(invoke({"pvalue", "--contest", contest, "--cvr-sample", cvr_all,
                                                "--polling-sample", poll_all}).out);
        CHECK(single["max_pvalue_upper"] == d2["max_pvalue_upper"]);

        const auto saved = suite::cli::load_session(session);
        CHECK(saved.status == suite::cli::SessionStatus::stopped);
        CHECK(saved.rounds.size() == 3);
        CHECK(saved.cvr_draws.size() == 700);
        CHECK(suite::cli::format_session_json(
                  suite::cli::parse_session_json(suite::cli::format_session_json(saved))) ==
              suite::cli::format_session_json(saved));

        const auto after = invoke({"escalate", "--session", session});
        CHECK(after.code == 2);
        CHECK(after.err.find("stopped") != std::string::npos);
    }

    TEST_CASE("session checks") {
        Scratch s;
        const auto session = (s.dir / "session.json").string();
        CHECK(invoke({"escalate", "--session", session}).code == 2);
        REQUIRE(invoke({"escalate", "--session", session, "--contest", kData + "/example_one.json"}).code == 0);
        const auto mismatch = invoke({"escalate", "--session", session, "--contest", kData + "/small.json"});
        CHECK(mismatch.code == 2);
        CHECK(mismatch.err.find("does not match") != std::string::npos);
        const auto corrupt = s.write("corrupt.json", "{\"schema_version\": 1}");
        CHECK(invoke({"escalate", "--session", corrupt}).code == 2);
    }

    TEST_CASE("exhausted polling stratum") {
        Scratch s;
        const auto session = (s.dir / "session.json").string();
        // Every ballot of the no-CVR stratum polled and split evenly.
        std::string poll = "draw_index,interpretation\n";
        for (int i = 0; i < 500; ++i) poll += std::to_string(i) + "," + (i % 2 ? "w" : "l") + "\n";
        const auto path = s.write("poll.csv", poll);
        const auto r = invoke({"escalate", "--session", session, "--contest", kData + "/small.json",
                               "--polling-sample", path});
        REQUIRE(r.code == 0);
        CHECK(json::parse(r.out)["status"] == "full_hand_count_recommended");
    }
}

TEST_SUITE("simulate and plan") {
    TEST_CASE("simulate is independent of threads") {
        const auto scenario = kData + "/scenario_small.json";
        const auto one = invoke({"simulate", "--scenario", scenario, "--threads", "1"});
        const auto four = invoke({"simulate", "--scenario", scenario, "--threads", "4"});
        REQUIRE(one.code == 0);
        CHECK(one.out == four.out);
        CHECK(one.out.find("wall_clock") == std::string::npos);
        CHECK(one.err.find("wall clock") != std::string::npos);
        CHECK(json::parse(one.out)["replicates"] == 60);
    }

    TEST_CASE("one replicate") {
        const auto r = invoke({"simulate", "--scenario", kData + "/scenario_small.json", "--reps", "1"});
        REQUIRE(r.code == 0);
        const double p = json::parse(r.out)["stop_probability"];
        CHECK((p == 0.0 || p == 1.0));
        CHECK(invoke({"simulate", "--scenario", kData + "/scenario_small.json", "--reps", "0"}).code == 2);
    }

    TEST_CASE("unreachable plan") {
        const auto r = invoke({"plan", "--contest", kData + "/small.json", "--population", "tied",
                               "--target-prob", "0.5", "--reps", "50", "--max-n1", "800",
                               "--max-n2", "200", "--threads", "1"});
        CHECK(r.code == 4);
        const auto doc = json::parse(r.out);
        CHECK(doc["status"] == "escalation required");
        CHECK(doc["reachable"] == false);
    }

    TEST_CASE("reachable plan") {
        const auto r = invoke({"plan", "--contest", kData + "/small.json", "--target-prob", "0.5",
                               "--reps", "50", "--threads", "1"});
        REQUIRE(r.code == 0);
        const auto doc = json::parse(r.out);
        CHECK(doc["status"] == "ok");
        CHECK(doc["stop_probability"].get<double>() >= 0.5);
        CHECK(invoke({"plan", "--contest", kData + "/small.json", "--population", "worst"}).code == 2);
    }
}
