#include "cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <optional>
#include <ostream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "csv.hpp"
#include "session.hpp"
#include "suite/errors.hpp"
#include "suite/simulation.hpp"
#include "suite/stratified_audit.hpp"

namespace suite::cli {

using json = nlohmann::json;

namespace {

int default_threads() {
    if (const char* env = std::getenv("SUITE_THREADS")) {
        try {
            const int n = std::stoi(env);
            if (n >= 1) return n;
        } catch (const std::exception&) {
        }
        throw InputError(std::string("SUITE_THREADS must be a positive integer, got '") + env + "'");
    }
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

bool parse_mode(const std::string& mode) {
    if (mode == "running_minimum") return true;
    if (mode == "final") return false;
    throw InputError("--pvalue-mode must be running_minimum or final");
}

CandidatePair parse_pair(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == text.size()) {
        throw InputError("--pair expects winner:loser, got '" + text + "'");
    }
    return {text.substr(0, colon), text.substr(colon + 1)};
}

struct AuditFlags {
    std::string cvr_sample;
    std::string polling_sample;
    double gamma = comparison::kDefaultGamma;
    int grid_points = 26;
    int max_refinements = 20;
    std::string mode = "running_minimum";

    void add_to(CLI::App& app) {
        app.add_option("--cvr-sample", cvr_sample, "CSV draw_index,discrepancy");
        app.add_option("--polling-sample", polling_sample, "CSV draw_index,interpretation");
        app.add_option("--gamma", gamma, "Kaplan-Markov inflation, > 1");
        app.add_option("--grid-points", grid_points, "initial lambda grid size");
        app.add_option("--max-refinements", max_refinements, "bisection passes");
    }

    fisher::MaximizerControls controls() const {
        fisher::MaximizerControls c;
        c.initial_grid_points = grid_points;
        c.max_refinements = max_refinements;
        return c;
    }
};

json audit_json(const ContestSpec& contest, const AuditResult& result, bool running_minimum,
                std::size_t cvr_draws, std::size_t polling_draws) {
    json pairs = json::array();
    for (const auto& p : result.pairs) {
        pairs.push_back({{"winner", p.pair.winner},
                         {"loser", p.pair.loser},
                         {"max_pvalue_upper", p.result.max_pvalue_upper},
                         {"max_pvalue_point", p.result.max_pvalue_point},
                         {"lambda_at_max", p.result.lambda_at_max},
                         {"decisive", p.result.decisive},
                         {"chi_critical", p.result.chi_critical},
                         {"refinements", p.result.refinements}});
    }
    return {{"decision", result.stop ? "stop" : "continue"},
            {"max_pvalue_upper", result.max_pvalue_upper},
            {"risk_limit", contest.risk_limit},
            {"pvalue_mode", running_minimum ? "running_minimum" : "final"},
            {"samples", {{"cvr_draws", cvr_draws}, {"polling_draws", polling_draws}}},
            {"pairs", pairs}};
}

int cmd_pvalue(const std::string& contest_path, const AuditFlags& flags,
               const std::vector<std::string>& pair_texts, std::ostream& out) {
    const ContestSpec contest = load_contest(contest_path);
    const auto cvr = flags.cvr_sample.empty() ? std::vector<int>{} : read_cvr_sample(flags.cvr_sample);
    const auto polling = flags.polling_sample.empty() ? std::vector<std::string>{}
                                                      : read_polling_sample(flags.polling_sample);
    std::vector<CandidatePair> pairs;
    for (const auto& t : pair_texts) pairs.push_back(parse_pair(t));

    const bool running_minimum = parse_mode(flags.mode);
    const auto samples = samples_for(contest, cvr, polling, flags.gamma);
    const auto result =
        audit_pvalue(contest, samples, {flags.controls(), running_minimum}, pairs);
    out << audit_json(contest, result, running_minimum, cvr.size(), polling.size()).dump(2) << "\n";
    return kComputed;
}

int cmd_simulate(const std::string& scenario_path, std::optional<std::int64_t> reps,
                 std::optional<std::uint64_t> seed, int threads, bool timing, std::ostream& out,
                 std::ostream& err) {
    sim::SimulationScenario sc = sim::load_scenario(scenario_path);
    if (reps) sc.replicates = *reps;
    if (seed) sc.seed = *seed;
    const auto report = sim::stopping_probability(sc, threads);
    out << sim::format_report_json(report, timing) << "\n";
    err << "wall clock: " << report.wall_clock_seconds << " s\n";
    return kComputed;
}

int cmd_plan(const std::string& contest_path, const std::string& population,
             const sim::PlanOptions& options, std::ostream& out) {
    const ContestSpec contest = load_contest(contest_path);
    sim::PopulationSpec spec;
    if (population == "tied") {
        spec.kind = sim::PopulationKind::tied;
    } else if (population != "reported_correct") {
        throw InputError("--population must be reported_correct or tied");
    }
    const auto truth = sim::build_population(contest, spec);
    const auto plan = sim::plan_sample_sizes(contest, truth, options);
    json doc{{"status", plan.reachable ? "ok" : "escalation required"},
             {"reachable", plan.reachable},
             {"n1", plan.plan.n1},
             {"n2", plan.plan.n2},
             {"stop_probability", plan.stop_probability},
             {"target", options.target},
             {"replicates", options.replicates},
             {"comparison_only_size", plan.comparison_only_size},
             {"min_n1", plan.min_n1},
             {"evaluations", plan.evaluations}};
    out << doc.dump(2) << "\n";
    return plan.reachable ? kComputed : kUnreachable;
}

int cmd_escalate(const std::string& session_path, const std::string& contest_path,
                 const AuditFlags& flags, std::ostream& out) {
    AuditSession session;
    if (std::filesystem::exists(session_path)) {
        session = load_session(session_path);
        if (!contest_path.empty() && !(load_contest(contest_path) == session.contest)) {
            throw InputError(session_path + ": session contest does not match " + contest_path);
        }
        if (session.status != SessionStatus::in_progress) {
            throw InputError(session_path + ": session is " + std::string(to_string(session.status)) +
                             "; no further rounds");
        }
    } else {
        if (contest_path.empty()) {
            throw InputError(session_path + ": no such session; pass --contest to start one");
        }
        session.contest = load_contest(contest_path);
        session.gamma = flags.gamma;
        session.running_minimum = parse_mode(flags.mode);
    }

    const auto cvr = flags.cvr_sample.empty() ? std::vector<int>{} : read_cvr_sample(flags.cvr_sample);
    const auto polling = flags.polling_sample.empty() ? std::vector<std::string>{}
                                                      : read_polling_sample(flags.polling_sample);
    session.cvr_draws.insert(session.cvr_draws.end(), cvr.begin(), cvr.end());
    session.polling_draws.insert(session.polling_draws.end(), polling.begin(), polling.end());

    const auto samples =
        samples_for(session.contest, session.cvr_draws, session.polling_draws, session.gamma);
    const auto result =
        audit_pvalue(session.contest, samples, {flags.controls(), session.running_minimum});

    SessionRound round;
    round.round = static_cast<int>(session.rounds.size()) + 1;
    round.cvr_draws = static_cast<Votes>(cvr.size());
    round.polling_draws = static_cast<Votes>(polling.size());
    round.max_pvalue_upper = result.max_pvalue_upper;
    round.stop = result.stop;
    session.rounds.push_back(round);

    bool exhausted = false;
    for (const auto& s : session.contest.strata) {
        if (s.kind == StratumKind::no_cvr &&
            static_cast<Votes>(session.polling_draws.size()) >= s.ballots) {
            exhausted = true;
        }
    }
    if (result.stop) {
        session.status = SessionStatus::stopped;
    } else if (exhausted) {
        session.status = SessionStatus::full_hand_count_recommended;
    }
    save_session(session_path, session);

    json doc = audit_json(session.contest, result, session.running_minimum,
                          session.cvr_draws.size(), session.polling_draws.size());
    doc["round"] = round.round;
    doc["status"] = std::string(to_string(session.status));
    out << doc.dump(2) << "\n";
    return kComputed;
}

std::vector<const char*> argv_of(const std::vector<std::string>& args) {
    std::vector<const char*> argv{"suite"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return argv;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Stratified risk-limiting audits with CVR and no-CVR strata", "suite"};
    app.require_subcommand(1);

    std::string contest_path;
    std::string scenario_path;
    std::string session_path;
    std::string population = "reported_correct";
    std::vector<std::string> pair_texts;
    AuditFlags audit_flags;
    std::optional<std::int64_t> reps;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    bool timing = false;
    sim::PlanOptions plan;
    std::string plan_mode = "running_minimum";

    auto* pvalue = app.add_subcommand("pvalue", "audit P-value from sample files");
    pvalue->add_option("--contest", contest_path, "contest JSON")->required();
    audit_flags.add_to(*pvalue);
    pvalue->add_option("--pair", pair_texts, "winner:loser (repeatable; default all pairs)");
    pvalue->add_option("--pvalue-mode", audit_flags.mode, "running_minimum or final");

    auto* simulate = app.add_subcommand("simulate", "simulated stopping probability");
    simulate->add_option("--scenario", scenario_path, "scenario JSON")->required();
    simulate->add_option("--reps", reps, "replicates");
    simulate->add_option("--seed", seed, "seed");
    simulate->add_option("--threads", threads, "worker threads (default $SUITE_THREADS)");
    simulate->add_flag("--timing", timing, "include wall-clock seconds in the report");

    auto* plan_cmd = app.add_subcommand("plan", "choose (n1, n2) for a target stop probability");
    plan_cmd->add_option("--contest", contest_path, "contest JSON")->required();
    plan_cmd->add_option("--target-prob", plan.target, "target stop probability");
    plan_cmd->add_option("--reps", plan.replicates, "replicates per evaluation");
    plan_cmd->add_option("--seed", plan.seed, "seed");
    plan_cmd->add_option("--threads", threads, "worker threads (default $SUITE_THREADS)");
    plan_cmd->add_option("--population", population, "reported_correct or tied");
    plan_cmd->add_option("--gamma", plan.gamma, "Kaplan-Markov inflation, > 1");
    plan_cmd->add_option("--max-n1", plan.max_n1, "cap on CVR draws");
    plan_cmd->add_option("--max-n2", plan.max_n2, "cap on polling draws");
    plan_cmd->add_option("--pvalue-mode", plan_mode, "running_minimum or final");

    auto* escalate = app.add_subcommand("escalate", "add a round of draws to an audit session");
    escalate->add_option("--session", session_path, "session JSON")->required();
    escalate->add_option("--contest", contest_path, "contest JSON (required for a new session)");
    audit_flags.add_to(*escalate);
    escalate->add_option("--pvalue-mode", audit_flags.mode, "running_minimum or final (new sessions)");

    const auto argv = argv_of(args);
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kComputed : kInputError;
    }

    try {
        if (*pvalue) return cmd_pvalue(contest_path, audit_flags, pair_texts, out);
        if (*simulate) {
            return cmd_simulate(scenario_path, reps, seed, threads.value_or(default_threads()),
                                timing, out, err);
        }
        if (*plan_cmd) {
            plan.threads = threads.value_or(default_threads());
            plan.running_minimum = parse_mode(plan_mode);
            return cmd_plan(contest_path, population, plan, out);
        }
        return cmd_escalate(session_path, contest_path, audit_flags, out);
    } catch (const ContractViolation& e) {
        err << "suite: contract violation: " << e.what() << "\n";
        return kContractViolation;
    } catch (const InputError& e) {
        err << "suite: " << e.what() << "\n";
        return kInputError;
    } catch (const DomainError& e) {
        err << "suite: " << e.what() << "\n";
        return kInputError;
    }
}

}  // namespace suite::cli
