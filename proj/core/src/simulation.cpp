#include "suite/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "suite/errors.hpp"
#include "suite/stratified_audit.hpp"

namespace suite::sim {

namespace {

using nlohmann::json;

// Per-replicate streams: mix (seed, index) with splitmix64 so neighbouring
// indices land on unrelated engine states.
std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::mt19937_64 replicate_engine(std::uint64_t seed, std::int64_t index) {
    return std::mt19937_64(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(index))));
}

double uniform01(std::mt19937_64& eng) { return static_cast<double>(eng() >> 11) * 0x1.0p-53; }

struct Layout {
    std::optional<std::size_t> cvr;
    std::optional<std::size_t> no_cvr;
};

Layout layout_of(const ContestSpec& contest) {
    Layout out;
    for (std::size_t s = 0; s < contest.strata.size(); ++s) {
        auto& slot = contest.strata[s].kind == StratumKind::cvr ? out.cvr : out.no_cvr;
        if (slot) throw DomainError("simulation supports at most one stratum of each kind");
        slot = s;
    }
    return out;
}

CandidatePair single_pair(const ContestSpec& contest) {
    if (contest.winners.size() != 1 || contest.losers.size() != 1) {
        throw DomainError("simulation requires exactly one winner and one loser");
    }
    return {contest.winners.front(), contest.losers.front()};
}

StratumPopulation reported_population(const StratumSpec& s, const CandidatePair& pair) {
    const Votes w = s.votes(pair.winner);
    const Votes l = s.votes(pair.loser);
    return {w, l, s.ballots - w - l};
}

void require_valid_contest(const ContestSpec& contest) {
    if (auto problems = validate_contest(contest); !problems.empty()) {
        throw DomainError("invalid contest: " + problems.front());
    }
}

// Fewest reinterpretations turning the reported tally into the actual one,
// counted by their effect on the margin.
DiscrepancyRates derive_rates(const StratumPopulation& reported, const StratumPopulation& actual,
                              Votes ballots) {
    Votes dw = actual.w - reported.w;
    Votes dl = actual.l - reported.l;
    Votes o2 = 0, o1 = 0, u1 = 0, u2 = 0;
    if (dw < 0 && dl > 0) {
        o2 = std::min(-dw, dl);
    } else if (dl < 0 && dw > 0) {
        u2 = std::min(-dl, dw);
    }
    dw += o2 - u2;
    dl += u2 - o2;
    if (dw < 0) o1 += -dw;  // w -> u
    if (dl > 0) o1 += dl;   // u -> l
    if (dl < 0) u1 += -dl;  // l -> u
    if (dw > 0) u1 += dw;   // u -> w
    if (ballots == 0) return {};
    const double n = static_cast<double>(ballots);
    return {static_cast<double>(o2) / n, static_cast<double>(o1) / n, static_cast<double>(u1) / n,
            static_cast<double>(u2) / n};
}

void require_rates(const DiscrepancyRates& r) {
    if (r.o1 < 0 || r.o2 < 0 || r.u1 < 0 || r.u2 < 0 || r.o1 + r.o2 + r.u1 + r.u2 > 1.0) {
        throw DomainError("discrepancy rates must be nonnegative and sum to at most 1");
    }
}

}  // namespace

TruePopulation build_population(const ContestSpec& contest, const PopulationSpec& spec) {
    require_valid_contest(contest);
    const CandidatePair pair = single_pair(contest);
    const Layout layout = layout_of(contest);

    TruePopulation pop;
    for (std::size_t s = 0; s < contest.strata.size(); ++s) {
        const StratumSpec& stratum = contest.strata[s];
        const StratumPopulation reported = reported_population(stratum, pair);
        switch (spec.kind) {
            case PopulationKind::reported_correct:
                pop.strata.push_back(reported);
                break;
            case PopulationKind::tied: {
                const Votes half = (reported.w + reported.l) / 2;
                pop.strata.push_back({half, half, stratum.ballots - 2 * half});
                break;
            }
            case PopulationKind::explicit_tallies: {
                if (spec.tallies.size() != contest.strata.size()) {
                    throw DomainError("explicit population needs one tally per stratum");
                }
                const StratumPopulation& t = spec.tallies[s];
                if (t.w < 0 || t.l < 0 || t.u < 0 || t.total() != stratum.ballots) {
                    throw DomainError("actual tallies for stratum '" + stratum.id +
                                      "' must be nonnegative and sum to its ballots");
                }
                pop.strata.push_back(t);
                break;
            }
        }
    }
    if (spec.cvr_rates) {
        require_rates(*spec.cvr_rates);
        pop.cvr_rates = *spec.cvr_rates;
    } else if (layout.cvr) {
        const std::size_t s = *layout.cvr;
        pop.cvr_rates = derive_rates(reported_population(contest.strata[s], pair), pop.strata[s],
                                     contest.strata[s].ballots);
    }
    return pop;
}

Votes overstatement(const ContestSpec& contest, const TruePopulation& population,
                    std::size_t stratum) {
    const CandidatePair pair = single_pair(contest);
    const auto& actual = population.strata.at(stratum);
    return contest.strata.at(stratum).margin(pair) - (actual.w - actual.l);
}

bool reported_outcome_correct(const ContestSpec& contest, const TruePopulation& population) {
    Votes total = 0;
    for (std::size_t s = 0; s < contest.strata.size(); ++s) {
        total += overstatement(contest, population, s);
    }
    return total < contest.margin(single_pair(contest));
}

void validate_scenario(const SimulationScenario& sc) {
    require_valid_contest(sc.contest);
    single_pair(sc.contest);
    const Layout layout = layout_of(sc.contest);
    if (sc.population.strata.size() != sc.contest.strata.size()) {
        throw DomainError("population must describe every stratum");
    }
    for (std::size_t s = 0; s < sc.contest.strata.size(); ++s) {
        const auto& p = sc.population.strata[s];
        if (p.w < 0 || p.l < 0 || p.u < 0 || p.total() != sc.contest.strata[s].ballots) {
            throw DomainError("population tallies do not match stratum '" +
                              sc.contest.strata[s].id + "'");
        }
    }
    require_rates(sc.population.cvr_rates);
    if (sc.replicates < 1) throw DomainError("replicates must be at least 1");
    if (!(sc.gamma > 1.0)) throw DomainError("gamma must exceed 1");
    if (sc.plan.n1 < 0 || sc.plan.n2 < 0) throw DomainError("sample sizes must be nonnegative");
    // With-replacement draws beyond this many carry no practical meaning.
    constexpr Votes kMaxComparisonDraws = 10'000'000;
    if (sc.plan.n1 > kMaxComparisonDraws) throw DomainError("n1 exceeds the with-replacement cap");
    if (layout.no_cvr && sc.plan.n2 > sc.contest.strata[*layout.no_cvr].ballots) {
        throw DomainError("n2 exceeds the no-CVR stratum size");
    }
}

ReplicateOutcome simulate_once(const SimulationScenario& sc, std::int64_t replicate_index) {
    const ContestSpec& contest = sc.contest;
    const Layout layout = layout_of(contest);
    const CandidatePair pair = single_pair(contest);
    auto eng = replicate_engine(sc.seed, replicate_index);

    std::vector<StratumSample> samples(contest.strata.size());
    if (layout.cvr) {
        auto& sample = samples[*layout.cvr];
        sample.comparison.gamma = sc.gamma;
        const DiscrepancyRates& r = sc.population.cvr_rates;
        if (r.o2 + r.o1 + r.u1 + r.u2 > 0.0) {
            sample.discrepancies.reserve(static_cast<std::size_t>(sc.plan.n1));
            for (Votes i = 0; i < sc.plan.n1; ++i) {
                const double x = uniform01(eng);
                int d = 0;
                if (x < r.o2) {
                    d = 2;
                } else if (x < r.o2 + r.o1) {
                    d = 1;
                } else if (x < r.o2 + r.o1 + r.u1) {
                    d = -1;
                } else if (x < r.o2 + r.o1 + r.u1 + r.u2) {
                    d = -2;
                }
                sample.discrepancies.push_back(d);
            }
        } else {
            // Error-free draws: the P-value falls with every draw, so the
            // final value is already the running minimum.
            sample.comparison.n = sc.plan.n1;
        }
    }
    if (layout.no_cvr) {
        static const std::string kLabels[] = {"w", "l", "u"};
        auto& sample = samples[*layout.no_cvr];
        StratumPopulation left = sc.population.strata[*layout.no_cvr];
        sample.interpretations.reserve(static_cast<std::size_t>(sc.plan.n2));
        for (Votes i = 0; i < sc.plan.n2; ++i) {
            const auto remaining = static_cast<double>(left.total());
            const auto pick = static_cast<Votes>(uniform01(eng) * remaining);
            int which = 2;
            if (pick < left.w) {
                --left.w;
                which = 0;
            } else if (pick < left.w + left.l) {
                --left.l;
                which = 1;
            } else {
                --left.u;
            }
            sample.interpretations.push_back(kLabels[which]);
        }
    }

    const CandidatePair pairs[] = {pair};
    const AuditResult result =
        audit_pvalue(contest, samples, {sc.controls, sc.running_minimum}, pairs);
    return {result.stop, result.max_pvalue_upper};
}

SimulationReport stopping_probability(const SimulationScenario& sc, int threads) {
    validate_scenario(sc);
    const auto start = std::chrono::steady_clock::now();
    const auto reps = sc.replicates;
    std::vector<ReplicateOutcome> outcomes(static_cast<std::size_t>(reps));

    std::atomic<std::int64_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::int64_t i = next++; i < reps; i = next++) {
            try {
                outcomes[static_cast<std::size_t>(i)] = simulate_once(sc, i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = reps;
            }
        }
    };
    const int n_threads =
        static_cast<int>(std::clamp<std::int64_t>(threads, 1, std::max<std::int64_t>(1, reps)));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(static_cast<std::size_t>(n_threads));
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);

    SimulationReport report;
    report.replicates = reps;
    std::vector<double> pvalues;
    pvalues.reserve(outcomes.size());
    for (const auto& o : outcomes) {
        report.stop_count += o.stopped ? 1 : 0;
        pvalues.push_back(o.max_pvalue);
    }
    const double n = static_cast<double>(reps);
    report.stop_probability = static_cast<double>(report.stop_count) / n;
    report.standard_error =
        std::sqrt(report.stop_probability * (1.0 - report.stop_probability) / n);
    std::sort(pvalues.begin(), pvalues.end());
    report.min_max_pvalue = pvalues.front();
    report.max_max_pvalue = pvalues.back();
    const std::size_t mid = pvalues.size() / 2;
    report.median_max_pvalue =
        pvalues.size() % 2 == 1 ? pvalues[mid] : (pvalues[mid - 1] + pvalues[mid]) / 2.0;
    report.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

namespace {

// Smallest n1 whose error-free comparison evidence alone can push the
// combined P-value to alpha when the other stratum's test sits at 1.
Votes min_hybrid_n1(const ContestSpec& contest, const Layout& layout, double gamma) {
    if (!layout.cvr) return 0;
    const auto& s = contest.strata[*layout.cvr];
    const Votes margin = contest.min_margin();
    if (!layout.no_cvr) {
        return comparison::comparison_sample_size(s.ballots, margin, contest.risk_limit, gamma);
    }
    const double per_draw =
        comparison::km_log_pvalue({1, 0, 0, 0, 0, gamma}, s.ballots, margin, 1.0);
    if (per_draw == -HUGE_VAL) return 1;
    const double needed = -fisher::chi2_isf_even(contest.risk_limit, 4) / 2.0;
    auto n = static_cast<Votes>(std::max(0.0, std::floor(needed / per_draw) - 2.0));
    while (static_cast<double>(n) * per_draw > needed) ++n;
    return n;
}

}  // namespace

SamplePlanResult plan_sample_sizes(const ContestSpec& contest, const TruePopulation& population,
                                   const PlanOptions& options) {
    if (!(options.target < 1.0)) throw DomainError("target stop probability must be below 1");
    require_valid_contest(contest);
    const Layout layout = layout_of(contest);

    SamplePlanResult out;
    out.comparison_only_size = comparison::comparison_sample_size(
        contest.total_ballots(), contest.min_margin(), contest.risk_limit, options.gamma);
    out.min_n1 = min_hybrid_n1(contest, layout, options.gamma);

    SimulationScenario sc;
    sc.contest = contest;
    sc.population = population;
    sc.replicates = options.replicates;
    sc.seed = options.seed;
    sc.gamma = options.gamma;
    sc.controls = options.controls;
    sc.running_minimum = options.running_minimum;

    auto stop_prob = [&](Votes n1, Votes n2) {
        sc.plan = {n1, n2};
        ++out.evaluations;
        return stopping_probability(sc, options.threads).stop_probability;
    };

    if (options.target <= 0.0) {
        out.reachable = true;
        out.plan = {0, 0};
        out.stop_probability = stop_prob(0, 0);
        return out;
    }

    const Votes cap_n1 = layout.cvr ? options.max_n1 : 0;
    const Votes cap_n2 =
        layout.no_cvr ? std::min(options.max_n2, contest.strata[*layout.no_cvr].ballots) : 0;
    if (out.min_n1 > cap_n1) return out;

    std::optional<SamplePlan> best;
    double best_prob = 0.0;
    Votes n1 = out.min_n1;
    for (;;) {
        const Votes budget = best ? best->n1 + best->n2 - n1 - 1 : cap_n2;
        if (budget < 0) break;
        const Votes limit = std::min(cap_n2, budget);

        // Doubling finds a passing n2, bisection tightens it.
        Votes lo = -1;  // known failing (or none)
        Votes hi = -1;  // known passing
        double hi_prob = 0.0;
        if (double p = stop_prob(n1, 0); p >= options.target) {
            hi = 0;
            hi_prob = p;
        } else {
            lo = 0;
            for (Votes n2 = 1; lo < limit; n2 = std::min(limit, n2 * 2)) {
                const double p = stop_prob(n1, n2);
                if (p >= options.target) {
                    hi = n2;
                    hi_prob = p;
                    break;
                }
                lo = n2;
            }
        }
        if (hi >= 0) {
            while (hi - lo > std::max<Votes>(1, hi / 32)) {
                const Votes mid = lo + (hi - lo) / 2;
                const double p = stop_prob(n1, mid);
                if (p >= options.target) {
                    hi = mid;
                    hi_prob = p;
                } else {
                    lo = mid;
                }
            }
            best = SamplePlan{n1, hi};
            best_prob = hi_prob;
        }
        if (n1 >= cap_n1) break;
        n1 = std::min(cap_n1, std::max(n1 + 1, n1 + n1 / 4));
    }

    if (best) {
        out.reachable = true;
        out.plan = *best;
        out.stop_probability = best_prob;
    }
    return out;
}

namespace {

template <typename T>
T get_or(const json& obj, const char* key, T fallback, const std::string& where) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw InputError(where + ": bad value for '" + key + "': " + e.what());
    }
}

PopulationSpec population_from_json(const json& node) {
    PopulationSpec spec;
    if (node.is_string()) {
        const auto name = node.get<std::string>();
        if (name == "reported_correct") {
            spec.kind = PopulationKind::reported_correct;
        } else if (name == "tied") {
            spec.kind = PopulationKind::tied;
        } else {
            throw InputError("population: unknown kind \"" + name + "\"");
        }
        return spec;
    }
    if (!node.is_object()) throw InputError("population must be a string or an object");
    const auto kind = get_or<std::string>(node, "kind", "explicit", "population");
    if (kind == "reported_correct") {
        spec.kind = PopulationKind::reported_correct;
    } else if (kind == "tied") {
        spec.kind = PopulationKind::tied;
    } else if (kind == "explicit") {
        spec.kind = PopulationKind::explicit_tallies;
        if (!node.contains("strata") || !node["strata"].is_array()) {
            throw InputError("population: explicit tallies need a 'strata' array");
        }
        for (const auto& s : node["strata"]) {
            spec.tallies.push_back({get_or<Votes>(s, "w", 0, "population.strata"),
                                    get_or<Votes>(s, "l", 0, "population.strata"),
                                    get_or<Votes>(s, "u", 0, "population.strata")});
        }
    } else {
        throw InputError("population: unknown kind \"" + kind + "\"");
    }
    if (node.contains("cvr_rates")) {
        const auto& r = node["cvr_rates"];
        spec.cvr_rates = DiscrepancyRates{get_or<double>(r, "o2", 0.0, "cvr_rates"),
                                          get_or<double>(r, "o1", 0.0, "cvr_rates"),
                                          get_or<double>(r, "u1", 0.0, "cvr_rates"),
                                          get_or<double>(r, "u2", 0.0, "cvr_rates")};
    }
    return spec;
}

}  // namespace

PopulationSpec parse_population_json(std::string_view text) {
    try {
        return population_from_json(json::parse(text.begin(), text.end()));
    } catch (const json::parse_error& e) {
        throw InputError(std::string("population JSON: ") + e.what());
    }
}

SimulationScenario parse_scenario_json(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw InputError(std::string("scenario JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("contest")) {
        throw InputError("scenario: expected an object with a 'contest' key");
    }
    SimulationScenario sc;
    sc.contest = parse_contest_json(doc["contest"].dump());
    const json population = doc.contains("population") ? doc["population"] : json("reported_correct");
    const PopulationSpec spec = population_from_json(population);
    try {
        sc.population = build_population(sc.contest, spec);
    } catch (const DomainError& e) {
        throw DomainError(std::string("scenario: ") + e.what());
    }
    if (doc.contains("sample_plan")) {
        sc.plan.n1 = get_or<Votes>(doc["sample_plan"], "n1", 0, "sample_plan");
        sc.plan.n2 = get_or<Votes>(doc["sample_plan"], "n2", 0, "sample_plan");
    }
    sc.replicates = get_or<std::int64_t>(doc, "replicates", 1, "scenario");
    sc.seed = get_or<std::uint64_t>(doc, "seed", 0, "scenario");
    sc.gamma = get_or<double>(doc, "gamma", comparison::kDefaultGamma, "scenario");
    if (doc.contains("controls")) {
        const auto& c = doc["controls"];
        sc.controls.initial_grid_points =
            get_or<int>(c, "initial_grid_points", sc.controls.initial_grid_points, "controls");
        sc.controls.refine_threshold =
            get_or<double>(c, "refine_threshold", sc.controls.refine_threshold, "controls");
        sc.controls.max_refinements =
            get_or<int>(c, "max_refinements", sc.controls.max_refinements, "controls");
    }
    const auto mode = get_or<std::string>(doc, "pvalue", "running_minimum", "scenario");
    if (mode != "running_minimum" && mode != "final") {
        throw InputError("scenario: pvalue must be \"running_minimum\" or \"final\"");
    }
    sc.running_minimum = mode == "running_minimum";
    return sc;
}

SimulationScenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError(path + ": cannot open scenario file");
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return parse_scenario_json(buf.str());
    } catch (const InputError& e) {
        throw InputError(path + ": " + e.what());
    }
}

std::string format_report_json(const SimulationReport& r, bool include_timing) {
    json doc{{"replicates", r.replicates},
             {"stop_count", r.stop_count},
             {"stop_probability", r.stop_probability},
             {"standard_error", r.standard_error},
             {"max_pvalue",
              {{"min", r.min_max_pvalue},
               {"median", r.median_max_pvalue},
               {"max", r.max_max_pvalue}}}};
    if (include_timing) doc["wall_clock_seconds"] = r.wall_clock_seconds;
    return doc.dump(2);
}

}  // namespace suite::sim
