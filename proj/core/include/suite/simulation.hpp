#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "suite/comparison.hpp"
#include "suite/domain.hpp"
#include "suite/fisher.hpp"
#include "suite/stratified_audit.hpp"

namespace suite::sim {

/// Actual (hand-count) tallies of one stratum for the audited pair: votes
/// for w, for l, and everything else.
struct StratumPopulation {
    Votes w = 0;
    Votes l = 0;
    Votes u = 0;

    Votes total() const { return w + l + u; }
    friend bool operator==(const StratumPopulation&, const StratumPopulation&) = default;
};

/// Fractions of CVR-stratum ballots whose CVR overstates the margin by two
/// or one votes, or understates it by one or two.
struct DiscrepancyRates {
    double o2 = 0.0;
    double o1 = 0.0;
    double u1 = 0.0;
    double u2 = 0.0;

    friend bool operator==(const DiscrepancyRates&, const DiscrepancyRates&) = default;
};

struct TruePopulation {
    std::vector<StratumPopulation> strata;
    DiscrepancyRates cvr_rates;
};

enum class PopulationKind { reported_correct, tied, explicit_tallies };

struct PopulationSpec {
    PopulationKind kind = PopulationKind::reported_correct;
    std::vector<StratumPopulation> tallies;       // explicit_tallies only
    std::optional<DiscrepancyRates> cvr_rates;    // overrides derived rates
};

/// Builds the true population. Simulation audits a single winner/loser
/// pair with at most one CVR and one no-CVR stratum. CVR discrepancy rates
/// are derived from the fewest ballot reinterpretations that turn the
/// reported tally into the actual one, unless given explicitly.
TruePopulation build_population(const ContestSpec& contest, const PopulationSpec& spec);

/// omega_s = V_wl,s - A_wl,s.
Votes overstatement(const ContestSpec& contest, const TruePopulation& population,
                    std::size_t stratum);

/// True iff the summed overstatement is below the overall reported margin.
bool reported_outcome_correct(const ContestSpec& contest, const TruePopulation& population);

struct SamplePlan {
    Votes n1 = 0;  // comparison draws, with replacement
    Votes n2 = 0;  // polling draws, without replacement

    friend bool operator==(const SamplePlan&, const SamplePlan&) = default;
};

struct SimulationScenario {
    ContestSpec contest;
    TruePopulation population;
    SamplePlan plan;
    std::int64_t replicates = 1;
    std::uint64_t seed = 0;
    double gamma = comparison::kDefaultGamma;
    fisher::MaximizerControls controls;
    bool running_minimum = true;  // see AuditOptions
};

struct ReplicateOutcome {
    bool stopped = false;
    double max_pvalue = 1.0;
};

struct SimulationReport {
    std::int64_t replicates = 0;
    std::int64_t stop_count = 0;
    double stop_probability = 0.0;
    double standard_error = 0.0;
    double min_max_pvalue = 0.0;
    double median_max_pvalue = 0.0;
    double max_max_pvalue = 0.0;
    double wall_clock_seconds = 0.0;
};

/// Checks the scenario against the simulation's structural requirements.
/// Throws DomainError describing the first problem.
void validate_scenario(const SimulationScenario& scenario);

/// One simulated audit. Randomness depends only on (seed, replicate_index).
ReplicateOutcome simulate_once(const SimulationScenario& scenario, std::int64_t replicate_index);

/// Runs every replicate and aggregates. The report, apart from wall-clock
/// time, does not depend on the thread count.
SimulationReport stopping_probability(const SimulationScenario& scenario, int threads = 1);

struct PlanOptions {
    double target = 0.9;
    std::int64_t replicates = 2000;
    std::uint64_t seed = 0;
    double gamma = comparison::kDefaultGamma;
    fisher::MaximizerControls controls;
    bool running_minimum = true;
    int threads = 1;
    Votes max_n1 = 20000;
    Votes max_n2 = 20000;  // further capped by the no-CVR stratum size
};

struct SamplePlanResult {
    bool reachable = false;
    SamplePlan plan;
    double stop_probability = 0.0;
    /// Error-free draws a comparison audit of the whole contest would need.
    Votes comparison_only_size = 0;
    /// Smallest n1 for which the hybrid audit can stop at all.
    Votes min_n1 = 0;
    int evaluations = 0;
};

/// Searches for a plan of minimal total size whose simulated stopping
/// probability reaches the target. reachable == false means escalation is
/// required within the configured caps.
SamplePlanResult plan_sample_sizes(const ContestSpec& contest, const TruePopulation& population,
                                   const PlanOptions& options);

/// Scenario JSON: {contest, population, sample_plan: {n1, n2}, replicates,
/// seed, gamma, controls?}. Throws InputError on malformed documents.
SimulationScenario parse_scenario_json(std::string_view text);
SimulationScenario load_scenario(const std::string& path);
PopulationSpec parse_population_json(std::string_view text);
std::string format_report_json(const SimulationReport& report, bool include_timing = false);

}  // namespace suite::sim
