#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "suite/comparison.hpp"
#include "suite/domain.hpp"
#include "suite/fisher.hpp"
#include "suite/polling.hpp"

namespace suite {

/// Polled ballot interpretations keyed by label. "w", "l" and "u" apply to
/// every pair; a candidate name is w or l for the pairs it belongs to and u
/// otherwise.
using PollingLabels = std::map<std::string, Votes>;

/// Cumulative sample from one stratum. Only the members matching the
/// stratum's kind are read. When the draw order is known the sequence is
/// authoritative and the counts, if also given, must agree with it.
struct StratumSample {
    comparison::ComparisonSampleSummary comparison;
    std::vector<int> discrepancies;  // CVR draws in order, -2..2
    PollingLabels polling;
    std::vector<std::string> interpretations;  // no-CVR draws in order
};

struct AuditOptions {
    fisher::MaximizerControls controls;
    /// Use the smallest P-value over every prefix of the draw order when it
    /// is known, rather than the P-value of the final counts.
    bool running_minimum = true;
};

polling::PollingSampleTally tally_for_pair(const PollingLabels& labels, const CandidatePair& pair);
polling::Interpretation interpret_for_pair(const std::string& label, const CandidatePair& pair);
PollingLabels count_labels(std::span<const std::string> interpretations);

/// Log P-value of the stratum test as a function of the stratum's share q of
/// the pair's overall margin.
fisher::LogPValueFn stratum_log_pvalue_fn(const ContestSpec& contest, std::size_t stratum,
                                          const CandidatePair& pair, const StratumSample& sample,
                                          bool running_minimum = true);

struct PairAuditResult {
    CandidatePair pair;
    fisher::FisherMaximizationResult result;
};

struct AuditResult {
    std::vector<PairAuditResult> pairs;
    /// Largest certified upper bound across pairs; the audit's P-value.
    double max_pvalue_upper = 1.0;
    bool stop = false;
};

/// Maximized combined P-value for each requested pair (all pairs when
/// `pairs` is empty). One stratum reduces to its own test at share 1; two
/// strata are combined with Fisher's function and maximized over lambda.
AuditResult audit_pvalue(const ContestSpec& contest, std::span<const StratumSample> samples,
                         const AuditOptions& options = {},
                         std::span<const CandidatePair> pairs = {});

}  // namespace suite
