#include "suite/stratified_audit.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <unordered_map>

#include "suite/errors.hpp"

namespace suite {

polling::PollingSampleTally tally_for_pair(const PollingLabels& labels, const CandidatePair& pair) {
    polling::PollingSampleTally t;
    for (const auto& [label, count] : labels) {
        if (count < 0) throw DomainError("polling label counts must be nonnegative");
        if (label == "w" || label == pair.winner) {
            t.w += count;
        } else if (label == "l" || label == pair.loser) {
            t.l += count;
        } else {
            t.u += count;
        }
    }
    return t;
}

polling::Interpretation interpret_for_pair(const std::string& label, const CandidatePair& pair) {
    if (label == "w" || label == pair.winner) return polling::Interpretation::w;
    if (label == "l" || label == pair.loser) return polling::Interpretation::l;
    return polling::Interpretation::u;
}

PollingLabels count_labels(std::span<const std::string> interpretations) {
    PollingLabels out;
    for (const auto& label : interpretations) ++out[label];
    return out;
}

namespace {

bool same_summary(const comparison::ComparisonSampleSummary& a,
                  const comparison::ComparisonSampleSummary& b) {
    return a.n == b.n && a.o1 == b.o1 && a.o2 == b.o2 && a.u1 == b.u1 && a.u2 == b.u2;
}

bool has_counts(const comparison::ComparisonSampleSummary& s) {
    return s.n != 0 || s.o1 != 0 || s.o2 != 0 || s.u1 != 0 || s.u2 != 0;
}

}  // namespace

fisher::LogPValueFn stratum_log_pvalue_fn(const ContestSpec& contest, std::size_t stratum,
                                          const CandidatePair& pair, const StratumSample& sample,
                                          bool running_minimum) {
    const StratumSpec& s = contest.strata.at(stratum);
    const Votes margin = contest.margin(pair);
    if (s.kind == StratumKind::cvr) {
        const double gamma = sample.comparison.gamma;
        if (sample.discrepancies.empty()) {
            return [summary = sample.comparison, ballots = s.ballots, margin](double share) {
                return comparison::km_log_pvalue(summary, ballots, margin, share);
            };
        }
        const auto summary = comparison::summarize_discrepancies(sample.discrepancies, gamma);
        if (has_counts(sample.comparison) && !same_summary(summary, sample.comparison)) {
            throw DomainError("stratum '" + s.id + "': discrepancy counts disagree with the draws");
        }
        if (!running_minimum) {
            return [summary, ballots = s.ballots, margin](double share) {
                return comparison::km_log_pvalue(summary, ballots, margin, share);
            };
        }
        return [draws = sample.discrepancies, gamma, ballots = s.ballots, margin](double share) {
            return comparison::km_sequential_log_pvalue(draws, ballots, margin, share, gamma);
        };
    }

    polling::PollingNull null;
    null.ballots = s.ballots;
    null.reported_w = s.votes(pair.winner);
    null.reported_l = s.votes(pair.loser);
    null.reported_u = s.ballots - null.reported_w - null.reported_l;
    const Votes stratum_margin = s.margin(pair);
    std::vector<polling::Interpretation> draws;
    draws.reserve(sample.interpretations.size());
    for (const auto& label : sample.interpretations) draws.push_back(interpret_for_pair(label, pair));
    polling::PollingSampleTally tally = tally_for_pair(sample.polling, pair);
    if (!draws.empty()) {
        const auto from_draws = polling::tally_of(draws);
        if (tally.n() != 0 && !(tally == from_draws)) {
            throw DomainError("stratum '" + s.id + "': polling counts disagree with the draws");
        }
        tally = from_draws;
    }
    const bool sequential = running_minimum && !draws.empty();
    // Distinct quotas often share the same integer threshold.
    auto cache = std::make_shared<std::unordered_map<Votes, double>>();
    return [null, tally, draws = std::move(draws), sequential, stratum_margin, margin,
            cache](double share) mutable {
        null.threshold = polling::threshold_from_margin(static_cast<double>(stratum_margin) -
                                                        share * static_cast<double>(margin));
        auto it = cache->find(null.threshold);
        if (it != cache->end()) return it->second;
        const double value = sequential ? polling::sprt_sequential_log_pvalue(draws, null)
                                        : polling::sprt_log_pvalue(tally, null);
        cache->emplace(null.threshold, value);
        return value;
    };
}

AuditResult audit_pvalue(const ContestSpec& contest, std::span<const StratumSample> samples,
                         const AuditOptions& options,
                         std::span<const CandidatePair> pairs) {
    if (auto problems = validate_contest(contest); !problems.empty()) {
        std::string joined;
        for (const auto& p : problems) joined += (joined.empty() ? "" : "; ") + p;
        throw DomainError("invalid contest: " + joined);
    }
    if (samples.size() != contest.strata.size()) {
        throw DomainError("one sample per stratum is required");
    }
    if (contest.strata.size() > 2) {
        throw DomainError("maximization over lambda is implemented for at most two strata");
    }

    const std::vector<CandidatePair> all = contest.pairs();
    std::vector<CandidatePair> chosen(pairs.begin(), pairs.end());
    if (chosen.empty()) chosen = all;

    AuditResult out;
    out.max_pvalue_upper = 0.0;
    for (const auto& pair : chosen) {
        if (std::find(all.begin(), all.end(), pair) == all.end()) {
            throw DomainError("pair " + pair.winner + ":" + pair.loser + " is not in the contest");
        }
        PairAuditResult r{pair, {}};
        if (contest.strata.size() == 1) {
            const double log_p = stratum_log_pvalue_fn(contest, 0, pair, samples[0],
                                                       options.running_minimum)(1.0);
            const double chi = std::isinf(log_p) ? HUGE_VAL : -2.0 * log_p;
            r.result.grid.push_back({1.0, log_p, 0.0, chi});
            r.result.lambda_at_max = 1.0;
            r.result.max_pvalue_point = r.result.max_pvalue_upper = std::exp(log_p);
            r.result.chi_critical = fisher::chi2_isf_even(contest.risk_limit, 2);
            r.result.decisive = r.result.max_pvalue_upper <= contest.risk_limit;
        } else {
            auto p1 = stratum_log_pvalue_fn(contest, 0, pair, samples[0], options.running_minimum);
            auto p2 = stratum_log_pvalue_fn(contest, 1, pair, samples[1], options.running_minimum);
            r.result = fisher::maximize_combined_pvalue(
                contest, pair, p1, [&p2](double lambda) { return p2(1.0 - lambda); },
                options.controls);
        }
        out.max_pvalue_upper = std::max(out.max_pvalue_upper, r.result.max_pvalue_upper);
        out.pairs.push_back(std::move(r));
    }
    out.stop = std::all_of(out.pairs.begin(), out.pairs.end(),
                           [](const PairAuditResult& r) { return r.result.decisive; });
    return out;
}

}  // namespace suite
