#pragma once

#include <cstdint>
#include <span>

#include "suite/domain.hpp"

namespace suite::polling {

/// Counts of polled ballots: a vote for w but not l, for l but not w, and
/// anything else (both, neither, invalid).
struct PollingSampleTally {
    Votes w = 0;
    Votes l = 0;
    Votes u = 0;

    Votes n() const { return w + l + u; }
    PollingSampleTally& operator+=(const PollingSampleTally& rhs);
    friend bool operator==(const PollingSampleTally&, const PollingSampleTally&) = default;
};

/// One polled ballot, relative to the audited pair.
enum class Interpretation : char { w, l, u };

PollingSampleTally tally_of(std::span<const Interpretation> draws);

/// Null N_w - N_l <= threshold in a stratum of `ballots` ballots, tested
/// against the reported tallies as the alternative.
struct PollingNull {
    Votes ballots = 0;
    Votes threshold = 0;  // c, in votes
    Votes reported_w = 0;
    Votes reported_l = 0;
    Votes reported_u = 0;
};

/// Integer maximizer of the null log-likelihood over the nuisance parameter.
struct ProfileMaximizer {
    Votes x_star = 0;
    double f_at_x_star = 0.0;
    int evaluations = 0;
};

struct FeasibleRange {
    Votes lo = 0;
    Votes hi = -1;

    bool empty() const { return lo > hi; }
};

/// Integer threshold for a real-valued quota margin; rounding up enlarges
/// the null.
Votes threshold_from_margin(double margin);

/// sum_{i<k} ln(y - i). Requires y >= k when k > 0.
double log_falling(Votes y, Votes k);

/// Values of N_w consistent with the observed counts and N_w - N_l = c.
FeasibleRange feasible_range(const PollingSampleTally& tally, const PollingNull& null);

/// f(x): log-probability of the observed sequence under the null element
/// N_w = x, N_l = x - c, up to the x-independent denominator.
double null_log_likelihood(const PollingSampleTally& tally, const PollingNull& null, Votes x);

/// Branch-and-bound global maximizer of null_log_likelihood over the
/// feasible range. Ties go to the smallest x. Throws DomainError when the
/// range is empty.
ProfileMaximizer profile_max(const PollingSampleTally& tally, const PollingNull& null);

/// Conservative sequential P-value (maximized null likelihood over the
/// alternative likelihood), for draws made without replacement.
double sprt_pvalue(const PollingSampleTally& tally, const PollingNull& null);

/// Natural log of sprt_pvalue; -infinity when the P-value is 0, which
/// includes tallies the null cannot produce.
double sprt_log_pvalue(const PollingSampleTally& tally, const PollingNull& null);

/// Smallest log P-value over every prefix of the draw sequence. The
/// infimum over prefixes is itself a valid P-value for a sequential test.
/// Tracks the maximizer by ascent on the concave log-likelihood rather than
/// by branch and bound, so it also serves as a cross-check of profile_max.
double sprt_sequential_log_pvalue(std::span<const Interpretation> draws, const PollingNull& null);

}  // namespace suite::polling
