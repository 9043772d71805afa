#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "suite/domain.hpp"
#include "suite/polling.hpp"

namespace suite::testing {

inline StratumSpec stratum(std::string id, StratumKind kind, Votes ballots, Votes w, Votes l) {
    return {std::move(id), kind, ballots, {{"A", w}, {"B", l}}};
}

inline ContestSpec two_strata(Votes n1, Votes w1, Votes l1, Votes n2, Votes w2, Votes l2,
                              double alpha) {
    ContestSpec c;
    c.risk_limit = alpha;
    c.winners = {"A"};
    c.losers = {"B"};
    c.strata.push_back(stratum("cvr", StratumKind::cvr, n1, w1, l1));
    c.strata.push_back(stratum("no-cvr", StratumKind::no_cvr, n2, w2, l2));
    return c;
}

// 110,000 ballots, 1,980-vote margin split proportionally.
inline ContestSpec example_one() {
    return two_strata(100'000, 50'900, 49'100, 10'000, 5'090, 4'910, 0.1);
}

// 2,000,000 ballots, 20% diluted margin split proportionally.
inline ContestSpec example_two() {
    return two_strata(1'900'000, 1'140'000, 760'000, 100'000, 60'000, 40'000, 0.05);
}

// 2,000,000 ballots, 1% diluted margin, 5% without CVRs.
inline ContestSpec tied_strata_contest() {
    return two_strata(1'900'000, 959'500, 940'500, 100'000, 50'500, 49'500, 0.05);
}

inline ContestSpec single_cvr(Votes ballots, Votes w, Votes l, double alpha) {
    ContestSpec c;
    c.risk_limit = alpha;
    c.winners = {"A"};
    c.losers = {"B"};
    c.strata.push_back(stratum("cvr", StratumKind::cvr, ballots, w, l));
    return c;
}

// Log-probability of an ordered sample without replacement from (w, l, u),
// dropping the population-size denominator.
inline double sequence_log_likelihood(Votes w, Votes l, Votes u, const polling::PollingSampleTally& t) {
    auto falling = [](Votes y, Votes k) {
        if (k > y) return -std::numeric_limits<double>::infinity();
        long double s = 0;
        for (Votes i = 0; i < k; ++i) s += std::log(static_cast<long double>(y - i));
        return static_cast<double>(s);
    };
    return falling(w, t.w) + falling(l, t.l) + falling(u, t.u);
}

// Supremum of the sequence likelihood over every population with
// N_w - N_l <= c, by enumeration.
inline double composite_null_log_sup(const polling::PollingSampleTally& t, const polling::PollingNull& null) {
    double best = -std::numeric_limits<double>::infinity();
    for (Votes w = 0; w <= null.ballots; ++w) {
        for (Votes l = 0; w + l <= null.ballots; ++l) {
            if (w - l > null.threshold) continue;
            best = std::max(best, sequence_log_likelihood(w, l, null.ballots - w - l, t));
        }
    }
    return best;
}

// Exhaustive scan of the boundary likelihood over all integers in range.
// `exact` evaluates with the library's f, so results compare bit for bit;
// otherwise with independent long double sums.
inline std::pair<Votes, double> exhaustive_profile_max(const polling::PollingSampleTally& t,
                                                       const polling::PollingNull& null,
                                                       bool exact = true) {
    const auto range = polling::feasible_range(t, null);
    Votes best_x = range.lo;
    double best_f = -std::numeric_limits<double>::infinity();
    for (Votes x = range.lo; x <= range.hi; ++x) {
        const double f = exact ? polling::null_log_likelihood(t, null, x)
                               : sequence_log_likelihood(x, x - null.threshold,
                                                         null.ballots - 2 * x + null.threshold, t);
        if (f > best_f) {
            best_f = f;
            best_x = x;
        }
    }
    return {best_x, best_f};
}

}  // namespace suite::testing
