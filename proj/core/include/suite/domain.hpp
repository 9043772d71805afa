#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace suite {

using Votes = std::int64_t;

enum class StratumKind { cvr, no_cvr };

std::string_view to_string(StratumKind kind);

struct CandidatePair {
    std::string winner;
    std::string loser;

    friend bool operator==(const CandidatePair&, const CandidatePair&) = default;
};

/// One stratum of the contest: its ballot count and the reported tally.
/// Candidates outside winners/losers only reduce the w/l counts available
/// for the "something else" category.
struct StratumSpec {
    std::string id;
    StratumKind kind = StratumKind::cvr;
    Votes ballots = 0;
    std::map<std::string, Votes> reported_votes;

    /// Reported votes for a candidate; 0 when the candidate is absent.
    Votes votes(const std::string& candidate) const;
    Votes margin(const CandidatePair& pair) const;

    friend bool operator==(const StratumSpec&, const StratumSpec&) = default;
};

struct ContestSpec {
    std::vector<StratumSpec> strata;
    std::vector<std::string> winners;
    std::vector<std::string> losers;
    double risk_limit = 0.05;

    /// Every (winner, loser) combination in declaration order.
    std::vector<CandidatePair> pairs() const;
    /// Overall reported margin V_wl, summed across strata.
    Votes margin(const CandidatePair& pair) const;
    /// Smallest overall pairwise margin V.
    Votes min_margin() const;
    Votes total_ballots() const;

    friend bool operator==(const ContestSpec&, const ContestSpec&) = default;
};

/// Share of the outcome-changing error assigned to stratum 1; stratum 2
/// carries the complement.
struct LambdaAllocation {
    double lambda = 1.0;

    double stratum1() const { return lambda; }
    double stratum2() const { return 1.0 - lambda; }
};

/// Reports every violated invariant; an empty result means the contest is
/// internally consistent. Never throws.
std::vector<std::string> validate_contest(const ContestSpec& spec);

/// Contest JSON: {risk_limit, winners, losers, strata: [{id, kind, ballots,
/// reported_votes}]}. Throws InputError on malformed documents; semantic
/// problems are left to validate_contest.
ContestSpec parse_contest_json(std::string_view text);
std::string format_contest_json(const ContestSpec& spec, int indent = 2);
ContestSpec load_contest(const std::string& path);

}  // namespace suite
