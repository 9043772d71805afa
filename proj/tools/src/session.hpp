#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "suite/domain.hpp"
#include "suite/stratified_audit.hpp"

namespace suite::cli {

enum class SessionStatus { in_progress, stopped, full_hand_count_recommended };

std::string_view to_string(SessionStatus status);

struct SessionRound {
    int round = 0;
    Votes cvr_draws = 0;      // increment
    Votes polling_draws = 0;  // increment
    double max_pvalue_upper = 1.0;
    bool stop = false;
};

/// Escalation state. Draws are kept in order so that every round is
/// evaluated on the cumulative sequence.
struct AuditSession {
    static constexpr int kSchemaVersion = 1;

    ContestSpec contest;
    double gamma = comparison::kDefaultGamma;
    bool running_minimum = true;
    std::vector<int> cvr_draws;
    std::vector<std::string> polling_draws;
    std::vector<SessionRound> rounds;
    SessionStatus status = SessionStatus::in_progress;
};

/// Distributes the pooled sequences over the contest's strata: the CVR
/// draws to its CVR stratum and the polling draws to its no-CVR stratum.
std::vector<StratumSample> samples_for(const ContestSpec& contest, const std::vector<int>& cvr_draws,
                                       const std::vector<std::string>& polling_draws, double gamma);

std::string format_session_json(const AuditSession& session);
AuditSession parse_session_json(std::string_view text);
AuditSession load_session(const std::string& path);

/// Writes to a sibling temporary file and renames it over `path`.
void save_session(const std::string& path, const AuditSession& session);

}  // namespace suite::cli
