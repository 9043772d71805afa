#include "session.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "suite/errors.hpp"

namespace suite::cli {

using json = nlohmann::json;

std::string_view to_string(SessionStatus status) {
    switch (status) {
        case SessionStatus::in_progress: return "in_progress";
        case SessionStatus::stopped: return "stopped";
        case SessionStatus::full_hand_count_recommended: return "full_hand_count_recommended";
    }
    return "in_progress";
}

namespace {

SessionStatus parse_status(const std::string& text) {
    for (auto s : {SessionStatus::in_progress, SessionStatus::stopped,
                   SessionStatus::full_hand_count_recommended}) {
        if (to_string(s) == text) return s;
    }
    throw InputError("session: unknown status '" + text + "'");
}

}  // namespace

std::vector<StratumSample> samples_for(const ContestSpec& contest, const std::vector<int>& cvr_draws,
                                       const std::vector<std::string>& polling_draws, double gamma) {
    std::vector<StratumSample> samples(contest.strata.size());
    int cvr_strata = 0;
    int no_cvr_strata = 0;
    for (std::size_t s = 0; s < contest.strata.size(); ++s) {
        samples[s].comparison.gamma = gamma;
        if (contest.strata[s].kind == StratumKind::cvr) {
            ++cvr_strata;
            samples[s].discrepancies = cvr_draws;
        } else {
            ++no_cvr_strata;
            samples[s].interpretations = polling_draws;
        }
    }
    if (cvr_strata > 1 || no_cvr_strata > 1) {
        throw InputError("sample files map to strata by kind; the contest has two strata of one kind");
    }
    if (cvr_strata == 0 && !cvr_draws.empty()) {
        throw InputError("CVR sample given but the contest has no CVR stratum");
    }
    if (no_cvr_strata == 0 && !polling_draws.empty()) {
        throw InputError("polling sample given but the contest has no no-CVR stratum");
    }
    return samples;
}

std::string format_session_json(const AuditSession& s) {
    const auto summary = comparison::summarize_discrepancies(s.cvr_draws, s.gamma);
    json rounds = json::array();
    for (const auto& r : s.rounds) {
        rounds.push_back({{"round", r.round},
                          {"cvr_draws", r.cvr_draws},
                          {"polling_draws", r.polling_draws},
                          {"max_pvalue_upper", r.max_pvalue_upper},
                          {"decision", r.stop ? "stop" : "continue"}});
    }
    json doc{{"schema_version", AuditSession::kSchemaVersion},
             {"contest", json::parse(format_contest_json(s.contest))},
             {"gamma", s.gamma},
             {"pvalue_mode", s.running_minimum ? "running_minimum" : "final"},
             {"status", std::string(to_string(s.status))},
             {"comparison",
              {{"n", summary.n}, {"o1", summary.o1}, {"o2", summary.o2}, {"u1", summary.u1},
               {"u2", summary.u2}}},
             {"polling", count_labels(s.polling_draws)},
             {"cvr_draws", s.cvr_draws},
             {"polling_draws", s.polling_draws},
             {"rounds", rounds}};
    return doc.dump(2) + "\n";
}

AuditSession parse_session_json(std::string_view text) {
    AuditSession s;
    try {
        const json doc = json::parse(text.begin(), text.end());
        const int version = doc.at("schema_version").get<int>();
        if (version != AuditSession::kSchemaVersion) {
            throw InputError("session: unsupported schema_version " + std::to_string(version));
        }
        s.contest = parse_contest_json(doc.at("contest").dump());
        s.gamma = doc.at("gamma").get<double>();
        const auto mode = doc.value("pvalue_mode", std::string("running_minimum"));
        if (mode != "running_minimum" && mode != "final") {
            throw InputError("session: unknown pvalue_mode '" + mode + "'");
        }
        s.running_minimum = mode == "running_minimum";
        s.status = parse_status(doc.at("status").get<std::string>());
        s.cvr_draws = doc.at("cvr_draws").get<std::vector<int>>();
        s.polling_draws = doc.at("polling_draws").get<std::vector<std::string>>();
        Votes cvr_total = 0;
        Votes polling_total = 0;
        for (const auto& r : doc.at("rounds")) {
            SessionRound round;
            round.round = r.at("round").get<int>();
            round.cvr_draws = r.at("cvr_draws").get<Votes>();
            round.polling_draws = r.at("polling_draws").get<Votes>();
            round.max_pvalue_upper = r.at("max_pvalue_upper").get<double>();
            const auto decision = r.at("decision").get<std::string>();
            if (decision != "stop" && decision != "continue") {
                throw InputError("session: unknown decision '" + decision + "'");
            }
            round.stop = decision == "stop";
            cvr_total += round.cvr_draws;
            polling_total += round.polling_draws;
            s.rounds.push_back(round);
        }
        if (cvr_total != static_cast<Votes>(s.cvr_draws.size()) ||
            polling_total != static_cast<Votes>(s.polling_draws.size())) {
            throw InputError("session: round increments do not sum to the recorded draws");
        }
        if (s.status == SessionStatus::stopped && (s.rounds.empty() || !s.rounds.back().stop)) {
            throw InputError("session: status 'stopped' without a decisive latest round");
        }
    } catch (const json::exception& e) {
        throw InputError(std::string("session: ") + e.what());
    }
    return s;
}

AuditSession load_session(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError(path + ": cannot open session file");
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return parse_session_json(buf.str());
    } catch (const InputError& e) {
        throw InputError(path + ": " + e.what());
    }
}

void save_session(const std::string& path, const AuditSession& session) {
    const std::string body = format_session_json(session);
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        out << body;
        out.flush();
        if (!out) throw InputError(tmp + ": write failed");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::remove(tmp.c_str());
        throw InputError(path + ": cannot replace session file: " + ec.message());
    }
}

}  // namespace suite::cli
