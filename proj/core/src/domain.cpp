#include "suite/domain.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "suite/errors.hpp"

namespace suite {

using nlohmann::json;

std::string_view to_string(StratumKind kind) {
    return kind == StratumKind::cvr ? "cvr" : "no_cvr";
}

Votes StratumSpec::votes(const std::string& candidate) const {
    auto it = reported_votes.find(candidate);
    return it == reported_votes.end() ? 0 : it->second;
}

Votes StratumSpec::margin(const CandidatePair& pair) const {
    return votes(pair.winner) - votes(pair.loser);
}

std::vector<CandidatePair> ContestSpec::pairs() const {
    std::vector<CandidatePair> out;
    out.reserve(winners.size() * losers.size());
    for (const auto& w : winners) {
        for (const auto& l : losers) out.push_back({w, l});
    }
    return out;
}

Votes ContestSpec::margin(const CandidatePair& pair) const {
    Votes total = 0;
    for (const auto& s : strata) total += s.margin(pair);
    return total;
}

Votes ContestSpec::min_margin() const {
    auto ps = pairs();
    if (ps.empty()) throw DomainError("contest has no winner/loser pairs");
    Votes best = margin(ps.front());
    for (const auto& p : ps) best = std::min(best, margin(p));
    return best;
}

Votes ContestSpec::total_ballots() const {
    Votes total = 0;
    for (const auto& s : strata) total += s.ballots;
    return total;
}

std::vector<std::string> validate_contest(const ContestSpec& spec) {
    std::vector<std::string> problems;
    if (!(spec.risk_limit > 0.0 && spec.risk_limit < 1.0)) {
        problems.push_back("risk_limit must lie in (0, 1)");
    }
    if (spec.winners.empty()) problems.push_back("winners must be nonempty");
    if (spec.losers.empty()) problems.push_back("losers must be nonempty");

    std::set<std::string> winners(spec.winners.begin(), spec.winners.end());
    std::set<std::string> losers(spec.losers.begin(), spec.losers.end());
    if (winners.size() != spec.winners.size()) problems.push_back("winners contain duplicates");
    if (losers.size() != spec.losers.size()) problems.push_back("losers contain duplicates");
    for (const auto& w : winners) {
        if (losers.count(w)) problems.push_back("winners and losers are not disjoint: '" + w + "'");
    }

    if (spec.strata.empty()) problems.push_back("contest has no strata");
    std::set<std::string> ids;
    for (const auto& s : spec.strata) {
        const std::string where = "stratum '" + s.id + "'";
        if (!ids.insert(s.id).second) problems.push_back("duplicate stratum id '" + s.id + "'");
        if (s.ballots < 0) problems.push_back(where + ": ballots must be nonnegative");
        for (const auto& [candidate, count] : s.reported_votes) {
            if (count < 0 || count > s.ballots) {
                problems.push_back(where + ": votes for '" + candidate + "' outside [0, ballots]");
            }
        }
        for (const auto& p : spec.pairs()) {
            if (p.winner == p.loser) continue;
            if (s.votes(p.winner) + s.votes(p.loser) > s.ballots) {
                problems.push_back(where + ": votes for '" + p.winner + "' and '" + p.loser +
                                   "' exceed ballots");
            }
        }
    }

    for (const auto& p : spec.pairs()) {
        if (p.winner == p.loser) continue;
        if (spec.margin(p) <= 0) {
            problems.push_back("overall margin not positive for " + p.winner + " over " + p.loser);
        }
    }
    return problems;
}

namespace {

template <typename T>
T required(const json& obj, const char* key, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key)) {
        throw InputError(where + ": missing key '" + key + "'");
    }
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw InputError(where + ": bad value for '" + key + "': " + e.what());
    }
}

StratumKind parse_kind(const std::string& text, const std::string& where) {
    if (text == "cvr") return StratumKind::cvr;
    if (text == "no_cvr") return StratumKind::no_cvr;
    throw InputError(where + ": kind must be \"cvr\" or \"no_cvr\", got \"" + text + "\"");
}

}  // namespace

ContestSpec parse_contest_json(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw InputError(std::string("contest JSON: ") + e.what());
    }
    if (!doc.is_object()) throw InputError("contest JSON: top level must be an object");

    ContestSpec spec;
    spec.risk_limit = required<double>(doc, "risk_limit", "contest");
    spec.winners = required<std::vector<std::string>>(doc, "winners", "contest");
    spec.losers = required<std::vector<std::string>>(doc, "losers", "contest");
    const auto strata = required<json>(doc, "strata", "contest");
    if (!strata.is_array()) throw InputError("contest: 'strata' must be an array");
    for (std::size_t i = 0; i < strata.size(); ++i) {
        const std::string where = "contest.strata[" + std::to_string(i) + "]";
        StratumSpec s;
        s.id = required<std::string>(strata[i], "id", where);
        s.kind = parse_kind(required<std::string>(strata[i], "kind", where), where);
        s.ballots = required<Votes>(strata[i], "ballots", where);
        s.reported_votes = required<std::map<std::string, Votes>>(strata[i], "reported_votes", where);
        spec.strata.push_back(std::move(s));
    }
    return spec;
}

std::string format_contest_json(const ContestSpec& spec, int indent) {
    json doc;
    doc["risk_limit"] = spec.risk_limit;
    doc["winners"] = spec.winners;
    doc["losers"] = spec.losers;
    doc["strata"] = json::array();
    for (const auto& s : spec.strata) {
        doc["strata"].push_back({{"id", s.id},
                                 {"kind", std::string(to_string(s.kind))},
                                 {"ballots", s.ballots},
                                 {"reported_votes", s.reported_votes}});
    }
    return doc.dump(indent);
}

ContestSpec load_contest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError(path + ": cannot open contest file");
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return parse_contest_json(buf.str());
    } catch (const InputError& e) {
        throw InputError(path + ": " + e.what());
    }
}

}  // namespace suite
