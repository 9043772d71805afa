#include "suite/comparison.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "suite/errors.hpp"

namespace suite::comparison {

namespace {

void require_margins(const PairMargins& margins) {
    if (margins.entries.empty()) throw DomainError("empty winner or loser set");
    for (const auto& [pair, margin] : margins.entries) {
        if (margin <= 0) {
            throw DomainError("margin of " + pair.winner + " over " + pair.loser +
                              " must be positive");
        }
    }
}

Votes count(const std::map<std::string, Votes>& tally, const std::string& candidate) {
    auto it = tally.find(candidate);
    return it == tally.end() ? 0 : it->second;
}

// Overstatement of one pair's margin, in votes.
Votes pair_discrepancy(const BatchRecord& b, const CandidatePair& p) {
    return count(b.reported, p.winner) - count(b.audited, p.winner) - count(b.reported, p.loser) +
           count(b.audited, p.loser);
}

void require_summary(const ComparisonSampleSummary& s) {
    if (s.n < 0 || s.o1 < 0 || s.o2 < 0 || s.u1 < 0 || s.u2 < 0) {
        throw DomainError("comparison sample counts must be nonnegative");
    }
    if (s.o1 + s.o2 + s.u1 + s.u2 > s.n) {
        throw DomainError("discrepancy counts exceed the number of draws");
    }
    if (!(s.gamma > 1.0)) throw DomainError("gamma must exceed 1");
}

}  // namespace

PairMargins PairMargins::from_contest(const ContestSpec& contest) {
    PairMargins out;
    for (const auto& p : contest.pairs()) out.entries.emplace_back(p, contest.margin(p));
    return out;
}

Votes PairMargins::min() const {
    require_margins(*this);
    Votes best = entries.front().second;
    for (const auto& e : entries) best = std::min(best, e.second);
    return best;
}

ComparisonSampleSummary& ComparisonSampleSummary::operator+=(const ComparisonSampleSummary& rhs) {
    n += rhs.n;
    o1 += rhs.o1;
    o2 += rhs.o2;
    u1 += rhs.u1;
    u2 += rhs.u2;
    return *this;
}

double batch_error(const BatchRecord& batch, const PairMargins& margins) {
    require_margins(margins);
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& [pair, margin] : margins.entries) {
        worst = std::max(worst, static_cast<double>(pair_discrepancy(batch, pair)) /
                                    static_cast<double>(margin));
    }
    return worst;
}

double batch_bound(const BatchRecord& batch, const PairMargins& margins, BoundMode mode) {
    require_margins(margins);
    if (mode == BoundMode::simple) {
        return 2.0 * static_cast<double>(batch.ballots) / static_cast<double>(margins.min());
    }
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& [pair, margin] : margins.entries) {
        const Votes numerator =
            count(batch.reported, pair.winner) - count(batch.reported, pair.loser) + batch.ballots;
        worst = std::max(worst, static_cast<double>(numerator) / static_cast<double>(margin));
    }
    return worst;
}

double taint(const BatchRecord& batch, const PairMargins& margins, BoundMode mode) {
    return batch_error(batch, margins) / batch_bound(batch, margins, mode);
}

ErrorBound error_bound(std::span<const BatchRecord> batches, const PairMargins& margins,
                       BoundMode mode) {
    ErrorBound out;
    out.batch_bounds.reserve(batches.size());
    for (const auto& b : batches) {
        out.batch_bounds.push_back(batch_bound(b, margins, mode));
        out.total += out.batch_bounds.back();
    }
    return out;
}

double km_log_pvalue(const ComparisonSampleSummary& s, Votes stratum_ballots, Votes margin,
                     double lambda) {
    require_summary(s);
    if (stratum_ballots <= 0) throw DomainError("comparison stratum must contain ballots");
    if (margin <= 0) throw DomainError("overall margin must be positive");
    if (s.n == 0) return 0.0;

    const double g = s.gamma;
    // Null mean taint lambda / U with U = 2 gamma N / V.
    const double t = lambda * static_cast<double>(margin) /
                     (2.0 * g * static_cast<double>(stratum_ballots));
    if (t >= 1.0) return -std::numeric_limits<double>::infinity();

    const double log_p = static_cast<double>(s.n) * std::log1p(-t) -
                         static_cast<double>(s.o1) * std::log1p(-1.0 / (2.0 * g)) -
                         static_cast<double>(s.o2) * std::log1p(-1.0 / g) -
                         static_cast<double>(s.u1) * std::log1p(1.0 / (2.0 * g)) -
                         static_cast<double>(s.u2) * std::log1p(1.0 / g);
    return std::min(0.0, log_p);
}

double km_pvalue(const ComparisonSampleSummary& s, Votes stratum_ballots, Votes margin,
                 double lambda) {
    return std::clamp(std::exp(km_log_pvalue(s, stratum_ballots, margin, lambda)), 0.0, 1.0);
}

double km_sequential_log_pvalue(std::span<const int> discrepancies, Votes stratum_ballots,
                                Votes margin, double lambda, double gamma) {
    const ComparisonSampleSummary unit{1, 0, 0, 0, 0, gamma};
    const double step = km_log_pvalue(unit, stratum_ballots, margin, lambda);  // validates
    if (discrepancies.empty()) return 0.0;
    if (step == -std::numeric_limits<double>::infinity()) return step;
    const double g = gamma;
    const double per_class[] = {-std::log1p(1.0 / g), -std::log1p(1.0 / (2.0 * g)), 0.0,
                                -std::log1p(-1.0 / (2.0 * g)), -std::log1p(-1.0 / g)};
    // The running value is not clamped at 0 between draws: the product of
    // ratios is the supermartingale, the clamp applies to the reported value.
    double running = 0.0;
    double best = 0.0;
    for (int d : discrepancies) {
        if (d < -2 || d > 2) throw DomainError("single-ballot discrepancy outside [-2, 2]");
        running += step + per_class[d + 2];
        best = std::min(best, running);
    }
    return best;
}

namespace {

void tally_discrepancy(ComparisonSampleSummary& s, Votes votes) {
    switch (votes) {
        case 2: ++s.o2; break;
        case 1: ++s.o1; break;
        case 0: break;
        case -1: ++s.u1; break;
        case -2: ++s.u2; break;
        default: throw DomainError("single-ballot discrepancy outside [-2, 2]");
    }
    ++s.n;
}

}  // namespace

ComparisonSampleSummary summarize_draws(std::span<const BatchRecord> draws,
                                        const PairMargins& margins, double gamma) {
    require_margins(margins);
    ComparisonSampleSummary s;
    s.gamma = gamma;
    for (const auto& d : draws) {
        if (d.ballots != 1) throw DomainError("summarize_draws expects single-ballot batches");
        // Pair attaining e_p; ties go to the smaller margin.
        const std::pair<CandidatePair, Votes>* best = nullptr;
        double best_ratio = -std::numeric_limits<double>::infinity();
        for (const auto& entry : margins.entries) {
            const double ratio = static_cast<double>(pair_discrepancy(d, entry.first)) /
                                 static_cast<double>(entry.second);
            if (ratio > best_ratio || (ratio == best_ratio && entry.second < best->second)) {
                best_ratio = ratio;
                best = &entry;
            }
        }
        tally_discrepancy(s, pair_discrepancy(d, best->first));
    }
    return s;
}

ComparisonSampleSummary summarize_discrepancies(std::span<const int> discrepancies, double gamma) {
    ComparisonSampleSummary s;
    s.gamma = gamma;
    for (int d : discrepancies) tally_discrepancy(s, d);
    return s;
}

Votes comparison_sample_size(Votes stratum_ballots, Votes margin, double alpha, double gamma) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
    ComparisonSampleSummary s;
    s.gamma = gamma;
    const double per_draw = km_log_pvalue({1, 0, 0, 0, 0, gamma}, stratum_ballots, margin, 1.0);
    if (per_draw == -std::numeric_limits<double>::infinity()) return 1;
    if (per_draw >= 0.0) throw DomainError("error-free draws carry no evidence");
    auto n = static_cast<Votes>(std::ceil(std::log(alpha) / per_draw));
    n = std::max<Votes>(n - 2, 1);
    for (;; ++n) {
        s.n = n;
        if (km_pvalue(s, stratum_ballots, margin, 1.0) <= alpha) return n;
    }
}

}  // namespace suite::comparison
