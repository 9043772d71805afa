#include "suite/fisher.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "suite/errors.hpp"

namespace suite::fisher {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Endpoint comparisons tolerate this much log-space rounding noise.
constexpr double kMonotoneSlack = 1e-9;

double chi_from_logs(double log_p1, double log_p2) {
    if (log_p1 == -kInf || log_p2 == -kInf) return kInf;
    return -2.0 * (log_p1 + log_p2);
}

void require_log_monotone(double l1a, double l1b, double l2a, double l2b, double a, double b) {
    if (l1a < l1b - kMonotoneSlack || l2a > l2b + kMonotoneSlack) {
        throw ContractViolation("monotonicity contract violated on [" + std::to_string(a) + ", " +
                                std::to_string(b) + ")");
    }
}

GridInterval bound_interval(const GridPoint& a, const GridPoint& b) {
    require_log_monotone(a.log_p1, b.log_p1, a.log_p2, b.log_p2, a.lambda, b.lambda);
    // max/min keep the bounds sound even inside the tolerated slack.
    return {a.lambda, b.lambda,
            chi_from_logs(std::max(a.log_p1, b.log_p1), std::max(a.log_p2, b.log_p2)),
            chi_from_logs(std::min(a.log_p1, b.log_p1), std::min(a.log_p2, b.log_p2))};
}

double safe_log(double p) { return p <= 0.0 ? -kInf : std::log(p); }

}  // namespace

double chi2_sf_even(double x, int dof) {
    if (dof <= 0 || dof % 2 != 0) throw DomainError("chi2_sf_even requires a positive even dof");
    if (std::isnan(x)) throw DomainError("chi2_sf_even: x is NaN");
    if (x <= 0.0) return 1.0;
    if (x == kInf) return 0.0;
    const double half = x / 2.0;
    const double log_half = std::log(half);
    // exp(-h) * sum_{k<S} h^k / k!, each term formed in log space.
    double log_term = -half;
    double total = std::exp(log_term);
    for (int k = 1; k < dof / 2; ++k) {
        log_term += log_half - std::log(static_cast<double>(k));
        total += std::exp(log_term);
    }
    return std::clamp(total, 0.0, 1.0);
}

double chi2_isf_even(double upper_tail, int dof) {
    if (!(upper_tail > 0.0 && upper_tail < 1.0)) {
        throw DomainError("chi2_isf_even: tail probability must lie in (0, 1)");
    }
    double lo = 0.0;
    double hi = 1.0;
    while (chi2_sf_even(hi, dof) > upper_tail) hi *= 2.0;
    while (hi - lo > 1e-12) {
        const double mid = lo + (hi - lo) / 2.0;
        if (mid <= lo || mid >= hi) break;
        if (chi2_sf_even(mid, dof) > upper_tail) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return lo + (hi - lo) / 2.0;
}

double combine_pvalues(std::span<const double> pvalues) {
    if (pvalues.empty()) throw DomainError("combine_pvalues: no P-values");
    double chi = 0.0;
    for (double p : pvalues) {
        if (!(p >= 0.0 && p <= 1.0)) throw DomainError("combine_pvalues: P-value outside [0, 1]");
        if (p == 0.0) return 0.0;
        chi -= 2.0 * std::log(p);
    }
    return chi2_sf_even(chi, 2 * static_cast<int>(pvalues.size()));
}

double combine_at_lambda(double p1, double p2) {
    const double ps[] = {p1, p2};
    return combine_pvalues(ps);
}

LambdaRange lambda_bounds(const ContestSpec& contest, const CandidatePair& pair) {
    if (contest.strata.size() != 2) throw DomainError("lambda_bounds requires exactly two strata");
    const Votes margin = contest.margin(pair);
    if (margin <= 0) throw DomainError("overall margin must be positive");
    const auto& s1 = contest.strata[0];
    const auto& s2 = contest.strata[1];
    const double v = static_cast<double>(margin);
    return {1.0 - static_cast<double>(s2.margin(pair) + s2.ballots) / v,
            static_cast<double>(s1.margin(pair) + s1.ballots) / v};
}

ChiBounds interval_chi_bounds(double a, double b, const PValueFn& p1, const PValueFn& p2) {
    if (!(a < b)) throw DomainError("interval_chi_bounds requires a < b");
    const GridPoint ga{a, safe_log(p1(a)), safe_log(p2(a)), 0.0};
    const GridPoint gb{b, safe_log(p1(b)), safe_log(p2(b)), 0.0};
    const GridInterval iv = bound_interval(ga, gb);
    return {iv.chi_lower, iv.chi_upper};
}

FisherMaximizationResult maximize_combined_pvalue(LambdaRange range, const LogPValueFn& log_p1,
                                                  const LogPValueFn& log_p2, double alpha,
                                                  const MaximizerControls& controls) {
    if (!(std::isfinite(range.lower) && std::isfinite(range.upper))) {
        throw DomainError("lambda range must be finite");
    }
    if (range.lower > range.upper) throw DomainError("empty lambda range");
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");

    FisherMaximizationResult out;
    out.chi_critical = chi2_isf_even(alpha, 4);

    auto evaluate = [&](double lambda) {
        GridPoint g{lambda, log_p1(lambda), log_p2(lambda), 0.0};
        g.chi = chi_from_logs(g.log_p1, g.log_p2);
        return g;
    };

    // Equally spaced points on the central window, plus the true range ends.
    std::vector<double> lambdas;
    const int count = std::max(2, controls.initial_grid_points);
    const double window_lo = std::max(range.lower, -3.0);
    const double window_hi = std::min(range.upper, 4.0);
    auto fill = [&](double lo, double hi) {
        for (int i = 0; i < count; ++i) {
            lambdas.push_back(i == count - 1 ? hi : lo + (hi - lo) * i / (count - 1));
        }
    };
    if (range.lower == range.upper) {
        lambdas.push_back(range.lower);
    } else if (window_lo < window_hi) {
        if (range.lower < window_lo) lambdas.push_back(range.lower);
        fill(window_lo, window_hi);
        if (range.upper > window_hi) lambdas.push_back(range.upper);
    } else {
        fill(range.lower, range.upper);
    }

    std::vector<GridPoint>& grid = out.grid;
    grid.reserve(lambdas.size());
    for (double l : lambdas) grid.push_back(evaluate(l));

    const double q = out.chi_critical;
    bool point_rejects_stop = false;
    for (;;) {
        out.intervals.clear();
        for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
            out.intervals.push_back(bound_interval(grid[i], grid[i + 1]));
        }
        point_rejects_stop = std::any_of(grid.begin(), grid.end(),
                                         [&](const GridPoint& g) { return g.chi < q; });
        if (point_rejects_stop) break;
        std::vector<double> midpoints;
        for (const auto& iv : out.intervals) {
            if (iv.chi_lower <= q && iv.b - iv.a > controls.refine_threshold) {
                midpoints.push_back(iv.a + (iv.b - iv.a) / 2.0);
            }
        }
        if (midpoints.empty() || out.refinements >= controls.max_refinements) break;
        ++out.refinements;
        for (double m : midpoints) grid.push_back(evaluate(m));
        std::sort(grid.begin(), grid.end(),
                  [](const GridPoint& x, const GridPoint& y) { return x.lambda < y.lambda; });
    }

    double min_point = kInf;
    for (const auto& g : grid) {
        if (g.chi < min_point) {
            min_point = g.chi;
            out.lambda_at_max = g.lambda;
        }
    }
    if (min_point == kInf) out.lambda_at_max = grid.front().lambda;
    double min_lower = min_point;
    for (const auto& iv : out.intervals) min_lower = std::min(min_lower, iv.chi_lower);

    out.max_pvalue_point = chi2_sf_even(min_point, 4);
    out.max_pvalue_upper = chi2_sf_even(min_lower, 4);
    out.decisive = !point_rejects_stop && min_lower > q && out.max_pvalue_upper <= alpha;
    return out;
}

FisherMaximizationResult maximize_combined_pvalue(const ContestSpec& contest,
                                                  const CandidatePair& pair,
                                                  const LogPValueFn& log_p1,
                                                  const LogPValueFn& log_p2,
                                                  const MaximizerControls& controls) {
    return maximize_combined_pvalue(lambda_bounds(contest, pair), log_p1, log_p2,
                                    contest.risk_limit, controls);
}

}  // namespace suite::fisher
