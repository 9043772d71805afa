#pragma once

#include <functional>
#include <span>
#include <vector>

#include "suite/domain.hpp"

namespace suite::fisher {

/// Upper tail of the chi-square distribution with an even number of degrees
/// of freedom, in closed form. Throws DomainError for odd or nonpositive dof.
double chi2_sf_even(double x, int dof);

/// x such that chi2_sf_even(x, dof) == upper_tail, by bisection to 1e-12.
double chi2_isf_even(double upper_tail, int dof);

/// Fisher's combination of independent P-values; any zero P-value yields 0.
double combine_pvalues(std::span<const double> pvalues);
double combine_at_lambda(double p1, double p2);

struct LambdaRange {
    double lower = 0.0;
    double upper = 1.0;
};

/// Stratum-1 shares of the error that are not ruled out by the stratum
/// sizes. Requires exactly two strata.
LambdaRange lambda_bounds(const ContestSpec& contest, const CandidatePair& pair);

/// Natural-log stratum P-value as a function of lambda. Stratum 1 must be
/// nonincreasing in lambda, stratum 2 nondecreasing.
using LogPValueFn = std::function<double(double)>;
using PValueFn = std::function<double(double)>;

struct ChiBounds {
    double lower = 0.0;
    double upper = 0.0;
};

/// Bounds on chi(lambda) = -2 (ln p1 + ln p2) valid for every lambda in
/// [a, b). Throws ContractViolation when the endpoint values contradict the
/// required monotonicity.
ChiBounds interval_chi_bounds(double a, double b, const PValueFn& p1, const PValueFn& p2);

struct MaximizerControls {
    int initial_grid_points = 26;
    /// Intervals narrower than this are not bisected further.
    double refine_threshold = 1e-6;
    int max_refinements = 20;
};

struct GridPoint {
    double lambda = 0.0;
    double log_p1 = 0.0;
    double log_p2 = 0.0;
    double chi = 0.0;
};

struct GridInterval {
    double a = 0.0;
    double b = 0.0;
    double chi_lower = 0.0;
    double chi_upper = 0.0;
};

struct FisherMaximizationResult {
    double max_pvalue_upper = 1.0;  // certified bound on sup over lambda
    double max_pvalue_point = 1.0;  // largest value at an evaluated lambda
    double lambda_at_max = 0.0;
    bool decisive = false;
    double chi_critical = 0.0;  // 1 - alpha quantile, 4 dof
    int refinements = 0;
    std::vector<GridPoint> grid;
    std::vector<GridInterval> intervals;
};

/// Maximizes the Fisher-combined P-value over all lambda in `range`,
/// refining the grid where the piecewise-constant lower bound on chi is
/// undecided against the alpha critical value.
FisherMaximizationResult maximize_combined_pvalue(LambdaRange range, const LogPValueFn& log_p1,
                                                  const LogPValueFn& log_p2, double alpha,
                                                  const MaximizerControls& controls = {});

/// Same, with the range computed from the contest.
FisherMaximizationResult maximize_combined_pvalue(const ContestSpec& contest,
                                                  const CandidatePair& pair,
                                                  const LogPValueFn& log_p1,
                                                  const LogPValueFn& log_p2,
                                                  const MaximizerControls& controls = {});

}  // namespace suite::fisher
