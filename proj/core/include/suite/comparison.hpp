#pragma once

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "suite/domain.hpp"

namespace suite::comparison {

/// Default error-inflation factor for single-ballot bounds.
inline constexpr double kDefaultGamma = 1.03905;

/// Overall reported margin V_wl for every winner/loser pair.
struct PairMargins {
    std::vector<std::pair<CandidatePair, Votes>> entries;

    static PairMargins from_contest(const ContestSpec& contest);
    /// Smallest margin V over all pairs.
    Votes min() const;
};

/// A batch of ballots with reported and audited per-candidate counts.
/// A single-ballot batch has ballots == 1 and 0/1 counts.
struct BatchRecord {
    Votes ballots = 1;
    std::map<std::string, Votes> reported;
    std::map<std::string, Votes> audited;
};

/// Ballot-level sample summarized by discrepancy class. Overstatements of
/// one and two votes carry taints 1/(2 gamma) and 1/gamma; understatements
/// carry the negatives.
struct ComparisonSampleSummary {
    Votes n = 0;
    Votes o1 = 0;
    Votes o2 = 0;
    Votes u1 = 0;
    Votes u2 = 0;
    double gamma = kDefaultGamma;

    ComparisonSampleSummary& operator+=(const ComparisonSampleSummary& rhs);
    friend bool operator==(const ComparisonSampleSummary&,
                           const ComparisonSampleSummary&) = default;
};

enum class BoundMode { sharp, simple };

struct ErrorBound {
    std::vector<double> batch_bounds;  // u_p
    double total = 0.0;                // U
};

/// e_p: the largest relative overstatement of any pairwise margin in the batch.
double batch_error(const BatchRecord& batch, const PairMargins& margins);

/// u_p: a priori bound on batch_error from the reported counts alone.
/// sharp: max over pairs of (v_w - v_l + n_p) / V_wl. simple: 2 n_p / V.
double batch_bound(const BatchRecord& batch, const PairMargins& margins, BoundMode mode);

/// t_p = e_p / u_p, at most 1.
double taint(const BatchRecord& batch, const PairMargins& margins, BoundMode mode);

ErrorBound error_bound(std::span<const BatchRecord> batches, const PairMargins& margins,
                       BoundMode mode);

/// Kaplan-Markov P-value for the null that the stratum overstatement is at
/// least lambda * margin, from single-ballot draws made with replacement.
/// Sequentially valid: the value on any data prefix is a P-value.
double km_pvalue(const ComparisonSampleSummary& sample, Votes stratum_ballots, Votes margin,
                 double lambda);

/// Natural log of km_pvalue; -infinity when the P-value is 0.
double km_log_pvalue(const ComparisonSampleSummary& sample, Votes stratum_ballots, Votes margin,
                     double lambda);

/// Smallest km_log_pvalue over every prefix of the discrepancy sequence
/// (votes of overstatement, -2..2, in draw order).
double km_sequential_log_pvalue(std::span<const int> discrepancies, Votes stratum_ballots,
                                Votes margin, double lambda, double gamma = kDefaultGamma);

/// Classifies single-ballot draws by their overstatement (in votes) on the
/// pair that attains batch_error. Throws DomainError for multi-ballot draws.
ComparisonSampleSummary summarize_draws(std::span<const BatchRecord> draws,
                                        const PairMargins& margins,
                                        double gamma = kDefaultGamma);

/// Same classification from discrepancies already expressed in votes
/// (-2..2), e.g. read from a CVR sample file.
ComparisonSampleSummary summarize_discrepancies(std::span<const int> discrepancies,
                                                double gamma = kDefaultGamma);

/// Smallest number of error-free draws for which the single-stratum
/// Kaplan-Markov P-value (lambda = 1) drops to alpha or below.
Votes comparison_sample_size(Votes stratum_ballots, Votes margin, double alpha,
                             double gamma = kDefaultGamma);

}  // namespace suite::comparison
