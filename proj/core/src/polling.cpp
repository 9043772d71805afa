#include "suite/polling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <queue>
#include <vector>

#include "suite/errors.hpp"

namespace suite::polling {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Votes floor_div2(Votes v) { return v >= 0 ? v / 2 : -((-v + 1) / 2); }

struct Evaluation {
    double rising = 0.0;   // f+(x), nondecreasing in x
    double falling = 0.0;  // f-(x), nonincreasing in x
    double total() const { return rising + falling; }
};

Evaluation evaluate(const PollingSampleTally& t, const PollingNull& null, Votes x) {
    return {log_falling(x, t.w) + log_falling(x - null.threshold, t.l),
            log_falling(null.ballots - 2 * x + null.threshold, t.u)};
}

struct Range {
    Votes lo;
    Votes hi;
    double bound;
    bool operator<(const Range& other) const { return bound < other.bound; }
};

// Follows the maximizer of f over a sequence of growing tallies for one
// boundary margin. f is a sum of logs of affine functions of x, hence
// concave, and its forward difference is nonincreasing.
class AscentTracker {
public:
    explicit AscentTracker(PollingNull null) : null_(null) {}

    // f at the smallest maximizer after `draw` extended the tally to `t`;
    // -infinity once the null is unsatisfiable.
    double advance(const PollingSampleTally& t, Interpretation draw) {
        if (dead_) return kNegInf;
        const FeasibleRange range = feasible_range(t, null_);
        if (range.empty()) {
            dead_ = true;
            return kNegInf;
        }
        if (tracking_ && x_ >= range.lo && x_ <= range.hi) {
            f_ += std::log(static_cast<double>(new_factor(t, draw)));
        } else {
            x_ = std::clamp(x_, range.lo, range.hi);
            f_ = null_log_likelihood(t, null_, x_);
            tracking_ = true;
        }
        // The maximizer moves little between prefixes: walk, and bisect
        // only after a long walk.
        Votes steps = 0;
        if (x_ < range.hi) {
            for (double d; x_ < range.hi && steps < kMaxWalk && (d = forward_difference(t, x_)) > 0.0;
                 ++steps) {
                f_ += d;
                ++x_;
            }
        }
        if (steps == 0) {
            for (double d; x_ > range.lo && steps < kMaxWalk &&
                           (d = forward_difference(t, x_ - 1)) <= 0.0;
                 ++steps) {
                f_ -= d;
                --x_;
            }
        }
        if (steps == kMaxWalk) {
            x_ = argmax(t, range);
            f_ = null_log_likelihood(t, null_, x_);
        }
        return f_;
    }

private:
    static constexpr Votes kMaxWalk = 64;

    // Factor the newest draw contributes at the current x.
    Votes new_factor(const PollingSampleTally& t, Interpretation draw) const {
        switch (draw) {
            case Interpretation::w: return x_ - (t.w - 1);
            case Interpretation::l: return x_ - null_.threshold - (t.l - 1);
            case Interpretation::u: break;
        }
        return null_.ballots - 2 * x_ + null_.threshold - (t.u - 1);
    }

    // f(x + 1) - f(x); requires x + 1 feasible.
    double forward_difference(const PollingSampleTally& t, Votes x) const {
        double ratio = 1.0;
        if (t.w > 0) {
            ratio *= static_cast<double>(x + 1) / static_cast<double>(x + 1 - t.w);
        }
        if (t.l > 0) {
            const Votes y = x + 1 - null_.threshold;
            ratio *= static_cast<double>(y) / static_cast<double>(y - t.l);
        }
        if (t.u > 0) {
            const Votes y = null_.ballots - 2 * x + null_.threshold;
            ratio *= (static_cast<double>(y - t.u) / static_cast<double>(y)) *
                     (static_cast<double>(y - t.u - 1) / static_cast<double>(y - 1));
        }
        return std::log(ratio);
    }

    // Smallest x with f(x + 1) - f(x) <= 0, or hi.
    Votes argmax(const PollingSampleTally& t, FeasibleRange range) const {
        Votes lo = range.lo;
        Votes hi = range.hi;
        while (lo < hi) {
            const Votes mid = lo + (hi - lo) / 2;
            if (forward_difference(t, mid) > 0.0) {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        return lo;
    }

    PollingNull null_;
    Votes x_ = 0;
    double f_ = kNegInf;
    bool tracking_ = false;
    bool dead_ = false;
};

}  // namespace

PollingSampleTally tally_of(std::span<const Interpretation> draws) {
    PollingSampleTally t;
    for (const Interpretation d : draws) {
        switch (d) {
            case Interpretation::w: ++t.w; break;
            case Interpretation::l: ++t.l; break;
            case Interpretation::u: ++t.u; break;
        }
    }
    return t;
}

PollingSampleTally& PollingSampleTally::operator+=(const PollingSampleTally& rhs) {
    w += rhs.w;
    l += rhs.l;
    u += rhs.u;
    return *this;
}

Votes threshold_from_margin(double margin) {
    // Absorb representation noise so that integer margins stay integers.
    const double rounded = std::round(margin);
    if (std::abs(margin - rounded) <= 1e-9 * std::max(1.0, std::abs(margin))) {
        return static_cast<Votes>(rounded);
    }
    return static_cast<Votes>(std::ceil(margin));
}

double log_falling(Votes y, Votes k) {
    if (k <= 0) return 0.0;
    if (y < k) return kNegInf;
    // Products of up to 32 factors below 2^53 stay finite; every partial
    // product is monotone in y, so the sum is too.
    constexpr Votes kChunk = 32;
    double total = 0.0;
    for (Votes start = 0; start < k; start += kChunk) {
        const Votes stop = std::min(k, start + kChunk);
        double product = 1.0;
        for (Votes i = start; i < stop; ++i) product *= static_cast<double>(y - i);
        total += std::log(product);
    }
    return total;
}

FeasibleRange feasible_range(const PollingSampleTally& t, const PollingNull& null) {
    return {std::max(t.w, t.l + null.threshold),
            floor_div2(null.ballots - t.u + null.threshold)};
}

double null_log_likelihood(const PollingSampleTally& t, const PollingNull& null, Votes x) {
    return evaluate(t, null, x).total();
}

ProfileMaximizer profile_max(const PollingSampleTally& t, const PollingNull& null) {
    const FeasibleRange range = feasible_range(t, null);
    if (range.empty()) throw DomainError("null unsatisfiable with observed counts");

    std::map<Votes, Evaluation> seen;
    ProfileMaximizer best{range.lo, kNegInf, 0};
    auto visit = [&](Votes x) -> const Evaluation& {
        auto [it, inserted] = seen.try_emplace(x);
        if (inserted) {
            it->second = evaluate(t, null, x);
            ++best.evaluations;
            const double f = it->second.total();
            if (f > best.f_at_x_star || (f == best.f_at_x_star && x < best.x_star)) {
                best.x_star = x;
                best.f_at_x_star = f;
            }
        }
        return it->second;
    };

    std::priority_queue<Range> open;
    auto push = [&](Votes lo, Votes hi) {
        if (hi - lo < 2) return;  // no unevaluated interior points
        open.push({lo, hi, seen.at(hi).rising + seen.at(lo).falling});
    };

    visit(range.lo);
    if (range.hi == range.lo) return best;
    visit(range.hi);
    const Votes mid = range.lo + (range.hi - range.lo) / 2;
    visit(mid);
    push(range.lo, mid);
    push(mid, range.hi);

    while (!open.empty()) {
        const Range r = open.top();
        open.pop();
        if (r.bound < best.f_at_x_star) break;
        // A range can only tie the incumbent; explore it only when it could
        // hold a smaller tied maximizer.
        if (r.bound == best.f_at_x_star && r.lo >= best.x_star) continue;
        const Votes m = r.lo + (r.hi - r.lo) / 2;
        visit(m);
        push(r.lo, m);
        push(m, r.hi);
    }
    return best;
}

double sprt_log_pvalue(const PollingSampleTally& t, const PollingNull& null) {
    if (t.w < 0 || t.l < 0 || t.u < 0) throw DomainError("polling counts must be nonnegative");
    if (null.ballots < 0) throw DomainError("stratum ballots must be nonnegative");
    const Votes n = t.n();
    if (n > null.ballots) throw DomainError("more draws than ballots in the stratum");
    if (n == 0) return 0.0;
    // Alternative inside the null: no test.
    if (null.reported_w - null.reported_l <= null.threshold) return 0.0;
    // L_n >= W_n - c n / N, cleared of the division.
    if ((t.l - t.w) * null.ballots + null.threshold * n >= 0) return 0.0;

    const double alt = log_falling(null.reported_w, t.w) + log_falling(null.reported_l, t.l) +
                       log_falling(null.reported_u, t.u);
    // The null is N_w - N_l <= c. Margins of one parity are ordered, but a
    // margin of c can be blocked by parity (N_s - 2x + c must cover U_n), so
    // the supremum sits at margin c or c - 1.
    double null_best = kNegInf;
    for (const Votes margin : {null.threshold, null.threshold - 1}) {
        PollingNull boundary = null;
        boundary.threshold = margin;
        if (feasible_range(t, boundary).empty()) continue;
        null_best = std::max(null_best, profile_max(t, boundary).f_at_x_star);
    }
    // Data the null cannot produce reject it whatever the alternative says.
    if (null_best == kNegInf) return kNegInf;
    if (alt == kNegInf) return 0.0;
    return std::min(0.0, null_best - alt);
}

double sprt_sequential_log_pvalue(std::span<const Interpretation> draws, const PollingNull& null) {
    if (null.ballots < 0) throw DomainError("stratum ballots must be nonnegative");
    if (static_cast<Votes>(draws.size()) > null.ballots) {
        throw DomainError("more draws than ballots in the stratum");
    }
    if (null.reported_w - null.reported_l <= null.threshold) return 0.0;

    PollingNull below = null;
    below.threshold = null.threshold - 1;
    AscentTracker at_c(null);
    AscentTracker at_c_minus_1(below);

    PollingSampleTally t;
    double alt = 0.0;
    double best = 0.0;
    for (const Interpretation d : draws) {
        Votes factor = 0;
        switch (d) {
            case Interpretation::w: factor = null.reported_w - t.w++; break;
            case Interpretation::l: factor = null.reported_l - t.l++; break;
            case Interpretation::u: factor = null.reported_u - t.u++; break;
        }
        alt += factor > 0 ? std::log(static_cast<double>(factor)) : kNegInf;
        const double null_best = std::max(at_c.advance(t, d), at_c_minus_1.advance(t, d));

        if ((t.l - t.w) * null.ballots + null.threshold * t.n() >= 0) continue;
        if (null_best == kNegInf) return kNegInf;
        if (alt == kNegInf) continue;
        best = std::min(best, null_best - alt);
    }
    return best;
}

double sprt_pvalue(const PollingSampleTally& t, const PollingNull& null) {
    return std::clamp(std::exp(sprt_log_pvalue(t, null)), 0.0, 1.0);
}

}  // namespace suite::polling
