#pragma once

#include <cmath>
#include <cstdlib>
#include <vector>

namespace invseg {

// Shewchuk-style exact accumulator (the algorithm behind Python's math.fsum).
// The partials represent the exact real-valued sum of everything added, so the
// rounded result is independent of summation order and grouping. Monetary
// conservation checks rely on that: class totals computed by different modules
// over different groupings of the same amounts compare bit-identical.
class ExactSum {
public:
    void add(double x) {
        size_t i = 0;
        for (size_t j = 0; j < partials_.size(); ++j) {
            double y = partials_[j];
            if (std::abs(x) < std::abs(y)) std::swap(x, y);
            const double hi = x + y;
            const double lo = y - (hi - x);
            if (lo != 0.0) partials_[i++] = lo;
            x = hi;
        }
        partials_.resize(i);
        partials_.push_back(x);
    }

    void add(const ExactSum& other) {
        for (double p : other.partials_) add(p);
    }

    // Correctly rounded double value, with the round-half-even correction.
    double value() const {
        if (partials_.empty()) return 0.0;
        size_t i = partials_.size();
        double s = partials_[--i];
        double err = 0.0;
        while (i > 0) {
            const double x = s;
            const double y = partials_[--i];
            s = x + y;
            err = y - (s - x);
            if (err != 0.0) break;
        }
        if (i > 0 && ((err < 0.0 && partials_[i - 1] < 0.0) ||
                      (err > 0.0 && partials_[i - 1] > 0.0))) {
            const double y = err * 2.0;
            const double x = s + y;
            if (y == x - s) s = x;
        }
        return s;
    }

    void reset() { partials_.clear(); }

private:
    std::vector<double> partials_;
};

inline double exact_sum(const std::vector<double>& xs) {
    ExactSum acc;
    for (double x : xs) acc.add(x);
    return acc.value();
}

}  // namespace invseg
