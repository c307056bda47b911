#include "biaslens/stats.hpp"

#include <cmath>
#include <string>

#include "biaslens/error.hpp"

namespace biaslens::stats {

double chance_accuracy(int num_classes) {
    if (num_classes < 2)
        throw ParameterError("chance_accuracy needs num_classes >= 2, got " +
                             std::to_string(num_classes));
    return 1.0 / num_classes;
}

double binomial_p_value(int k, int n, double p) {
    if (n < 0 || k < 0 || k > n)
        throw ParameterError("binomial_p_value needs 0 <= k <= n");
    if (!(p > 0.0 && p < 1.0))
        throw ParameterError("binomial_p_value needs 0 < p < 1");
    if (k == 0) return 1.0;

    // Sum pmf(i) for i in [k, n]; each term computed from its log so that
    // extreme tails underflow gracefully instead of overflowing.
    const double log_p = std::log(p);
    const double log_q = std::log1p(-p);
    double sum = 0.0;
    for (int i = k; i <= n; ++i) {
        const double log_choose =
            std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0);
        sum += std::exp(log_choose + i * log_p + (n - i) * log_q);
    }
    return std::min(sum, 1.0);
}

}  // namespace biaslens::stats
