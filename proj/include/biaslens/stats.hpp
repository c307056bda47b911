#pragma once

namespace biaslens::stats {

// Expected accuracy of uniform random guessing, 1/num_classes.
// num_classes < 2 is a ParameterError.
double chance_accuracy(int num_classes);

// Exact upper-tail binomial probability P(X >= k), X ~ Binomial(n, p),
// evaluated in log space so large n stays stable. Requires 0 <= k <= n
// and 0 < p < 1.
double binomial_p_value(int k, int n, double p);

}  // namespace biaslens::stats
