#pragma once

#include <span>

#include "rlids/windowing.hpp"

namespace rlids {

struct EntropyConfig {
    double base = 2.0;          // logarithm base, > 1
    double alpha = 2.0;         // Renyi order, > 0 and != 1 where required
    double floor = 1e-6;        // stand-in probability for values missing from the reference side

    // Throws ConfigError when base <= 1, alpha <= 0 or floor is outside (0, 1).
    void validate() const;
};

// sum p * log_a(1/p). Exactly 0 for a single-valued distribution.
double shannon_entropy(const FeatureDistribution& dist, const EntropyConfig& cfg = {});
double shannon_entropy(std::span<const double> probs, double base = 2.0);

// (1/(1-alpha)) * log_a(sum p^alpha). Throws AlphaIsOne for alpha == 1.
double renyi_entropy(const FeatureDistribution& dist, const EntropyConfig& cfg);
double renyi_entropy(std::span<const double> probs, double alpha, double base = 2.0);

// Shannon entropy over log_a(N0), in [0, 1]. A single-valued distribution is
// fully concentrated and yields 0.
double normalized_entropy(const FeatureDistribution& dist, const EntropyConfig& cfg = {});
double normalized_entropy(std::span<const double> probs, double base = 2.0);

// sum over the union support of u * log_a(u / v); values missing from v use
// cfg.floor. Throws FeatureMismatch when the features differ.
double kl_divergence(const FeatureDistribution& u, const FeatureDistribution& v, const EntropyConfig& cfg = {});

// (1/(alpha-1)) * log_a(sum u^alpha / v^(alpha-1)), same flooring.
double renyi_divergence(const FeatureDistribution& u, const FeatureDistribution& v, const EntropyConfig& cfg);

}  // namespace rlids
