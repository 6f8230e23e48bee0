#include "rlids/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rlids/error.hpp"

namespace rlids {
namespace {

constexpr double kNormalizedTolerance = 1e-9;

void require_nonempty(std::span<const double> probs) {
    if (probs.empty()) throw Error(ErrorCode::EmptyDistribution, "distribution has no mass");
}

void require_nonempty(const FeatureDistribution& d) {
    if (d.total_count == 0 || d.probs.empty()) {
        throw Error(ErrorCode::EmptyDistribution, "distribution has no mass");
    }
}

void require_same_feature(const FeatureDistribution& u, const FeatureDistribution& v) {
    if (!(u.feature == v.feature)) {
        throw Error(ErrorCode::FeatureMismatch,
                    "cannot compare " + to_string(u.feature) + " with " + to_string(v.feature));
    }
}

void require_alpha(double alpha) {
    if (alpha == 1.0) throw Error(ErrorCode::AlphaIsOne, "Renyi order 1 is Shannon; use shannon_entropy");
    if (!(alpha > 0.0)) throw ConfigError("entropy.alpha", "must be > 0");
}

// Walks u's support and pairs each value with v's probability (floored when absent).
template <typename Fn>
void for_each_pair(const FeatureDistribution& u, const FeatureDistribution& v, double floor, Fn&& fn) {
    std::size_t j = 0;
    for (std::size_t i = 0; i < u.support.size(); ++i) {
        while (j < v.support.size() && v.support[j] < u.support[i]) ++j;
        const bool present = j < v.support.size() && v.support[j] == u.support[i];
        fn(u.probs[i], present ? v.probs[j] : floor);
    }
}

}  // namespace

void EntropyConfig::validate() const {
    if (!(base > 1.0)) throw ConfigError("entropy.base", "must be > 1");
    if (!(alpha > 0.0)) throw ConfigError("entropy.alpha", "must be > 0");
    if (!(floor > 0.0 && floor < 1.0)) throw ConfigError("entropy.floor", "must lie in (0, 1)");
}

double shannon_entropy(std::span<const double> probs, double base) {
    require_nonempty(probs);
    if (probs.size() == 1) return 0.0;
    double h = 0.0;
    for (double p : probs) {
        if (p > 0.0) h -= p * std::log(p);
    }
    return std::max(0.0, h / std::log(base));
}

double shannon_entropy(const FeatureDistribution& dist, const EntropyConfig& cfg) {
    require_nonempty(dist);
    return shannon_entropy(dist.probs, cfg.base);
}

double renyi_entropy(std::span<const double> probs, double alpha, double base) {
    require_alpha(alpha);
    require_nonempty(probs);
    if (probs.size() == 1) return 0.0;
    double sum = 0.0;
    for (double p : probs) sum += std::pow(p, alpha);
    return std::max(0.0, std::log(sum) / std::log(base) / (1.0 - alpha));
}

double renyi_entropy(const FeatureDistribution& dist, const EntropyConfig& cfg) {
    require_alpha(cfg.alpha);
    require_nonempty(dist);
    return renyi_entropy(dist.probs, cfg.alpha, cfg.base);
}

double normalized_entropy(std::span<const double> probs, double base) {
    require_nonempty(probs);
    if (probs.size() < 2) return 0.0;
    const double h = shannon_entropy(probs, base) / (std::log(static_cast<double>(probs.size())) / std::log(base));
    if (h < -kNormalizedTolerance || h > 1.0 + kNormalizedTolerance) {
        throw std::logic_error("normalized entropy out of range: " + std::to_string(h));
    }
    return std::clamp(h, 0.0, 1.0);
}

double normalized_entropy(const FeatureDistribution& dist, const EntropyConfig& cfg) {
    require_nonempty(dist);
    return normalized_entropy(dist.probs, cfg.base);
}

double kl_divergence(const FeatureDistribution& u, const FeatureDistribution& v, const EntropyConfig& cfg) {
    require_nonempty(u);
    require_nonempty(v);
    require_same_feature(u, v);
    double sum = 0.0;
    for_each_pair(u, v, cfg.floor, [&](double pu, double pv) { sum += pu * std::log(pu / pv); });
    return std::max(0.0, sum / std::log(cfg.base));
}

double renyi_divergence(const FeatureDistribution& u, const FeatureDistribution& v, const EntropyConfig& cfg) {
    require_alpha(cfg.alpha);
    require_nonempty(u);
    require_nonempty(v);
    require_same_feature(u, v);
    const double a = cfg.alpha;
    double sum = 0.0;
    for_each_pair(u, v, cfg.floor, [&](double pu, double pv) { sum += std::pow(pu, a) * std::pow(pv, 1.0 - a); });
    return std::log(sum) / std::log(cfg.base) / (a - 1.0);
}

}  // namespace rlids
