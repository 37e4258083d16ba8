#include "rgess/random.hpp"

#include <cmath>

namespace rgess {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

}  // namespace

std::uint64_t split_seed(std::uint64_t master, std::uint64_t stream) {
    return splitmix64(splitmix64(master) ^ splitmix64(stream * 0x9E3779B97F4A7C15ULL + 1));
}

double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double uniform_open_closed(Rng& rng) {
    return 1.0 - uniform01(rng);
}

double uniform(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

double standard_normal(Rng& rng) {
    // A fresh distribution per call keeps the stream position independent of
    // any cached second variate.
    return std::normal_distribution<double>{}(rng);
}

Eigen::VectorXd standard_normal_vector(Rng& rng, Eigen::Index n) {
    Eigen::VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) z[i] = standard_normal(rng);
    return z;
}

double gamma_unit(Rng& rng, double shape) {
    return std::gamma_distribution<double>(shape, 1.0)(rng);
}

}  // namespace rgess
