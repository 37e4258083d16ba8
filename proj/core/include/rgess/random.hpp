#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace rgess {

// Every chain and every fitter owns one of these; they are never shared
// between threads.
using Rng = std::mt19937_64;

/// Derives an independent 64-bit seed for stream `stream` from a master seed
/// (splitmix64 over master ^ golden-ratio-scaled stream index).
std::uint64_t split_seed(std::uint64_t master, std::uint64_t stream);

/// Uniform on [0, 1) with 53 random bits.
double uniform01(Rng& rng);

/// Uniform on (0, 1]; `std::log` of the result is always finite.
double uniform_open_closed(Rng& rng);

double uniform(Rng& rng, double lo, double hi);

double standard_normal(Rng& rng);

Eigen::VectorXd standard_normal_vector(Rng& rng, Eigen::Index n);

/// Gamma(shape, scale = 1).
double gamma_unit(Rng& rng, double shape);

}  // namespace rgess
