#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace curescreen {

using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);

// Independent generator for (seed, stream, substream). Streams are used for
// chain indices and per-subject simulation so results do not depend on the
// order in which work is scheduled.
Rng make_stream(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream = 0);

double uniform_open(Rng& rng);  // uniform on (0, 1)
double standard_normal(Rng& rng);
double exponential_draw(Rng& rng, double rate);
double gamma_draw(Rng& rng, double shape, double scale);
double inverse_gamma_draw(Rng& rng, double shape, double scale);
double beta_draw(Rng& rng, double a, double b);
std::vector<double> dirichlet_draw(Rng& rng, std::span<const double> concentration);

}  // namespace curescreen
