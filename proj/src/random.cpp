#include "curescreen/random.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace curescreen {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

Rng make_stream(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream) {
    std::uint64_t a = splitmix64(seed);
    std::uint64_t b = splitmix64(a ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
    std::uint64_t c = splitmix64(b ^ splitmix64(substream + 0x8cb92ba72f3d8dd7ULL));
    std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                      static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                      static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32)};
    return Rng(seq);
}

double uniform_open(Rng& rng) {
    // 53 random bits, shifted off zero.
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

double standard_normal(Rng& rng) {
    std::normal_distribution<double> dist(0.0, 1.0);
    return dist(rng);
}

double exponential_draw(Rng& rng, double rate) { return -std::log(uniform_open(rng)) / rate; }

double gamma_draw(Rng& rng, double shape, double scale) {
    if (!(shape > 0.0) || !(scale > 0.0)) throw std::invalid_argument("gamma parameters must be positive");
    std::gamma_distribution<double> dist(shape, scale);
    return dist(rng);
}

double inverse_gamma_draw(Rng& rng, double shape, double scale) {
    return 1.0 / gamma_draw(rng, shape, 1.0 / scale);
}

double beta_draw(Rng& rng, double a, double b) {
    double x = gamma_draw(rng, a, 1.0);
    double y = gamma_draw(rng, b, 1.0);
    return x / (x + y);
}

std::vector<double> dirichlet_draw(Rng& rng, std::span<const double> concentration) {
    std::vector<double> out(concentration.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = gamma_draw(rng, concentration[i], 1.0);
    double total = std::accumulate(out.begin(), out.end(), 0.0);
    for (double& v : out) v /= total;
    return out;
}

}  // namespace curescreen
