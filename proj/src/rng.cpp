#include "starmid/rng.hpp"

#include <cmath>

#include "starmid/errors.hpp"

namespace starmid {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b,
                          std::uint64_t c) {
  std::uint64_t s = master;
  std::uint64_t h = splitmix64(s);
  s ^= a * 0xd6e8feb86659fd93ULL;
  h ^= splitmix64(s);
  s ^= b * 0xa5a5a5a5a5a5a5a5ULL;
  h ^= splitmix64(s);
  s ^= c * 0xc2b2ae3d27d4eb4fULL;
  h ^= splitmix64(s);
  return h ? h : 0x9e3779b97f4a7c15ULL; // mt19937_64 dislikes seed 0 no more than any other, but keep nonzero for clarity
}

double Rng::uniform() {
  // 53 random bits into [0,1)
  return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
}

double Rng::uniform_pos() {
  double u;
  do {
    u = uniform();
  } while (u <= 0.0);
  return u;
}

double Rng::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  // Marsaglia polar method
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double m = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * m;
  have_spare_ = true;
  return u * m;
}

double Rng::gamma(double shape) {
  if (!(shape > 0.0))
    throw ConfigError("gamma shape must be positive");
  if (shape < 1.0) {
    // boost: Gamma(a) = Gamma(a+1) * U^(1/a)
    const double g = gamma(shape + 1.0);
    return g * std::pow(uniform_pos(), 1.0 / shape);
  }
  // Marsaglia-Tsang squeeze
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform_pos();
    if (u < 1.0 - 0.0331 * x * x * x * x)
      return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v)))
      return d * v;
  }
}

double Rng::chi_square(double df) { return 2.0 * gamma(0.5 * df); }

double Rng::student_t(double df) {
  if (!(df > 0.0))
    throw ConfigError("student_t df must be positive");
  const double z = normal();
  const double v = chi_square(df);
  return z / std::sqrt(v / df);
}

double Rng::pareto(double alpha) {
  if (!(alpha > 0.0))
    throw ConfigError("pareto alpha must be positive");
  return std::pow(uniform_pos(), -1.0 / alpha);
}

} // namespace starmid
