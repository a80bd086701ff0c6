#include "cyclegzsl/random.hpp"

#include <cmath>
#include <cstdio>

namespace cyclegzsl {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

} // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream) {
  return splitmix64(seed ^ fnv1a(stream));
}

Matrix standard_normal(std::size_t rows, std::size_t cols, Rng &rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix out(rows, cols);
  for (double &v : out.data()) v = dist(rng);
  return out;
}

Matrix truncated_normal(std::size_t rows, std::size_t cols, double stddev, double bound_sigmas,
                        Rng &rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix out(rows, cols);
  for (double &v : out.data()) {
    double z = dist(rng);
    while (std::abs(z) > bound_sigmas) z = dist(rng);
    v = stddev * z;
  }
  return out;
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t hash) {
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

} // namespace cyclegzsl
