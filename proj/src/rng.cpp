#include "stackmf/rng.hpp"

#include <cmath>
#include <numbers>

namespace stackmf::rng {
namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

inline double to_open_unit(std::uint32_t x) {
  return (static_cast<double>(x) + 0.5) * 0x1p-32;
}

}  // namespace

Philox4x32::Counter Philox4x32::generate(Counter ctr, Key key) noexcept {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, ctr[0], hi0, lo0);
    mulhilo(kMul1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

Stream::Stream(std::uint64_t seed, Domain domain, std::uint32_t replication,
               std::uint32_t entity, std::uint32_t sub) noexcept
    : domain_word_((static_cast<std::uint32_t>(domain) << 24) ^ (sub & 0x00FFFFFFu)),
      replication_(replication),
      entity_(entity) {
  const std::uint64_t k = mix64(seed);
  key_ = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
}

std::array<double, 4> Stream::uniforms(std::uint32_t index) const noexcept {
  const auto r = Philox4x32::generate({index, entity_, replication_, domain_word_}, key_);
  return {to_open_unit(r[0]), to_open_unit(r[1]), to_open_unit(r[2]), to_open_unit(r[3])};
}

std::array<double, 4> Stream::normals(std::uint32_t index) const noexcept {
  const auto u = uniforms(index);
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const double r0 = std::sqrt(-2.0 * std::log(u[0]));
  const double r1 = std::sqrt(-2.0 * std::log(u[2]));
  return {r0 * std::cos(two_pi * u[1]), r0 * std::sin(two_pi * u[1]),
          r1 * std::cos(two_pi * u[3]), r1 * std::sin(two_pi * u[3])};
}

void Stream::fill_normals(std::uint32_t step, std::span<double> out) const noexcept {
  const std::size_t blocks = (out.size() + 3) / 4;
  for (std::size_t b = 0; b < blocks; ++b) {
    const auto z = normals(static_cast<std::uint32_t>(step * blocks + b));
    for (std::size_t c = 0; c < 4 && 4 * b + c < out.size(); ++c) out[4 * b + c] = z[c];
  }
}

}  // namespace stackmf::rng
