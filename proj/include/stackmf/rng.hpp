#pragma once

// Counter-based random numbers. Every draw is a pure function of
// (master seed, stream tag, replication, entity, index), so replications and
// players can be simulated in any order or thread and still reproduce.

#include <array>
#include <cstdint>
#include <span>

namespace stackmf::rng {

/// Philox4x32 with 10 rounds (Salmon et al., SC'11).
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter generate(Counter ctr, Key key) noexcept;
};

/// Independent noise families. Values are part of the reproducibility
/// contract; append, never renumber.
enum class Domain : std::uint32_t {
  leader_noise = 1,
  leader_initial = 2,
  follower_noise = 3,
  follower_initial = 4,
  delay = 5,
  particle_noise = 6,
  particle_initial = 7,
  particle_delay = 8,
  subsample = 9,
  probe = 10,
  sample = 11,
};

/// splitmix64 finalizer; used to spread user seeds over the key space.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// One logical random stream: (seed, domain, replication, entity).
class Stream {
 public:
  Stream(std::uint64_t seed, Domain domain, std::uint32_t replication, std::uint32_t entity,
         std::uint32_t sub = 0) noexcept;

  /// Four uniforms in the open interval (0, 1) for block `index`.
  std::array<double, 4> uniforms(std::uint32_t index) const noexcept;
  /// Four standard normals (Box-Muller) for block `index`.
  std::array<double, 4> normals(std::uint32_t index) const noexcept;

  /// Fills `out` with standard normals for logical step `step`; draws for
  /// different steps never overlap.
  void fill_normals(std::uint32_t step, std::span<double> out) const noexcept;
  double uniform(std::uint32_t index) const noexcept { return uniforms(index)[0]; }
  double normal(std::uint32_t index) const noexcept { return normals(index)[0]; }

 private:
  Philox4x32::Key key_;
  std::uint32_t domain_word_;
  std::uint32_t replication_;
  std::uint32_t entity_;
};

}  // namespace stackmf::rng
