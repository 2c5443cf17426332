#pragma once

#include <array>
#include <cstdint>

#include "condkl/grid.hpp"

namespace condkl {

/// Philox4x32-10 counter-based bijection (Salmon et al., SC'11).
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter generate(Counter counter, Key key);
};

/// Standard-normal stream addressed by (seed, stream id).
///
/// The stream id occupies the high half of the Philox counter and the draw
/// position the low half, so stream k produces the same numbers no matter
/// which thread consumes it or in what order streams are visited.
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint64_t stream);

  /// Uniform on the open interval (0, 1) with 53 random bits.
  double uniform();
  double normal();
  void fill(Eigen::Ref<Vector> out);

 private:
  void refill();

  Philox4x32::Key key_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  Philox4x32::Counter buffer_{};
  int used_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Mixes a master seed with a label so that independent consumers
/// (reference field, observation sites, MC, ensembles) never share streams.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t label);

}  // namespace condkl
