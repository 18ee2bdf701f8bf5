#pragma once

// Counter-based random streams. A stream is addressed by (seed, path_index,
// counter); Philox4x32-10 maps the 128-bit counter {counter, path_index} under
// the 64-bit key {seed} to 128 random bits. Streams for different paths never
// share a counter block, so paths can be simulated in any order.

#include <array>
#include <cstdint>

namespace sbt {

class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter block(Counter ctr, Key key);
};

/// SplitMix64 finaliser; used to derive independent seeds for auxiliary streams.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t path_index, std::uint64_t counter = 0);

  /// Uniform on the open interval (0, 1) with 53 random bits.
  double uniform();
  /// Standard normal via Box–Muller; draws come in pairs.
  double normal();

  std::uint64_t seed() const { return seed_; }
  std::uint64_t path_index() const { return path_index_; }
  /// Index of the next Philox block to be generated.
  std::uint64_t counter() const { return counter_; }

 private:
  void refill();

  std::uint64_t seed_;
  std::uint64_t path_index_;
  std::uint64_t counter_;
  std::array<std::uint64_t, 2> words_{};
  int next_word_ = 2;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace sbt
