#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace alphameta {

/// Counter-based random stream (Philox4x32-10).
///
/// A stream is identified by a 64-bit key; every draw encrypts an
/// incrementing 128-bit counter, so output depends only on (key, position)
/// and is identical on every platform. `split` derives an independent child
/// stream, which is how per-task and per-trial randomness is allocated.
///
/// The distribution helpers are implemented here rather than taken from
/// <random> because the standard distributions are not specified bit-exactly.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  /// Child stream keyed by (this key, id). Does not advance this stream.
  Rng split(std::uint64_t id) const;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t key() const noexcept { return key_; }

  std::uint64_t next_u64();
  result_type operator()() { return next_u64(); }
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);
  /// Box-Muller; consumes exactly two uniforms per call.
  double normal(double mean = 0.0, double stddev = 1.0);
  /// Marsaglia-Tsang; shape > 0, scale > 0.
  double gamma(double shape, double scale);
  /// +1 or -1 with equal probability.
  int rademacher();
  /// Dirichlet(1, ..., 1) sample of length k.
  std::vector<double> dirichlet_uniform(std::size_t k);
  /// Counts of `total` categorical draws with probabilities `p`.
  std::vector<std::size_t> multinomial(std::size_t total, std::span<const double> p);
  /// Fisher-Yates permutation of 0..n-1.
  std::vector<std::size_t> permutation(std::size_t n);
  /// k distinct indices from 0..n-1, in draw order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

 private:
  void refill();

  std::uint64_t seed_;
  std::uint64_t key_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint64_t, 2> buffer_{};
  int buffered_ = 0;
};

/// SplitMix64 finalizer; exposed for deriving seeds from structured ids.
std::uint64_t mix64(std::uint64_t x) noexcept;

}  // namespace alphameta
