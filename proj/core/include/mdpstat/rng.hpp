#pragma once

#include <array>
#include <cstdint>

#include <Eigen/Core>

namespace mdpstat {

/// Counter-based random stream (Philox4x32 with 10 rounds).
///
/// A stream is identified by (seed, stream): the seed is the 64-bit key and
/// the stream id occupies the high half of the 128-bit counter, so streams
/// with the same seed and different ids never overlap.  Experiment drivers
/// give replication r the stream id r, which makes every replication
/// reproducible in isolation and independent of how replications are
/// scheduled across threads.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream);

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  /// Uniform double in [0,1) with 53 random bits.
  double uniform();

  /// Standard normal via Box-Muller; draws two uniforms every other call.
  double normal();

  /// Index in [0,n) distributed according to the probability row `p`
  /// (assumed nonnegative, summing to one).  Ties the top of the CDF to the
  /// last index with positive mass so floating point tails cannot yield an
  /// out-of-range draw.
  int categorical(const double* p, int n);
  int categorical(const Eigen::Ref<const Eigen::VectorXd>& p);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

 private:
  void refill();

  std::uint64_t seed_ = 0;
  std::uint64_t stream_ = 0;
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> buf_{};
  int pos_ = 4;
  bool has_cached_normal_ = false;
  double cached_normal_ = 0.0;
};

/// One Philox4x32-10 block, exposed for known-answer tests.
std::array<std::uint32_t, 4> philox4x32(const std::array<std::uint32_t, 4>& counter,
                                        const std::array<std::uint32_t, 2>& key);

}  // namespace mdpstat
