#pragma once

#include <array>
#include <cstdint>

namespace gmmpower {

// Reproducible random stream keyed by (master_seed, stream_id).
//
// The generator is xoshiro256** whose state is derived from both keys through
// splitmix64, so replication r of an experiment always sees the same variates no
// matter which worker thread runs it. Normal variates use the polar method on
// our own uniforms rather than std::normal_distribution, whose output is
// implementation-defined.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::uint64_t stream_id);

  std::uint64_t next_u64();
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  double standard_normal();

  std::uint64_t master_seed() const noexcept { return master_seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

 private:
  std::uint64_t master_seed_;
  std::uint64_t stream_id_;
  std::array<std::uint64_t, 4> state_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

double normal_sample(RngStream& stream, double mean, double sd);

struct ChiSqParams {
  int df = 1;
  double ncp = 0.0;
  double alpha = 0.05;

  // Throws InvalidParameter unless df >= 1, ncp >= 0 and 0 < alpha < 1.
  void validate() const;
};

double chisq_cdf(int df, double x);
double chisq_quantile(int df, double p);

// P(chi2_df(ncp) <= x) as a Poisson(ncp/2) mixture of central chi-square CDFs.
// ncp is the standard noncentrality (the mean excess of the distribution over df).
double noncentral_chisq_cdf(int df, double ncp, double x);

// Smallest x with noncentral_chisq_cdf(df, ncp, x) >= p, located by bisection
// to an absolute tolerance of `tolerance`.
double noncentral_chisq_quantile(int df, double ncp, double p, double tolerance = 1e-8);

// P(chi2_df(ncp) >= chi2_{df, 1-alpha}).
double power_from_ncp(const ChiSqParams& params);

}  // namespace gmmpower
