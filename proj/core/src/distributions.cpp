#include "gmmpower/distributions.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <limits>
#include <string>

#include "gmmpower/error.hpp"

namespace gmmpower {
namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

void check_df(int df) {
  if (df < 1) throw InvalidParameter("degrees of freedom must be >= 1, got " + std::to_string(df));
}

void check_ncp(double ncp) {
  if (!(ncp >= 0.0) || !std::isfinite(ncp))
    throw InvalidParameter("noncentrality must be finite and >= 0, got " + std::to_string(ncp));
}

void check_probability(double p) {
  if (!(p > 0.0 && p < 1.0)) throw InvalidParameter("probability must lie in (0, 1), got " + std::to_string(p));
}

}  // namespace

RngStream::RngStream(std::uint64_t master_seed, std::uint64_t stream_id)
    : master_seed_(master_seed), stream_id_(stream_id) {
  std::uint64_t key = master_seed;
  std::uint64_t mixed = splitmix64(key);
  std::uint64_t sid = stream_id ^ 0x6a09e667f3bcc908ULL;
  mixed ^= splitmix64(sid) * 0xd1342543de82ef95ULL;
  for (auto& word : state_) word = splitmix64(mixed);
}

std::uint64_t RngStream::next_u64() {
  const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
  const std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

double RngStream::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double RngStream::standard_normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double scale = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * scale;
  has_spare_ = true;
  return u * scale;
}

double normal_sample(RngStream& stream, double mean, double sd) {
  if (!(sd >= 0.0)) throw InvalidParameter("standard deviation must be >= 0, got " + std::to_string(sd));
  if (sd == 0.0) return mean;
  return mean + sd * stream.standard_normal();
}

void ChiSqParams::validate() const {
  check_df(df);
  check_ncp(ncp);
  check_probability(alpha);
}

double chisq_cdf(int df, double x) {
  check_df(df);
  if (std::isnan(x)) throw InvalidParameter("chi-square argument is NaN");
  if (x <= 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  return boost::math::gamma_p(0.5 * df, 0.5 * x);
}

double chisq_quantile(int df, double p) {
  check_df(df);
  check_probability(p);
  return 2.0 * boost::math::gamma_p_inv(0.5 * df, p);
}

double noncentral_chisq_cdf(int df, double ncp, double x) {
  check_df(df);
  check_ncp(ncp);
  if (std::isnan(x)) throw InvalidParameter("chi-square argument is NaN");
  if (x <= 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  if (ncp == 0.0) return chisq_cdf(df, x);

  // Sum outward from the Poisson mode. P(a+1, y) = P(a, y) - y^a e^-y / Gamma(a+1)
  // lets both directions advance by recurrence instead of a fresh incomplete
  // gamma evaluation per term.
  constexpr double kTailWeight = 1e-12;
  const double mu = 0.5 * ncp;
  const double y = 0.5 * x;
  const double a0 = 0.5 * df;
  const auto mode = static_cast<long>(std::floor(mu));

  const double w_mode = std::exp(-mu + static_cast<double>(mode) * std::log(mu) -
                                 std::lgamma(static_cast<double>(mode) + 1.0));
  const double p_mode = boost::math::gamma_p(a0 + static_cast<double>(mode), y);
  // y^a e^-y / Gamma(a+1) at a = a0 + mode.
  const double t_mode = boost::math::gamma_p_derivative(a0 + static_cast<double>(mode) + 1.0, y);

  double weight_sum = w_mode;
  double total = w_mode * p_mode;

  // Downward: k = mode-1, ..., 0.
  {
    double w = w_mode;
    double p = p_mode;
    double t = t_mode;  // term linking a_k and a_k + 1
    for (long k = mode; k > 0; --k) {
      const double a = a0 + static_cast<double>(k);
      t = t * a / y;  // now links a-1 and a
      p = p + t;
      w = w * static_cast<double>(k) / mu;
      weight_sum += w;
      total += w * std::min(p, 1.0);
      if (w < kTailWeight * 1e-4 && static_cast<double>(k) < mu) break;
    }
  }

  // Upward: k = mode+1, ... until the untouched weight is below the tail bound.
  {
    double w = w_mode;
    double p = p_mode;
    double t = t_mode;
    const long limit = mode + 100 + static_cast<long>(50.0 * std::sqrt(mu + 1.0));
    for (long k = mode; k < limit && 1.0 - weight_sum >= kTailWeight; ++k) {
      const double a = a0 + static_cast<double>(k);
      p = p - t;
      t = t * y / (a + 1.0);
      w = w * mu / static_cast<double>(k + 1);
      weight_sum += w;
      total += w * std::max(p, 0.0);
    }
  }
  if (total < 0.0) return 0.0;
  if (total > 1.0) return 1.0;
  return total;
}

double noncentral_chisq_quantile(int df, double ncp, double p, double tolerance) {
  check_df(df);
  check_ncp(ncp);
  check_probability(p);
  if (!(tolerance > 0.0)) throw InvalidParameter("quantile tolerance must be > 0");
  if (ncp == 0.0) return chisq_quantile(df, p);

  double lo = 0.0;
  double hi = df + ncp + 10.0 * std::sqrt(2.0 * (df + 2.0 * ncp));
  while (noncentral_chisq_cdf(df, ncp, hi) < p) {
    lo = hi;
    hi *= 2.0;
  }
  while (hi - lo > tolerance) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (noncentral_chisq_cdf(df, ncp, mid) < p)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

double power_from_ncp(const ChiSqParams& params) {
  params.validate();
  const double critical = chisq_quantile(params.df, 1.0 - params.alpha);
  return 1.0 - noncentral_chisq_cdf(params.df, params.ncp, critical);
}

}  // namespace gmmpower
