#pragma once

// Sampling oracle: i.i.d. draws of Z_t assembled from the jump decomposition,
// and goodness-of-fit against Fourier-inverted densities.

#include <array>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "levykb/fourier_density.hpp"
#include "levykb/measure.hpp"

namespace levykb {

/// Philox4x32-10 counter generator. Draw i of a run uses the stream keyed by
/// (seed, i), so any index range can be generated independently.
class Philox {
 public:
  using result_type = std::uint32_t;
  Philox(std::uint64_t seed, std::uint64_t stream);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return 0xffffffffu; }
  result_type operator()();
  /// Uniform on the open interval (0, 1), 53 random bits.
  double uniform();

  static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key);

 private:
  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> ctr_;
  std::array<std::uint32_t, 4> buf_{};
  int used_ = 4;
};

enum class SamplerScheme { GaussianApprox, DropSmall };
std::string to_string(SamplerScheme s);
SamplerScheme scheme_from_string(const std::string& s);

struct SamplerConfig {
  std::size_t n_samples = 1;
  std::uint64_t seed = 0;
  std::optional<double> delta;  // small-jump cut; default: largest admissible
  SamplerScheme scheme = SamplerScheme::GaussianApprox;
  unsigned threads = 0;  // 0: hardware concurrency
};

/// sigma(delta) = sqrt(t int_{|u| <= delta} u^2 mu(du)).
double small_jump_sigma(const LevyMeasure& mu, double t, double delta);

/// Largest delta <= 1/rho_t on a quarter-octave ladder with sigma(delta)/delta >= 5.
double default_delta(const LevyMeasure& mu, double t);

struct SampleRun {
  std::vector<double> samples;
  double t = 0.0;
  double delta = 0.0;
  double sigma_small = 0.0;
  double jump_rate = 0.0;   // t mu(|u| > delta), mean number of explicit jumps
  double shift = 0.0;       // deterministic part: -t a - compensator
  SamplerConfig config;
  std::string spec_hash;
};

/// Throws DeltaTooCoarse when the Gaussian substitution gate fails or delta > 1/rho_t.
SampleRun sample_increments(const LevyMeasure& mu, double t, const SamplerConfig& cfg);

struct SampleStats {
  double mean = 0.0;
  double stddev = 0.0;
  double median = 0.0;
  double q_lo = 0.0;  // 0.05% quantile
  double q_hi = 0.0;  // 99.95% quantile
};
SampleStats sample_stats(const std::vector<double>& samples);

struct GofResult {
  std::size_t n = 0;
  double ks_stat = 0.0;
  double cvm_stat = 0.0;
  double threshold = 0.0;  // 1.5 * 1.63 / sqrt(n)
  double missing_mass = 0.0;  // 1 - integral of the grid, split evenly between the tails
  bool pass = false;
};

/// CDF by trapezoid integration of a k = 0 full-density grid. Throws
/// GridCoverageInsufficient unless the grid spans the central 99.9% of the samples.
GofResult compare_to_density(const std::vector<double>& samples, const DensityGrid& grid);

/// Two-sample Kolmogorov-Smirnov distance.
double ks_two_sample(std::vector<double> a, std::vector<double> b);

/// Inverse-transform draws from the grid's own trapezoid CDF.
std::vector<double> sample_from_grid(const DensityGrid& grid, std::size_t n, std::uint64_t seed);

nlohmann::json run_to_json(const SampleRun& run);
nlohmann::json gof_to_json(const GofResult& g);

/// Binary dump: "LKBS", u32 version, 16-byte spec hash, t, delta, u64 seed,
/// u32 scheme, u64 n, then n doubles, all little-endian.
void write_samples(const SampleRun& run, std::ostream& os);
SampleRun read_samples(std::istream& is);

}  // namespace levykb
