#pragma once

#include <Eigen/Core>

#include <iosfwd>
#include <string>
#include <vector>

#include "npe/families.hpp"
#include "npe/net.hpp"
#include "npe/rng.hpp"

namespace npe::diagnostics {

// ---------------------------------------------------------------------------
// Scoring
// ---------------------------------------------------------------------------

// Sum over records of log p(gamma_i | head params from net(z_i)); columns of
// z are records.
double log_score(const nn::Network& net, const families::HeadSpec& head, const Eigen::MatrixXd& z,
                 const Eigen::VectorXd& gamma);

// ---------------------------------------------------------------------------
// Probability integral transform
// ---------------------------------------------------------------------------

// PIT values F(gamma_i | net(z_i)) for a continuous head. For discrete heads
// use randomized_pit instead.
std::vector<double> pit(const nn::Network& net, const families::HeadSpec& head,
                        const Eigen::MatrixXd& z, const Eigen::VectorXd& gamma);

// Randomized PIT u ~ Uniform(F(gamma-1), F(gamma)) for integer-valued heads,
// with F(-1) = 0.
std::vector<double> randomized_pit(const nn::Network& net, const families::HeadSpec& head,
                                   const Eigen::MatrixXd& z, const Eigen::VectorXd& gamma,
                                   Rng& rng);

struct KsGate {
  double statistic = 0.0;  // two-sided D_n against Uniform(0,1)
  double threshold = 0.0;
  bool pass = false;
};

KsGate ks_gate(const std::vector<double>& pit_values, double threshold);

// ---------------------------------------------------------------------------
// Binary-target metrics
// ---------------------------------------------------------------------------

struct BinaryMetrics {
  double cross_entropy = 0.0;        // mean -[y log p + (1-y) log(1-p)]
  double class_accuracy = 0.0;       // mean 1{(p > 0.5) == (y == 1)}
  double class_accuracy_alt = 0.0;   // variant scoring p<0.5 as a positive call
  double brier = 0.0;                // mean (p - y)^2
};

BinaryMetrics binary_metrics(const std::vector<double>& prob, const std::vector<double>& truth);

// ---------------------------------------------------------------------------
// Point accuracy and interval coverage
// ---------------------------------------------------------------------------

struct MadCoverage {
  double mad = 0.0;       // median |posterior median - truth|
  double coverage = 0.0;  // fraction of equal-tailed intervals containing truth
  double level = 0.9;
};

// One head evaluated on many (z, truth) pairs; the interval is equal-tailed
// at `level`.
MadCoverage mad_and_coverage(const nn::Network& net, const families::HeadSpec& head,
                             const Eigen::MatrixXd& z, const Eigen::VectorXd& truth,
                             double level = 0.9);

// Same from precomputed posterior medians and interval endpoints.
MadCoverage mad_and_coverage_from_intervals(const std::vector<double>& median,
                                            const std::vector<double>& lo,
                                            const std::vector<double>& hi,
                                            const std::vector<double>& truth, double level);

double median_of(std::vector<double> values);

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct TargetReport {
  std::string target;
  std::string family;
  double log_score = 0.0;       // per-record average
  double ks_statistic = 0.0;
  bool ks_pass = true;
  bool discrete = false;
  long n = 0;
};

struct CalibrationReport {
  std::vector<TargetReport> targets;
  double ks_threshold = 0.0;
  bool all_pass = true;
};

void write_report_text(const CalibrationReport& report, std::ostream& os);
void write_report_csv(const CalibrationReport& report, const std::string& path);

// Sorted PIT values with the theoretical uniform quantile (i - 0.5)/n
// alongside, one target per file call.
void write_pit_csv(const std::vector<double>& pit_values, const std::string& path);

}  // namespace npe::diagnostics
