#include "npe/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <stdexcept>

#include "npe/mathutil.hpp"

namespace npe::diagnostics {

namespace {

families::HeadParams params_at(const nn::Network& net, const families::HeadSpec& head,
                               const Eigen::MatrixXd& z, Eigen::Index i) {
  return families::make_params(head, net.forward(z.col(i)));
}

void check_sizes(const Eigen::MatrixXd& z, const Eigen::VectorXd& gamma) {
  if (z.cols() != gamma.size())
    throw std::invalid_argument("diagnostics: z columns and gamma length differ");
  if (gamma.size() == 0) throw std::invalid_argument("diagnostics: empty evaluation set");
}

}  // namespace

double log_score(const nn::Network& net, const families::HeadSpec& head,
                 const Eigen::MatrixXd& z, const Eigen::VectorXd& gamma) {
  check_sizes(z, gamma);
  double total = 0.0;
  for (Eigen::Index i = 0; i < gamma.size(); ++i)
    total += families::log_density(head, params_at(net, head, z, i), gamma[i]);
  return total;
}

std::vector<double> pit(const nn::Network& net, const families::HeadSpec& head,
                        const Eigen::MatrixXd& z, const Eigen::VectorXd& gamma) {
  check_sizes(z, gamma);
  if (head.discrete())
    throw std::invalid_argument("pit: use randomized_pit for discrete families");
  std::vector<double> out(static_cast<std::size_t>(gamma.size()));
  for (Eigen::Index i = 0; i < gamma.size(); ++i)
    out[static_cast<std::size_t>(i)] = families::cdf(head, params_at(net, head, z, i), gamma[i]);
  return out;
}

std::vector<double> randomized_pit(const nn::Network& net, const families::HeadSpec& head,
                                   const Eigen::MatrixXd& z, const Eigen::VectorXd& gamma,
                                   Rng& rng) {
  check_sizes(z, gamma);
  if (!head.discrete())
    throw std::invalid_argument("randomized_pit: family is continuous, use pit");
  std::vector<double> out(static_cast<std::size_t>(gamma.size()));
  for (Eigen::Index i = 0; i < gamma.size(); ++i) {
    auto params = params_at(net, head, z, i);
    double hi = families::cdf(head, params, gamma[i]);
    double lo = gamma[i] >= 1.0 ? families::cdf(head, params, gamma[i] - 1.0) : 0.0;
    out[static_cast<std::size_t>(i)] = rng.uniform(lo, hi);
  }
  return out;
}

KsGate ks_gate(const std::vector<double>& pit_values, double threshold) {
  KsGate gate;
  gate.statistic = ks_uniform(pit_values);
  gate.threshold = threshold;
  gate.pass = gate.statistic < threshold;
  return gate;
}

BinaryMetrics binary_metrics(const std::vector<double>& prob, const std::vector<double>& truth) {
  if (prob.size() != truth.size() || prob.empty())
    throw std::invalid_argument("binary_metrics: need equal-length nonempty inputs");
  BinaryMetrics m;
  const auto n = static_cast<double>(prob.size());
  for (std::size_t i = 0; i < prob.size(); ++i) {
    double p = std::clamp(prob[i], 1e-12, 1.0 - 1e-12);
    bool y = truth[i] >= 0.5;
    m.cross_entropy += y ? -std::log(p) : -std::log1p(-p);
    m.brier += (p - (y ? 1.0 : 0.0)) * (p - (y ? 1.0 : 0.0));
    m.class_accuracy += ((p > 0.5) == y) ? 1.0 : 0.0;
    m.class_accuracy_alt += (p < 0.5) ? 1.0 : 0.0;
  }
  m.cross_entropy /= n;
  m.brier /= n;
  m.class_accuracy /= n;
  m.class_accuracy_alt /= n;
  return m;
}

double median_of(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median_of: empty input");
  std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid),
                   values.end());
  double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  double lower =
      *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

MadCoverage mad_and_coverage(const nn::Network& net, const families::HeadSpec& head,
                             const Eigen::MatrixXd& z, const Eigen::VectorXd& truth,
                             double level) {
  check_sizes(z, truth);
  const auto n = truth.size();
  std::vector<double> med(static_cast<std::size_t>(n)), lo(static_cast<std::size_t>(n)),
      hi(static_cast<std::size_t>(n)), tr(static_cast<std::size_t>(n));
  const double tail = 0.5 * (1.0 - level);
  for (Eigen::Index i = 0; i < n; ++i) {
    auto params = params_at(net, head, z, i);
    med[static_cast<std::size_t>(i)] = families::quantile(head, params, 0.5);
    lo[static_cast<std::size_t>(i)] = families::quantile(head, params, tail);
    hi[static_cast<std::size_t>(i)] = families::quantile(head, params, 1.0 - tail);
    tr[static_cast<std::size_t>(i)] = truth[i];
  }
  return mad_and_coverage_from_intervals(med, lo, hi, tr, level);
}

MadCoverage mad_and_coverage_from_intervals(const std::vector<double>& median,
                                            const std::vector<double>& lo,
                                            const std::vector<double>& hi,
                                            const std::vector<double>& truth, double level) {
  if (median.size() != truth.size() || lo.size() != truth.size() || hi.size() != truth.size() ||
      truth.empty())
    throw std::invalid_argument("mad_and_coverage: need equal-length nonempty inputs");
  MadCoverage result;
  result.level = level;
  std::vector<double> abs_err(truth.size());
  long covered = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    abs_err[i] = std::abs(median[i] - truth[i]);
    if (lo[i] <= truth[i] && truth[i] <= hi[i]) ++covered;
  }
  result.mad = median_of(std::move(abs_err));
  result.coverage = static_cast<double>(covered) / static_cast<double>(truth.size());
  return result;
}

void write_report_text(const CalibrationReport& report, std::ostream& os) {
  os << "calibration report (ks threshold " << report.ks_threshold << ")\n";
  for (const auto& t : report.targets) {
    os << "  " << t.target << " [" << t.family << (t.discrete ? ", randomized pit" : "")
       << "] n=" << t.n << " avg_log_score=" << t.log_score << " ks=" << t.ks_statistic
       << (t.ks_pass ? " PASS" : " FAIL") << "\n";
  }
  os << (report.all_pass ? "all targets pass" : "some targets FAIL") << "\n";
}

void write_report_csv(const CalibrationReport& report, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open report file for writing: " + path);
  os << "target,family,n,avg_log_score,ks_statistic,ks_threshold,ks_pass,discrete\n";
  os.precision(12);
  for (const auto& t : report.targets)
    os << t.target << "," << t.family << "," << t.n << "," << t.log_score << ","
       << t.ks_statistic << "," << report.ks_threshold << "," << (t.ks_pass ? 1 : 0) << ","
       << (t.discrete ? 1 : 0) << "\n";
}

void write_pit_csv(const std::vector<double>& pit_values, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open pit file for writing: " + path);
  std::vector<double> sorted = pit_values;
  std::sort(sorted.begin(), sorted.end());
  os << "pit,uniform_quantile\n";
  os.precision(12);
  const auto n = static_cast<double>(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i)
    os << sorted[i] << "," << (static_cast<double>(i) + 0.5) / n << "\n";
}

}  // namespace npe::diagnostics
