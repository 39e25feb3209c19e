#include "hgt/grammar.hpp"

#include <cmath>

namespace hgt {

std::string_view to_string(Verdict v) noexcept {
  switch (v) {
    case Verdict::consistent: return "consistent";
    case Verdict::borderline: return "borderline";
    case Verdict::inconsistent: return "inconsistent";
  }
  return "unknown";
}

Eigen::MatrixXd expectation_matrix(const Grammar& g) {
  const auto n = static_cast<Eigen::Index>(g.num_nonterminals());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (RuleId r : g.binary_rules()) {
    const Rule& rule = g.rule(r);
    m(rule.lhs, rule.left) += g.prob(r);
    m(rule.lhs, rule.right) += g.prob(r);
  }
  return m;
}

ConsistencyReport check_consistency(const Grammar& g, double tol,
                                    const PowerIterationOptions& opts) {
  // Iterate on M + I: for a nonnegative M its Perron root rho becomes the
  // strictly dominant eigenvalue rho + 1, so periodic M still converges.
  const Eigen::MatrixXd m = expectation_matrix(g);
  const Eigen::MatrixXd shifted = m + Eigen::MatrixXd::Identity(m.rows(), m.cols());

  ConsistencyReport rep;
  rep.converged = false;
  Eigen::VectorXd v = Eigen::VectorXd::Ones(m.rows());
  double estimate = 0.0;
  for (int it = 1; it <= opts.max_iterations; ++it) {
    Eigen::VectorXd w = shifted * v;
    const double next = w.lpNorm<Eigen::Infinity>() / v.lpNorm<Eigen::Infinity>();
    v = w / w.lpNorm<Eigen::Infinity>();
    rep.iterations = it;
    if (it > 1 && std::abs(next - estimate) <= opts.convergence_tol * std::max(1.0, next)) {
      estimate = next;
      rep.converged = true;
      break;
    }
    estimate = next;
  }

  rep.spectral_radius = std::max(0.0, estimate - 1.0);
  if (!rep.converged || std::abs(rep.spectral_radius - 1.0) <= tol)
    rep.verdict = Verdict::borderline;
  else if (rep.spectral_radius < 1.0)
    rep.verdict = Verdict::consistent;
  else
    rep.verdict = Verdict::inconsistent;
  return rep;
}

}  // namespace hgt
