#include "bilevel/schedule.hpp"

#include <algorithm>
#include <cmath>

namespace bilevel {

std::string_view strategy_name(Strategy s) {
  switch (s) {
    case Strategy::s1:
      return "s1";
    case Strategy::s2:
      return "s2";
    case Strategy::s3:
      return "s3";
    case Strategy::sc:
      return "sc";
  }
  return "unknown";
}

std::optional<Strategy> parse_strategy(std::string_view name) {
  for (Strategy s : {Strategy::s1, Strategy::s2, Strategy::s3, Strategy::sc})
    if (name == strategy_name(s)) return s;
  return std::nullopt;
}

namespace {

double ipow(double x, int n) {
  double r = 1.0;
  for (int i = 0; i < n; ++i) r *= x;
  return r;
}

}  // namespace

StepSizes schedule_step_sizes(const ScheduleParams& sp, std::size_t k) {
  const double d = static_cast<double>(k) + 1.0;
  const double beta_k = sp.beta_decay ? sp.beta * std::pow(d, -sp.tau / 2.0) : sp.beta;

  StepSizes s;
  s.beta = beta_k;
  if (sp.strategy == Strategy::sc) {
    s.mu = 0.0;
    s.eta = sp.eta_bar * std::pow(d, -sp.tau / 2.0) * beta_k;
    s.alpha = sp.alpha_gain * sp.alpha_bar * std::pow(d, -sp.tau) * beta_k;
    return s;
  }

  s.mu = std::clamp(sp.mu_bar * std::pow(d, -sp.p), 0.0, 1.0);
  const double decay_eta = std::pow(d, -sp.tau / 2.0);
  const double decay_alpha = std::pow(d, -1.5 * sp.tau);
  switch (sp.strategy) {
    case Strategy::s1:
      s.eta = decay_eta * beta_k * s.mu * s.mu;
      s.alpha = decay_alpha * beta_k * ipow(s.mu, 7);
      break;
    case Strategy::s2:
      s.eta = decay_eta * beta_k * s.mu;
      s.alpha = decay_alpha * beta_k * ipow(s.mu, 5);
      break;
    case Strategy::s3:
      s.eta = decay_eta * beta_k;
      s.alpha = decay_alpha * beta_k * ipow(s.mu, 3);
      break;
    case Strategy::sc:
      break;
  }
  s.alpha *= sp.alpha_gain;
  return s;
}

std::vector<std::string> schedule_errors(const ScheduleParams& sp) {
  std::vector<std::string> errs;
  const auto positive = [&](double v, const char* name) {
    if (!(std::isfinite(v) && v > 0.0))
      errs.push_back(std::string(name) + " must be positive and finite");
  };
  positive(sp.tau, "tau");
  positive(sp.beta, "beta");
  positive(sp.alpha_gain, "alpha-gain");
  if (sp.strategy == Strategy::sc) {
    positive(sp.eta_bar, "eta-bar");
    positive(sp.alpha_bar, "alpha-bar");
  } else {
    positive(sp.p, "p");
    if (!(std::isfinite(sp.mu_bar) && sp.mu_bar > 0.0 && sp.mu_bar <= 1.0))
      errs.push_back("mu-bar must lie in (0, 1]");
  }
  return errs;
}

std::vector<std::string> schedule_warnings(const ScheduleParams& sp,
                                           const ProblemMetadata* meta) {
  std::vector<std::string> warns;
  double p_max = 0.0, tau_max = 0.0;
  switch (sp.strategy) {
    case Strategy::s1:
      p_max = 1.0 / 10.0;
      tau_max = 1.0 / 30.0;
      break;
    case Strategy::s2:
      p_max = 1.0 / 6.0;
      tau_max = 1.0 / 18.0;
      break;
    case Strategy::s3:
      p_max = 1.0 / 4.0;
      tau_max = 1.0 / 12.0;
      break;
    case Strategy::sc:
      break;
  }
  if (sp.strategy != Strategy::sc) {
    if (p_max > 0.0 && sp.p >= p_max)
      warns.push_back("p = " + std::to_string(sp.p) + " is outside the range (0, " +
                      std::to_string(p_max) + ") covered by the convergence analysis");
    if (tau_max > 0.0 && sp.tau >= tau_max)
      warns.push_back("tau = " + std::to_string(sp.tau) +
                      " is outside the range (0, " + std::to_string(tau_max) +
                      ") covered by the convergence analysis");
    if (sp.mu_bar > 0.5)
      warns.push_back("mu-bar = " + std::to_string(sp.mu_bar) +
                      " exceeds the 1/2 assumed by the convergence analysis");
  }
  if (meta != nullptr) {
    const auto lf = meta->lipschitz.find("L_F_y2");
    const auto lg = meta->lipschitz.find("L_f_y2");
    if (lf != meta->lipschitz.end() && lg != meta->lipschitz.end()) {
      const double bound = 1.0 / (lf->second + lg->second);
      if (sp.beta > bound)
        warns.push_back("beta = " + std::to_string(sp.beta) +
                        " exceeds the smoothness bound 1/(L_F_y2 + L_f_y2) = " +
                        std::to_string(bound));
    }
  }
  return warns;
}

}  // namespace bilevel
