#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bilevel/problem.hpp"

namespace bilevel {

// Step-size laws. s1, s2 and s3 blend the inner objective with weight
// mu_k = mu_bar (k+1)^{-p} and trade how fast eta and alpha must shrink with
// mu; they target inner problems that are merely convex. sc keeps mu = 0 and
// is meant for strongly convex inner problems.
enum class Strategy { s1, s2, s3, sc };

std::string_view strategy_name(Strategy s);
std::optional<Strategy> parse_strategy(std::string_view name);

struct ScheduleParams {
  Strategy strategy = Strategy::s3;
  double p = 0.05;          // decay exponent of mu_k (s1-s3)
  double tau = 0.025;       // decay exponent of eta_k and alpha_k
  double mu_bar = 0.9;      // initial mixing weight (s1-s3)
  double beta = 0.1;        // inner step size
  bool beta_decay = false;  // beta_k = beta (k+1)^{-tau/2} when set
  double eta_bar = 1.0;     // sc only: scale on eta_k
  double alpha_bar = 1.0;   // sc only: scale on alpha_k
  // Extra multiplicative gain on alpha_k for every strategy. The decay
  // exponents are never altered, only the constant factor.
  double alpha_gain = 1.0;

  bool operator==(const ScheduleParams&) const = default;
};

struct StepSizes {
  double mu = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double eta = 0.0;
};

// Step sizes at iteration k (0-based). With d = k + 1:
//   s1: eta = d^{-tau/2} beta_k mu_k^2,  alpha = d^{-3tau/2} beta_k mu_k^7
//   s2: eta = d^{-tau/2} beta_k mu_k,    alpha = d^{-3tau/2} beta_k mu_k^5
//   s3: eta = d^{-tau/2} beta_k,         alpha = d^{-3tau/2} beta_k mu_k^3
//   sc: mu = 0, eta = eta_bar d^{-tau/2} beta_k, alpha = alpha_bar d^{-tau} beta_k
// alpha is additionally multiplied by alpha_gain; mu is clamped to [0, 1].
StepSizes schedule_step_sizes(const ScheduleParams& sp, std::size_t k);

// Hard parameter errors: non-finite or non-positive values where positivity
// is required, mu_bar outside (0, 1].
std::vector<std::string> schedule_errors(const ScheduleParams& sp);

// Soft diagnostics, never fatal: exponents outside the ranges the
// convergence analysis covers (s1: p < 1/10, tau < 1/30; s2: p < 1/6,
// tau < 1/18; s3: p < 1/4, tau < 1/12), mu_bar > 1/2, and beta above
// 1 / (L_F_y2 + L_f_y2) when the problem exposes those constants.
std::vector<std::string> schedule_warnings(const ScheduleParams& sp,
                                           const ProblemMetadata* meta = nullptr);

}  // namespace bilevel
