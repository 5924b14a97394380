#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace sugg::optim {

/// Objective returning f(x) and writing df/dx into `grad`.
using ValueAndGradient = std::function<double(const std::vector<double>& x, std::vector<double>& grad)>;

struct BfgsOptions {
  std::size_t max_iterations = 200;
  double gradient_tolerance = 1e-6;  // infinity norm
  double armijo = 1e-4;
  double backtrack = 0.5;
  std::size_t max_line_search = 40;
  double max_initial_step = 1.0;  // first step length cap, in x units
};

struct BfgsResult {
  std::vector<double> x;      // best iterate seen
  double value = 0.0;
  std::vector<double> gradient;
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
  bool converged = false;     // gradient tolerance met
};

/// Dense inverse-Hessian BFGS with Armijo backtracking, maximizing f.
/// Curvature pairs with s.y <= 0 (kinks, plateaus) skip the update; a
/// failed line search restarts from the identity once before stopping.
BfgsResult maximize(const ValueAndGradient& f, std::vector<double> x0, const BfgsOptions& options = {});

/// Golden-section maximization of a unimodal f on [lo, hi] to width tol.
struct ScalarResult {
  double x = 0.0;
  double value = 0.0;
  std::size_t evaluations = 0;
};
ScalarResult golden_section_maximize(const std::function<double(double)>& f, double lo, double hi,
                                     double tol);

}  // namespace sugg::optim
