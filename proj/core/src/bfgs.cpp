#include "sugg/bfgs.hpp"

#include <algorithm>
#include <cmath>

#include "sugg/error.hpp"

namespace sugg::optim {
namespace {

using Vec = std::vector<double>;

double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double inf_norm(const Vec& a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

// Row-major dense n x n matrix.
struct Matrix {
  std::size_t n;
  Vec a;
  explicit Matrix(std::size_t size) : n(size), a(size * size, 0.0) { set_identity(1.0); }
  void set_identity(double scale) {
    std::fill(a.begin(), a.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) a[i * n + i] = scale;
  }
  double& operator()(std::size_t i, std::size_t j) { return a[i * n + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a[i * n + j]; }
  Vec times(const Vec& v) const {
    Vec out(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) out[i] += a[i * n + j] * v[j];
    return out;
  }
};

// H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T
void bfgs_update(Matrix& h, const Vec& s, const Vec& y, double rho) {
  const std::size_t n = h.n;
  const Vec hy = h.times(y);
  const double yhy = dot(y, hy);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      h(i, j) += -rho * (s[i] * hy[j] + hy[i] * s[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
}

}  // namespace

BfgsResult maximize(const ValueAndGradient& f, Vec x0, const BfgsOptions& opt) {
  const std::size_t n = x0.size();
  if (n == 0) throw InvalidArgument("BFGS needs at least one variable");

  // Minimize g(x) = -f(x) internally.
  std::size_t evaluations = 0;
  const auto eval = [&](const Vec& x, Vec& grad) {
    ++evaluations;
    const double v = -f(x, grad);
    for (double& gi : grad) gi = -gi;
    return v;
  };

  Vec x = std::move(x0);
  Vec g(n);
  double fx = eval(x, g);
  if (!std::isfinite(fx)) throw InvalidArgument("objective is not finite at the starting point");

  BfgsResult best;
  best.x = x;
  best.value = -fx;
  best.gradient = g;

  Matrix h(n);
  bool fresh = true;  // h is a (scaled) identity with no curvature yet
  std::size_t it = 0;
  for (; it < opt.max_iterations; ++it) {
    if (inf_norm(g) < opt.gradient_tolerance) {
      best.converged = true;
      break;
    }
    Vec d = h.times(g);
    for (double& v : d) v = -v;
    double slope = dot(g, d);
    if (!(slope < 0.0)) {
      h.set_identity(1.0);
      fresh = true;
      d = g;
      for (double& v : d) v = -v;
      slope = dot(g, d);
    }
    double alpha = 1.0;
    if (fresh) {
      const double len = std::sqrt(dot(d, d));
      if (len > opt.max_initial_step) alpha = opt.max_initial_step / len;
    }

    Vec xn(n), gn(n);
    double fn = 0.0;
    bool accepted = false;
    for (std::size_t ls = 0; ls < opt.max_line_search; ++ls) {
      for (std::size_t i = 0; i < n; ++i) xn[i] = x[i] + alpha * d[i];
      fn = eval(xn, gn);
      if (std::isfinite(fn) && fn <= fx + opt.armijo * alpha * slope) {
        accepted = true;
        break;
      }
      alpha *= opt.backtrack;
    }
    if (!accepted) {
      if (fresh) break;
      h.set_identity(1.0);
      fresh = true;
      continue;
    }

    Vec s(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = xn[i] - x[i];
      y[i] = gn[i] - g[i];
    }
    const double sy = dot(s, y);
    if (sy > 1e-12 * std::sqrt(dot(s, s) * dot(y, y))) {
      if (fresh) {
        h.set_identity(sy / dot(y, y));
        fresh = false;
      }
      bfgs_update(h, s, y, 1.0 / sy);
    }
    x = std::move(xn);
    g = std::move(gn);
    fx = fn;
    if (-fx > best.value) {
      best.x = x;
      best.value = -fx;
      best.gradient = g;
    }
  }
  for (double& v : best.gradient) v = -v;
  if (!best.converged) best.converged = inf_norm(best.gradient) < opt.gradient_tolerance;
  best.iterations = it;
  best.evaluations = evaluations;
  return best;
}

ScalarResult golden_section_maximize(const std::function<double(double)>& f, double lo, double hi,
                                     double tol) {
  if (!(lo < hi)) throw InvalidArgument("golden-section bracket must satisfy lo < hi");
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  ScalarResult r;
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  r.evaluations = 2;
  while (b - a > tol) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
    ++r.evaluations;
  }
  if (fc >= fd) {
    r.x = c;
    r.value = fc;
  } else {
    r.x = d;
    r.value = fd;
  }
  return r;
}

}  // namespace sugg::optim
