#pragma once

// Shared test helpers: random expression corpus and finite-difference oracles.

#include <algorithm>
#include <cmath>
#include <set>
#include <random>
#include <string>
#include <vector>

#include "ioext/expr.hpp"
#include "ioext/lie.hpp"
#include "ioext/matrix.hpp"
#include "ioext/models.hpp"
#include "ioext/simulate.hpp"

namespace ioext::testing {

inline Expr random_expr(std::mt19937_64& rng, const std::vector<std::string>& symbols, int depth) {
  std::uniform_int_distribution<int> pick(0, depth <= 0 ? 1 : 8);
  std::uniform_int_distribution<std::size_t> sym(0, symbols.size() - 1);
  std::uniform_int_distribution<int> small(-3, 3);
  switch (pick(rng)) {
    case 0: {
      int c = small(rng);
      return Expr::constant(c == 0 ? 0.5 : c);
    }
    case 1:
      return Expr::symbol(symbols[sym(rng)]);
    case 2:
      return random_expr(rng, symbols, depth - 1) + random_expr(rng, symbols, depth - 1);
    case 3:
      return random_expr(rng, symbols, depth - 1) * random_expr(rng, symbols, depth - 1);
    case 4:
      return random_expr(rng, symbols, depth - 1) - random_expr(rng, symbols, depth - 1);
    case 5:
      return Expr::sin(random_expr(rng, symbols, depth - 1));
    case 6:
      return Expr::cos(random_expr(rng, symbols, depth - 1));
    case 7: {
      std::uniform_int_distribution<int> k(2, 3);
      return Expr::pow(random_expr(rng, symbols, depth - 1), k(rng));
    }
    default:
      // Denominator bounded away from zero.
      return random_expr(rng, symbols, depth - 1) /
             (Expr::constant(3.0) + Expr::sin(random_expr(rng, symbols, depth - 1)));
  }
}

inline std::vector<Expr> expression_corpus(std::uint64_t seed, std::size_t count,
                                           const std::vector<std::string>& symbols) {
  std::mt19937_64 rng(seed);
  std::vector<Expr> out;
  out.reserve(count);
  while (out.size() < count) out.push_back(random_expr(rng, symbols, 4));
  return out;
}

inline Assignment random_point(std::mt19937_64& rng, const std::vector<std::string>& symbols, double box = 2.0) {
  std::uniform_real_distribution<double> d(-box, box);
  Assignment a;
  for (const auto& s : symbols) a[s] = d(rng);
  return a;
}

inline double relative_error(double got, double want) {
  return std::abs(got - want) / std::max(1.0, std::abs(want));
}

// Central difference of e along direction `field` (values) at point a.
inline double directional_fd(const Expr& e, const std::vector<std::string>& states,
                             const std::vector<double>& field, Assignment a, double h = 1e-6) {
  Assignment plus = a, minus = a;
  for (std::size_t i = 0; i < states.size(); ++i) {
    plus[states[i]] += h * field[i];
    minus[states[i]] -= h * field[i];
  }
  return (eval_expr(e, plus) - eval_expr(e, minus)) / (2 * h);
}

// Leibniz (permutation-sum) determinant of a dense numeric matrix.
inline double leibniz_det(const Eigen::MatrixXd& m) {
  int n = static_cast<int>(m.rows());
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  double total = 0.0;
  do {
    int inversions = 0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (perm[i] > perm[j]) ++inversions;
    double p = inversions % 2 ? -1.0 : 1.0;
    for (int i = 0; i < n; ++i) p *= m(i, perm[i]);
    total += p;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return total;
}

// Random linear system with x-dependent H: dx = A x + b u + H(x) w, y1 = c x,
// y2 = h x.
inline SystemModel symbolic_h_system(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> coef(-3, 3);
  SystemModel m = random_linear_case1(rng, false);
  m.id = "symbolic_h";
  for (int i = 0; i < 3; ++i) {
    Expr xi = Expr::symbol(m.states[(i + 1) % 3]);
    m.H(i, 0) = simplify(m.H(i, 0) + Expr::constant(coef(rng) * 0.5) * Expr::sin(xi));
  }
  return m;
}

// Drives u_ext = Gamma^-1(-phi + v) and checks y^(rho) = v using the plant
// equations directly: the top derivative is the gradient of the
// (rho-1)-th output derivative along the closed-loop vector field.
inline double substitution_error(const ClosedLoop& loop, int samples, std::uint64_t seed) {
  LoopEvaluator ev(loop);
  std::mt19937_64 rng(seed);
  SamplingOptions sopt;
  std::set<std::string> plant(loop.plant_states.begin(), loop.plant_states.end());
  std::normal_distribution<double> nd;
  double worst = 0.0;
  int done = 0;
  while (done < samples) {
    Assignment a = sample_point(rng, plant, loop.singular, sopt);
    std::vector<double> xs, rs(ev.reference_size());
    for (const auto& s : loop.plant_states) xs.push_back(a.at(s));
    for (auto& r : rs) r = nd(rng);
    ev.load_states(xs, rs);
    Eigen::MatrixXd G = ev.gamma();
    if (std::abs(G.determinant()) < 1e-3) continue;
    Eigen::VectorXd v(G.rows());
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = nd(rng);
    Eigen::VectorXd u = G.partialPivLu().solve(-ev.phi() + v);
    std::vector<double> uv(u.data(), u.data() + u.size());
    ev.load(xs, rs, uv);
    std::vector<double> dx(ev.plant_size()), dr(ev.reference_size());
    ev.derivative(dx, dr);
    std::vector<double> y = ev.outputs();
    for (std::size_t c = 0; c < loop.rho.size(); ++c) {
      double top;
      if (loop.rho[c] == 0) {
        top = y[c];
      } else {
        const Expr& e = loop.output_derivatives[c][loop.rho[c] - 1];
        top = 0.0;
        for (std::size_t i = 0; i < loop.plant_states.size(); ++i)
          top += eval_expr(differentiate(e, loop.plant_states[i]), a) * dx[i];
      }
      worst = std::max(worst, relative_error(top, v(static_cast<Eigen::Index>(c))));
    }
    ++done;
  }
  return worst;
}

}  // namespace ioext::testing
