#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ldsb/datasets.hpp"
#include "ldsb/linalg.hpp"
#include "ldsb/rng.hpp"

namespace ldsb {

// Arc-cosine kernel profile (1/pi)(2u(pi - acos u) + sqrt(1 - u^2)).
// Inputs within 1e-9 of [-1, 1] are clamped; anything further throws.
double kappa(double u);

// K(x, x') = |x| |x'| kappa(<x, x'> / (|x| |x'|)); zero when either is zero.
double ntk_kernel(std::span<const double> x, std::span<const double> xp);

// Closed-form kernel max-margin solution on the point-mass dataset with a
// bias coordinate: positives (gamma, s, 1) for every s in {-1, 1}^(d-1), one
// negative (-gamma, 0, ..., 0, 1). Every positive carries dual weight
// a = a_tilde / 2^(d-1), the negative carries b_dual.
struct NTKSetup {
  std::size_t d = 0;
  double gamma = 0.0;
  double rho1 = 0.0;
  double rho2 = 0.0;
  Vector beta;     // beta[0..d-1] positive/positive, beta[d] positive/negative
  Vector weights;  // C(d-1, i) / 2^(d-1), i = 0..d-1
  double xi = 0.0;
  double a_tilde = 0.0;
  double b_dual = 0.0;

  // a itself; underflows to 0 for large d.
  double a() const;
};

NTKSetup build_setup(std::size_t d, double gamma);

// f(x) / |x| at x = (zeta, s, 1) for any sign pattern s.
double margin_fn_pos(const NTKSetup& setup, double zeta);
// f(x) / |x| at x = (zeta, 0, ..., 0, 1).
double margin_fn_neg(const NTKSetup& setup, double zeta);

enum class Base { Pos, Neg };

// Bisection on the sign change of the selected margin function in [lo, hi],
// stopping once the bracket is narrower than tol. Returns the midpoint.
double threshold_scan(const NTKSetup& setup, Base base, double lo, double hi, double tol);

// Dense cross-check on the materialized dataset.
struct DenseDualCheck {
  std::size_t n = 0;
  // max |y_i f(x_i) - 1| with the closed-form duals.
  double support_residual_max = 0.0;
  // max relative difference between closed-form and solved duals.
  double dual_rel_diff_max = 0.0;
  // "cholesky" or "cg".
  std::string solver;
  std::size_t cg_iterations = 0;
};

DenseDualCheck dense_dual_check(std::size_t d, double gamma);

// Gram matrix of the rows of X under ntk_kernel.
Matrix ntk_gram(const Matrix& X);

// Solves K alpha = y for symmetric positive definite K. Cholesky when
// n <= cholesky_limit, conjugate gradients otherwise.
struct GramSolve {
  Vector alpha;
  std::string solver;
  std::size_t iterations = 0;
};
GramSolve solve_gram(const Matrix& K, const Vector& y, std::size_t cholesky_limit = 600, double tol = 1e-14);

struct NTKReport {
  std::size_t d = 0;
  double gamma = 0.0;
  double xi = 0.0;
  double a_tilde = 0.0;
  double b_dual = 0.0;
  std::optional<double> pos_crossing;
  double neg_at_0 = 0.0;
  double neg_at_073 = 0.0;
  double support_vector_residual_max = 0.0;

  std::string to_json() const;
};

NTKReport ntk_report(std::size_t d, double gamma);

// Rich regime: g(w, b, a) = (a/2) [E_s phi(gamma w_0 + b + sum_{i>=1} s_i w_i)
// - phi(b - gamma w_0)] with phi = ReLU and s uniform on {-1, 1}^(d-1).
// Exact enumeration; d > 24 throws TooLarge.
double rich_dual_value(std::span<const double> w, double b, double a, double gamma, std::size_t d);

struct RichDualEstimate {
  double value = 0.0;
  double std_error = 0.0;
};
// Monte-Carlo estimate for any d.
RichDualEstimate rich_dual_value_sampled(std::span<const double> w, double b, double a, double gamma,
                                         std::size_t d, std::size_t samples, Rng& rng);

struct RichNeuron {
  Vector w;
  double b = 0.0;
  double a = 0.0;
};

// theta_1 (sign +1) and theta_2 (sign -1).
RichNeuron rich_theta(double gamma, std::size_t d, int sign);

struct RichMaximizerReport {
  double g_theta1 = 0.0;
  double g_theta2 = 0.0;
  double expected = 0.0;  // sqrt(1 + gamma^2) / 4
  double max_random = 0.0;
  double random_margin = 0.0;  // g_theta1 - max_random
  double max_perturbed = 0.0;
  bool perturbations_lower = false;
};

RichMaximizerReport rich_maximizer_check(double gamma, std::size_t d, std::size_t num_random, Rng& rng,
                                         std::size_t num_tangents = 100, double eps = 1e-3);

// y f(x) for every row under the two-neuron network of nu*.
Vector nustar_margins(double gamma, const LabeledDataset& data);
double rich_margin_of_nustar(double gamma, const LabeledDataset& data);

}  // namespace ldsb
