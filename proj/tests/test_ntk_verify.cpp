#include <cmath>
#include <numbers>

#include "doctest.h"

#include "ldsb/error.hpp"
#include "ldsb/ntk_verify.hpp"

using namespace ldsb;

namespace {

// f(x) = sum_i alpha_i K(x_i, x) over the materialized dataset.
double dense_eval(const NTKSetup& s, const LabeledDataset& D, std::span<const double> x) {
  double f = 0.0;
  for (std::size_t i = 0; i < D.n(); ++i) f += (D.y[i] == 1 ? s.a() : s.b_dual) * ntk_kernel(D.X.row(i), x);
  return f;
}

}  // namespace

TEST_CASE("kappa values") {
  CHECK(kappa(1.0) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(kappa(0.0) == doctest::Approx(1.0 / std::numbers::pi).epsilon(1e-15));
  CHECK(kappa(0.0) == doctest::Approx(0.3183099).epsilon(1e-7));
  CHECK(std::abs(kappa(-1.0)) <= 1e-15);
  CHECK(kappa(1.0 + 1e-10) == kappa(1.0));
  CHECK_THROWS_AS(kappa(1.0 + 1e-6), Error);
  CHECK_THROWS_AS(kappa(-1.1), Error);
}

TEST_CASE("kappa is bounded by 1 + u and convex") {
  const int n = 10000;
  const double h = 2.0 / n;
  double prev = kappa(-1.0), cur = kappa(-1.0 + h);
  CHECK(prev <= 1e-12);
  for (int i = 1; i < n; ++i) {
    const double u = -1.0 + i * h;
    const double next = kappa(std::min(1.0, u + h));
    CHECK(cur <= 1.0 + u + 1e-12);
    CHECK(next - 2.0 * cur + prev >= -1e-12);
    prev = cur;
    cur = next;
  }
}

TEST_CASE("ntk kernel is homogeneous and symmetric") {
  const Vector x{1.0, -2.0, 0.5}, y{0.3, 0.1, -1.0};
  CHECK(ntk_kernel(x, y) == doctest::Approx(ntk_kernel(y, x)));
  const Vector x3{3.0, -6.0, 1.5};
  CHECK(ntk_kernel(x3, y) == doctest::Approx(3.0 * ntk_kernel(x, y)));
  CHECK(ntk_kernel(x, x) == doctest::Approx(2.0 * dot(x, x)));
  CHECK(ntk_kernel(Vector(3, 0.0), y) == 0.0);
}

TEST_CASE("closed-form duals have the claimed signs") {
  for (std::size_t d : {3u, 5u, 10u, 100u, 10000u, 1000000u})
    for (double gamma : {1.0, 3.0, 7.0, 20.0}) {
      const NTKSetup s = build_setup(d, gamma);
      CHECK(s.a_tilde > 0.0);
      CHECK(s.b_dual < 0.0);
      CHECK(s.xi > 0.0);
      double total = 0.0;
      for (double w : s.weights) total += w;
      CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
  CHECK_THROWS_AS(build_setup(2, 1.0), Error);
  CHECK_THROWS_AS(build_setup(5, 0.0), Error);
}

TEST_CASE("binomial weights match direct evaluation") {
  const NTKSetup s = build_setup(11, 2.0);
  REQUIRE(s.weights.size() == 11);
  double c = 1.0;
  for (std::size_t i = 0; i < 11; ++i) {
    CHECK(s.weights[i] == doctest::Approx(c / 1024.0).epsilon(1e-14));
    c = c * static_cast<double>(10 - i) / static_cast<double>(i + 1);
  }
}

TEST_CASE("xi stays inside its bounds at d = 1e4, gamma = 7") {
  const double xi = build_setup(10000, 7.0).xi;
  const double pi = std::numbers::pi;
  CHECK(xi >= 2.0 / pi - 1.0 / (pi * pi) - 0.05);
  CHECK(xi <= 2.0 + 0.05);
}

TEST_CASE("every point of D is a support vector") {
  for (std::size_t d = 4; d <= 10; ++d)
    for (double gamma : {1.0, 3.0, 7.0}) {
      CAPTURE(d);
      CAPTURE(gamma);
      const DenseDualCheck c = dense_dual_check(d, gamma);
      CHECK(c.n == (std::size_t{1} << (d - 1)) + 1);
      CHECK(c.support_residual_max <= 1e-7);
      CHECK(c.dual_rel_diff_max <= 1e-7);
      const NTKSetup s = build_setup(d, gamma);
      const double norm = std::sqrt(gamma * gamma + static_cast<double>(d));
      CHECK(margin_fn_pos(s, gamma) * norm == doctest::Approx(1.0).epsilon(1e-8));
      CHECK(margin_fn_neg(s, -gamma) * std::sqrt(gamma * gamma + 1.0) == doctest::Approx(-1.0).epsilon(1e-8));
    }
}

TEST_CASE("margin functions match the dense kernel expansion") {
  Rng rng(13);
  for (std::size_t d : {4u, 8u, 12u}) {
    const double gamma = 2.5;
    const NTKSetup s = build_setup(d, gamma);
    const LabeledDataset D = gen_pointmass_d(d, gamma, true);
    for (int trial = 0; trial < 10; ++trial) {
      const double zeta = rng.uniform(-2.0 * gamma, 2.0 * gamma);
      Vector pos(d + 1, 1.0), neg(d + 1, 0.0);
      pos[0] = zeta;
      for (std::size_t j = 1; j < d; ++j) pos[j] = rng.coin() ? 1.0 : -1.0;
      neg[0] = zeta;
      neg[d] = 1.0;
      const double fp = dense_eval(s, D, pos) / norm2(pos);
      const double fn = dense_eval(s, D, neg) / norm2(neg);
      CHECK(std::abs(margin_fn_pos(s, zeta) - fp) <= 1e-8 * std::max(1.0, std::abs(fp)));
      CHECK(std::abs(margin_fn_neg(s, zeta) - fn) <= 1e-8 * std::max(1.0, std::abs(fn)));
    }
  }
}

TEST_CASE("sign regions at d = 1e5, gamma = 7") {
  const double gamma = 7.0;
  const NTKSetup s = build_setup(100000, gamma);
  CHECK(margin_fn_pos(s, -0.95 * gamma) < 0.0);
  CHECK(margin_fn_neg(s, 0.73) > 0.0);
  CHECK(margin_fn_neg(s, 0.0) < 0.0);
  // The prediction follows the linear coordinate for every base.
  CHECK(margin_fn_pos(s, gamma) > 0.0);
  CHECK(margin_fn_pos(s, -gamma) < 0.0);
  CHECK(margin_fn_neg(s, gamma) > 0.0);
  CHECK(margin_fn_neg(s, -gamma) < 0.0);

  const double z = threshold_scan(s, Base::Pos, -gamma, gamma, 1e-10);
  CHECK(z > -0.95 * gamma);
  CHECK(z < 0.73);
}

TEST_CASE("positive-base crossing approaches its asymptotic bracket") {
  const double gamma = 7.0;
  const double lo = -0.906 * gamma - 1.91 / gamma;
  const double hi = -0.67 * gamma - 1.67 / gamma;
  double prev = 0.0;
  for (std::size_t d : {1000u, 100000u, 10000000u}) {
    const double z = threshold_scan(build_setup(d, gamma), Base::Pos, -gamma, gamma, 1e-10);
    CHECK(z < prev);
    prev = z;
  }
  CHECK(prev >= lo);
  CHECK(prev <= hi);
}

TEST_CASE("threshold scan contract") {
  const NTKSetup s = build_setup(1000, 7.0);
  const double coarse = threshold_scan(s, Base::Neg, -7.0, 7.0, 1e-2);
  const double fine = threshold_scan(s, Base::Neg, -7.0, 7.0, 1e-8);
  CHECK(std::abs(coarse - fine) <= 1e-2);
  CHECK(margin_fn_neg(s, fine - 1e-6) * margin_fn_neg(s, fine + 1e-6) <= 0.0);
  CHECK_THROWS_AS(threshold_scan(s, Base::Neg, 3.0, 7.0, 1e-8), Error);
  CHECK_THROWS_AS(threshold_scan(s, Base::Neg, 7.0, -7.0, 1e-8), Error);
}

TEST_CASE("report json") {
  const NTKReport r = ntk_report(1000, 7.0);
  const std::string j = r.to_json();
  CHECK(j.find("\"neg_values\"") != std::string::npos);
  CHECK(j.find("\"at_0.73\"") != std::string::npos);
  CHECK(r.pos_crossing.has_value());
  CHECK(r.support_vector_residual_max <= 1e-10);
}

TEST_CASE("rich dual value at the claimed maximizers") {
  const double expected = std::sqrt(2.0) / 4.0;
  CHECK(expected == doctest::Approx(0.3535534).epsilon(1e-7));
  const RichNeuron t1 = rich_theta(1.0, 8, 1);
  const RichNeuron t2 = rich_theta(1.0, 8, -1);
  const double g1 = rich_dual_value(t1.w, t1.b, t1.a, 1.0, 8);
  const double g2 = rich_dual_value(t2.w, t2.b, t2.a, 1.0, 8);
  CHECK(std::abs(g1 - expected) <= 1e-9);
  CHECK(std::abs(g2 - expected) <= 1e-9);

  const RichNeuron t4 = rich_theta(1.0, 4, 1);
  CHECK(std::abs(rich_dual_value(t4.w, t4.b, t4.a, 1.0, 4) - g1) <= 1e-12);
  CHECK(rich_dual_value(t1.w, t1.b, 0.0, 1.0, 8) == 0.0);
  CHECK_THROWS_AS(rich_dual_value(Vector(25, 0.1), 0.1, 1.0, 1.0, 25), Error);

  for (double gamma : {1.0, 2.0, 5.0}) {
    const RichNeuron t = rich_theta(gamma, 6, 1);
    CHECK(rich_dual_value(t.w, t.b, t.a, gamma, 6) == doctest::Approx(std::sqrt(gamma * gamma + 1.0) / 4.0));
  }
}

TEST_CASE("sampled rich dual value agrees with enumeration") {
  Rng rng(4);
  const Vector w{0.3, 0.2, -0.4, 0.1, 0.5, -0.2};
  const double exact = rich_dual_value(w, 0.1, 0.6, 1.5, 6);
  const RichDualEstimate est = rich_dual_value_sampled(w, 0.1, 0.6, 1.5, 6, 200000, rng);
  CHECK(std::abs(est.value - exact) <= 5.0 * est.std_error + 1e-12);
}

TEST_CASE("random and perturbed neurons stay below the maximizers") {
  Rng rng(17);
  const RichMaximizerReport r = rich_maximizer_check(1.0, 8, 20000, rng);
  CHECK(r.expected == doctest::Approx(std::sqrt(2.0) / 4.0));
  CHECK(r.max_random < r.expected - 1e-6);
  CHECK(r.perturbations_lower);
}

TEST_CASE("the two-atom measure has equal margins on D") {
  const LabeledDataset D = gen_pointmass_d(8, 1.0, false);
  const Vector m = nustar_margins(1.0, D);
  for (double v : m) CHECK(std::abs(v - std::sqrt(2.0) / 4.0) <= 1e-9);
  CHECK(std::abs(rich_margin_of_nustar(1.0, D) - std::sqrt(2.0) / 4.0) <= 1e-9);
  for (double gamma : {1.0, 1.5, 4.0}) CHECK(rich_margin_of_nustar(gamma, gen_pointmass_d(6, gamma, false)) > 0.0);
}
