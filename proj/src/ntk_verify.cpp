#include "ldsb/ntk_verify.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numbers>

#include "json.hpp"

#include "ldsb/error.hpp"
#include "ldsb/model.hpp"

namespace ldsb {

namespace {

constexpr double kPi = std::numbers::pi;

double relu(double v) { return v > 0.0 ? v : 0.0; }

}  // namespace

double kappa(double u) {
  if (!std::isfinite(u) || std::abs(u) > 1.0 + 1e-9)
    throw Error(ErrorKind::DomainError, "kappa: argument outside [-1, 1]");
  u = std::clamp(u, -1.0, 1.0);
  return (2.0 * u * (kPi - std::acos(u)) + std::sqrt(1.0 - u * u)) / kPi;
}

double ntk_kernel(std::span<const double> x, std::span<const double> xp) {
  if (x.size() != xp.size()) throw Error(ErrorKind::ShapeError, "ntk_kernel: length mismatch");
  double xx = 0.0, yy = 0.0, xy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xx += x[i] * x[i];
    yy += xp[i] * xp[i];
    xy += x[i] * xp[i];
  }
  // One square root, so that x == xp gives a cosine of exactly 1.
  const double nn = std::sqrt(xx * yy);
  if (nn == 0.0) return 0.0;
  return nn * kappa(xy / nn);
}

double NTKSetup::a() const { return std::ldexp(a_tilde, -static_cast<int>(d - 1)); }

NTKSetup build_setup(std::size_t d, double gamma) {
  if (d < 3) throw Error(ErrorKind::InvalidInput, "build_setup: d must be >= 3");
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw Error(ErrorKind::InvalidInput, "build_setup: gamma must be > 0");
  NTKSetup s;
  s.d = d;
  s.gamma = gamma;
  const double dd = static_cast<double>(d);
  const double g2 = gamma * gamma;
  s.rho1 = std::sqrt(dd + g2);
  s.rho2 = std::sqrt(1.0 + g2);
  s.beta.resize(d + 1);
  for (std::size_t i = 0; i < d; ++i) s.beta[i] = kappa((dd - 2.0 * static_cast<double>(i) + g2) / (dd + g2));
  s.beta[d] = kappa((1.0 - g2) / (s.rho1 * s.rho2));

  // Binomial weights by the ratio recurrence anchored at the mode, then
  // normalized. Far tails underflow to zero harmlessly.
  s.weights.assign(d, 0.0);
  const std::size_t n = d - 1;
  const std::size_t mode = n / 2;
  s.weights[mode] = 1.0;
  for (std::size_t i = mode + 1; i <= n; ++i)
    s.weights[i] = s.weights[i - 1] * static_cast<double>(n - i + 1) / static_cast<double>(i);
  for (std::size_t i = mode; i-- > 0;)
    s.weights[i] = s.weights[i + 1] * static_cast<double>(i + 1) / static_cast<double>(n - i);
  double total = 0.0;
  for (double w : s.weights) total += w;
  for (double& w : s.weights) w /= total;

  const double k1 = kappa(1.0);
  const double bd = s.beta[d];
  double xi = 0.0;
  for (std::size_t i = 0; i < d; ++i) xi += s.weights[i] * (k1 * s.beta[i] - bd * bd);
  s.xi = xi;
  if (!(xi > 0.0)) throw Error(ErrorKind::InternalInconsistency, "build_setup: xi is not positive");
  s.a_tilde = (s.rho2 * k1 + s.rho1 * bd) / (xi * s.rho1 * s.rho1 * s.rho2);
  s.b_dual = (-1.0 - s.a_tilde * s.rho1 * s.rho2 * bd) / (s.rho2 * s.rho2 * k1);
  return s;
}

double margin_fn_pos(const NTKSetup& s, double zeta) {
  const double dd = static_cast<double>(s.d);
  const double nx2 = zeta * zeta + dd;
  const double g2 = s.gamma * s.gamma;
  const double denom1 = std::sqrt((dd + g2) * nx2);
  const double denom2 = std::sqrt((1.0 + g2) * nx2);
  double sum = 0.0;
  for (std::size_t i = 0; i < s.d; ++i) {
    const double w = s.weights[i];
    if (w == 0.0) continue;
    sum += w * kappa((dd - 2.0 * static_cast<double>(i) + s.gamma * zeta) / denom1);
  }
  const double td = (1.0 - s.gamma * zeta) / denom2;
  return s.a_tilde * s.rho1 * sum + s.b_dual * s.rho2 * kappa(td);
}

double margin_fn_neg(const NTKSetup& s, double zeta) {
  const double nx2 = zeta * zeta + 1.0;
  const double g2 = s.gamma * s.gamma;
  const double t0 = (1.0 + s.gamma * zeta) / std::sqrt((static_cast<double>(s.d) + g2) * nx2);
  const double td = (1.0 - s.gamma * zeta) / std::sqrt((1.0 + g2) * nx2);
  return s.a_tilde * s.rho1 * kappa(t0) + s.b_dual * s.rho2 * kappa(td);
}

double threshold_scan(const NTKSetup& setup, Base base, double lo, double hi, double tol) {
  if (!(lo < hi) || !(tol > 0.0)) throw Error(ErrorKind::InvalidInput, "threshold_scan: need lo < hi and tol > 0");
  auto f = [&](double z) { return base == Base::Pos ? margin_fn_pos(setup, z) : margin_fn_neg(setup, z); };
  double flo = f(lo);
  const double fhi = f(hi);
  if (!(flo * fhi < 0.0)) throw Error(ErrorKind::NoCrossing, "threshold_scan: no sign change in the bracket");
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------
// Dense oracle

namespace {

// Kernel values repeat heavily on structured inputs; cache kappa by the
// exact bit pattern of its argument.
class KappaCache {
 public:
  double operator()(double u) {
    const std::uint64_t bits = std::bit_cast<std::uint64_t>(u);
    std::size_t slot = static_cast<std::size_t>((bits * 0x9e3779b97f4a7c15ULL) >> 52);
    for (std::size_t probe = 0; probe < 16; ++probe, slot = (slot + 1) & (kSlots - 1)) {
      if (used_[slot] && keys_[slot] == bits) return values_[slot];
      if (!used_[slot]) {
        used_[slot] = true;
        keys_[slot] = bits;
        return values_[slot] = kappa(u);
      }
    }
    return kappa(u);
  }

 private:
  static constexpr std::size_t kSlots = 4096;
  std::vector<std::uint64_t> keys_ = std::vector<std::uint64_t>(kSlots);
  std::vector<double> values_ = std::vector<double>(kSlots);
  std::vector<bool> used_ = std::vector<bool>(kSlots, false);
};

}  // namespace

Matrix ntk_gram(const Matrix& X) {
  const std::size_t n = X.rows();
  Matrix K = matmul_nt(X, X);
  Vector sq(n);
  for (std::size_t i = 0; i < n; ++i) sq[i] = K(i, i);
  KappaCache kap;
  for (std::size_t i = 0; i < n; ++i) {
    auto row = K.row(i);
    for (std::size_t j = i; j < n; ++j) {
      const double nn = std::sqrt(sq[i] * sq[j]);
      row[j] = nn == 0.0 ? 0.0 : nn * kap(row[j] / nn);
    }
    for (std::size_t j = 0; j < i; ++j) row[j] = K(j, i);
  }
  return K;
}

namespace {

Vector cholesky_solve(const Matrix& K, const Vector& y) {
  const std::size_t n = K.rows();
  Matrix L(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double diag = K(j, j);
    for (std::size_t k = 0; k < j; ++k) diag -= L(j, k) * L(j, k);
    if (!(diag > 0.0)) throw Error(ErrorKind::InternalInconsistency, "cholesky: matrix is not positive definite");
    const double ljj = std::sqrt(diag);
    L(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double v = K(i, j);
      for (std::size_t k = 0; k < j; ++k) v -= L(i, k) * L(j, k);
      L(i, j) = v / ljj;
    }
  }
  Vector z(n);
  for (std::size_t i = 0; i < n; ++i) {
    double v = y[i];
    for (std::size_t k = 0; k < i; ++k) v -= L(i, k) * z[k];
    z[i] = v / L(i, i);
  }
  Vector x(n);
  for (std::size_t i = n; i-- > 0;) {
    double v = z[i];
    for (std::size_t k = i + 1; k < n; ++k) v -= L(k, i) * x[k];
    x[i] = v / L(i, i);
  }
  return x;
}

}  // namespace

GramSolve solve_gram(const Matrix& K, const Vector& y, std::size_t cholesky_limit, double tol) {
  const std::size_t n = K.rows();
  if (K.cols() != n || y.size() != n) throw Error(ErrorKind::ShapeError, "solve_gram: shape mismatch");
  if (n <= cholesky_limit) return {cholesky_solve(K, y), "cholesky", 0};

  Vector x(n, 0.0), r = y, p = y, Ap(n);
  double rr = dot(r, r);
  const double stop = tol * tol * rr;
  std::size_t it = 0;
  for (; it < 10 * n && rr > stop; ++it) {
    Ap = matvec(K, p);
    const double alpha = rr / dot(p, Ap);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * Ap[i];
    }
    const double rr_new = dot(r, r);
    const double beta = rr_new / rr;
    rr = rr_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
  }
  return {std::move(x), "cg", it};
}

DenseDualCheck dense_dual_check(std::size_t d, double gamma) {
  const NTKSetup s = build_setup(d, gamma);
  const LabeledDataset D = gen_pointmass_d(d, gamma, true);
  const std::size_t n = D.n();
  const Matrix K = ntk_gram(D.X);

  Vector y(n), closed(n);
  const double a = s.a();
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = signed_label(D.y[i]);
    closed[i] = D.y[i] == 1 ? a : s.b_dual;
  }
  DenseDualCheck out;
  out.n = n;
  const Vector f = matvec(K, closed);
  for (std::size_t i = 0; i < n; ++i) out.support_residual_max = std::max(out.support_residual_max, std::abs(y[i] * f[i] - 1.0));

  const GramSolve sol = solve_gram(K, y);
  out.solver = sol.solver;
  out.cg_iterations = sol.iterations;
  for (std::size_t i = 0; i < n; ++i)
    out.dual_rel_diff_max = std::max(out.dual_rel_diff_max, std::abs(sol.alpha[i] - closed[i]) / std::abs(closed[i]));
  return out;
}

// ---------------------------------------------------------------------------

std::string NTKReport::to_json() const {
  nlohmann::ordered_json j;
  j["d"] = d;
  j["gamma"] = gamma;
  j["xi"] = xi;
  j["a_tilde"] = a_tilde;
  j["b_dual"] = b_dual;
  j["pos_crossing"] = pos_crossing ? nlohmann::ordered_json(*pos_crossing) : nlohmann::ordered_json(nullptr);
  j["neg_values"] = {{"at_0", neg_at_0}, {"at_0.73", neg_at_073}};
  j["support_vector_residual_max"] = support_vector_residual_max;
  return j.dump(2) + "\n";
}

NTKReport ntk_report(std::size_t d, double gamma) {
  const NTKSetup s = build_setup(d, gamma);
  NTKReport r;
  r.d = d;
  r.gamma = gamma;
  r.xi = s.xi;
  r.a_tilde = s.a_tilde;
  r.b_dual = s.b_dual;
  try {
    r.pos_crossing = threshold_scan(s, Base::Pos, -gamma, gamma, 1e-10);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::NoCrossing) throw;
  }
  r.neg_at_0 = margin_fn_neg(s, 0.0);
  r.neg_at_073 = margin_fn_neg(s, 0.73);
  // y f(x) = 1 at both bases, evaluated through the margin functions.
  r.support_vector_residual_max = std::max(std::abs(margin_fn_pos(s, gamma) * s.rho1 - 1.0),
                                           std::abs(-margin_fn_neg(s, -gamma) * s.rho2 - 1.0));
  return r;
}

// ---------------------------------------------------------------------------
// Rich regime

double rich_dual_value(std::span<const double> w, double b, double a, double gamma, std::size_t d) {
  if (w.size() != d || d < 1) throw Error(ErrorKind::ShapeError, "rich_dual_value: w must have length d");
  if (d > 24) throw Error(ErrorKind::TooLarge, "rich_dual_value: exact enumeration limited to d <= 24");
  if (a == 0.0) return 0.0;
  const std::size_t bits = d - 1;
  const std::uint64_t count = std::uint64_t{1} << bits;
  const double base = gamma * w[0] + b;
  // Gray-code walk: one sign flips per step; the running sum is rebuilt
  // periodically to keep rounding from accumulating.
  auto fresh = [&](std::uint64_t code) {
    double v = base;
    for (std::size_t j = 0; j < bits; ++j) v += ((code >> j) & 1u) ? -w[1 + j] : w[1 + j];
    return v;
  };
  double sum = 0.0;
  double s = fresh(0);
  std::uint64_t code = 0;
  for (std::uint64_t k = 0; k < count; ++k) {
    sum += relu(s);
    if (k + 1 == count) break;
    const int j = std::countr_zero(k + 1);
    code ^= std::uint64_t{1} << j;
    if (((k + 1) & 1023u) == 0) {
      s = fresh(code);
    } else {
      s += ((code >> j) & 1u) ? -2.0 * w[1 + static_cast<std::size_t>(j)] : 2.0 * w[1 + static_cast<std::size_t>(j)];
    }
  }
  const double mean = sum / static_cast<double>(count);
  return 0.5 * a * (mean - relu(b - gamma * w[0]));
}

RichDualEstimate rich_dual_value_sampled(std::span<const double> w, double b, double a, double gamma,
                                         std::size_t d, std::size_t samples, Rng& rng) {
  if (w.size() != d || d < 1) throw Error(ErrorKind::ShapeError, "rich_dual_value_sampled: w must have length d");
  if (samples < 2) throw Error(ErrorKind::InvalidInput, "rich_dual_value_sampled: need at least 2 samples");
  double mean = 0.0, m2 = 0.0;
  for (std::size_t t = 0; t < samples; ++t) {
    double v = gamma * w[0] + b;
    for (std::size_t j = 1; j < d; ++j) v += rng.coin() ? w[j] : -w[j];
    const double x = relu(v);
    const double delta = x - mean;
    mean += delta / static_cast<double>(t + 1);
    m2 += delta * (x - mean);
  }
  const double se = std::sqrt(m2 / static_cast<double>(samples - 1) / static_cast<double>(samples));
  return {0.5 * a * (mean - relu(b - gamma * w[0])), 0.5 * std::abs(a) * se};
}

RichNeuron rich_theta(double gamma, std::size_t d, int sign) {
  const double denom = std::sqrt(2.0 * (1.0 + gamma * gamma));
  RichNeuron t;
  t.w.assign(d, 0.0);
  t.w[0] = sign * gamma / denom;
  t.b = 1.0 / denom;
  t.a = sign / std::numbers::sqrt2;
  return t;
}

RichMaximizerReport rich_maximizer_check(double gamma, std::size_t d, std::size_t num_random, Rng& rng,
                                         std::size_t num_tangents, double eps) {
  if (d < 1 || d > 16) throw Error(ErrorKind::InvalidInput, "rich_maximizer_check: d must lie in [1, 16]");
  if (num_random < 1) throw Error(ErrorKind::InvalidInput, "rich_maximizer_check: num_random must be >= 1");
  RichMaximizerReport r;
  const RichNeuron t1 = rich_theta(gamma, d, 1);
  const RichNeuron t2 = rich_theta(gamma, d, -1);
  r.g_theta1 = rich_dual_value(t1.w, t1.b, t1.a, gamma, d);
  r.g_theta2 = rich_dual_value(t2.w, t2.b, t2.a, gamma, d);
  r.expected = std::sqrt(1.0 + gamma * gamma) / 4.0;

  const std::size_t dim = d + 2;
  auto score = [&](const Vector& v) { return rich_dual_value(std::span(v).first(d), v[d], v[d + 1], gamma, d); };
  r.max_random = -std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < num_random; ++t) r.max_random = std::max(r.max_random, score(sample_unit_sphere(dim, rng)));
  r.random_margin = r.g_theta1 - r.max_random;

  Vector theta(dim);
  std::copy(t1.w.begin(), t1.w.end(), theta.begin());
  theta[d] = t1.b;
  theta[d + 1] = t1.a;
  r.max_perturbed = -std::numeric_limits<double>::infinity();
  r.perturbations_lower = true;
  for (std::size_t t = 0; t < num_tangents; ++t) {
    Vector dir = sample_unit_sphere(dim, rng);
    const double along = dot(dir, theta);
    for (std::size_t i = 0; i < dim; ++i) dir[i] -= along * theta[i];
    const double nd = norm2(dir);
    Vector p(dim);
    for (std::size_t i = 0; i < dim; ++i) p[i] = theta[i] + eps * dir[i] / nd;
    const double np = norm2(p);
    for (double& v : p) v /= np;
    const double g = score(p);
    r.max_perturbed = std::max(r.max_perturbed, g);
    if (!(g < r.g_theta1)) r.perturbations_lower = false;
  }
  return r;
}

Vector nustar_margins(double gamma, const LabeledDataset& data) {
  if (data.num_classes != 2) throw Error(ErrorKind::InvalidInput, "nustar_margins: binary dataset required");
  const MLP net = make_max_margin_net(gamma, data.d());
  const Matrix logits = forward(net, data.X);
  Vector m(data.n());
  for (std::size_t i = 0; i < data.n(); ++i) m[i] = signed_label(data.y[i]) * (logits(i, 1) - logits(i, 0));
  return m;
}

double rich_margin_of_nustar(double gamma, const LabeledDataset& data) {
  const Vector m = nustar_margins(gamma, data);
  if (m.empty()) throw Error(ErrorKind::InvalidInput, "rich_margin_of_nustar: empty dataset");
  return *std::min_element(m.begin(), m.end());
}

}  // namespace ldsb
