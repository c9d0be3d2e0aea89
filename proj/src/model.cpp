#include "ldsb/model.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

#include "ldsb/error.hpp"
#include "ldsb/io.hpp"

namespace ldsb {

std::string to_string(Regime r) { return r == Regime::Rich ? "rich" : "lazy"; }

Regime parse_regime(const std::string& s) {
  if (s == "rich") return Regime::Rich;
  if (s == "lazy") return Regime::Lazy;
  throw Error(ErrorKind::InvalidInput, "unknown regime '" + s + "' (expected rich or lazy)");
}

void MLP::validate() const {
  if (m() == 0 || d() == 0 || c() == 0) throw Error(ErrorKind::ShapeError, "MLP has an empty dimension");
  if (b.size() != m() || A.rows() != m()) throw Error(ErrorKind::ShapeError, "MLP parameter shapes disagree");
  const bool finite = W.all_finite() && A.all_finite() && std::isfinite(out_scale) &&
                      std::all_of(b.begin(), b.end(), [](double v) { return std::isfinite(v); });
  if (!finite) throw Error(ErrorKind::InvalidInput, "MLP has non-finite parameters");
}

namespace {

void check_sizes(std::size_t m, std::size_t d, std::size_t c) {
  if (m == 0 || d == 0 || c == 0) throw Error(ErrorKind::InvalidInput, "network sizes must be >= 1");
}

void check_input(const MLP& net, const Matrix& X) {
  if (X.cols() != net.d())
    throw Error(ErrorKind::ShapeError,
                "input has " + std::to_string(X.cols()) + " columns, network expects " + std::to_string(net.d()));
}

// Pre-activations Z = X W^T + 1 b^T.
Matrix preactivations(const MLP& net, const Matrix& X) {
  Matrix Z = matmul_nt(X, net.W);
  for (std::size_t i = 0; i < Z.rows(); ++i) {
    auto zi = Z.row(i);
    for (std::size_t j = 0; j < zi.size(); ++j) zi[j] += net.b[j];
  }
  return Z;
}

Matrix relu(Matrix Z) {
  for (auto& v : Z.data()) v = v > 0.0 ? v : 0.0;
  return Z;
}

}  // namespace

MLP init_rich(std::size_t m, std::size_t d, std::size_t c, Rng& rng) {
  check_sizes(m, d, c);
  MLP net;
  net.regime = Regime::Rich;
  net.W = Matrix(m, d);
  net.b.assign(m, 0.0);
  net.A = Matrix(m, c);
  for (std::size_t i = 0; i < m; ++i) {
    Vector row = sample_unit_sphere(d + 1, rng);
    std::copy(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(d), net.W.row(i).begin());
    net.b[i] = row[d];
  }
  for (auto& v : net.A.data()) v = rng.coin() ? 1.0 : -1.0;
  net.out_scale = 1.0 / static_cast<double>(m);
  return net;
}

MLP init_lazy(std::size_t m, std::size_t d, std::size_t c, Rng& rng) {
  check_sizes(m, d, c);
  MLP net;
  net.regime = Regime::Lazy;
  net.W = Matrix(m, d);
  net.b.assign(m, 0.0);
  net.A = Matrix(m, c);
  const double sw = 1.0 / std::sqrt(static_cast<double>(d));
  const double sa = 1.0 / std::sqrt(static_cast<double>(m));
  for (auto& v : net.W.data()) v = sw * rng.normal();
  for (auto& v : net.A.data()) v = sa * rng.normal();
  net.out_scale = 1.0;
  return net;
}

MLP init_network(Regime regime, std::size_t m, std::size_t d, std::size_t c, Rng& rng) {
  return regime == Regime::Rich ? init_rich(m, d, c, rng) : init_lazy(m, d, c, rng);
}

Matrix forward(const MLP& net, const Matrix& X) {
  check_input(net, X);
  Matrix logits = matmul(relu(preactivations(net, X)), net.A);
  logits *= net.out_scale;
  return logits;
}

Matrix log_softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto li = logits.row(i);
    const double mx = *std::max_element(li.begin(), li.end());
    double s = 0.0;
    for (double v : li) s += std::exp(v - mx);
    const double lse = mx + std::log(s);
    auto oi = out.row(i);
    for (std::size_t j = 0; j < li.size(); ++j) oi[j] = li[j] - lse;
  }
  return out;
}

namespace {

void check_labels(const MLP& net, const Matrix& X, std::span<const int> y) {
  if (X.rows() == 0) throw Error(ErrorKind::InvalidInput, "empty batch");
  if (y.size() != X.rows()) throw Error(ErrorKind::ShapeError, "label count differs from batch size");
  for (int label : y)
    if (label < 0 || static_cast<std::size_t>(label) >= net.c())
      throw Error(ErrorKind::InvalidInput, "label out of range");
}

double weight_penalty(const MLP& net, double weight_decay) {
  if (weight_decay == 0.0) return 0.0;
  double s = 0.0;
  for (double v : net.W.data()) s += v * v;
  for (double v : net.A.data()) s += v * v;
  return 0.5 * weight_decay * s;
}

}  // namespace

LossAndGrad loss_and_grad(const MLP& net, const Matrix& X, std::span<const int> y, double weight_decay) {
  check_input(net, X);
  check_labels(net, X, y);
  const std::size_t n = X.rows();
  const double inv_n = 1.0 / static_cast<double>(n);

  const Matrix Z = preactivations(net, X);
  const Matrix H = relu(Z);
  Matrix logits = matmul(H, net.A);
  logits *= net.out_scale;
  const Matrix logp = log_softmax_rows(logits);

  // G = (softmax - onehot) / n, the gradient of the mean loss w.r.t. logits.
  LossAndGrad out;
  Matrix G(n, net.c());
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto yi = static_cast<std::size_t>(y[i]);
    loss -= logp(i, yi);
    for (std::size_t j = 0; j < net.c(); ++j) G(i, j) = std::exp(logp(i, j)) * inv_n;
    G(i, yi) -= inv_n;
  }
  out.loss = loss * inv_n + weight_penalty(net, weight_decay);

  Matrix dA = matmul_tn(H, G);
  dA *= net.out_scale;
  Matrix dZ = matmul_nt(G, net.A);
  dZ *= net.out_scale;
  for (std::size_t t = 0; t < dZ.size(); ++t)
    if (!(Z.data()[t] > 0.0)) dZ.data()[t] = 0.0;

  Matrix dW = matmul_tn(dZ, X);
  Vector db(net.m(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto zi = dZ.row(i);
    for (std::size_t j = 0; j < net.m(); ++j) db[j] += zi[j];
  }
  if (weight_decay != 0.0) {
    for (std::size_t t = 0; t < dW.size(); ++t) dW.data()[t] += weight_decay * net.W.data()[t];
    for (std::size_t t = 0; t < dA.size(); ++t) dA.data()[t] += weight_decay * net.A.data()[t];
  }
  out.grad = {std::move(dW), std::move(db), std::move(dA)};
  return out;
}

double loss_value(const MLP& net, const Matrix& X, std::span<const int> y, double weight_decay) {
  check_input(net, X);
  check_labels(net, X, y);
  const Matrix logp = log_softmax_rows(forward(net, X));
  double loss = 0.0;
  for (std::size_t i = 0; i < X.rows(); ++i) loss -= logp(i, static_cast<std::size_t>(y[i]));
  return loss / static_cast<double>(X.rows()) + weight_penalty(net, weight_decay);
}

LossAndInputGrad loss_and_input_grad(const MLP& net, const Matrix& X, const Matrix& targets) {
  check_input(net, X);
  if (X.rows() == 0) throw Error(ErrorKind::InvalidInput, "empty batch");
  if (targets.rows() != X.rows() || targets.cols() != net.c())
    throw Error(ErrorKind::ShapeError, "target matrix shape mismatch");
  const std::size_t n = X.rows();
  const double inv_n = 1.0 / static_cast<double>(n);

  const Matrix Z = preactivations(net, X);
  Matrix logits = matmul(relu(Z), net.A);
  logits *= net.out_scale;
  const Matrix logp = log_softmax_rows(logits);

  LossAndInputGrad out;
  Matrix G(n, net.c());
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double mass = 0.0;
    for (std::size_t j = 0; j < net.c(); ++j) {
      loss -= targets(i, j) * logp(i, j);
      mass += targets(i, j);
    }
    for (std::size_t j = 0; j < net.c(); ++j) G(i, j) = (mass * std::exp(logp(i, j)) - targets(i, j)) * inv_n;
  }
  out.loss = loss * inv_n;

  Matrix dZ = matmul_nt(G, net.A);
  dZ *= net.out_scale;
  for (std::size_t t = 0; t < dZ.size(); ++t)
    if (!(Z.data()[t] > 0.0)) dZ.data()[t] = 0.0;
  out.dX = matmul(dZ, net.W);
  return out;
}

std::vector<int> argmax_rows(const Matrix& logits) {
  std::vector<int> out(logits.rows());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto li = logits.row(i);
    std::size_t best = 0;
    for (std::size_t j = 1; j < li.size(); ++j)
      if (li[j] > li[best]) best = j;
    out[i] = static_cast<int>(best);
  }
  return out;
}

std::vector<int> predict(const MLP& net, const Matrix& X) { return argmax_rows(forward(net, X)); }

MLP make_max_margin_net(double gamma, std::size_t d) {
  if (d == 0) throw Error(ErrorKind::InvalidInput, "make_max_margin_net: d must be >= 1");
  const double denom = std::sqrt(2.0 * (1.0 + gamma * gamma));
  MLP net;
  net.regime = Regime::Rich;
  net.W = Matrix(2, d);
  net.W(0, 0) = gamma / denom;
  net.W(1, 0) = -gamma / denom;
  net.b = {1.0 / denom, 1.0 / denom};
  net.A = Matrix(2, 2);
  net.A(0, 1) = 1.0 / std::sqrt(2.0);
  net.A(1, 1) = -1.0 / std::sqrt(2.0);
  net.out_scale = 0.5;
  return net;
}

// ---------------------------------------------------------------------------
// Checkpoints

std::string serialize_checkpoint(const MLP& net) {
  nlohmann::json j;
  j["format"] = "ldsb-checkpoint";
  j["version"] = 1;
  j["regime"] = to_string(net.regime);
  j["m"] = net.m();
  j["d"] = net.d();
  j["c"] = net.c();
  j["out_scale"] = net.out_scale;
  j["W"] = net.W.data();
  j["b"] = net.b;
  j["A"] = net.A.data();
  return j.dump() + "\n";
}

MLP parse_checkpoint(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(1, std::string("checkpoint is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "ldsb-checkpoint" || j.at("version").get<int>() != 1)
      throw ParseError(1, "unsupported checkpoint format or version");
    const auto m = j.at("m").get<std::size_t>();
    const auto d = j.at("d").get<std::size_t>();
    const auto c = j.at("c").get<std::size_t>();
    MLP net;
    net.regime = parse_regime(j.at("regime").get<std::string>());
    net.out_scale = j.at("out_scale").get<double>();
    net.W = Matrix(m, d, j.at("W").get<std::vector<double>>());
    net.b = j.at("b").get<std::vector<double>>();
    net.A = Matrix(m, c, j.at("A").get<std::vector<double>>());
    net.validate();
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(1, std::string("malformed checkpoint: ") + e.what());
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw ParseError(1, std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const MLP& net, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_checkpoint(net));
}

MLP load_checkpoint(const std::filesystem::path& path) { return parse_checkpoint(read_file(path)); }

}  // namespace ldsb
