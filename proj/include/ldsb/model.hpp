#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ldsb/linalg.hpp"
#include "ldsb/rng.hpp"

namespace ldsb {

enum class Regime { Rich, Lazy };

std::string to_string(Regime r);
Regime parse_regime(const std::string& s);

// One-hidden-layer ReLU network:
//   logits(x) = out_scale * A^T relu(W x + b)
// with W: m x d, b: m, A: m x c.
struct MLP {
  Matrix W;
  Vector b;
  Matrix A;
  double out_scale = 1.0;
  Regime regime = Regime::Rich;

  std::size_t m() const noexcept { return W.rows(); }
  std::size_t d() const noexcept { return W.cols(); }
  std::size_t c() const noexcept { return A.cols(); }

  void validate() const;

  friend bool operator==(const MLP&, const MLP&) = default;
};

struct Gradients {
  Matrix dW;
  Vector db;
  Matrix dA;
};

// Rows (W_i, b_i) uniform on S^d, A_ij uniform on {-1, +1}, out_scale 1/m.
MLP init_rich(std::size_t m, std::size_t d, std::size_t c, Rng& rng);
// W_ij ~ N(0, 1/d), A_ij ~ N(0, 1/m), b = 0, out_scale 1.
MLP init_lazy(std::size_t m, std::size_t d, std::size_t c, Rng& rng);
MLP init_network(Regime regime, std::size_t m, std::size_t d, std::size_t c, Rng& rng);

// n x c logits.
Matrix forward(const MLP& net, const Matrix& X);

struct LossAndGrad {
  double loss = 0.0;
  Gradients grad;
};

// Mean softmax cross-entropy plus (weight_decay / 2) (|W|^2 + |A|^2).
LossAndGrad loss_and_grad(const MLP& net, const Matrix& X, std::span<const int> y, double weight_decay);
double loss_value(const MLP& net, const Matrix& X, std::span<const int> y, double weight_decay);

struct LossAndInputGrad {
  double loss = 0.0;
  Matrix dX;  // n x d
};

// Mean cross-entropy against soft target rows (n x c, each row a
// distribution) and its gradient with respect to the inputs.
LossAndInputGrad loss_and_input_grad(const MLP& net, const Matrix& X, const Matrix& targets);

// Row-wise argmax, ties toward the smaller index.
std::vector<int> argmax_rows(const Matrix& logits);
std::vector<int> predict(const MLP& net, const Matrix& X);

// Row-wise log-softmax, numerically stable.
Matrix log_softmax_rows(const Matrix& logits);

// Finite two-neuron network realizing 0.5 delta(theta1) + 0.5 delta(theta2):
// theta1 = ( g e_0, b, 1/sqrt2), theta2 = (-g e_0, b, -1/sqrt2) with
// g = gamma / sqrt(2(1+gamma^2)), b = 1 / sqrt(2(1+gamma^2)). Two outputs;
// logit_1 - logit_0 equals the measure's output.
MLP make_max_margin_net(double gamma, std::size_t d);

// JSON checkpoint; doubles are written in shortest round-trip form.
std::string serialize_checkpoint(const MLP& net);
MLP parse_checkpoint(const std::string& text);
void save_checkpoint(const MLP& net, const std::filesystem::path& path);
MLP load_checkpoint(const std::filesystem::path& path);

}  // namespace ldsb
