#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace nico {
class Rng;
}

namespace nico::nn {

// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  double* row(std::size_t r) { return data.data() + r * cols; }
  const double* row(std::size_t r) const { return data.data() + r * cols; }
  std::size_t size() const { return data.size(); }
  std::string shape() const { return std::to_string(rows) + "x" + std::to_string(cols); }

  bool operator==(const Matrix&) const = default;
};

Matrix matmul(const Matrix& a, const Matrix& b);       // a * b
Matrix matmul_at_b(const Matrix& a, const Matrix& b);  // a^T * b
Matrix matmul_a_bt(const Matrix& a, const Matrix& b);  // a * b^T
void add_inplace(Matrix& target, const Matrix& other, double scale = 1.0);
Matrix transpose(const Matrix& a);
double max_abs(const Matrix& a);

// Learnable tensor with its gradient accumulator and AdamW moments.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  Matrix first_moment;
  Matrix second_moment;

  Parameter() = default;
  Parameter(std::string n, std::size_t rows, std::size_t cols)
      : name(std::move(n)),
        value(rows, cols),
        grad(rows, cols),
        first_moment(rows, cols),
        second_moment(rows, cols) {}

  void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), 0.0); }
  std::size_t count() const { return value.size(); }
};

// uniform(-1/sqrt(fan_in), +1/sqrt(fan_in))
void init_uniform(Parameter& p, std::size_t fan_in, Rng& rng);

// y = x W (+ b). W is in x out, b is 1 x out.
Matrix linear_forward(const Matrix& x, const Parameter& weight, const Parameter* bias);
// Accumulates into weight.grad / bias->grad and returns dL/dx.
Matrix linear_backward(const Matrix& x, Parameter& weight, Parameter* bias, const Matrix& dy);

Matrix relu_forward(const Matrix& x);
Matrix relu_backward(const Matrix& pre_activation, const Matrix& dy);

enum class NormKind { kRms, kLayer };
inline constexpr double kNormEps = 1e-6;

struct NormCache {
  Matrix output;
  std::vector<double> inv_scale;  // per row
};

// Row-wise normalization without learned gain.
Matrix norm_forward(const Matrix& x, NormKind kind, NormCache* cache = nullptr);
Matrix norm_backward(const NormCache& cache, NormKind kind, const Matrix& dy);

// Single-vector RMS normalization.
std::vector<double> rmsnorm(std::span<const double> h);

// Row-wise softmax. With a mask, cells where mask == 0 get probability 0.
Matrix softmax_rows(const Matrix& logits, const std::vector<std::uint8_t>* mask = nullptr);

struct Linear {
  Parameter weight;
  std::optional<Parameter> bias;

  Linear() = default;
  Linear(const std::string& name, std::size_t in, std::size_t out, bool with_bias, Rng& rng);

  Matrix forward(const Matrix& x) const {
    return linear_forward(x, weight, bias ? &*bias : nullptr);
  }
  Matrix backward(const Matrix& x, const Matrix& dy) {
    return linear_backward(x, weight, bias ? &*bias : nullptr, dy);
  }
  void collect(std::vector<Parameter*>& out);
};

// Two-layer per-token MLP without biases: W2 ReLU(W1 h).
struct FeedForward {
  Linear first;
  Linear second;

  struct Cache {
    Matrix input;
    Matrix pre;
    Matrix hidden;
  };

  FeedForward() = default;
  FeedForward(const std::string& name, std::size_t in, std::size_t hidden, std::size_t out,
              Rng& rng);

  Matrix forward(const Matrix& x, Cache* cache = nullptr) const;
  Matrix backward(const Cache& cache, const Matrix& dy);
  void collect(std::vector<Parameter*>& out);
};

// Scaled dot-product self-attention over all rows, no mask, no positions.
struct MultiHeadAttention {
  std::size_t dim = 0;
  std::size_t heads = 1;
  Linear query;
  Linear key;
  Linear value;
  Linear output;

  struct Cache {
    Matrix input;
    Matrix q;
    Matrix k;
    Matrix v;
    std::vector<Matrix> attention;  // per head, n x n
    Matrix context;                 // n x dim, heads concatenated
  };

  MultiHeadAttention() = default;
  MultiHeadAttention(const std::string& name, std::size_t dim, std::size_t heads, Rng& rng);

  Matrix forward(const Matrix& x, Cache* cache = nullptr) const;
  Matrix backward(const Cache& cache, const Matrix& dy);
  void collect(std::vector<Parameter*>& out);
};

struct OptimizerConfig {
  double learning_rate = 1e-4;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 0.5;
  double lr_decay_per_epoch = 0.99;

  void validate() const;
};

double global_grad_norm(std::span<Parameter* const> params);

// AdamW with global-norm clipping. Moments live in each Parameter.
class AdamW {
 public:
  struct StepReport {
    bool applied = false;
    double grad_norm = 0.0;
    double clip_scale = 1.0;
  };

  explicit AdamW(OptimizerConfig config = {});

  StepReport step(std::span<Parameter* const> params);
  void decay_learning_rate() { lr_ *= config_.lr_decay_per_epoch; }

  const OptimizerConfig& config() const { return config_; }
  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }
  std::uint64_t step_count() const { return steps_; }
  void set_step_count(std::uint64_t steps) { steps_ = steps; }
  std::uint64_t skipped_steps() const { return skipped_; }
  void set_skipped_steps(std::uint64_t skipped) { skipped_ = skipped; }

 private:
  OptimizerConfig config_;
  double lr_;
  std::uint64_t steps_ = 0;
  std::uint64_t skipped_ = 0;
};

struct GradCheckBlock {
  std::string name;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckBlock> blocks;
  double worst_rel_error = 0.0;
  bool passed = false;
};

// Central differences against analytic gradients. `loss` evaluates the
// scalar; `backward` must zero and then populate every grad in `params`.
// Relative error per block: max |analytic - numeric| divided by
// max(|analytic|_inf, |numeric|_inf, 1e-6).
GradCheckReport gradient_check(std::span<Parameter* const> params,
                               const std::function<double()>& loss,
                               const std::function<void()>& backward, double tolerance,
                               double step = 1e-4);

}  // namespace nico::nn
