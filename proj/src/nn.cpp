#include "nico/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nico/error.hpp"
#include "nico/rng.hpp"

namespace nico::nn {

namespace {

void require(bool ok, const std::string& what, const Matrix& a, const Matrix& b) {
  if (!ok) throw ShapeError(what + ": shapes " + a.shape() + " and " + b.shape());
}

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
  require(a.cols == b.rows, "matmul", a, b);
  Matrix out(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    double* o = out.row(i);
    const double* ar = a.row(i);
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double s = ar[k];
      if (s == 0.0) continue;
      const double* br = b.row(k);
      for (std::size_t j = 0; j < b.cols; ++j) o[j] += s * br[j];
    }
  }
  return out;
}

Matrix matmul_at_b(const Matrix& a, const Matrix& b) {
  require(a.rows == b.rows, "matmul_at_b", a, b);
  Matrix out(a.cols, b.cols);
  for (std::size_t r = 0; r < a.rows; ++r) {
    const double* ar = a.row(r);
    const double* br = b.row(r);
    for (std::size_t i = 0; i < a.cols; ++i) {
      const double s = ar[i];
      if (s == 0.0) continue;
      double* o = out.row(i);
      for (std::size_t j = 0; j < b.cols; ++j) o[j] += s * br[j];
    }
  }
  return out;
}

Matrix matmul_a_bt(const Matrix& a, const Matrix& b) {
  require(a.cols == b.cols, "matmul_a_bt", a, b);
  Matrix out(a.rows, b.rows);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* ar = a.row(i);
    for (std::size_t j = 0; j < b.rows; ++j) {
      const double* br = b.row(j);
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols; ++k) s += ar[k] * br[k];
      out(i, j) = s;
    }
  }
  return out;
}

void add_inplace(Matrix& target, const Matrix& other, double scale) {
  require(target.rows == other.rows && target.cols == other.cols, "add", target, other);
  for (std::size_t k = 0; k < target.data.size(); ++k) target.data[k] += scale * other.data[k];
}

Matrix transpose(const Matrix& a) {
  Matrix out(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) out(j, i) = a(i, j);
  return out;
}

double max_abs(const Matrix& a) {
  double m = 0.0;
  for (double v : a.data) m = std::max(m, std::abs(v));
  return m;
}

void init_uniform(Parameter& p, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  for (double& v : p.value.data) v = (2.0 * rng.uniform() - 1.0) * bound;
}

Matrix linear_forward(const Matrix& x, const Parameter& weight, const Parameter* bias) {
  if (x.cols != weight.value.rows) {
    throw ShapeError("linear '" + weight.name + "': input " + x.shape() + " vs weight " +
                     weight.value.shape());
  }
  Matrix y = matmul(x, weight.value);
  if (bias) {
    for (std::size_t r = 0; r < y.rows; ++r) {
      double* yr = y.row(r);
      for (std::size_t c = 0; c < y.cols; ++c) yr[c] += bias->value.data[c];
    }
  }
  return y;
}

Matrix linear_backward(const Matrix& x, Parameter& weight, Parameter* bias, const Matrix& dy) {
  if (dy.rows != x.rows || dy.cols != weight.value.cols) {
    throw ShapeError("linear '" + weight.name + "' backward: upstream " + dy.shape() +
                     " vs expected " + std::to_string(x.rows) + "x" +
                     std::to_string(weight.value.cols));
  }
  add_inplace(weight.grad, matmul_at_b(x, dy));
  if (bias) {
    for (std::size_t r = 0; r < dy.rows; ++r) {
      const double* d = dy.row(r);
      for (std::size_t c = 0; c < dy.cols; ++c) bias->grad.data[c] += d[c];
    }
  }
  return matmul_a_bt(dy, weight.value);
}

Matrix relu_forward(const Matrix& x) {
  Matrix y = x;
  for (double& v : y.data) v = v > 0.0 ? v : 0.0;
  return y;
}

Matrix relu_backward(const Matrix& pre_activation, const Matrix& dy) {
  Matrix dx = dy;
  for (std::size_t k = 0; k < dx.data.size(); ++k) {
    if (!(pre_activation.data[k] > 0.0)) dx.data[k] = 0.0;
  }
  return dx;
}

Matrix norm_forward(const Matrix& x, NormKind kind, NormCache* cache) {
  Matrix y(x.rows, x.cols);
  std::vector<double> inv(x.rows);
  const double d = static_cast<double>(x.cols);
  for (std::size_t r = 0; r < x.rows; ++r) {
    const double* xr = x.row(r);
    double* yr = y.row(r);
    double mean = 0.0;
    if (kind == NormKind::kLayer) {
      for (std::size_t c = 0; c < x.cols; ++c) mean += xr[c];
      mean /= d;
    }
    double sq = 0.0;
    for (std::size_t c = 0; c < x.cols; ++c) sq += (xr[c] - mean) * (xr[c] - mean);
    inv[r] = 1.0 / std::sqrt(sq / d + kNormEps);
    for (std::size_t c = 0; c < x.cols; ++c) yr[c] = (xr[c] - mean) * inv[r];
  }
  if (cache) {
    cache->output = y;
    cache->inv_scale = std::move(inv);
  }
  return y;
}

Matrix norm_backward(const NormCache& cache, NormKind kind, const Matrix& dy) {
  const Matrix& y = cache.output;
  Matrix dx(dy.rows, dy.cols);
  const double d = static_cast<double>(dy.cols);
  for (std::size_t r = 0; r < dy.rows; ++r) {
    const double* g = dy.row(r);
    const double* yr = y.row(r);
    double dot = 0.0;
    double sum = 0.0;
    for (std::size_t c = 0; c < dy.cols; ++c) {
      dot += g[c] * yr[c];
      sum += g[c];
    }
    dot /= d;
    sum /= d;
    const double shift = kind == NormKind::kLayer ? sum : 0.0;
    double* out = dx.row(r);
    for (std::size_t c = 0; c < dy.cols; ++c) {
      out[c] = cache.inv_scale[r] * (g[c] - shift - yr[c] * dot);
    }
  }
  return dx;
}

std::vector<double> rmsnorm(std::span<const double> h) {
  Matrix x(1, h.size());
  std::copy(h.begin(), h.end(), x.data.begin());
  return norm_forward(x, NormKind::kRms).data;
}

Matrix softmax_rows(const Matrix& logits, const std::vector<std::uint8_t>* mask) {
  Matrix p(logits.rows, logits.cols);
  for (std::size_t r = 0; r < logits.rows; ++r) {
    const double* l = logits.row(r);
    double* out = p.row(r);
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < logits.cols; ++c) {
      if (mask && !(*mask)[r * logits.cols + c]) continue;
      hi = std::max(hi, l[c]);
    }
    if (hi == -std::numeric_limits<double>::infinity()) continue;  // fully masked row
    double total = 0.0;
    for (std::size_t c = 0; c < logits.cols; ++c) {
      if (mask && !(*mask)[r * logits.cols + c]) continue;
      out[c] = std::exp(l[c] - hi);
      total += out[c];
    }
    for (std::size_t c = 0; c < logits.cols; ++c) out[c] /= total;
  }
  return p;
}

Linear::Linear(const std::string& name, std::size_t in, std::size_t out, bool with_bias,
               Rng& rng)
    : weight(name + ".weight", in, out) {
  init_uniform(weight, in, rng);
  if (with_bias) {
    bias.emplace(name + ".bias", 1, out);
    init_uniform(*bias, in, rng);
  }
}

void Linear::collect(std::vector<Parameter*>& out) {
  out.push_back(&weight);
  if (bias) out.push_back(&*bias);
}

FeedForward::FeedForward(const std::string& name, std::size_t in, std::size_t hidden,
                         std::size_t out, Rng& rng)
    : first(name + ".w1", in, hidden, false, rng), second(name + ".w2", hidden, out, false, rng) {}

Matrix FeedForward::forward(const Matrix& x, Cache* cache) const {
  Matrix pre = first.forward(x);
  Matrix hidden = relu_forward(pre);
  Matrix y = second.forward(hidden);
  if (cache) {
    cache->input = x;
    cache->pre = std::move(pre);
    cache->hidden = std::move(hidden);
  }
  return y;
}

Matrix FeedForward::backward(const Cache& cache, const Matrix& dy) {
  Matrix dhidden = second.backward(cache.hidden, dy);
  Matrix dpre = relu_backward(cache.pre, dhidden);
  return first.backward(cache.input, dpre);
}

void FeedForward::collect(std::vector<Parameter*>& out) {
  first.collect(out);
  second.collect(out);
}

MultiHeadAttention::MultiHeadAttention(const std::string& name, std::size_t d, std::size_t h,
                                       Rng& rng)
    : dim(d), heads(h) {
  if (h == 0 || d % h != 0) {
    throw ConfigError("attention dim " + std::to_string(d) + " not divisible by heads " +
                      std::to_string(h));
  }
  query = Linear(name + ".q", d, d, false, rng);
  key = Linear(name + ".k", d, d, false, rng);
  value = Linear(name + ".v", d, d, false, rng);
  output = Linear(name + ".o", d, d, false, rng);
}

Matrix MultiHeadAttention::forward(const Matrix& x, Cache* cache) const {
  const std::size_t n = x.rows;
  const std::size_t hd = dim / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  Matrix q = query.forward(x);
  Matrix k = key.forward(x);
  Matrix v = value.forward(x);
  Matrix context(n, dim);
  std::vector<Matrix> attention;
  if (cache) attention.reserve(heads);

  Matrix scores(n, n);
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t off = h * hd;
    for (std::size_t i = 0; i < n; ++i) {
      const double* qi = q.row(i) + off;
      for (std::size_t j = 0; j < n; ++j) {
        const double* kj = k.row(j) + off;
        double s = 0.0;
        for (std::size_t c = 0; c < hd; ++c) s += qi[c] * kj[c];
        scores(i, j) = s * scale;
      }
    }
    Matrix a = softmax_rows(scores);
    for (std::size_t i = 0; i < n; ++i) {
      double* ci = context.row(i) + off;
      const double* ai = a.row(i);
      for (std::size_t j = 0; j < n; ++j) {
        const double w = ai[j];
        const double* vj = v.row(j) + off;
        for (std::size_t c = 0; c < hd; ++c) ci[c] += w * vj[c];
      }
    }
    if (cache) attention.push_back(std::move(a));
  }
  Matrix y = output.forward(context);
  if (cache) {
    cache->input = x;
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->attention = std::move(attention);
    cache->context = std::move(context);
  }
  return y;
}

Matrix MultiHeadAttention::backward(const Cache& cache, const Matrix& dy) {
  const std::size_t n = cache.input.rows;
  const std::size_t hd = dim / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  Matrix dcontext = output.backward(cache.context, dy);
  Matrix dq(n, dim), dk(n, dim), dv(n, dim);
  Matrix da(n, n);

  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t off = h * hd;
    const Matrix& a = cache.attention[h];
    // dA = dctx_h v_h^T, dv_h = A^T dctx_h
    for (std::size_t i = 0; i < n; ++i) {
      const double* dci = dcontext.row(i) + off;
      for (std::size_t j = 0; j < n; ++j) {
        const double* vj = cache.v.row(j) + off;
        double s = 0.0;
        for (std::size_t c = 0; c < hd; ++c) s += dci[c] * vj[c];
        da(i, j) = s;
        const double w = a(i, j);
        double* dvj = dv.row(j) + off;
        for (std::size_t c = 0; c < hd; ++c) dvj[c] += w * dci[c];
      }
    }
    // Softmax backward, then the scaled score product.
    for (std::size_t i = 0; i < n; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += da(i, j) * a(i, j);
      const double* qi = cache.q.row(i) + off;
      double* dqi = dq.row(i) + off;
      for (std::size_t j = 0; j < n; ++j) {
        const double ds = a(i, j) * (da(i, j) - dot) * scale;
        if (ds == 0.0) continue;
        const double* kj = cache.k.row(j) + off;
        double* dkj = dk.row(j) + off;
        for (std::size_t c = 0; c < hd; ++c) {
          dqi[c] += ds * kj[c];
          dkj[c] += ds * qi[c];
        }
      }
    }
  }
  Matrix dx = query.backward(cache.input, dq);
  add_inplace(dx, key.backward(cache.input, dk));
  add_inplace(dx, value.backward(cache.input, dv));
  return dx;
}

void MultiHeadAttention::collect(std::vector<Parameter*>& out) {
  query.collect(out);
  key.collect(out);
  value.collect(out);
  output.collect(out);
}

void OptimizerConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (!(lr_decay_per_epoch > 0.0 && lr_decay_per_epoch <= 1.0)) {
    throw ConfigError("lr_decay_per_epoch must be in (0, 1]");
  }
  if (!(clip_norm > 0.0)) throw ConfigError("clip_norm must be > 0");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
}

double global_grad_norm(std::span<Parameter* const> params) {
  double sq = 0.0;
  for (const Parameter* p : params)
    for (double g : p->grad.data) sq += g * g;
  return std::sqrt(sq);
}

AdamW::AdamW(OptimizerConfig config) : config_(config), lr_(config.learning_rate) {}

AdamW::StepReport AdamW::step(std::span<Parameter* const> params) {
  StepReport report;
  report.grad_norm = global_grad_norm(params);
  if (!std::isfinite(report.grad_norm)) {
    ++skipped_;
    return report;
  }
  if (report.grad_norm > config_.clip_norm) report.clip_scale = config_.clip_norm / report.grad_norm;

  ++steps_;
  const double t = static_cast<double>(steps_);
  const double bc1 = 1.0 - std::pow(config_.beta1, t);
  const double bc2 = 1.0 - std::pow(config_.beta2, t);
  for (Parameter* p : params) {
    for (std::size_t k = 0; k < p->value.data.size(); ++k) {
      const double g = p->grad.data[k] * report.clip_scale;
      double& m = p->first_moment.data[k];
      double& v = p->second_moment.data[k];
      m = config_.beta1 * m + (1.0 - config_.beta1) * g;
      v = config_.beta2 * v + (1.0 - config_.beta2) * g * g;
      double& w = p->value.data[k];
      w -= lr_ * config_.weight_decay * w;
      w -= lr_ * (m / bc1) / (std::sqrt(v / bc2) + config_.eps);
    }
  }
  report.applied = true;
  return report;
}

GradCheckReport gradient_check(std::span<Parameter* const> params,
                               const std::function<double()>& loss,
                               const std::function<void()>& backward, double tolerance,
                               double step) {
  backward();
  GradCheckReport report;
  for (Parameter* p : params) {
    const Matrix analytic = p->grad;
    Matrix numeric(analytic.rows, analytic.cols);
    for (std::size_t k = 0; k < p->value.data.size(); ++k) {
      const double saved = p->value.data[k];
      p->value.data[k] = saved + step;
      const double up = loss();
      p->value.data[k] = saved - step;
      const double down = loss();
      p->value.data[k] = saved;
      numeric.data[k] = (up - down) / (2.0 * step);
    }
    GradCheckBlock block;
    block.name = p->name;
    for (std::size_t k = 0; k < numeric.data.size(); ++k) {
      block.max_abs_error =
          std::max(block.max_abs_error, std::abs(analytic.data[k] - numeric.data[k]));
    }
    const double scale = std::max({max_abs(analytic), max_abs(numeric), 1e-6});
    block.max_rel_error = block.max_abs_error / scale;
    if (!std::isfinite(block.max_rel_error)) block.max_rel_error = std::numeric_limits<double>::infinity();
    report.worst_rel_error = std::max(report.worst_rel_error, block.max_rel_error);
    report.blocks.push_back(std::move(block));
  }
  report.passed = report.worst_rel_error < tolerance;
  return report;
}

}  // namespace nico::nn
