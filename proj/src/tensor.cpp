#include "rcad/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <utility>

#include "rcad/error.hpp"

namespace rcad {

namespace {

std::int64_t shape_numel(const std::vector<int>& shape) {
  if (shape.empty() || shape.size() > 3) {
    throw DimensionError("tensor rank must be 1..3, got " + shape_to_string(shape));
  }
  std::int64_t n = 1;
  for (const int d : shape) {
    if (d <= 0) {
      throw DimensionError("tensor extents must be positive, got " + shape_to_string(shape));
    }
    n *= d;
  }
  return n;
}

double sigmoid_stable(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::atomic<std::uint64_t> g_tape_counter{0};

}  // namespace

std::string shape_to_string(const std::vector<int>& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

Tensor::Tensor(std::vector<int> shape) {
  const std::int64_t n = shape_numel(shape);
  impl_ = std::make_shared<Impl>();
  impl_->shape = std::move(shape);
  impl_->numel = n;
  impl_->values.assign(static_cast<std::size_t>(n), 0.0);
}

Tensor::Tensor(std::vector<int> shape, std::vector<double> values) {
  const std::int64_t n = shape_numel(shape);
  if (static_cast<std::int64_t>(values.size()) != n) {
    throw DimensionError("tensor shape " + shape_to_string(shape) + " needs " +
                         std::to_string(n) + " values, got " + std::to_string(values.size()));
  }
  impl_ = std::make_shared<Impl>();
  impl_->shape = std::move(shape);
  impl_->numel = n;
  impl_->values = std::move(values);
}

Tensor Tensor::from_values(std::vector<int> shape, std::vector<double> values) {
  for (const double v : values) {
    if (!std::isfinite(v)) {
      throw InputError("tensor values must be finite");
    }
  }
  return Tensor(std::move(shape), std::move(values));
}

Tensor Tensor::zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

Tensor Tensor::full(std::vector<int> shape, double value) {
  Tensor t(std::move(shape));
  std::fill(t.values().begin(), t.values().end(), value);
  return t;
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

const std::vector<int>& Tensor::shape() const { return impl_->shape; }

int Tensor::rank() const { return static_cast<int>(impl_->shape.size()); }

int Tensor::dim(int axis) const { return impl_->shape.at(static_cast<std::size_t>(axis)); }

std::int64_t Tensor::numel() const { return impl_->numel; }

std::string Tensor::shape_str() const { return shape_to_string(impl_->shape); }

const std::vector<double>& Tensor::values() const { return impl_->values; }

std::vector<double>& Tensor::values() { return impl_->values; }

double Tensor::operator()(int i) const { return impl_->values[static_cast<std::size_t>(i)]; }

double Tensor::operator()(int i, int j) const {
  return impl_->values[static_cast<std::size_t>(i) * impl_->shape[1] + j];
}

double Tensor::operator()(int i, int j, int k) const {
  const auto cols = static_cast<std::size_t>(impl_->shape[2]);
  const auto rows = static_cast<std::size_t>(impl_->shape[1]);
  return impl_->values[(static_cast<std::size_t>(i) * rows + j) * cols + k];
}

double& Tensor::operator()(int i) { return impl_->values[static_cast<std::size_t>(i)]; }

double& Tensor::operator()(int i, int j) {
  return impl_->values[static_cast<std::size_t>(i) * impl_->shape[1] + j];
}

double& Tensor::operator()(int i, int j, int k) {
  const auto cols = static_cast<std::size_t>(impl_->shape[2]);
  const auto rows = static_cast<std::size_t>(impl_->shape[1]);
  return impl_->values[(static_cast<std::size_t>(i) * rows + j) * cols + k];
}

double Tensor::item() const {
  if (impl_->numel != 1) {
    throw InputError("item() requires a single-element tensor, got " + shape_str());
  }
  return impl_->values[0];
}

bool Tensor::has_grad() const { return defined() && !impl_->grad.empty(); }

const std::vector<double>& Tensor::grad() const {
  if (impl_->grad.empty()) {
    throw Error("gradient has not been allocated for this tensor");
  }
  return impl_->grad;
}

std::vector<double>& Tensor::grad() {
  if (impl_->grad.empty()) {
    impl_->grad.assign(static_cast<std::size_t>(impl_->numel), 0.0);
  }
  return impl_->grad;
}

void Tensor::zero_grad() {
  if (!impl_->grad.empty()) {
    std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
  }
}

Tensor Tensor::clone() const {
  return Tensor(impl_->shape, impl_->values);
}

Tensor softmax(const Tensor& logits) {
  if (logits.rank() != 2) {
    throw DimensionError("softmax expects a rank-2 tensor, got " + logits.shape_str());
  }
  const int rows = logits.dim(0);
  const int cols = logits.dim(1);
  Tensor out(logits.shape());
  for (int i = 0; i < rows; ++i) {
    double mx = logits(i, 0);
    for (int j = 1; j < cols; ++j) mx = std::max(mx, logits(i, j));
    double total = 0.0;
    for (int j = 0; j < cols; ++j) {
      const double e = std::exp(logits(i, j) - mx);
      out(i, j) = e;
      total += e;
    }
    for (int j = 0; j < cols; ++j) out(i, j) /= total;
  }
  return out;
}

std::vector<int> argmax_rows(const Tensor& logits) {
  if (logits.rank() != 2) {
    throw DimensionError("argmax_rows expects a rank-2 tensor, got " + logits.shape_str());
  }
  std::vector<int> out(static_cast<std::size_t>(logits.dim(0)));
  for (int i = 0; i < logits.dim(0); ++i) {
    int best = 0;
    for (int j = 1; j < logits.dim(1); ++j) {
      if (logits(i, j) > logits(i, best)) best = j;
    }
    out[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

Tape::Tape() : id_(++g_tape_counter) {}

int Tape::node_for(const Tensor& t) {
  if (!t.defined()) {
    throw InputError("operation received an undefined tensor");
  }
  Tensor::Impl* impl = t.impl_.get();
  if (impl->tape_id == id_ && impl->node >= 0) {
    return impl->node;
  }
  impl->tape_id = id_;
  impl->node = static_cast<int>(nodes_.size());
  nodes_.push_back(t);
  return impl->node;
}

Tensor Tape::make_result(std::vector<int> shape, std::vector<double> values) {
  Tensor out(std::move(shape), std::move(values));
  node_for(out);
  return out;
}

void Tape::record(std::function<void(Tape&)> back) {
  ops_.push_back(OpRecord{std::move(back)});
}

std::vector<double>& Tape::adj(int node, std::int64_t numel) {
  auto& a = adjoints_[static_cast<std::size_t>(node)];
  if (a.empty()) {
    a.assign(static_cast<std::size_t>(numel), 0.0);
  }
  return a;
}

const std::vector<double>* Tape::adj_if(int node) const {
  const auto& a = adjoints_[static_cast<std::size_t>(node)];
  return a.empty() ? nullptr : &a;
}

Tensor Tape::matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " +
                         (a.defined() ? a.shape_str() : "[?]") + " and " +
                         (b.defined() ? b.shape_str() : "[?]"));
  }
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
  const auto& av = a.values();
  const auto& bv = b.values();
  for (int i = 0; i < m; ++i) {
    for (int p = 0; p < k; ++p) {
      const double aip = av[static_cast<std::size_t>(i) * k + p];
      const std::size_t brow = static_cast<std::size_t>(p) * n;
      const std::size_t orow = static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) {
        out[orow + j] += aip * bv[brow + j];
      }
    }
  }
  const int ia = node_for(a), ib = node_for(b);
  Tensor c = make_result({m, n}, std::move(out));
  const int ic = c.impl_->node;
  record([ia, ib, ic, a, b, m, k, n](Tape& t) {
    const auto* gout = t.adj_if(ic);
    if (!gout) return;
    // dA = dC * B^T, dB = A^T * dC
    auto& ga = t.adj(ia, a.numel());
    auto& gb = t.adj(ib, b.numel());
    const auto& av = a.values();
    const auto& bv = b.values();
    for (int i = 0; i < m; ++i) {
      for (int p = 0; p < k; ++p) {
        double acc = 0.0;
        const std::size_t grow = static_cast<std::size_t>(i) * n;
        const std::size_t brow = static_cast<std::size_t>(p) * n;
        for (int j = 0; j < n; ++j) acc += (*gout)[grow + j] * bv[brow + j];
        ga[static_cast<std::size_t>(i) * k + p] += acc;
      }
    }
    for (int i = 0; i < m; ++i) {
      const std::size_t grow = static_cast<std::size_t>(i) * n;
      for (int p = 0; p < k; ++p) {
        const double aip = av[static_cast<std::size_t>(i) * k + p];
        const std::size_t brow = static_cast<std::size_t>(p) * n;
        for (int j = 0; j < n; ++j) gb[brow + j] += aip * (*gout)[grow + j];
      }
    }
  });
  return c;
}

Tensor Tape::transpose(const Tensor& a) {
  if (a.rank() != 2) {
    throw DimensionError("transpose expects a rank-2 tensor, got " + a.shape_str());
  }
  const int r = a.dim(0), c = a.dim(1);
  std::vector<double> out(static_cast<std::size_t>(r) * c);
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < c; ++j) {
      out[static_cast<std::size_t>(j) * r + i] = a(i, j);
    }
  }
  const int ia = node_for(a);
  Tensor t_out = make_result({c, r}, std::move(out));
  const int io = t_out.impl_->node;
  record([ia, io, r, c, a](Tape& t) {
    const auto* gout = t.adj_if(io);
    if (!gout) return;
    auto& ga = t.adj(ia, a.numel());
    for (int i = 0; i < r; ++i) {
      for (int j = 0; j < c; ++j) {
        ga[static_cast<std::size_t>(i) * c + j] += (*gout)[static_cast<std::size_t>(j) * r + i];
      }
    }
  });
  return t_out;
}

Tensor Tape::add(const Tensor& a, const Tensor& b) {
  if (!a.defined() || !b.defined() || a.shape() != b.shape()) {
    throw DimensionError("add: shape mismatch " + (a.defined() ? a.shape_str() : "[?]") +
                         " vs " + (b.defined() ? b.shape_str() : "[?]"));
  }
  std::vector<double> out(a.values());
  const auto& bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  const int ia = node_for(a), ib = node_for(b);
  Tensor c = make_result(a.shape(), std::move(out));
  const int ic = c.impl_->node;
  const std::int64_t n = a.numel();
  record([ia, ib, ic, n](Tape& t) {
    const auto* gout = t.adj_if(ic);
    if (!gout) return;
    auto& ga = t.adj(ia, n);
    auto& gb = t.adj(ib, n);
    for (std::size_t i = 0; i < gout->size(); ++i) {
      ga[i] += (*gout)[i];
      gb[i] += (*gout)[i];
    }
  });
  return c;
}

Tensor Tape::mul(const Tensor& a, const Tensor& b) {
  if (!a.defined() || !b.defined() || a.shape() != b.shape()) {
    throw DimensionError("mul: shape mismatch " + (a.defined() ? a.shape_str() : "[?]") +
                         " vs " + (b.defined() ? b.shape_str() : "[?]"));
  }
  std::vector<double> out(a.values());
  const auto& bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  const int ia = node_for(a), ib = node_for(b);
  Tensor c = make_result(a.shape(), std::move(out));
  const int ic = c.impl_->node;
  record([ia, ib, ic, a, b](Tape& t) {
    const auto* gout = t.adj_if(ic);
    if (!gout) return;
    auto& ga = t.adj(ia, a.numel());
    auto& gb = t.adj(ib, b.numel());
    const auto& av = a.values();
    const auto& bv = b.values();
    for (std::size_t i = 0; i < gout->size(); ++i) {
      ga[i] += (*gout)[i] * bv[i];
      gb[i] += (*gout)[i] * av[i];
    }
  });
  return c;
}

Tensor Tape::add_bias(const Tensor& m, const Tensor& bias) {
  if (m.rank() != 2 || bias.rank() != 1 || bias.dim(0) != m.dim(1)) {
    throw DimensionError("add_bias: expected [r x c] + [c], got " + m.shape_str() + " and " +
                         bias.shape_str());
  }
  const int r = m.dim(0), c = m.dim(1);
  std::vector<double> out(m.values());
  const auto& bv = bias.values();
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < c; ++j) out[static_cast<std::size_t>(i) * c + j] += bv[static_cast<std::size_t>(j)];
  }
  const int im = node_for(m), ib = node_for(bias);
  Tensor result = make_result(m.shape(), std::move(out));
  const int io = result.impl_->node;
  record([im, ib, io, r, c](Tape& t) {
    const auto* gout = t.adj_if(io);
    if (!gout) return;
    auto& gm = t.adj(im, static_cast<std::int64_t>(r) * c);
    auto& gb = t.adj(ib, c);
    for (int i = 0; i < r; ++i) {
      for (int j = 0; j < c; ++j) {
        const double g = (*gout)[static_cast<std::size_t>(i) * c + j];
        gm[static_cast<std::size_t>(i) * c + j] += g;
        gb[static_cast<std::size_t>(j)] += g;
      }
    }
  });
  return result;
}

Tensor Tape::sigmoid(const Tensor& x) {
  std::vector<double> out(x.values().size());
  const auto& xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = sigmoid_stable(xv[i]);
  const int ix = node_for(x);
  Tensor s = make_result(x.shape(), std::move(out));
  const int is = s.impl_->node;
  record([ix, is, s, n = x.numel()](Tape& t) {
    const auto* gout = t.adj_if(is);
    if (!gout) return;
    auto& gx = t.adj(ix, n);
    const auto& sv = s.values();
    for (std::size_t i = 0; i < gout->size(); ++i) {
      gx[i] += (*gout)[i] * sv[i] * (1.0 - sv[i]);
    }
  });
  return s;
}

Tensor Tape::tanh_act(const Tensor& x) {
  std::vector<double> out(x.values().size());
  const auto& xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(xv[i]);
  const int ix = node_for(x);
  Tensor s = make_result(x.shape(), std::move(out));
  const int is = s.impl_->node;
  record([ix, is, s, n = x.numel()](Tape& t) {
    const auto* gout = t.adj_if(is);
    if (!gout) return;
    auto& gx = t.adj(ix, n);
    const auto& sv = s.values();
    for (std::size_t i = 0; i < gout->size(); ++i) {
      gx[i] += (*gout)[i] * (1.0 - sv[i] * sv[i]);
    }
  });
  return s;
}

Tensor Tape::scale_add(const Tensor& x, double scale, double shift) {
  std::vector<double> out(x.values());
  for (double& v : out) v = scale * v + shift;
  const int ix = node_for(x);
  Tensor s = make_result(x.shape(), std::move(out));
  const int is = s.impl_->node;
  record([ix, is, scale, n = x.numel()](Tape& t) {
    const auto* gout = t.adj_if(is);
    if (!gout) return;
    auto& gx = t.adj(ix, n);
    for (std::size_t i = 0; i < gout->size(); ++i) gx[i] += scale * (*gout)[i];
  });
  return s;
}

Tensor Tape::concat_cols(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(0) != b.dim(0)) {
    throw DimensionError("concat_cols: row counts differ, " + a.shape_str() + " vs " +
                         b.shape_str());
  }
  const int r = a.dim(0), p = a.dim(1), q = b.dim(1);
  std::vector<double> out(static_cast<std::size_t>(r) * (p + q));
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < p; ++j) out[static_cast<std::size_t>(i) * (p + q) + j] = a(i, j);
    for (int j = 0; j < q; ++j) out[static_cast<std::size_t>(i) * (p + q) + p + j] = b(i, j);
  }
  const int ia = node_for(a), ib = node_for(b);
  Tensor c = make_result({r, p + q}, std::move(out));
  const int ic = c.impl_->node;
  record([ia, ib, ic, r, p, q](Tape& t) {
    const auto* gout = t.adj_if(ic);
    if (!gout) return;
    auto& ga = t.adj(ia, static_cast<std::int64_t>(r) * p);
    auto& gb = t.adj(ib, static_cast<std::int64_t>(r) * q);
    for (int i = 0; i < r; ++i) {
      const std::size_t grow = static_cast<std::size_t>(i) * (p + q);
      for (int j = 0; j < p; ++j) ga[static_cast<std::size_t>(i) * p + j] += (*gout)[grow + j];
      for (int j = 0; j < q; ++j) gb[static_cast<std::size_t>(i) * q + j] += (*gout)[grow + p + j];
    }
  });
  return c;
}

Tensor Tape::time_slice(const Tensor& seq, int t_index) {
  if (seq.rank() != 3) {
    throw DimensionError("time_slice expects a rank-3 tensor, got " + seq.shape_str());
  }
  if (t_index < 0 || t_index >= seq.dim(1)) {
    throw InputError("time_slice: index " + std::to_string(t_index) + " out of range for " +
                     seq.shape_str());
  }
  const int b = seq.dim(0), steps = seq.dim(1), f = seq.dim(2);
  std::vector<double> out(static_cast<std::size_t>(b) * f);
  for (int i = 0; i < b; ++i) {
    for (int j = 0; j < f; ++j) out[static_cast<std::size_t>(i) * f + j] = seq(i, t_index, j);
  }
  const int is = node_for(seq);
  Tensor slice = make_result({b, f}, std::move(out));
  const int io = slice.impl_->node;
  record([is, io, b, steps, f, t_index](Tape& t) {
    const auto* gout = t.adj_if(io);
    if (!gout) return;
    auto& gs = t.adj(is, static_cast<std::int64_t>(b) * steps * f);
    for (int i = 0; i < b; ++i) {
      for (int j = 0; j < f; ++j) {
        gs[(static_cast<std::size_t>(i) * steps + t_index) * f + j] +=
            (*gout)[static_cast<std::size_t>(i) * f + j];
      }
    }
  });
  return slice;
}

Tensor Tape::stack_time(const std::vector<Tensor>& steps) {
  if (steps.empty()) {
    throw InputError("stack_time: empty step list");
  }
  const int b = steps[0].dim(0), f = steps[0].dim(1);
  const int tcount = static_cast<int>(steps.size());
  std::vector<int> in_ids;
  in_ids.reserve(steps.size());
  for (const Tensor& s : steps) {
    if (s.rank() != 2 || s.dim(0) != b || s.dim(1) != f) {
      throw DimensionError("stack_time: step shape " + s.shape_str() + " differs from " +
                           steps[0].shape_str());
    }
    in_ids.push_back(node_for(s));
  }
  std::vector<double> out(static_cast<std::size_t>(b) * tcount * f);
  for (int ti = 0; ti < tcount; ++ti) {
    const auto& sv = steps[static_cast<std::size_t>(ti)].values();
    for (int i = 0; i < b; ++i) {
      for (int j = 0; j < f; ++j) {
        out[(static_cast<std::size_t>(i) * tcount + ti) * f + j] =
            sv[static_cast<std::size_t>(i) * f + j];
      }
    }
  }
  Tensor seq = make_result({b, tcount, f}, std::move(out));
  const int io = seq.impl_->node;
  record([in_ids, io, b, tcount, f](Tape& t) {
    const auto* gout = t.adj_if(io);
    if (!gout) return;
    for (int ti = 0; ti < tcount; ++ti) {
      auto& gs = t.adj(in_ids[static_cast<std::size_t>(ti)], static_cast<std::int64_t>(b) * f);
      for (int i = 0; i < b; ++i) {
        for (int j = 0; j < f; ++j) {
          gs[static_cast<std::size_t>(i) * f + j] +=
              (*gout)[(static_cast<std::size_t>(i) * tcount + ti) * f + j];
        }
      }
    }
  });
  return seq;
}

Tensor Tape::sum(const Tensor& x) {
  double total = 0.0;
  for (const double v : x.values()) total += v;
  const int ix = node_for(x);
  Tensor s = make_result({1}, {total});
  const int is = s.impl_->node;
  record([ix, is, n = x.numel()](Tape& t) {
    const auto* gout = t.adj_if(is);
    if (!gout) return;
    auto& gx = t.adj(ix, n);
    for (double& g : gx) g += (*gout)[0];
  });
  return s;
}

Tensor Tape::softmax_crossentropy(const Tensor& logits, const std::vector<int>& labels) {
  if (logits.rank() != 2) {
    throw DimensionError("softmax_crossentropy expects rank-2 logits, got " + logits.shape_str());
  }
  const int batch = logits.dim(0), classes = logits.dim(1);
  if (static_cast<int>(labels.size()) != batch) {
    throw InputError("softmax_crossentropy: " + std::to_string(labels.size()) +
                     " labels for batch of " + std::to_string(batch));
  }
  for (const int y : labels) {
    if (y < 0 || y >= classes) {
      throw InputError("softmax_crossentropy: label " + std::to_string(y) +
                       " outside [0, " + std::to_string(classes) + ")");
    }
  }
  const Tensor probs = softmax(logits);
  double total = 0.0;
  for (int i = 0; i < batch; ++i) {
    // log softmax via the stabilized identity, not log(probs), to keep
    // saturated cases exact
    double mx = logits(i, 0);
    for (int j = 1; j < classes; ++j) mx = std::max(mx, logits(i, j));
    double lse = 0.0;
    for (int j = 0; j < classes; ++j) lse += std::exp(logits(i, j) - mx);
    total += mx + std::log(lse) - logits(i, labels[static_cast<std::size_t>(i)]);
  }
  const int il = node_for(logits);
  Tensor loss = make_result({1}, {total / batch});
  const int io = loss.impl_->node;
  record([il, io, probs, labels, batch, classes](Tape& t) {
    const auto* gout = t.adj_if(io);
    if (!gout) return;
    auto& gl = t.adj(il, static_cast<std::int64_t>(batch) * classes);
    const double scale = (*gout)[0] / batch;
    for (int i = 0; i < batch; ++i) {
      for (int j = 0; j < classes; ++j) {
        const double onehot = (labels[static_cast<std::size_t>(i)] == j) ? 1.0 : 0.0;
        gl[static_cast<std::size_t>(i) * classes + j] += scale * (probs(i, j) - onehot);
      }
    }
  });
  return loss;
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.impl_->tape_id != id_ || loss.impl_->node < 0) {
    throw InputError("backward: loss tensor was not recorded on this tape");
  }
  if (loss.numel() != 1) {
    throw InputError("backward: loss must be scalar, got " + loss.shape_str());
  }
  adjoints_.assign(nodes_.size(), {});
  adj(loss.impl_->node, 1)[0] = 1.0;
  for (std::size_t i = ops_.size(); i > 0; --i) {
    ops_[i - 1].back(*this);
  }
  for (std::size_t n = 0; n < nodes_.size(); ++n) {
    const auto& a = adjoints_[n];
    if (a.empty()) continue;
    auto& g = nodes_[n].grad();
    for (std::size_t i = 0; i < a.size(); ++i) g[i] += a[i];
  }
  adjoints_.clear();
}

}  // namespace rcad
