#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace rcad {

// Dense row-major tensor of 64-bit floats, rank 1..3. Copies are shallow:
// they share the value and gradient buffers, so a parameter handed to an
// optimizer and the same parameter inside a model see one storage. Tensors
// not attached to a tape are treated as immutable after construction and
// are safe to share across threads.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);
  Tensor(std::vector<int> shape, std::vector<double> values);

  // Construction from external data; rejects NaN/Inf.
  static Tensor from_values(std::vector<int> shape, std::vector<double> values);
  static Tensor zeros(std::vector<int> shape);
  static Tensor full(std::vector<int> shape, double value);
  static Tensor scalar(double value);

  bool defined() const { return impl_ != nullptr; }
  const std::vector<int>& shape() const;
  int rank() const;
  int dim(int axis) const;
  std::int64_t numel() const;
  std::string shape_str() const;

  const std::vector<double>& values() const;
  std::vector<double>& values();

  double operator()(int i) const;
  double operator()(int i, int j) const;
  double operator()(int i, int j, int k) const;
  double& operator()(int i);
  double& operator()(int i, int j);
  double& operator()(int i, int j, int k);

  // Value of a single-element tensor.
  double item() const;

  bool has_grad() const;
  const std::vector<double>& grad() const;
  std::vector<double>& grad();  // allocates zeros on first use
  void zero_grad();

  // Deep copy of the values; no grad, no tape attachment.
  Tensor clone() const;

 private:
  struct Impl {
    std::vector<int> shape;
    std::int64_t numel = 0;
    std::vector<double> values;
    std::vector<double> grad;  // empty until requested
    int node = -1;             // tape node handle
    std::uint64_t tape_id = 0; // which tape the handle belongs to
  };

  std::shared_ptr<Impl> impl_;
  friend class Tape;
};

std::string shape_to_string(const std::vector<int>& shape);

// Row-wise softmax of a [batch x classes] tensor; not recorded on any tape.
Tensor softmax(const Tensor& logits);

// Row-wise argmax; ties resolve to the lowest index.
std::vector<int> argmax_rows(const Tensor& logits);

// Define-by-run gradient tape. Operations execute eagerly and append a
// local-gradient rule; backward() replays the rules in exact reverse
// recording order. A tape is single-threaded and is rebuilt for every
// forward pass.
class Tape {
 public:
  Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // a[m x k] * b[k x n] -> [m x n]
  Tensor matmul(const Tensor& a, const Tensor& b);
  Tensor transpose(const Tensor& a);
  Tensor add(const Tensor& a, const Tensor& b);
  Tensor mul(const Tensor& a, const Tensor& b);  // elementwise
  // m[r x c] + bias[c], broadcast over rows
  Tensor add_bias(const Tensor& m, const Tensor& bias);
  Tensor sigmoid(const Tensor& x);
  Tensor tanh_act(const Tensor& x);
  // scale * x + shift, elementwise
  Tensor scale_add(const Tensor& x, double scale, double shift);
  // [r x p] ++ [r x q] -> [r x (p+q)]
  Tensor concat_cols(const Tensor& a, const Tensor& b);
  // seq[b x T x f] -> [b x f] at time t
  Tensor time_slice(const Tensor& seq, int t);
  // T tensors [b x f] -> [b x T x f]
  Tensor stack_time(const std::vector<Tensor>& steps);
  // sum of all elements -> scalar
  Tensor sum(const Tensor& x);
  // mean over the batch of -log softmax(logits)[label] -> scalar
  Tensor softmax_crossentropy(const Tensor& logits, const std::vector<int>& labels);

  // Populates grad buffers of every tensor reachable from `loss` with
  // d(loss)/d(tensor). Gradients accumulate additively: running backward
  // twice without zero_grad doubles them.
  void backward(const Tensor& loss);

  std::size_t num_ops() const { return ops_.size(); }

 private:
  struct OpRecord {
    std::function<void(Tape&)> back;
  };

  int node_for(const Tensor& t);
  Tensor make_result(std::vector<int> shape, std::vector<double> values);
  void record(std::function<void(Tape&)> back);
  // Adjoint buffer for a node, created zero-filled on demand.
  std::vector<double>& adj(int node, std::int64_t numel);
  // Null when the node received no adjoint (not on the path to the loss).
  const std::vector<double>* adj_if(int node) const;

  std::vector<OpRecord> ops_;
  std::vector<Tensor> nodes_;
  std::vector<std::vector<double>> adjoints_;
  std::uint64_t id_;
};

}  // namespace rcad
