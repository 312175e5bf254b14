#pragma once

// Tape-based reverse-mode differentiation over dense matrices.
//
// A Graph records every operation executed during a forward pass. Calling
// Graph::backward on a 1x1 result replays the tape in reverse, accumulating
// gradients additively into every node (a value consumed by k operations
// receives the sum of k contributions) and finally into the Parameters that
// were bound into the graph.
//
// A Graph is single-threaded. Several graphs may read the same frozen
// Parameters concurrently as long as none of them calls backward.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "vgsa/matrix.hpp"

namespace vgsa {

/// A trainable tensor with its accumulated gradient.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  bool recurrent = false;

  Parameter() = default;
  Parameter(std::string n, Matrix v, bool is_recurrent = false)
      : name(std::move(n)), value(std::move(v)), grad(value.rows(), value.cols()),
        recurrent(is_recurrent) {}

  void zero_grad() { grad = Matrix(value.rows(), value.cols()); }
};

class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  const Matrix& grad() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  double scalar() const;
  Graph& graph() const { return *graph_; }
  std::size_t id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

 private:
  friend class Graph;
  Var(Graph* g, std::size_t id) : graph_(g), id_(id) {}
  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

class Graph {
 public:
  /// Receives the output value, its gradient, and one accumulation slot per
  /// input. A slot is null when that input does not require a gradient.
  using Backward = std::function<void(const Matrix& out, const Matrix& out_grad,
                                      std::span<Matrix* const> in_grads)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Matrix value);
  /// Binds a parameter; repeated calls with the same parameter return the same node.
  Var param(Parameter& p);
  /// Row `row` of `table`, returned as a column vector. The gradient is
  /// scattered back into that row only.
  Var lookup(Parameter& table, std::size_t row);

  /// Appends a custom operation to the tape.
  Var record(Matrix value, std::initializer_list<Var> inputs, Backward backward);
  Var record(Matrix value, std::span<const Var> inputs, Backward backward);

  /// Reverse pass from a 1x1 node; gradients land in every bound Parameter.
  void backward(Var loss);

  const Matrix& value(Var v) const;
  const Matrix& grad(Var v) const;
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    const Matrix* external = nullptr;
    Matrix grad;
    std::vector<std::size_t> inputs;
    Backward backward;
    Parameter* param = nullptr;
    std::size_t lookup_row = 0;
    bool is_lookup = false;
    bool needs_grad = false;
  };

  const Matrix& node_value(std::size_t id) const {
    const Node& n = nodes_[id];
    return n.external ? *n.external : n.value;
  }

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> bound_;
  Matrix empty_;
};

namespace ad {

Var matmul(Var a, Var b);
Var transpose(Var x);
Var add(Var a, Var b);
Var mul(Var a, Var b);
/// Elementwise maximum; the gradient goes to `a` on ties.
Var max2(Var a, Var b);
Var scale(Var x, double s);
Var tanh(Var x);
Var sigmoid(Var x);
Var relu(Var x);
/// Sum of all entries, as 1x1.
Var sum(Var x);
/// Sum of a list of equally shaped values.
Var add_n(std::span<const Var> xs);

/// Row-wise softmax with per-row max subtraction.
Var softmax_rows(Var x);
/// Column-wise maximum over rows, as 1xd. Gradient to the first argmax.
Var reduce_max_rows(Var x);
/// Juxtaposes two row vectors.
Var concat_rows(Var a, Var b);
/// Stacks column vectors side by side into a d x n matrix.
Var concat_cols(std::span<const Var> columns);
/// Stacks row vectors on top of each other into an n x d matrix.
Var stack_rows(std::span<const Var> rows);
Var slice_rows(Var x, std::size_t begin, std::size_t count);
Var slice_cols(Var x, std::size_t begin, std::size_t count);

/// Inverted dropout: each entry is kept with probability 1-p and scaled by 1/(1-p).
Var dropout(Var x, double p, std::mt19937_64& rng);

/// -log softmax(logits)[target] for a column of logits.
Var softmax_cross_entropy(Var logits, std::size_t target);

/// Norm floor used by the cosine operations.
inline constexpr double kCosineEps = 1e-8;

/// Pairwise cosine similarity between the rows of a (m x d) and b (n x d).
/// Zero-norm rows are guarded with kCosineEps; the first use of the guard is
/// logged once per process.
Var cosine_similarity(Var a, Var b);
/// Cosine similarity of two vectors of equal length (any orientation), as 1x1.
Var cosine_sim(Var u, Var v);

}  // namespace ad

/// Strict variant for validation code: throws on a zero-norm vector.
double cosine_sim_strict(std::span<const double> u, std::span<const double> v);

}  // namespace vgsa
