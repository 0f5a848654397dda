#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace cortical {

using Matrix = Eigen::MatrixXd;

class Tape;

// Handle to a node recorded on a Tape. Cheap to copy; valid until the tape
// is destroyed or cleared.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  const Matrix& value() const;
  const Matrix& grad() const;
  double scalar() const;  // value of a 1x1 node
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  bool valid() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  int id() const { return id_; }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

// Records a feed-forward computation over dense matrices for reverse-mode
// differentiation. Nodes are created in topological order; backward() walks
// them in reverse.
class Tape {
 public:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    // Propagates this node's grad into its parents. Null for leaves/constants.
    std::function<void(Tape&, const Node&)> backprop;
  };

  Var constant(Matrix value);          // no gradient tracked
  Var leaf(const Matrix& value);       // gradient accumulated here

  // Runs reverse-mode accumulation from a scalar (1x1) loss node.
  void backward(Var loss);

  void clear();
  std::size_t size() const { return nodes_.size(); }

  // Node plumbing used by the operation free functions.
  Var emplace(Matrix value, bool requires_grad,
              std::function<void(Tape&, const Node&)> backprop);
  Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  Matrix& grad_ref(int id);  // zero-initialized on first touch
  bool tracks(int id) const { return node(id).requires_grad; }

 private:
  std::vector<Node> nodes_;
};

// Expression-style free functions. Operands must live on the same tape.
Var matmul(Var a, Var b);
Var add_rowvec(Var x, Var bias);   // bias is 1 x n, broadcast over rows
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var x, double c);
Var add_scalar(Var x, double c);
Var relu(Var x);
Var tanh(Var x);
Var sigmoid(Var x);
Var softplus(Var x);
// log(softplus(x)) and log(sigmoid(x)) fused: exact for arbitrarily negative
// inputs, where applying the head first would underflow to zero before the log.
Var log_softplus(Var x);
Var log_sigmoid(Var x);
Var log(Var x);
Var square(Var x);
Var reciprocal(Var x);
Var clamp_min(Var x, double lo);
Var hinge(Var x);                  // elementwise max(x, 0)
Var cmul(Var x, const Matrix& weights);            // elementwise constant weights
Var scale_cols(Var x, const Eigen::RowVectorXd& factors);
Var hstack(Var a, Var b);
Var permute_rows(Var x, const std::vector<int>& perm);
Var row_sqnorm(Var x);             // m x 1 of squared row norms
Var mean_all(Var x);
Var sum_all(Var x);
// Rowwise radial projection onto the closed ball of the given radius.
Var project_ball(Var x, double radius);

}  // namespace cortical
