#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

namespace pgt::ad {

using Mat = Eigen::MatrixXd;

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Tape-based reverse-mode autodiff over dense double matrices. A Graph is
// built per forward pass; backward() walks the tape in reverse creation
// order. Parameters are bound as leaves pointing at external value/grad
// storage, so tables are never copied into the tape.
//
// With grads disabled the same code path runs as a plain evaluator: no
// closures are recorded and no gradient buffers are allocated.
class Graph {
 public:
  explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

  bool grad_enabled() const { return grad_enabled_; }
  size_t size() const { return nodes_.size(); }

  Var constant(Mat v);
  Var scalar(double v);
  // Leaf bound to external storage. grad_sink may be null (frozen input).
  Var leaf(const Mat* value, Mat* grad_sink);

  const Mat& val(Var v) const;
  double scalar_val(Var v) const { return val(v)(0, 0); }

  // ---- arithmetic ----
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var cmul(Var a, Var b);          // elementwise product
  Var scale(Var a, double s);
  Var add_scalar(Var a, double s);
  Var add_mat(Var a, const Mat& m);       // constant offset (masks)
  Var add_rowvec(Var a, Var row);         // broadcast 1xC over all rows
  Var add_colvec(Var a, Var col);         // broadcast Rx1 over all columns
  Var mul_rowvec(Var a, Var row);         // broadcast multiply
  Var div_colvec(Var a, Var col);         // divide row r by col(r)
  Var minimum(Var a, Var b);              // elementwise min (subgradient: first arg on ties)

  // ---- linear algebra ----
  Var matmul(Var a, Var b, bool trans_a = false, bool trans_b = false);
  Var transpose(Var a);

  // ---- shape ----
  Var rows(Var a, int start, int n);
  Var cols(Var a, int start, int n);
  Var concat_rows(const std::vector<Var>& parts);
  Var concat_cols(const std::vector<Var>& parts);
  Var gather_rows(Var table, std::vector<int> idx);
  // Fused embedding lookup straight from an external table.
  Var embed(const Mat* table, Mat* grad_sink, std::vector<int> idx);
  // n x 1 column of selected entries a(r_i, c_i).
  Var pick(Var a, std::vector<std::pair<int, int>> coords);
  Var stack_scalars(const std::vector<Var>& scalars);  // n x 1

  // ---- reductions ----
  Var sum(Var a);        // 1x1
  Var mean(Var a);       // 1x1
  Var row_mean(Var a);   // Rx1
  Var row_max(Var a);    // Rx1, subgradient to first max per row
  Var max_all(Var a);    // 1x1
  Var col_logsumexp(Var a);  // 1xC, reduces each column over rows

  // ---- nonlinear ----
  Var log_op(Var a);
  Var exp_op(Var a);
  Var sqrt_op(Var a);
  Var square(Var a);
  Var sigmoid(Var a);
  Var log_sigmoid(Var a);
  Var gelu(Var a);
  Var softmax_rows(Var a);
  Var log_softmax_rows(Var a);

  void backward(Var scalar_loss);

 private:
  struct Node {
    Mat value;                 // unused for external leaves
    const Mat* external = nullptr;
    Mat* grad_sink = nullptr;
    Mat grad;
    bool needs_grad = false;
    std::function<void(Graph&, Node&)> back;
  };

  Node& node(Var v) { return nodes_[static_cast<size_t>(v.id)]; }
  const Node& node(Var v) const { return nodes_[static_cast<size_t>(v.id)]; }
  Mat& grad_buf(Var v);
  void accum(Var v, const Mat& g);
  Var make(Mat value, bool needs_grad, std::function<void(Graph&, Node&)> back);

  std::vector<Node> nodes_;
  bool grad_enabled_;
};

// Central finite-difference gradient check helper shared by the tests and
// the acceptance suite. Returns the worst relative error over all entries.
struct FiniteDiffReport {
  double max_rel_err = 0.0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
};
FiniteDiffReport finite_diff_check(Mat& param_value, Mat& param_grad,
                                   const std::function<double()>& loss_fn,
                                   const std::function<void()>& compute_grads,
                                   double step = 1e-5);

}  // namespace pgt::ad
