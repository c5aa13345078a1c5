#include "pgt/autodiff.hpp"

#include <cmath>

#include "pgt/common.hpp"

namespace pgt::ad {

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
}

Var Graph::make(Mat value, bool needs_grad, std::function<void(Graph&, Node&)> back) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = grad_enabled_ && needs_grad;
  if (n.needs_grad) n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Graph::constant(Mat v) { return make(std::move(v), false, nullptr); }

Var Graph::scalar(double v) {
  Mat m(1, 1);
  m(0, 0) = v;
  return constant(std::move(m));
}

Var Graph::leaf(const Mat* value, Mat* grad_sink) {
  Node n;
  n.external = value;
  n.grad_sink = grad_enabled_ ? grad_sink : nullptr;
  n.needs_grad = grad_enabled_ && grad_sink != nullptr;
  if (n.needs_grad) {
    n.back = [](Graph&, Node& self) {
      if (self.grad.size() > 0) *self.grad_sink += self.grad;
    };
  }
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

const Mat& Graph::val(Var v) const {
  const Node& n = node(v);
  return n.external ? *n.external : n.value;
}

Mat& Graph::grad_buf(Var v) {
  Node& n = node(v);
  if (n.grad.size() == 0) n.grad = Mat::Zero(val(v).rows(), val(v).cols());
  return n.grad;
}

void Graph::accum(Var v, const Mat& g) {
  if (!node(v).needs_grad) return;
  grad_buf(v) += g;
}

void Graph::backward(Var loss) {
  if (!grad_enabled_) throw PipelineError("backward on a no-grad graph");
  if (val(loss).rows() != 1 || val(loss).cols() != 1)
    throw PipelineError("backward expects a scalar loss node");
  grad_buf(loss).setConstant(1.0);
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (n.needs_grad && n.back && n.grad.size() > 0) n.back(*this, n);
  }
}

// ---------------- arithmetic ----------------

Var Graph::add(Var a, Var b) {
  Mat v = val(a) + val(b);
  const bool ng = node(a).needs_grad || node(b).needs_grad;
  return make(std::move(v), ng, [a, b](Graph& g, Node& self) {
    g.accum(a, self.grad);
    g.accum(b, self.grad);
  });
}

Var Graph::sub(Var a, Var b) {
  Mat v = val(a) - val(b);
  const bool ng = node(a).needs_grad || node(b).needs_grad;
  return make(std::move(v), ng, [a, b](Graph& g, Node& self) {
    g.accum(a, self.grad);
    g.accum(b, -self.grad);
  });
}

Var Graph::cmul(Var a, Var b) {
  Mat v = val(a).cwiseProduct(val(b));
  const bool ng = node(a).needs_grad || node(b).needs_grad;
  return make(std::move(v), ng, [a, b](Graph& g, Node& self) {
    g.accum(a, self.grad.cwiseProduct(g.val(b)));
    g.accum(b, self.grad.cwiseProduct(g.val(a)));
  });
}

Var Graph::scale(Var a, double s) {
  Mat v = val(a) * s;
  return make(std::move(v), node(a).needs_grad, [a, s](Graph& g, Node& self) {
    g.accum(a, self.grad * s);
  });
}

Var Graph::add_scalar(Var a, double s) {
  Mat v = val(a).array() + s;
  return make(std::move(v), node(a).needs_grad, [a](Graph& g, Node& self) {
    g.accum(a, self.grad);
  });
}

Var Graph::add_mat(Var a, const Mat& m) {
  Mat v = val(a) + m;
  return make(std::move(v), node(a).needs_grad, [a](Graph& g, Node& self) {
    g.accum(a, self.grad);
  });
}

Var Graph::add_rowvec(Var a, Var row) {
  Mat v = val(a).rowwise() + val(row).row(0);
  const bool ng = node(a).needs_grad || node(row).needs_grad;
  return make(std::move(v), ng, [a, row](Graph& g, Node& self) {
    g.accum(a, self.grad);
    g.accum(row, self.grad.colwise().sum());
  });
}

Var Graph::add_colvec(Var a, Var col) {
  Mat v = val(a).colwise() + val(col).col(0);
  const bool ng = node(a).needs_grad || node(col).needs_grad;
  return make(std::move(v), ng, [a, col](Graph& g, Node& self) {
    g.accum(a, self.grad);
    g.accum(col, self.grad.rowwise().sum());
  });
}

Var Graph::mul_rowvec(Var a, Var row) {
  Mat v = val(a).array().rowwise() * val(row).row(0).array();
  const bool ng = node(a).needs_grad || node(row).needs_grad;
  return make(std::move(v), ng, [a, row](Graph& g, Node& self) {
    g.accum(a, self.grad.array().rowwise() * g.val(row).row(0).array());
    g.accum(row, (self.grad.array() * g.val(a).array()).colwise().sum());
  });
}

Var Graph::div_colvec(Var a, Var col) {
  Mat v = val(a).array().colwise() / val(col).col(0).array();
  const bool ng = node(a).needs_grad || node(col).needs_grad;
  return make(std::move(v), ng, [a, col](Graph& g, Node& self) {
    const auto c = g.val(col).col(0).array();
    g.accum(a, self.grad.array().colwise() / c);
    Mat dc = -(self.grad.array() * g.val(a).array()).rowwise().sum() / (c * c);
    g.accum(col, dc);
  });
}

Var Graph::minimum(Var a, Var b) {
  Mat v = val(a).cwiseMin(val(b));
  const bool ng = node(a).needs_grad || node(b).needs_grad;
  return make(std::move(v), ng, [a, b](Graph& g, Node& self) {
    const Mat& av = g.val(a);
    const Mat& bv = g.val(b);
    Mat mask_a = (av.array() <= bv.array()).cast<double>();
    g.accum(a, self.grad.cwiseProduct(mask_a));
    g.accum(b, self.grad.cwiseProduct(Mat(1.0 - mask_a.array())));
  });
}

// ---------------- linear algebra ----------------

Var Graph::matmul(Var a, Var b, bool ta, bool tb) {
  const Mat& A = val(a);
  const Mat& B = val(b);
  Mat v;
  if (!ta && !tb) v = A * B;
  else if (ta && !tb) v = A.transpose() * B;
  else if (!ta && tb) v = A * B.transpose();
  else v = A.transpose() * B.transpose();
  const bool ng = node(a).needs_grad || node(b).needs_grad;
  return make(std::move(v), ng, [a, b, ta, tb](Graph& g, Node& self) {
    const Mat& A = g.val(a);
    const Mat& B = g.val(b);
    const Mat& G = self.grad;
    if (!ta && !tb) {
      g.accum(a, G * B.transpose());
      g.accum(b, A.transpose() * G);
    } else if (ta && !tb) {
      g.accum(a, B * G.transpose());
      g.accum(b, A * G);
    } else if (!ta && tb) {
      g.accum(a, G * B);
      g.accum(b, G.transpose() * A);
    } else {
      g.accum(a, (G * B).transpose());
      g.accum(b, (A * G).transpose());
    }
  });
}

Var Graph::transpose(Var a) {
  Mat v = val(a).transpose();
  return make(std::move(v), node(a).needs_grad, [a](Graph& g, Node& self) {
    g.accum(a, self.grad.transpose());
  });
}

// ---------------- shape ----------------

Var Graph::rows(Var a, int start, int n) {
  Mat v = val(a).middleRows(start, n);
  return make(std::move(v), node(a).needs_grad, [a, start, n](Graph& g, Node& self) {
    if (!g.node(a).needs_grad) return;
    Mat da = Mat::Zero(g.val(a).rows(), g.val(a).cols());
    da.middleRows(start, n) = self.grad;
    g.accum(a, da);
  });
}

Var Graph::cols(Var a, int start, int n) {
  Mat v = val(a).middleCols(start, n);
  return make(std::move(v), node(a).needs_grad, [a, start, n](Graph& g, Node& self) {
    if (!g.node(a).needs_grad) return;
    Mat da = Mat::Zero(g.val(a).rows(), g.val(a).cols());
    da.middleCols(start, n) = self.grad;
    g.accum(a, da);
  });
}

Var Graph::concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw PipelineError("concat_rows of nothing");
  Eigen::Index total = 0;
  for (const Var p : parts) total += val(p).rows();
  Mat v(total, val(parts[0]).cols());
  Eigen::Index at = 0;
  bool ng = false;
  for (const Var p : parts) {
    v.middleRows(at, val(p).rows()) = val(p);
    at += val(p).rows();
    ng = ng || node(p).needs_grad;
  }
  auto parts_copy = parts;
  return make(std::move(v), ng, [parts_copy](Graph& g, Node& self) {
    Eigen::Index at = 0;
    for (const Var p : parts_copy) {
      const Eigen::Index r = g.val(p).rows();
      g.accum(p, self.grad.middleRows(at, r));
      at += r;
    }
  });
}

Var Graph::concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw PipelineError("concat_cols of nothing");
  Eigen::Index total = 0;
  for (const Var p : parts) total += val(p).cols();
  Mat v(val(parts[0]).rows(), total);
  Eigen::Index at = 0;
  bool ng = false;
  for (const Var p : parts) {
    v.middleCols(at, val(p).cols()) = val(p);
    at += val(p).cols();
    ng = ng || node(p).needs_grad;
  }
  auto parts_copy = parts;
  return make(std::move(v), ng, [parts_copy](Graph& g, Node& self) {
    Eigen::Index at = 0;
    for (const Var p : parts_copy) {
      const Eigen::Index c = g.val(p).cols();
      g.accum(p, self.grad.middleCols(at, c));
      at += c;
    }
  });
}

Var Graph::gather_rows(Var table, std::vector<int> idx) {
  const Mat& T = val(table);
  Mat v(static_cast<Eigen::Index>(idx.size()), T.cols());
  for (size_t i = 0; i < idx.size(); ++i) v.row(static_cast<Eigen::Index>(i)) = T.row(idx[i]);
  return make(std::move(v), node(table).needs_grad,
              [table, idx = std::move(idx)](Graph& g, Node& self) {
                if (!g.node(table).needs_grad) return;
                Mat dt = Mat::Zero(g.val(table).rows(), g.val(table).cols());
                for (size_t i = 0; i < idx.size(); ++i)
                  dt.row(idx[i]) += self.grad.row(static_cast<Eigen::Index>(i));
                g.accum(table, dt);
              });
}

Var Graph::embed(const Mat* table, Mat* grad_sink, std::vector<int> idx) {
  Mat v(static_cast<Eigen::Index>(idx.size()), table->cols());
  for (size_t i = 0; i < idx.size(); ++i) v.row(static_cast<Eigen::Index>(i)) = table->row(idx[i]);
  const bool ng = grad_enabled_ && grad_sink != nullptr;
  return make(std::move(v), ng, [grad_sink, idx = std::move(idx)](Graph&, Node& self) {
    for (size_t i = 0; i < idx.size(); ++i)
      grad_sink->row(idx[i]) += self.grad.row(static_cast<Eigen::Index>(i));
  });
}

Var Graph::pick(Var a, std::vector<std::pair<int, int>> coords) {
  Mat v(static_cast<Eigen::Index>(coords.size()), 1);
  const Mat& A = val(a);
  for (size_t i = 0; i < coords.size(); ++i)
    v(static_cast<Eigen::Index>(i), 0) = A(coords[i].first, coords[i].second);
  return make(std::move(v), node(a).needs_grad,
              [a, coords = std::move(coords)](Graph& g, Node& self) {
                if (!g.node(a).needs_grad) return;
                Mat da = Mat::Zero(g.val(a).rows(), g.val(a).cols());
                for (size_t i = 0; i < coords.size(); ++i)
                  da(coords[i].first, coords[i].second) +=
                      self.grad(static_cast<Eigen::Index>(i), 0);
                g.accum(a, da);
              });
}

Var Graph::stack_scalars(const std::vector<Var>& scalars) {
  Mat v(static_cast<Eigen::Index>(scalars.size()), 1);
  bool ng = false;
  for (size_t i = 0; i < scalars.size(); ++i) {
    v(static_cast<Eigen::Index>(i), 0) = scalar_val(scalars[i]);
    ng = ng || node(scalars[i]).needs_grad;
  }
  auto parts = scalars;
  return make(std::move(v), ng, [parts](Graph& g, Node& self) {
    for (size_t i = 0; i < parts.size(); ++i) {
      Mat d(1, 1);
      d(0, 0) = self.grad(static_cast<Eigen::Index>(i), 0);
      g.accum(parts[i], d);
    }
  });
}

// ---------------- reductions ----------------

Var Graph::sum(Var a) {
  Mat v(1, 1);
  v(0, 0) = val(a).sum();
  return make(std::move(v), node(a).needs_grad, [a](Graph& g, Node& self) {
    g.accum(a, Mat::Constant(g.val(a).rows(), g.val(a).cols(), self.grad(0, 0)));
  });
}

Var Graph::mean(Var a) {
  const double n = static_cast<double>(val(a).size());
  Mat v(1, 1);
  v(0, 0) = val(a).sum() / n;
  return make(std::move(v), node(a).needs_grad, [a, n](Graph& g, Node& self) {
    g.accum(a, Mat::Constant(g.val(a).rows(), g.val(a).cols(), self.grad(0, 0) / n));
  });
}

Var Graph::row_mean(Var a) {
  const double c = static_cast<double>(val(a).cols());
  Mat v = val(a).rowwise().mean();
  return make(std::move(v), node(a).needs_grad, [a, c](Graph& g, Node& self) {
    Mat da = (self.grad / c).replicate(1, g.val(a).cols());
    g.accum(a, da);
  });
}

Var Graph::row_max(Var a) {
  const Mat& A = val(a);
  Mat v(A.rows(), 1);
  std::vector<int> arg(static_cast<size_t>(A.rows()));
  for (Eigen::Index r = 0; r < A.rows(); ++r) {
    Eigen::Index c;
    v(r, 0) = A.row(r).maxCoeff(&c);
    arg[static_cast<size_t>(r)] = static_cast<int>(c);
  }
  return make(std::move(v), node(a).needs_grad,
              [a, arg = std::move(arg)](Graph& g, Node& self) {
                if (!g.node(a).needs_grad) return;
                Mat da = Mat::Zero(g.val(a).rows(), g.val(a).cols());
                for (Eigen::Index r = 0; r < da.rows(); ++r)
                  da(r, arg[static_cast<size_t>(r)]) = self.grad(r, 0);
                g.accum(a, da);
              });
}

Var Graph::max_all(Var a) {
  Eigen::Index r, c;
  Mat v(1, 1);
  v(0, 0) = val(a).maxCoeff(&r, &c);
  return make(std::move(v), node(a).needs_grad, [a, r, c](Graph& g, Node& self) {
    if (!g.node(a).needs_grad) return;
    Mat da = Mat::Zero(g.val(a).rows(), g.val(a).cols());
    da(r, c) = self.grad(0, 0);
    g.accum(a, da);
  });
}

Var Graph::col_logsumexp(Var a) {
  const Mat& A = val(a);
  Mat v(1, A.cols());
  for (Eigen::Index c = 0; c < A.cols(); ++c) {
    const double m = A.col(c).maxCoeff();
    v(0, c) = m + std::log((A.col(c).array() - m).exp().sum());
  }
  Mat soft = (A.rowwise() - v.row(0)).array().exp();
  return make(std::move(v), node(a).needs_grad,
              [a, soft = std::move(soft)](Graph& g, Node& self) {
                Mat da = soft.array().rowwise() * self.grad.row(0).array();
                g.accum(a, da);
              });
}

// ---------------- nonlinear ----------------

Var Graph::log_op(Var a) {
  Mat v = val(a).array().log();
  return make(std::move(v), node(a).needs_grad, [a](Graph& g, Node& self) {
    g.accum(a, (self.grad.array() / g.val(a).array()).matrix());
  });
}

Var Graph::exp_op(Var a) {
  Mat v = val(a).array().exp();
  Mat vc = v;
  return make(std::move(v), node(a).needs_grad, [a, vc = std::move(vc)](Graph& g, Node& self) {
    g.accum(a, self.grad.cwiseProduct(vc));
  });
}

Var Graph::sqrt_op(Var a) {
  Mat v = val(a).array().sqrt();
  Mat vc = v;
  return make(std::move(v), node(a).needs_grad, [a, vc = std::move(vc)](Graph& g, Node& self) {
    g.accum(a, (self.grad.array() / (2.0 * vc.array())).matrix());
  });
}

Var Graph::square(Var a) {
  Mat v = val(a).array().square();
  return make(std::move(v), node(a).needs_grad, [a](Graph& g, Node& self) {
    g.accum(a, (2.0 * self.grad.array() * g.val(a).array()).matrix());
  });
}

Var Graph::sigmoid(Var a) {
  Mat v = (1.0 / (1.0 + (-val(a).array()).exp())).matrix();
  Mat vc = v;
  return make(std::move(v), node(a).needs_grad, [a, vc = std::move(vc)](Graph& g, Node& self) {
    g.accum(a, (self.grad.array() * vc.array() * (1.0 - vc.array())).matrix());
  });
}

Var Graph::log_sigmoid(Var a) {
  // -log(1+exp(-x)) computed stably for both signs.
  const Mat& A = val(a);
  Mat v(A.rows(), A.cols());
  for (Eigen::Index i = 0; i < A.size(); ++i) {
    const double x = A(i);
    v(i) = x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
  }
  return make(std::move(v), node(a).needs_grad, [a](Graph& g, Node& self) {
    const auto x = g.val(a).array();
    g.accum(a, (self.grad.array() / (1.0 + x.exp())).matrix());
  });
}

Var Graph::gelu(Var a) {
  const auto x = val(a).array();
  Mat inner = (kGeluC * (x + 0.044715 * x.cube())).matrix();
  Mat t = inner.array().tanh();
  Mat v = (0.5 * x * (1.0 + t.array())).matrix();
  return make(std::move(v), node(a).needs_grad,
              [a, t = std::move(t)](Graph& g, Node& self) {
                const auto x = g.val(a).array();
                const auto th = t.array();
                const auto dinner = kGeluC * (1.0 + 3.0 * 0.044715 * x.square());
                const auto dv = 0.5 * (1.0 + th) + 0.5 * x * (1.0 - th.square()) * dinner;
                g.accum(a, (self.grad.array() * dv).matrix());
              });
}

Var Graph::softmax_rows(Var a) {
  const Mat& A = val(a);
  Mat v(A.rows(), A.cols());
  for (Eigen::Index r = 0; r < A.rows(); ++r) {
    const double m = A.row(r).maxCoeff();
    Eigen::ArrayXd e = (A.row(r).array() - m).exp();
    v.row(r) = (e / e.sum()).matrix();
  }
  Mat vc = v;
  return make(std::move(v), node(a).needs_grad, [a, vc = std::move(vc)](Graph& g, Node& self) {
    Mat da(vc.rows(), vc.cols());
    for (Eigen::Index r = 0; r < vc.rows(); ++r) {
      const double dot = self.grad.row(r).dot(vc.row(r));
      da.row(r) = (vc.row(r).array() * (self.grad.row(r).array() - dot)).matrix();
    }
    g.accum(a, da);
  });
}

Var Graph::log_softmax_rows(Var a) {
  const Mat& A = val(a);
  Mat v(A.rows(), A.cols());
  for (Eigen::Index r = 0; r < A.rows(); ++r) {
    const double m = A.row(r).maxCoeff();
    const double lse = m + std::log((A.row(r).array() - m).exp().sum());
    v.row(r) = A.row(r).array() - lse;
  }
  Mat soft = v.array().exp();
  return make(std::move(v), node(a).needs_grad,
              [a, soft = std::move(soft)](Graph& g, Node& self) {
                Mat da(soft.rows(), soft.cols());
                for (Eigen::Index r = 0; r < soft.rows(); ++r) {
                  const double s = self.grad.row(r).sum();
                  da.row(r) = self.grad.row(r) - (soft.row(r) * s);
                }
                g.accum(a, da);
              });
}

// ---------------- finite differences ----------------

FiniteDiffReport finite_diff_check(Mat& value, Mat& grad,
                                   const std::function<double()>& loss_fn,
                                   const std::function<void()>& compute_grads,
                                   double step) {
  grad.setZero();
  compute_grads();
  Mat analytic = grad;
  FiniteDiffReport report;
  for (Eigen::Index i = 0; i < value.size(); ++i) {
    const double orig = value(i);
    value(i) = orig + step;
    const double up = loss_fn();
    value(i) = orig - step;
    const double down = loss_fn();
    value(i) = orig;
    const double numeric = (up - down) / (2.0 * step);
    const double a = analytic(i);
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-4});
    const double rel = std::abs(a - numeric) / denom;
    if (rel > report.max_rel_err) {
      report.max_rel_err = rel;
      report.analytic_at_worst = a;
      report.numeric_at_worst = numeric;
    }
  }
  return report;
}

}  // namespace pgt::ad
