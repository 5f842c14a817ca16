#include "adebias/graph.hpp"

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace adebias {

namespace {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Map = Eigen::Map<EMat>;
using CMap = Eigen::Map<const EMat>;

// Lifted 2-D view of a rank-1/2 tensor. Rank-1 tensors are viewed as a row
// when used on the left of a product and as a column on the right.
CMap lift(const Tensor& t, bool as_row) {
  if (t.rank() == 2) return CMap(t.data(), t.rows(), t.cols());
  if (as_row) return CMap(t.data(), 1, t.size());
  return CMap(t.data(), t.size(), 1);
}

Map lift(Tensor& t, bool as_row) {
  if (t.rank() == 2) return Map(t.data(), t.rows(), t.cols());
  if (as_row) return Map(t.data(), 1, t.size());
  return Map(t.data(), t.size(), 1);
}

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(std::string(op) + ": incompatible shapes " +
                              a.shape_str() + " and " + b.shape_str());
}

}  // namespace

ReversalCoefficient::ReversalCoefficient(double s) : scale(s) {
  if (!(s >= 0.0) || !std::isfinite(s)) {
    throw std::invalid_argument("reversal coefficient must be finite and >= 0");
  }
}

NodeId Graph::push(Node n) {
  if (n.op != Op::kLeaf) {
    for (NodeId p : n.parents) {
      if (p >= nodes_.size()) throw std::invalid_argument("node id out of range");
      n.needs_grad = n.needs_grad || nodes_[p].needs_grad;
    }
  }
  nodes_.push_back(std::move(n));
  return nodes_.size() - 1;
}

NodeId Graph::leaf(Tensor value, bool requires_grad) {
  value.check_finite("leaf");
  Node n;
  n.op = Op::kLeaf;
  n.value = std::move(value);
  n.needs_grad = requires_grad;
  return push(std::move(n));
}

NodeId Graph::matmul(NodeId a, NodeId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (ta.rank() == 1 && tb.rank() == 1) shape_error("matmul", ta, tb);
  CMap ma = lift(ta, /*as_row=*/true);
  CMap mb = lift(tb, /*as_row=*/false);
  if (ma.cols() != mb.rows()) shape_error("matmul", ta, tb);

  std::vector<std::size_t> out_shape;
  if (ta.rank() == 2 && tb.rank() == 2) {
    out_shape = {static_cast<std::size_t>(ma.rows()), static_cast<std::size_t>(mb.cols())};
  } else if (ta.rank() == 2) {
    out_shape = {static_cast<std::size_t>(ma.rows())};
  } else {
    out_shape = {static_cast<std::size_t>(mb.cols())};
  }
  Node n;
  n.op = Op::kMatmul;
  n.parents = {a, b};
  n.value = Tensor::zeros(std::move(out_shape));
  lift(n.value, ta.rank() == 1).noalias() = ma * mb;
  n.value.check_finite("matmul");
  return push(std::move(n));
}

NodeId Graph::add(NodeId a, NodeId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (!ta.same_shape(tb)) shape_error("add", ta, tb);
  Node n;
  n.op = Op::kAdd;
  n.parents = {a, b};
  n.value = Tensor::zeros(ta.shape());
  for (std::size_t i = 0; i < ta.size(); ++i) n.value[i] = ta[i] + tb[i];
  n.value.check_finite("add");
  return push(std::move(n));
}

NodeId Graph::sub(NodeId a, NodeId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (!ta.same_shape(tb)) shape_error("sub", ta, tb);
  Node n;
  n.op = Op::kSub;
  n.parents = {a, b};
  n.value = Tensor::zeros(ta.shape());
  for (std::size_t i = 0; i < ta.size(); ++i) n.value[i] = ta[i] - tb[i];
  n.value.check_finite("sub");
  return push(std::move(n));
}

NodeId Graph::elementwise_mul(NodeId a, NodeId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (!ta.same_shape(tb)) shape_error("elementwise_mul", ta, tb);
  Node n;
  n.op = Op::kMul;
  n.parents = {a, b};
  n.value = Tensor::zeros(ta.shape());
  for (std::size_t i = 0; i < ta.size(); ++i) n.value[i] = ta[i] * tb[i];
  n.value.check_finite("elementwise_mul");
  return push(std::move(n));
}

NodeId Graph::tanh(NodeId x) {
  const Tensor& tx = value(x);
  Node n;
  n.op = Op::kTanh;
  n.parents = {x};
  n.value = Tensor::zeros(tx.shape());
  for (std::size_t i = 0; i < tx.size(); ++i) n.value[i] = std::tanh(tx[i]);
  return push(std::move(n));
}

NodeId Graph::concat(const std::vector<NodeId>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat: no inputs");
  const std::size_t rank = value(xs[0]).rank();
  std::size_t rows = value(xs[0]).rows();
  std::size_t total_cols = 0;
  for (NodeId x : xs) {
    const Tensor& t = value(x);
    if (t.rank() != rank || t.rows() != rows) shape_error("concat", value(xs[0]), t);
    total_cols += t.cols();
  }
  Node n;
  n.op = Op::kConcat;
  n.parents = xs;
  n.value = rank == 2 ? Tensor::zeros({rows, total_cols}) : Tensor::zeros({total_cols});
  std::size_t col0 = 0;
  for (NodeId x : xs) {
    const Tensor& t = value(x);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < t.cols(); ++c) {
        n.value[r * total_cols + col0 + c] = t[r * t.cols() + c];
      }
    }
    col0 += t.cols();
  }
  return push(std::move(n));
}

NodeId Graph::mean(NodeId x) {
  const Tensor& tx = value(x);
  double s = 0.0;
  for (std::size_t i = 0; i < tx.size(); ++i) s += tx[i];
  Node n;
  n.op = Op::kMean;
  n.parents = {x};
  n.value = Tensor::scalar(s / static_cast<double>(tx.size()));
  n.value.check_finite("mean");
  return push(std::move(n));
}

NodeId Graph::sum(NodeId x) {
  const Tensor& tx = value(x);
  double s = 0.0;
  for (std::size_t i = 0; i < tx.size(); ++i) s += tx[i];
  Node n;
  n.op = Op::kSum;
  n.parents = {x};
  n.value = Tensor::scalar(s);
  n.value.check_finite("sum");
  return push(std::move(n));
}

NodeId Graph::max_over_time(const std::vector<NodeId>& steps) {
  if (steps.empty()) throw std::invalid_argument("max_over_time: no steps");
  const Tensor& first = value(steps[0]);
  for (NodeId s : steps) {
    if (!value(s).same_shape(first)) shape_error("max_over_time", first, value(s));
  }
  Node n;
  n.op = Op::kMaxOverTime;
  n.parents = steps;
  n.value = value(steps[0]);
  n.labels.assign(first.size(), 0);  // winning time index per element
  for (std::size_t t = 1; t < steps.size(); ++t) {
    const Tensor& tt = value(steps[t]);
    for (std::size_t i = 0; i < tt.size(); ++i) {
      if (tt[i] > n.value[i]) {  // strict: ties keep the lowest index
        n.value[i] = tt[i];
        n.labels[i] = static_cast<int>(t);
      }
    }
  }
  return push(std::move(n));
}

NodeId Graph::stack_rows(const std::vector<NodeId>& rows) {
  if (rows.empty()) throw std::invalid_argument("stack_rows: no rows");
  const Tensor& first = value(rows[0]);
  if (first.rank() != 1) throw std::invalid_argument("stack_rows: inputs must be rank-1");
  const std::size_t k = first.size();
  for (NodeId r : rows) {
    if (value(r).rank() != 1 || value(r).size() != k) shape_error("stack_rows", first, value(r));
  }
  Node n;
  n.op = Op::kStackRows;
  n.parents = rows;
  n.value = Tensor::zeros({rows.size(), k});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const Tensor& t = value(rows[r]);
    for (std::size_t c = 0; c < k; ++c) n.value.at(r, c) = t[c];
  }
  return push(std::move(n));
}

NodeId Graph::add_rows(NodeId m, NodeId bias) {
  const Tensor& tm = value(m);
  const Tensor& tb = value(bias);
  if (tm.rank() != 2 || tb.rank() != 1 || tm.cols() != tb.size()) {
    shape_error("add_rows", tm, tb);
  }
  Node n;
  n.op = Op::kAddRows;
  n.parents = {m, bias};
  n.value = Tensor::zeros(tm.shape());
  for (std::size_t r = 0; r < tm.rows(); ++r) {
    for (std::size_t c = 0; c < tm.cols(); ++c) n.value.at(r, c) = tm.at(r, c) + tb[c];
  }
  n.value.check_finite("add_rows");
  return push(std::move(n));
}

NodeId Graph::scale(NodeId x, double c) {
  if (!std::isfinite(c)) throw std::invalid_argument("scale: non-finite coefficient");
  const Tensor& tx = value(x);
  Node n;
  n.op = Op::kScale;
  n.parents = {x};
  n.coeff = c;
  n.value = Tensor::zeros(tx.shape());
  for (std::size_t i = 0; i < tx.size(); ++i) n.value[i] = c * tx[i];
  n.value.check_finite("scale");
  return push(std::move(n));
}

NodeId Graph::softmax_cross_entropy(NodeId logits, int label) {
  const Tensor& tl = value(logits);
  if (tl.rank() != 1 || tl.size() != 3) {
    throw std::invalid_argument("softmax_cross_entropy: logits must be rank-1 of length 3, got " +
                                tl.shape_str());
  }
  if (label < 0 || label > 2) {
    throw std::invalid_argument("softmax_cross_entropy: label " + std::to_string(label) +
                                " out of range [0,2]");
  }
  return softmax_cross_entropy_rows(logits, {label});
}

NodeId Graph::softmax_cross_entropy_rows(NodeId logits, std::vector<int> labels) {
  const Tensor& tl = value(logits);
  const std::size_t rows = tl.rows();
  const std::size_t classes = tl.cols();
  if (classes < 2) throw std::invalid_argument("softmax_cross_entropy: need >= 2 classes");
  if (labels.size() != rows) {
    throw std::invalid_argument("softmax_cross_entropy: " + std::to_string(labels.size()) +
                                " labels for " + std::to_string(rows) + " rows");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw std::invalid_argument("softmax_cross_entropy: label " + std::to_string(y) +
                                  " out of range");
    }
  }
  Node n;
  n.op = Op::kSceRows;
  n.parents = {logits};
  n.labels = std::move(labels);
  n.value = tl.rank() == 1 ? Tensor::zeros({1}) : Tensor::zeros({rows});
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = tl.data() + r * classes;
    double m = row[0];
    for (std::size_t c = 1; c < classes; ++c) m = std::max(m, row[c]);
    double z = 0.0;
    for (std::size_t c = 0; c < classes; ++c) z += std::exp(row[c] - m);
    n.value[r] = m + std::log(z) - row[n.labels[r]];
  }
  n.value.check_finite("softmax_cross_entropy");
  return push(std::move(n));
}

NodeId Graph::grad_reverse(NodeId x, ReversalCoefficient c) {
  Node n;
  n.op = Op::kGradReverse;
  n.parents = {x};
  n.coeff = c.scale;
  n.value = value(x);  // forward is bitwise identity
  return push(std::move(n));
}

NodeId Graph::embed_mean(NodeId table, std::vector<std::vector<int>> seqs) {
  const Tensor& tt = value(table);
  if (tt.rank() != 2) throw std::invalid_argument("embed_mean: table must be rank-2");
  if (seqs.empty()) throw std::invalid_argument("embed_mean: no sequences");
  const std::size_t v = tt.rows();
  const std::size_t d = tt.cols();
  Node n;
  n.op = Op::kEmbedMean;
  n.parents = {table};
  n.value = Tensor::zeros({seqs.size(), d});
  for (std::size_t b = 0; b < seqs.size(); ++b) {
    const auto& seq = seqs[b];
    if (seq.empty()) throw std::invalid_argument("embed_mean: empty sequence");
    for (int tok : seq) {
      if (tok < 0 || static_cast<std::size_t>(tok) >= v) {
        throw std::invalid_argument("embed_mean: token id " + std::to_string(tok) +
                                    " outside vocabulary of size " + std::to_string(v));
      }
      for (std::size_t c = 0; c < d; ++c) n.value.at(b, c) += tt.at(tok, c);
    }
    const double inv = 1.0 / static_cast<double>(seq.size());
    for (std::size_t c = 0; c < d; ++c) n.value.at(b, c) *= inv;
  }
  n.seqs = std::move(seqs);
  n.value.check_finite("embed_mean");
  return push(std::move(n));
}

NodeId Graph::embed_row(NodeId table, int token) {
  const Tensor& tt = value(table);
  if (tt.rank() != 2) throw std::invalid_argument("embed_row: table must be rank-2");
  if (token < 0 || static_cast<std::size_t>(token) >= tt.rows()) {
    throw std::invalid_argument("embed_row: token id " + std::to_string(token) +
                                " outside vocabulary of size " + std::to_string(tt.rows()));
  }
  Node n;
  n.op = Op::kEmbedRow;
  n.parents = {table};
  n.labels = {token};
  n.value = Tensor::zeros({tt.cols()});
  for (std::size_t c = 0; c < tt.cols(); ++c) n.value[c] = tt.at(token, c);
  return push(std::move(n));
}

const Tensor& Graph::value(NodeId id) const {
  if (id >= nodes_.size()) throw std::invalid_argument("node id out of range");
  return nodes_[id].value;
}

const Tensor& Graph::grad(NodeId id) const {
  if (id >= nodes_.size()) throw std::invalid_argument("node id out of range");
  const Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor::zeros(n.value.shape());
  return n.grad;
}

bool Graph::requires_grad(NodeId id) const {
  if (id >= nodes_.size()) throw std::invalid_argument("node id out of range");
  return nodes_[id].needs_grad;
}

Tensor& Graph::grad_buffer(NodeId id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor::zeros(n.value.shape());
  return n.grad;
}

void Graph::zero_grad() {
  for (Node& n : nodes_) n.grad = Tensor();
}

void Graph::backward(NodeId loss) {
  if (loss >= nodes_.size()) throw std::invalid_argument("node id out of range");
  if (value(loss).size() != 1) {
    throw std::invalid_argument("backward: loss must be scalar, got " +
                                value(loss).shape_str());
  }
  if (!nodes_[loss].needs_grad) return;
  grad_buffer(loss)[0] += 1.0;
  for (NodeId id = loss + 1; id-- > 0;) {
    const Node& n = nodes_[id];
    if (n.op == Op::kLeaf || !n.needs_grad || n.grad.empty()) continue;
    backprop_node(id);
  }
}

void Graph::backprop_node(NodeId id) {
  Node& n = nodes_[id];
  const Tensor& g = n.grad;
  auto wants = [this](NodeId p) { return nodes_[p].needs_grad; };

  switch (n.op) {
    case Op::kLeaf:
      break;

    case Op::kMatmul: {
      const Tensor& ta = nodes_[n.parents[0]].value;
      const Tensor& tb = nodes_[n.parents[1]].value;
      CMap ma = lift(ta, true);
      CMap mb = lift(tb, false);
      // The gradient shares the output's lifting (row when a was rank-1).
      CMap mg = lift(g, ta.rank() == 1);
      if (wants(n.parents[0])) {
        lift(grad_buffer(n.parents[0]), true).noalias() += mg * mb.transpose();
      }
      if (wants(n.parents[1])) {
        lift(grad_buffer(n.parents[1]), false).noalias() += ma.transpose() * mg;
      }
      break;
    }

    case Op::kAdd:
      for (int side = 0; side < 2; ++side) {
        if (!wants(n.parents[side])) continue;
        Tensor& pg = grad_buffer(n.parents[side]);
        for (std::size_t i = 0; i < g.size(); ++i) pg[i] += g[i];
      }
      break;

    case Op::kSub: {
      if (wants(n.parents[0])) {
        Tensor& pg = grad_buffer(n.parents[0]);
        for (std::size_t i = 0; i < g.size(); ++i) pg[i] += g[i];
      }
      if (wants(n.parents[1])) {
        Tensor& pg = grad_buffer(n.parents[1]);
        for (std::size_t i = 0; i < g.size(); ++i) pg[i] -= g[i];
      }
      break;
    }

    case Op::kMul: {
      const Tensor& ta = nodes_[n.parents[0]].value;
      const Tensor& tb = nodes_[n.parents[1]].value;
      if (wants(n.parents[0])) {
        Tensor& pg = grad_buffer(n.parents[0]);
        for (std::size_t i = 0; i < g.size(); ++i) pg[i] += g[i] * tb[i];
      }
      if (wants(n.parents[1])) {
        Tensor& pg = grad_buffer(n.parents[1]);
        for (std::size_t i = 0; i < g.size(); ++i) pg[i] += g[i] * ta[i];
      }
      break;
    }

    case Op::kTanh: {
      if (!wants(n.parents[0])) break;
      Tensor& pg = grad_buffer(n.parents[0]);
      for (std::size_t i = 0; i < g.size(); ++i) {
        pg[i] += g[i] * (1.0 - n.value[i] * n.value[i]);
      }
      break;
    }

    case Op::kConcat: {
      const std::size_t rows = n.value.rows();
      const std::size_t total_cols = n.value.cols();
      std::size_t col0 = 0;
      for (NodeId p : n.parents) {
        const Tensor& tp = nodes_[p].value;
        if (wants(p)) {
          Tensor& pg = grad_buffer(p);
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < tp.cols(); ++c) {
              pg[r * tp.cols() + c] += g[r * total_cols + col0 + c];
            }
          }
        }
        col0 += tp.cols();
      }
      break;
    }

    case Op::kMean: {
      if (!wants(n.parents[0])) break;
      Tensor& pg = grad_buffer(n.parents[0]);
      const double gv = g[0] / static_cast<double>(pg.size());
      for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += gv;
      break;
    }

    case Op::kSum: {
      if (!wants(n.parents[0])) break;
      Tensor& pg = grad_buffer(n.parents[0]);
      for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += g[0];
      break;
    }

    case Op::kMaxOverTime: {
      for (std::size_t i = 0; i < g.size(); ++i) {
        const NodeId winner = n.parents[static_cast<std::size_t>(n.labels[i])];
        if (wants(winner)) grad_buffer(winner)[i] += g[i];
      }
      break;
    }

    case Op::kStackRows: {
      const std::size_t k = n.value.cols();
      for (std::size_t r = 0; r < n.parents.size(); ++r) {
        if (!wants(n.parents[r])) continue;
        Tensor& pg = grad_buffer(n.parents[r]);
        for (std::size_t c = 0; c < k; ++c) pg[c] += g[r * k + c];
      }
      break;
    }

    case Op::kAddRows: {
      const std::size_t rows = n.value.rows();
      const std::size_t cols = n.value.cols();
      if (wants(n.parents[0])) {
        Tensor& pg = grad_buffer(n.parents[0]);
        for (std::size_t i = 0; i < g.size(); ++i) pg[i] += g[i];
      }
      if (wants(n.parents[1])) {
        Tensor& pg = grad_buffer(n.parents[1]);
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < cols; ++c) pg[c] += g[r * cols + c];
        }
      }
      break;
    }

    case Op::kScale: {
      if (!wants(n.parents[0])) break;
      Tensor& pg = grad_buffer(n.parents[0]);
      for (std::size_t i = 0; i < g.size(); ++i) pg[i] += n.coeff * g[i];
      break;
    }

    case Op::kSceRows: {
      if (!wants(n.parents[0])) break;
      const Tensor& tl = nodes_[n.parents[0]].value;
      Tensor& pg = grad_buffer(n.parents[0]);
      const std::size_t rows = tl.rows();
      const std::size_t classes = tl.cols();
      for (std::size_t r = 0; r < rows; ++r) {
        const double* row = tl.data() + r * classes;
        double m = row[0];
        for (std::size_t c = 1; c < classes; ++c) m = std::max(m, row[c]);
        double z = 0.0;
        for (std::size_t c = 0; c < classes; ++c) z += std::exp(row[c] - m);
        for (std::size_t c = 0; c < classes; ++c) {
          const double p = std::exp(row[c] - m) / z;
          const double onehot = (static_cast<int>(c) == n.labels[r]) ? 1.0 : 0.0;
          pg[r * classes + c] += g[r] * (p - onehot);
        }
      }
      break;
    }

    case Op::kGradReverse: {
      if (!wants(n.parents[0])) break;
      Tensor& pg = grad_buffer(n.parents[0]);
      for (std::size_t i = 0; i < g.size(); ++i) pg[i] += -n.coeff * g[i];
      break;
    }

    case Op::kEmbedMean: {
      if (!wants(n.parents[0])) break;
      Tensor& pg = grad_buffer(n.parents[0]);
      const std::size_t d = n.value.cols();
      for (std::size_t b = 0; b < n.seqs.size(); ++b) {
        const double inv = 1.0 / static_cast<double>(n.seqs[b].size());
        for (int tok : n.seqs[b]) {
          for (std::size_t c = 0; c < d; ++c) {
            pg[static_cast<std::size_t>(tok) * d + c] += inv * g[b * d + c];
          }
        }
      }
      break;
    }

    case Op::kEmbedRow: {
      if (!wants(n.parents[0])) break;
      Tensor& pg = grad_buffer(n.parents[0]);
      const std::size_t d = n.value.size();
      const std::size_t tok = static_cast<std::size_t>(n.labels[0]);
      for (std::size_t c = 0; c < d; ++c) pg[tok * d + c] += g[c];
      break;
    }
  }
}

}  // namespace adebias
