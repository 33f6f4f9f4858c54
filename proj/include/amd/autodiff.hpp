#pragma once

#include "amd/common.hpp"

#include <functional>
#include <utility>
#include <vector>

// Reverse-mode autodiff on dense row-major matrices. A Tape owns every node
// created through it; Var is an index into the tape. Nodes are recorded in
// creation order, which is already a topological order, so backward() is a
// single reverse sweep. Scalars are 1x1 matrices.
//
// Tracking: leaves made with leaf() accumulate gradients; constants do not,
// and any node whose parents are all untracked is itself untracked, so the
// backward sweep skips subgraphs that cannot reach a tracked leaf.

namespace amd::ad {

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

template <typename S>
class Tape {
 public:
  using M = Mat<S>;

  // ----- leaves -----

  Var constant(M v) { return push(std::move(v), false, {}); }

  Var scalar(S v) {
    M m(1, 1);
    m(0, 0) = v;
    return constant(std::move(m));
  }

  Var leaf(const M& v) { return push(v, true, {}); }

  // ----- introspection -----

  const M& val(Var x) const { return node(x).value; }

  // Gradient accumulated into x by the last backward(); zeros if untouched.
  M grad(Var x) const {
    const Node& n = node(x);
    if (n.grad.size() == 0) return M::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  size_t size() const { return nodes_.size(); }

  // ----- elementwise -----

  Var add(Var a, Var b) {
    check_same_shape(a, b, "add");
    M v = val(a) + val(b);
    return push(std::move(v), tracked(a) || tracked(b),
                [a, b](Tape& t, int self) {
                  const M& g = t.nodes_[self].grad;
                  if (t.tracked(a)) t.g(a) += g;
                  if (t.tracked(b)) t.g(b) += g;
                });
  }

  Var sub(Var a, Var b) {
    check_same_shape(a, b, "sub");
    M v = val(a) - val(b);
    return push(std::move(v), tracked(a) || tracked(b),
                [a, b](Tape& t, int self) {
                  const M& g = t.nodes_[self].grad;
                  if (t.tracked(a)) t.g(a) += g;
                  if (t.tracked(b)) t.g(b) -= g;
                });
  }

  Var mul(Var a, Var b) {
    check_same_shape(a, b, "mul");
    M v = val(a).cwiseProduct(val(b));
    return push(std::move(v), tracked(a) || tracked(b),
                [a, b](Tape& t, int self) {
                  const M& g = t.nodes_[self].grad;
                  if (t.tracked(a)) t.g(a) += g.cwiseProduct(t.val(b));
                  if (t.tracked(b)) t.g(b) += g.cwiseProduct(t.val(a));
                });
  }

  Var div(Var a, Var b) {
    check_same_shape(a, b, "div");
    M v = val(a).cwiseQuotient(val(b));
    return push(std::move(v), tracked(a) || tracked(b),
                [a, b](Tape& t, int self) {
                  const M& g = t.nodes_[self].grad;
                  if (t.tracked(a)) t.g(a) += g.cwiseQuotient(t.val(b));
                  if (t.tracked(b))
                    t.g(b) -= g.cwiseProduct(t.val(a))
                                  .cwiseQuotient(t.val(b).cwiseProduct(t.val(b)));
                });
  }

  Var scale(Var a, S c) {
    M v = val(a) * c;
    return push(std::move(v), tracked(a), [a, c](Tape& t, int self) {
      if (t.tracked(a)) t.g(a) += t.nodes_[self].grad * c;
    });
  }

  Var add_scalar(Var a, S c) {
    M v = val(a).array() + c;
    return push(std::move(v), tracked(a), [a](Tape& t, int self) {
      if (t.tracked(a)) t.g(a) += t.nodes_[self].grad;
    });
  }

  Var relu(Var a) {
    M v = val(a).cwiseMax(S(0));
    return push(std::move(v), tracked(a), [a](Tape& t, int self) {
      if (!t.tracked(a)) return;
      const M& g = t.nodes_[self].grad;
      t.g(a) += (t.val(a).array() > S(0)).template cast<S>().matrix().cwiseProduct(g);
    });
  }

  Var sigmoid(Var a) {
    M v = (S(1) / (S(1) + (-val(a).array()).exp())).matrix();
    return push(std::move(v), tracked(a), [a](Tape& t, int self) {
      if (!t.tracked(a)) return;
      const M& y = t.nodes_[self].value;
      const M& g = t.nodes_[self].grad;
      t.g(a) += g.cwiseProduct(y.cwiseProduct((M::Ones(y.rows(), y.cols()) - y)));
    });
  }

  Var abs(Var a) {
    M v = val(a).cwiseAbs();
    return push(std::move(v), tracked(a), [a](Tape& t, int self) {
      if (!t.tracked(a)) return;
      const M& g = t.nodes_[self].grad;
      t.g(a) += t.val(a).array().sign().matrix().cwiseProduct(g);
    });
  }

  // log(x + eps); callers pick eps, 0 is allowed when x is known positive.
  Var log_eps(Var a, S eps) {
    M v = (val(a).array() + eps).log().matrix();
    return push(std::move(v), tracked(a), [a, eps](Tape& t, int self) {
      if (!t.tracked(a)) return;
      const M& g = t.nodes_[self].grad;
      t.g(a) += (g.array() / (t.val(a).array() + eps)).matrix();
    });
  }

  // ----- matrix ops -----

  Var matmul(Var a, Var b) {
    if (val(a).cols() != val(b).rows())
      throw ContractError("matmul: inner dimensions disagree");
    M v(val(a).rows(), val(b).cols());
    v.noalias() = val(a) * val(b);
    return push(std::move(v), tracked(a) || tracked(b),
                [a, b](Tape& t, int self) {
                  const M& g = t.nodes_[self].grad;
                  if (t.tracked(a)) t.g(a).noalias() += g * t.val(b).transpose();
                  if (t.tracked(b)) t.g(b).noalias() += t.val(a).transpose() * g;
                });
  }

  Var transpose(Var a) {
    M v = val(a).transpose();
    return push(std::move(v), tracked(a), [a](Tape& t, int self) {
      if (t.tracked(a)) t.g(a) += t.nodes_[self].grad.transpose();
    });
  }

  // ----- broadcast helpers -----

  // a (r x c) + v (1 x c), v added to every row.
  Var add_rowvec(Var a, Var v) {
    if (val(v).rows() != 1 || val(v).cols() != val(a).cols())
      throw ContractError("add_rowvec: v must be 1 x cols(a)");
    M out = val(a).rowwise() + val(v).row(0);
    return push(std::move(out), tracked(a) || tracked(v),
                [a, v](Tape& t, int self) {
                  const M& g = t.nodes_[self].grad;
                  if (t.tracked(a)) t.g(a) += g;
                  if (t.tracked(v)) t.g(v) += g.colwise().sum();
                });
  }

  // a (r x c) + v (r x 1), v added to every column.
  Var add_colvec(Var a, Var v) {
    if (val(v).cols() != 1 || val(v).rows() != val(a).rows())
      throw ContractError("add_colvec: v must be rows(a) x 1");
    M out = val(a).colwise() + val(v).col(0);
    return push(std::move(out), tracked(a) || tracked(v),
                [a, v](Tape& t, int self) {
                  const M& g = t.nodes_[self].grad;
                  if (t.tracked(a)) t.g(a) += g;
                  if (t.tracked(v)) t.g(v) += g.rowwise().sum();
                });
  }

  // Row i of a divided by v(i, 0).
  Var div_colvec(Var a, Var v) {
    if (val(v).cols() != 1 || val(v).rows() != val(a).rows())
      throw ContractError("div_colvec: v must be rows(a) x 1");
    M out = val(a).array().colwise() / val(v).col(0).array();
    return push(std::move(out), tracked(a) || tracked(v),
                [a, v](Tape& t, int self) {
                  const M& g = t.nodes_[self].grad;
                  if (t.tracked(a))
                    t.g(a) += (g.array().colwise() / t.val(v).col(0).array()).matrix();
                  if (t.tracked(v)) {
                    M num = g.cwiseProduct(t.val(a)).rowwise().sum();
                    t.g(v) -= (num.array() /
                               (t.val(v).col(0).array() * t.val(v).col(0).array()))
                                  .matrix();
                  }
                });
  }

  // ----- shape ops -----

  Var slice_rows(Var a, int r0, int n) {
    if (r0 < 0 || n < 0 || r0 + n > val(a).rows())
      throw ContractError("slice_rows: range out of bounds");
    M v = val(a).middleRows(r0, n);
    return push(std::move(v), tracked(a), [a, r0, n](Tape& t, int self) {
      if (t.tracked(a)) t.g(a).middleRows(r0, n) += t.nodes_[self].grad;
    });
  }

  Var slice_cols(Var a, int c0, int n) {
    if (c0 < 0 || n < 0 || c0 + n > val(a).cols())
      throw ContractError("slice_cols: range out of bounds");
    M v = val(a).middleCols(c0, n);
    return push(std::move(v), tracked(a), [a, c0, n](Tape& t, int self) {
      if (t.tracked(a)) t.g(a).middleCols(c0, n) += t.nodes_[self].grad;
    });
  }

  Var concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw ContractError("concat_rows: empty input");
    int cols = static_cast<int>(val(parts[0]).cols());
    int rows = 0;
    bool any_tracked = false;
    for (Var p : parts) {
      if (val(p).cols() != cols) throw ContractError("concat_rows: column mismatch");
      rows += static_cast<int>(val(p).rows());
      any_tracked |= tracked(p);
    }
    M v(rows, cols);
    int at = 0;
    for (Var p : parts) {
      v.middleRows(at, static_cast<int>(val(p).rows())) = val(p);
      at += static_cast<int>(val(p).rows());
    }
    std::vector<Var> ps = parts;
    return push(std::move(v), any_tracked, [ps](Tape& t, int self) {
      const M& g = t.nodes_[self].grad;
      int at = 0;
      for (Var p : ps) {
        int n = static_cast<int>(t.val(p).rows());
        if (t.tracked(p)) t.g(p) += g.middleRows(at, n);
        at += n;
      }
    });
  }

  Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw ContractError("concat_cols: empty input");
    int rows = static_cast<int>(val(parts[0]).rows());
    int cols = 0;
    bool any_tracked = false;
    for (Var p : parts) {
      if (val(p).rows() != rows) throw ContractError("concat_cols: row mismatch");
      cols += static_cast<int>(val(p).cols());
      any_tracked |= tracked(p);
    }
    M v(rows, cols);
    int at = 0;
    for (Var p : parts) {
      v.middleCols(at, static_cast<int>(val(p).cols())) = val(p);
      at += static_cast<int>(val(p).cols());
    }
    std::vector<Var> ps = parts;
    return push(std::move(v), any_tracked, [ps](Tape& t, int self) {
      const M& g = t.nodes_[self].grad;
      int at = 0;
      for (Var p : ps) {
        int n = static_cast<int>(t.val(p).cols());
        if (t.tracked(p)) t.g(p) += g.middleCols(at, n);
        at += n;
      }
    });
  }

  // Row lookup (embedding). Duplicate indices accumulate on backward.
  Var gather_rows(Var table, std::vector<int> idx) {
    for (int i : idx)
      if (i < 0 || i >= val(table).rows())
        throw ContractError("gather_rows: index out of range");
    M v(static_cast<int>(idx.size()), val(table).cols());
    for (size_t r = 0; r < idx.size(); ++r) v.row(static_cast<int>(r)) = val(table).row(idx[r]);
    return push(std::move(v), tracked(table),
                [table, idx = std::move(idx)](Tape& t, int self) {
                  if (!t.tracked(table)) return;
                  const M& g = t.nodes_[self].grad;
                  M& gt = t.g(table);
                  for (size_t r = 0; r < idx.size(); ++r)
                    gt.row(idx[r]) += g.row(static_cast<int>(r));
                });
  }

  // Select entries (rows[i], cols[i]) into a 1 x k row.
  Var pick(Var a, std::vector<int> rows, std::vector<int> cols) {
    if (rows.size() != cols.size()) throw ContractError("pick: rows/cols size mismatch");
    M v(1, static_cast<int>(rows.size()));
    for (size_t i = 0; i < rows.size(); ++i) {
      if (rows[i] < 0 || rows[i] >= val(a).rows() || cols[i] < 0 || cols[i] >= val(a).cols())
        throw ContractError("pick: index out of range");
      v(0, static_cast<int>(i)) = val(a)(rows[i], cols[i]);
    }
    return push(std::move(v), tracked(a),
                [a, rows = std::move(rows), cols = std::move(cols)](Tape& t, int self) {
                  if (!t.tracked(a)) return;
                  const M& g = t.nodes_[self].grad;
                  M& ga = t.g(a);
                  for (size_t i = 0; i < rows.size(); ++i)
                    ga(rows[i], cols[i]) += g(0, static_cast<int>(i));
                });
  }

  // ----- rowwise normalizations -----

  Var softmax_rows(Var a) {
    M v = val(a);
    for (int r = 0; r < v.rows(); ++r) {
      S mx = v.row(r).maxCoeff();
      v.row(r) = (v.row(r).array() - mx).exp();
      v.row(r) /= v.row(r).sum();
    }
    return push(std::move(v), tracked(a), [a](Tape& t, int self) {
      if (!t.tracked(a)) return;
      const M& y = t.nodes_[self].value;
      const M& g = t.nodes_[self].grad;
      M& ga = t.g(a);
      for (int r = 0; r < y.rows(); ++r) {
        S dot = g.row(r).cwiseProduct(y.row(r)).sum();
        ga.row(r).array() += y.row(r).array() * (g.row(r).array() - dot);
      }
    });
  }

  Var log_softmax_rows(Var a) {
    M v = val(a);
    for (int r = 0; r < v.rows(); ++r) {
      S mx = v.row(r).maxCoeff();
      v.row(r).array() -= mx;
      S lse = std::log(v.row(r).array().exp().sum());
      v.row(r).array() -= lse;
    }
    return push(std::move(v), tracked(a), [a](Tape& t, int self) {
      if (!t.tracked(a)) return;
      const M& y = t.nodes_[self].value;  // log p
      const M& g = t.nodes_[self].grad;
      M& ga = t.g(a);
      for (int r = 0; r < y.rows(); ++r) {
        S gs = g.row(r).sum();
        ga.row(r) += g.row(r) - y.row(r).array().exp().matrix() * gs;
      }
    });
  }

  // Per-row standardization without a learned affine part:
  // y = (x - mean) / sqrt(var + eps), population variance.
  Var layer_norm_rows(Var a, S eps) {
    const M& x = val(a);
    M v(x.rows(), x.cols());
    M inv_std(x.rows(), 1);
    for (int r = 0; r < x.rows(); ++r) {
      S mean = x.row(r).mean();
      S var = (x.row(r).array() - mean).square().mean();
      S is = S(1) / std::sqrt(var + eps);
      inv_std(r, 0) = is;
      v.row(r) = (x.row(r).array() - mean) * is;
    }
    Var out = push(std::move(v), tracked(a), {});
    nodes_[out.id].aux = std::move(inv_std);
    nodes_[out.id].back = [a](Tape& t, int self) {
      if (!t.tracked(a)) return;
      const M& y = t.nodes_[self].value;
      const M& g = t.nodes_[self].grad;
      const M& is = t.nodes_[self].aux;
      M& ga = t.g(a);
      for (int r = 0; r < y.rows(); ++r) {
        S gm = g.row(r).mean();
        S gym = g.row(r).cwiseProduct(y.row(r)).mean();
        ga.row(r) += ((g.row(r).array() - gm) - y.row(r).array() * gym).matrix() * is(r, 0);
      }
    };
    return out;
  }

  // ----- reductions and elementwise extrema -----

  Var sum_all(Var a) {
    M v(1, 1);
    v(0, 0) = val(a).sum();
    return push(std::move(v), tracked(a), [a](Tape& t, int self) {
      if (!t.tracked(a)) return;
      S g = t.nodes_[self].grad(0, 0);
      t.g(a).array() += g;
    });
  }

  Var mean_all(Var a) {
    M v(1, 1);
    v(0, 0) = val(a).mean();
    return push(std::move(v), tracked(a), [a](Tape& t, int self) {
      if (!t.tracked(a)) return;
      S g = t.nodes_[self].grad(0, 0) / static_cast<S>(t.val(a).size());
      t.g(a).array() += g;
    });
  }

  Var min_el(Var a, Var b) { return extremum(a, b, true); }
  Var max_el(Var a, Var b) { return extremum(a, b, false); }

  // Copies the value and cuts the gradient path.
  Var detach(Var a) { return constant(val(a)); }

  // ----- backward -----

  void backward(Var out) {
    const Node& o = node(out);
    if (o.value.rows() != 1 || o.value.cols() != 1)
      throw ContractError("backward: output must be a 1x1 scalar");
    if (!o.tracked) return;  // nothing reachable to differentiate
    g(out).setOnes();
    for (int id = out.id; id >= 0; --id) {
      Node& n = nodes_[id];
      if (!n.tracked || !n.back || n.grad.size() == 0) continue;
      n.back(*this, id);
    }
  }

 private:
  struct Node {
    M value;
    M grad;
    M aux;  // op-specific stash (layer norm inverse stddev)
    bool tracked = false;
    std::function<void(Tape&, int)> back;
  };

  std::vector<Node> nodes_;

  const Node& node(Var x) const {
    if (x.id < 0 || x.id >= static_cast<int>(nodes_.size()))
      throw ContractError("tape: invalid Var");
    return nodes_[x.id];
  }

  bool tracked(Var x) const { return node(x).tracked; }

  M& g(Var x) {
    Node& n = nodes_[x.id];
    if (n.grad.size() == 0) n.grad = M::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  Var push(M v, bool tracked, std::function<void(Tape&, int)> back) {
    Node n;
    n.value = std::move(v);
    n.tracked = tracked;
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  void check_same_shape(Var a, Var b, const char* op) const {
    if (val(a).rows() != val(b).rows() || val(a).cols() != val(b).cols())
      throw ContractError(std::string(op) + ": shape mismatch");
  }

  // Ties route the gradient to a, so the result is deterministic.
  Var extremum(Var a, Var b, bool take_min) {
    check_same_shape(a, b, take_min ? "min_el" : "max_el");
    M mask = take_min ? (val(a).array() <= val(b).array()).template cast<S>().matrix()
                      : (val(a).array() >= val(b).array()).template cast<S>().matrix();
    M v = mask.cwiseProduct(val(a)) +
          (M::Ones(mask.rows(), mask.cols()) - mask).cwiseProduct(val(b));
    Var out = push(std::move(v), tracked(a) || tracked(b), {});
    nodes_[out.id].aux = std::move(mask);
    nodes_[out.id].back = [a, b](Tape& t, int self) {
      const M& g = t.nodes_[self].grad;
      const M& mask = t.nodes_[self].aux;
      if (t.tracked(a)) t.g(a) += g.cwiseProduct(mask);
      if (t.tracked(b))
        t.g(b) += g.cwiseProduct(
            (M::Ones(mask.rows(), mask.cols()) - mask));
    };
    return out;
  }
};

}  // namespace amd::ad
