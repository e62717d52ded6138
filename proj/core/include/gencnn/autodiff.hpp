#pragma once

#include <deque>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "gencnn/tensor.hpp"

namespace gencnn {

enum class Activation { relu, sigmoid };

/// Handle to a value recorded on a Tape.
struct Var {
  int32_t idx = -1;
  bool valid() const { return idx >= 0; }
};

/// Gradients for leaf (parameter) tensors, addressed by leaf id.
class GradientMap {
 public:
  /// Insert a zero gradient of the given shape if the id is absent.
  Tensor& ensure(int leaf_id, const std::vector<int>& shape);
  Tensor& at(int leaf_id);
  const Tensor& at(int leaf_id) const;
  bool has(int leaf_id) const;
  void clear() { grads_.clear(); }
  /// Keep shapes, reset values to zero.
  void zero();
  size_t entry_count() const { return grads_.size(); }

 private:
  std::map<int, Tensor> grads_;
};

/// Source of one row in Tape::compose_rows: a row of the table var, a
/// rank-1 injected var, or zeros.
struct RowSource {
  enum Kind { zeros, table_row, injected } kind = zeros;
  int index = 0;  // table row id or position in the injected list
};

/// Record of one forward computation. Every operation appends a node holding
/// its result and a closure that, given the node's output gradient, adds each
/// operand's contribution to that operand's gradient. Replaying the nodes in
/// exact reverse order therefore accumulates d(loss)/d(leaf) for every leaf,
/// summing over all uses of a value.
class Tape {
 public:
  /// record=false computes values only; backward() is then unavailable.
  explicit Tape(bool record = true) : record_(record) {}

  // backward closures capture `this`
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = delete;
  Tape& operator=(Tape&&) = delete;

  /// Register a parameter tensor. Repeated calls with the same leaf id on one
  /// tape return the same Var, so all uses share one gradient slot.
  Var leaf(const Tensor& value, int leaf_id);
  /// A value that is constant with respect to gradients.
  Var input(Tensor value);

  /// Reference stays valid until reset() regardless of later recording.
  const Tensor& value(Var v) const;

  // elementwise / structural
  Var add(Var a, Var b);
  Var scale(Var a, double s);
  Var sum(Var a);  // -> scalar
  Var reshape(Var a, std::vector<int> shape);
  Var activation(Var x, Activation kind);
  Var concat_cols(Var a, Var b);  // [L x p],[L x q] -> [L x (p+q)]

  // linear algebra
  Var matmul(Var a, Var b);        // [m x k]·[k x n]
  Var affine(Var w, Var x, Var b); // [m x n]·[n] + [m]

  /// Sliding row windows: output row j concatenates `width` consecutive rows
  /// of x starting at j*stride. x:[L x d] -> [W x width*d].
  Var windows(Var x, int width, int stride);

  /// seg:[L x s] with shared weights w:[F x s], bias b:[F] -> [L x F].
  Var linear_shared(Var seg, Var w, Var b);
  /// seg:[L x s] with per-location weights w:[L x F x s], b:[L x F] -> [L x F].
  Var linear_per_loc(Var seg, Var w, Var b);

  /// Convex combination of consecutive row pairs of fm:[L x F] with
  /// coefficients g:[floor(L/2) x F]; out[j] = g[j]*fm[2j] + (1-g[j])*fm[2j+1].
  /// An odd final row passes through unchanged. hard=true picks the side with
  /// the larger coefficient instead (no gradient flows to g).
  Var pair_combine(Var fm, Var g, bool hard);

  /// Build an [n x d] matrix row by row from a table var, injected rank-1
  /// vars, and zero rows.
  Var compose_rows(Var table, const std::vector<RowSource>& rows,
                   const std::vector<Var>& injected);

  /// scores[i] = w[rows[i]]·x + b[rows[i]].
  Var row_gather_affine(Var w, Var b, const std::vector<int>& rows, Var x);

  Var log_softmax(Var scores);
  /// -log softmax(scores)[target], numerically stable. -> scalar
  Var cross_entropy_logits(Var scores, int target);

  /// Accumulate scale * d(loss)/d(leaf) into sink for every registered leaf.
  /// Leaves with no path to the loss receive (keep) zero gradients.
  void backward(Var loss, GradientMap& sink, double scale = 1.0);

  void reset();
  size_t node_count() const { return values_.size(); }
  bool recording() const { return record_; }

 private:
  using BackwardFn = std::function<void(const Tensor& out_grad)>;

  Var push(Tensor value, BackwardFn fn);
  Tensor& grad_buffer(Var v);
  void add_grad(Var v, const Tensor& g);

  bool record_ = true;
  std::deque<Tensor> values_;
  std::vector<BackwardFn> backward_fns_;
  std::vector<int> leaf_ids_;          // -1 for non-leaf nodes
  std::map<int, Var> leaf_cache_;      // leaf id -> node
  std::vector<Tensor> grads_;          // scratch, valid during backward()
};

}  // namespace gencnn
