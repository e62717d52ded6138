#include "gencnn/autodiff.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace gencnn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using CMatMap = Eigen::Map<const RowMat>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using CVecMap = Eigen::Map<const Eigen::VectorXd>;

MatMap as_mat(Tensor& t, int rows, int cols) { return MatMap(t.data(), rows, cols); }
CMatMap as_mat(const Tensor& t, int rows, int cols) { return CMatMap(t.data(), rows, cols); }
VecMap as_vec(Tensor& t) { return VecMap(t.data(), t.size()); }
CVecMap as_vec(const Tensor& t) { return CVecMap(t.data(), t.size()); }

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

// ---------------------------------------------------------------------------
// GradientMap

Tensor& GradientMap::ensure(int leaf_id, const std::vector<int>& shape) {
  auto it = grads_.find(leaf_id);
  if (it == grads_.end()) it = grads_.emplace(leaf_id, Tensor::zeros(shape)).first;
  return it->second;
}

Tensor& GradientMap::at(int leaf_id) { return grads_.at(leaf_id); }
const Tensor& GradientMap::at(int leaf_id) const { return grads_.at(leaf_id); }
bool GradientMap::has(int leaf_id) const { return grads_.count(leaf_id) != 0; }

void GradientMap::zero() {
  for (auto& [id, g] : grads_) g.fill(0.0);
}

// ---------------------------------------------------------------------------
// Tape plumbing

Var Tape::push(Tensor value, BackwardFn fn) {
  Var v{static_cast<int32_t>(values_.size())};
  values_.push_back(std::move(value));
  backward_fns_.push_back(record_ ? std::move(fn) : BackwardFn{});
  leaf_ids_.push_back(-1);
  return v;
}

Var Tape::leaf(const Tensor& value, int leaf_id) {
  auto it = leaf_cache_.find(leaf_id);
  if (it != leaf_cache_.end()) return it->second;
  Var v = push(value, BackwardFn{});
  leaf_ids_[static_cast<size_t>(v.idx)] = leaf_id;
  leaf_cache_.emplace(leaf_id, v);
  return v;
}

Var Tape::input(Tensor value) { return push(std::move(value), BackwardFn{}); }

const Tensor& Tape::value(Var v) const {
  if (!v.valid() || v.idx >= static_cast<int32_t>(values_.size())) {
    throw std::logic_error("invalid tape var");
  }
  return values_[static_cast<size_t>(v.idx)];
}

void Tape::add_grad(Var v, const Tensor& g) {
  Tensor& slot = grads_[static_cast<size_t>(v.idx)];
  if (!slot.defined()) slot = Tensor::zeros(values_[static_cast<size_t>(v.idx)].shape());
  as_vec(slot) += as_vec(g);
}

Tensor& Tape::grad_buffer(Var v) {
  Tensor& slot = grads_[static_cast<size_t>(v.idx)];
  if (!slot.defined()) slot = Tensor::zeros(values_[static_cast<size_t>(v.idx)].shape());
  return slot;
}

void Tape::reset() {
  values_.clear();
  backward_fns_.clear();
  leaf_ids_.clear();
  leaf_cache_.clear();
  grads_.clear();
}

void Tape::backward(Var loss, GradientMap& sink, double scale) {
  if (!record_) throw std::logic_error("backward() on a non-recording tape");
  const Tensor& l = value(loss);
  if (l.size() != 1) {
    throw std::logic_error("backward: loss must be scalar, got " + l.shape_str());
  }
  grads_.assign(values_.size(), Tensor{});
  grads_[static_cast<size_t>(loss.idx)] = Tensor::scalar(scale);
  for (int32_t i = loss.idx; i >= 0; --i) {
    size_t u = static_cast<size_t>(i);
    if (grads_[u].defined() && backward_fns_[u]) backward_fns_[u](grads_[u]);
  }
  for (const auto& [leaf_id, v] : leaf_cache_) {
    Tensor& dst = sink.ensure(leaf_id, values_[static_cast<size_t>(v.idx)].shape());
    const Tensor& src = grads_[static_cast<size_t>(v.idx)];
    if (src.defined()) as_vec(dst) += as_vec(src);
  }
  grads_.clear();
}

// ---------------------------------------------------------------------------
// Elementwise and structural ops

Var Tape::add(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require(ta.same_shape(tb), "add shape mismatch: " + ta.shape_str() + " vs " + tb.shape_str());
  Tensor out = Tensor::zeros(ta.shape());
  as_vec(out) = as_vec(ta) + as_vec(tb);
  return push(std::move(out), [this, a, b](const Tensor& g) {
    add_grad(a, g);
    add_grad(b, g);
  });
}

Var Tape::scale(Var a, double s) {
  const Tensor& ta = value(a);
  Tensor out = Tensor::zeros(ta.shape());
  as_vec(out) = as_vec(ta) * s;
  return push(std::move(out), [this, a, s](const Tensor& g) {
    Tensor& da = grad_buffer(a);
    as_vec(da) += as_vec(g) * s;
  });
}

Var Tape::sum(Var a) {
  const Tensor& ta = value(a);
  Tensor out = Tensor::scalar(as_vec(ta).sum());
  return push(std::move(out), [this, a](const Tensor& g) {
    Tensor& da = grad_buffer(a);
    as_vec(da).array() += g[0];
  });
}

Var Tape::reshape(Var a, std::vector<int> shape) {
  const Tensor& ta = value(a);
  std::vector<int> orig = ta.shape();
  Tensor out = ta.reshaped(std::move(shape));
  return push(std::move(out), [this, a, orig](const Tensor& g) {
    add_grad(a, g.reshaped(orig));
  });
}

Var Tape::activation(Var x, Activation kind) {
  const Tensor& tx = value(x);
  Tensor out = Tensor::zeros(tx.shape());
  int64_t n = tx.size();
  if (kind == Activation::relu) {
    for (int64_t i = 0; i < n; ++i) out[i] = tx[i] > 0.0 ? tx[i] : 0.0;
    Tensor in = tx;
    return push(std::move(out), [this, x, in](const Tensor& g) {
      Tensor& dx = grad_buffer(x);
      for (int64_t i = 0; i < in.size(); ++i) {
        if (in[i] > 0.0) dx[i] += g[i];
      }
    });
  }
  for (int64_t i = 0; i < n; ++i) out[i] = sigmoid(tx[i]);
  Tensor y = out;
  return push(std::move(out), [this, x, y](const Tensor& g) {
    Tensor& dx = grad_buffer(x);
    for (int64_t i = 0; i < y.size(); ++i) dx[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Var Tape::concat_cols(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require(ta.rank() == 2 && tb.rank() == 2 && ta.rows() == tb.rows(),
          "concat_cols shape mismatch: " + ta.shape_str() + " vs " + tb.shape_str());
  int L = ta.rows(), p = ta.cols(), q = tb.cols();
  Tensor out = Tensor::zeros({L, p + q});
  as_mat(out, L, p + q).leftCols(p) = as_mat(ta, L, p);
  as_mat(out, L, p + q).rightCols(q) = as_mat(tb, L, q);
  return push(std::move(out), [this, a, b, L, p, q](const Tensor& g) {
    Tensor& da = grad_buffer(a);
    Tensor& db = grad_buffer(b);
    as_mat(da, L, p) += as_mat(g, L, p + q).leftCols(p);
    as_mat(db, L, q) += as_mat(g, L, p + q).rightCols(q);
  });
}

// ---------------------------------------------------------------------------
// Linear algebra

Var Tape::matmul(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require(ta.rank() == 2 && tb.rank() == 2,
          "matmul expects rank-2 operands, got " + ta.shape_str() + " and " + tb.shape_str());
  require(ta.cols() == tb.rows(),
          "matmul shape mismatch: " + ta.shape_str() + " vs " + tb.shape_str());
  int m = ta.rows(), k = ta.cols(), n = tb.cols();
  Tensor out = Tensor::zeros({m, n});
  as_mat(out, m, n).noalias() = as_mat(ta, m, k) * as_mat(tb, k, n);
  Tensor va = ta, vb = tb;
  return push(std::move(out), [this, a, b, va, vb, m, k, n](const Tensor& g) {
    Tensor& da = grad_buffer(a);
    Tensor& db = grad_buffer(b);
    as_mat(da, m, k).noalias() += as_mat(g, m, n) * as_mat(vb, k, n).transpose();
    as_mat(db, k, n).noalias() += as_mat(va, m, k).transpose() * as_mat(g, m, n);
  });
}

Var Tape::affine(Var w, Var x, Var b) {
  const Tensor& tw = value(w);
  const Tensor& tx = value(x);
  const Tensor& tb = value(b);
  require(tw.rank() == 2 && tw.cols() == tx.size() && tb.size() == tw.rows(),
          "affine shape mismatch: w " + tw.shape_str() + ", x " + tx.shape_str() + ", b " +
              tb.shape_str());
  int m = tw.rows(), n = tw.cols();
  Tensor out = Tensor::zeros({m});
  as_vec(out).noalias() = as_mat(tw, m, n) * as_vec(tx) + as_vec(tb);
  Tensor vw = tw, vx = tx;
  return push(std::move(out), [this, w, x, b, vw, vx, m, n](const Tensor& g) {
    Tensor& dw = grad_buffer(w);
    Tensor& dx = grad_buffer(x);
    Tensor& db = grad_buffer(b);
    as_mat(dw, m, n).noalias() += as_vec(g) * as_vec(vx).transpose();
    as_vec(dx).noalias() += as_mat(vw, m, n).transpose() * as_vec(g);
    as_vec(db) += as_vec(g);
  });
}

Var Tape::windows(Var x, int width, int stride) {
  const Tensor& tx = value(x);
  require(tx.rank() == 2, "windows expects rank-2 input, got " + tx.shape_str());
  require(width >= 1 && stride >= 1, "windows: width and stride must be positive");
  int L_in = tx.rows(), d = tx.cols();
  require(L_in >= width, "windows: input length " + std::to_string(L_in) +
                             " shorter than window " + std::to_string(width));
  int W = (L_in - width) / stride + 1;
  Tensor out = Tensor::zeros({W, width * d});
  for (int j = 0; j < W; ++j) {
    for (int r = 0; r < width; ++r) {
      const double* src = tx.data() + static_cast<int64_t>(j * stride + r) * d;
      double* dst = out.data() + static_cast<int64_t>(j) * width * d + static_cast<int64_t>(r) * d;
      std::copy(src, src + d, dst);
    }
  }
  return push(std::move(out), [this, x, width, stride, W, d](const Tensor& g) {
    Tensor& dx = grad_buffer(x);
    for (int j = 0; j < W; ++j) {
      for (int r = 0; r < width; ++r) {
        const double* src = g.data() + static_cast<int64_t>(j) * width * d + static_cast<int64_t>(r) * d;
        double* dst = dx.data() + static_cast<int64_t>(j * stride + r) * d;
        for (int c = 0; c < d; ++c) dst[c] += src[c];
      }
    }
  });
}

Var Tape::linear_shared(Var seg, Var w, Var b) {
  const Tensor& ts = value(seg);
  const Tensor& tw = value(w);
  const Tensor& tb = value(b);
  require(ts.rank() == 2 && tw.rank() == 2 && ts.cols() == tw.cols(),
          "linear_shared shape mismatch: seg " + ts.shape_str() + ", w " + tw.shape_str());
  require(tb.size() == tw.rows(), "linear_shared bias mismatch: " + tb.shape_str());
  int L = ts.rows(), s = ts.cols(), F = tw.rows();
  Tensor out = Tensor::zeros({L, F});
  as_mat(out, L, F).noalias() = as_mat(ts, L, s) * as_mat(tw, F, s).transpose();
  as_mat(out, L, F).rowwise() += as_vec(tb).transpose();
  Tensor vs = ts, vw = tw;
  return push(std::move(out), [this, seg, w, b, vs, vw, L, s, F](const Tensor& g) {
    Tensor& ds = grad_buffer(seg);
    Tensor& dw = grad_buffer(w);
    Tensor& db = grad_buffer(b);
    as_mat(dw, F, s).noalias() += as_mat(g, L, F).transpose() * as_mat(vs, L, s);
    as_mat(ds, L, s).noalias() += as_mat(g, L, F) * as_mat(vw, F, s);
    as_vec(db) += as_mat(g, L, F).colwise().sum().transpose();
  });
}

Var Tape::linear_per_loc(Var seg, Var w, Var b) {
  const Tensor& ts = value(seg);
  const Tensor& tw = value(w);
  const Tensor& tb = value(b);
  require(ts.rank() == 2 && tw.rank() == 3, "linear_per_loc expects seg rank-2, w rank-3");
  int L = ts.rows(), s = ts.cols();
  int F = tw.dim(1);
  require(tw.dim(0) == L && tw.dim(2) == s,
          "linear_per_loc shape mismatch: seg " + ts.shape_str() + ", w " + tw.shape_str());
  require(tb.rank() == 2 && tb.dim(0) == L && tb.dim(1) == F,
          "linear_per_loc bias mismatch: " + tb.shape_str());
  Tensor out = Tensor::zeros({L, F});
  for (int l = 0; l < L; ++l) {
    CMatMap wl(tw.data() + static_cast<int64_t>(l) * F * s, F, s);
    CVecMap sl(ts.data() + static_cast<int64_t>(l) * s, s);
    CVecMap bl(tb.data() + static_cast<int64_t>(l) * F, F);
    VecMap(out.data() + static_cast<int64_t>(l) * F, F).noalias() = wl * sl + bl;
  }
  Tensor vs = ts, vw = tw;
  return push(std::move(out), [this, seg, w, b, vs, vw, L, s, F](const Tensor& g) {
    Tensor& ds = grad_buffer(seg);
    Tensor& dw = grad_buffer(w);
    Tensor& db = grad_buffer(b);
    for (int l = 0; l < L; ++l) {
      CVecMap gl(g.data() + static_cast<int64_t>(l) * F, F);
      CVecMap sl(vs.data() + static_cast<int64_t>(l) * s, s);
      CMatMap wl(vw.data() + static_cast<int64_t>(l) * F * s, F, s);
      MatMap(dw.data() + static_cast<int64_t>(l) * F * s, F, s).noalias() += gl * sl.transpose();
      VecMap(ds.data() + static_cast<int64_t>(l) * s, s).noalias() += wl.transpose() * gl;
      VecMap(db.data() + static_cast<int64_t>(l) * F, F) += gl;
    }
  });
}

// ---------------------------------------------------------------------------
// Gating, row composition, softmax

Var Tape::pair_combine(Var fm, Var g, bool hard) {
  const Tensor& tf = value(fm);
  const Tensor& tg = value(g);
  require(tf.rank() == 2 && tg.rank() == 2, "pair_combine expects rank-2 operands");
  int L = tf.rows(), F = tf.cols();
  int J = L / 2;
  require(tg.rows() == J && tg.cols() == F,
          "pair_combine gate shape " + tg.shape_str() + " does not match feature maps " +
              tf.shape_str());
  bool odd = (L % 2) != 0;
  int out_rows = J + (odd ? 1 : 0);
  Tensor out = Tensor::zeros({out_rows, F});
  for (int j = 0; j < J; ++j) {
    const double* left = tf.data() + static_cast<int64_t>(2 * j) * F;
    const double* right = left + F;
    const double* gj = tg.data() + static_cast<int64_t>(j) * F;
    double* oj = out.data() + static_cast<int64_t>(j) * F;
    if (hard) {
      for (int f = 0; f < F; ++f) oj[f] = gj[f] > 0.5 ? left[f] : right[f];
    } else {
      for (int f = 0; f < F; ++f) oj[f] = gj[f] * left[f] + (1.0 - gj[f]) * right[f];
    }
  }
  if (odd) {
    const double* last = tf.data() + static_cast<int64_t>(L - 1) * F;
    std::copy(last, last + F, out.data() + static_cast<int64_t>(J) * F);
  }
  Tensor vf = tf, vg = tg;
  return push(std::move(out), [this, fm, g, vf, vg, L, F, J, odd, hard](const Tensor& go) {
    Tensor& df = grad_buffer(fm);
    Tensor& dg = grad_buffer(g);
    for (int j = 0; j < J; ++j) {
      const double* gj = vg.data() + static_cast<int64_t>(j) * F;
      const double* goj = go.data() + static_cast<int64_t>(j) * F;
      const double* left = vf.data() + static_cast<int64_t>(2 * j) * F;
      const double* right = left + F;
      double* dleft = df.data() + static_cast<int64_t>(2 * j) * F;
      double* dright = dleft + F;
      double* dgj = dg.data() + static_cast<int64_t>(j) * F;
      if (hard) {
        for (int f = 0; f < F; ++f) {
          if (gj[f] > 0.5) dleft[f] += goj[f];
          else dright[f] += goj[f];
        }
      } else {
        for (int f = 0; f < F; ++f) {
          dleft[f] += gj[f] * goj[f];
          dright[f] += (1.0 - gj[f]) * goj[f];
          dgj[f] += (left[f] - right[f]) * goj[f];
        }
      }
    }
    if (odd) {
      const double* goj = go.data() + static_cast<int64_t>(J) * F;
      double* dlast = df.data() + static_cast<int64_t>(L - 1) * F;
      for (int f = 0; f < F; ++f) dlast[f] += goj[f];
    }
  });
}

Var Tape::compose_rows(Var table, const std::vector<RowSource>& rows,
                       const std::vector<Var>& injected) {
  const Tensor& tt = value(table);
  require(tt.rank() == 2, "compose_rows expects rank-2 table");
  int d = tt.cols();
  int n = static_cast<int>(rows.size());
  Tensor out = Tensor::zeros({n, d});
  for (int r = 0; r < n; ++r) {
    const RowSource& src = rows[static_cast<size_t>(r)];
    double* dst = out.data() + static_cast<int64_t>(r) * d;
    switch (src.kind) {
      case RowSource::zeros:
        break;
      case RowSource::table_row: {
        require(src.index >= 0 && src.index < tt.rows(),
                "compose_rows: row id " + std::to_string(src.index) + " out of table " +
                    tt.shape_str());
        const double* s = tt.data() + static_cast<int64_t>(src.index) * d;
        std::copy(s, s + d, dst);
        break;
      }
      case RowSource::injected: {
        require(src.index >= 0 && src.index < static_cast<int>(injected.size()),
                "compose_rows: injected index out of range");
        const Tensor& v = value(injected[static_cast<size_t>(src.index)]);
        require(v.size() == d, "compose_rows: injected row size " + v.shape_str() +
                                   " does not match width " + std::to_string(d));
        std::copy(v.data(), v.data() + d, dst);
        break;
      }
    }
  }
  std::vector<RowSource> rs = rows;
  std::vector<Var> inj = injected;
  return push(std::move(out), [this, table, rs, inj, d](const Tensor& g) {
    Tensor& dt = grad_buffer(table);
    for (int r = 0; r < static_cast<int>(rs.size()); ++r) {
      const RowSource& src = rs[static_cast<size_t>(r)];
      const double* gr = g.data() + static_cast<int64_t>(r) * d;
      if (src.kind == RowSource::table_row) {
        double* dst = dt.data() + static_cast<int64_t>(src.index) * d;
        for (int c = 0; c < d; ++c) dst[c] += gr[c];
      } else if (src.kind == RowSource::injected) {
        Tensor& dv = grad_buffer(inj[static_cast<size_t>(src.index)]);
        for (int c = 0; c < d; ++c) dv[c] += gr[c];
      }
    }
  });
}

Var Tape::row_gather_affine(Var w, Var b, const std::vector<int>& rows, Var x) {
  const Tensor& tw = value(w);
  const Tensor& tb = value(b);
  const Tensor& tx = value(x);
  require(tw.rank() == 2 && tw.cols() == tx.size(),
          "row_gather_affine shape mismatch: w " + tw.shape_str() + ", x " + tx.shape_str());
  require(tb.size() == tw.rows(), "row_gather_affine bias mismatch");
  int n = static_cast<int>(rows.size());
  int d = tw.cols();
  Tensor out = Tensor::zeros({n});
  for (int i = 0; i < n; ++i) {
    int r = rows[static_cast<size_t>(i)];
    require(r >= 0 && r < tw.rows(), "row_gather_affine: row " + std::to_string(r) + " out of range");
    CVecMap wr(tw.data() + static_cast<int64_t>(r) * d, d);
    out[i] = wr.dot(as_vec(tx)) + tb[r];
  }
  Tensor vw = tw, vx = tx;
  std::vector<int> rws = rows;
  return push(std::move(out), [this, w, b, x, vw, vx, rws, d](const Tensor& g) {
    Tensor& dw = grad_buffer(w);
    Tensor& db = grad_buffer(b);
    Tensor& dx = grad_buffer(x);
    for (int i = 0; i < static_cast<int>(rws.size()); ++i) {
      int r = rws[static_cast<size_t>(i)];
      VecMap(dw.data() + static_cast<int64_t>(r) * d, d).noalias() += g[i] * as_vec(vx);
      as_vec(dx).noalias() += g[i] * CVecMap(vw.data() + static_cast<int64_t>(r) * d, d);
      db[r] += g[i];
    }
  });
}

Var Tape::log_softmax(Var scores) {
  const Tensor& ts = value(scores);
  require(ts.rank() == 1 && ts.size() > 0, "log_softmax expects a non-empty vector");
  int n = static_cast<int>(ts.size());
  double mx = as_vec(ts).maxCoeff();
  double z = 0.0;
  for (int i = 0; i < n; ++i) z += std::exp(ts[i] - mx);
  double lse = mx + std::log(z);
  Tensor out = Tensor::zeros({n});
  for (int i = 0; i < n; ++i) out[i] = ts[i] - lse;
  Tensor y = out;
  return push(std::move(out), [this, scores, y, n](const Tensor& g) {
    Tensor& ds = grad_buffer(scores);
    double gsum = as_vec(g).sum();
    for (int i = 0; i < n; ++i) ds[i] += g[i] - std::exp(y[i]) * gsum;
  });
}

Var Tape::cross_entropy_logits(Var scores, int target) {
  const Tensor& ts = value(scores);
  require(ts.rank() == 1 && ts.size() > 0, "cross_entropy_logits expects a non-empty vector");
  int n = static_cast<int>(ts.size());
  require(target >= 0 && target < n,
          "cross_entropy_logits: target " + std::to_string(target) + " out of range " +
              std::to_string(n));
  double mx = as_vec(ts).maxCoeff();
  double z = 0.0;
  Tensor probs = Tensor::zeros({n});
  for (int i = 0; i < n; ++i) {
    probs[i] = std::exp(ts[i] - mx);
    z += probs[i];
  }
  for (int i = 0; i < n; ++i) probs[i] /= z;
  double loss = mx + std::log(z) - ts[target];
  return push(Tensor::scalar(loss), [this, scores, probs, target, n](const Tensor& g) {
    Tensor& ds = grad_buffer(scores);
    double s = g[0];
    for (int i = 0; i < n; ++i) ds[i] += s * (probs[i] - (i == target ? 1.0 : 0.0));
  });
}

}  // namespace gencnn
