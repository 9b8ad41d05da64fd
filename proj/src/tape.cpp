#include "insyn/tape.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

#include "insyn/error.hpp"

namespace insyn::nn {

std::string shape_str(const Tensor& t) {
  return "[" + std::to_string(t.rows) + "x" + std::to_string(t.cols) + "]";
}

namespace {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<Mat>;
using CMapMat = Eigen::Map<const Mat>;

CMapMat as_mat(const Tensor& t) { return CMapMat(t.v.data(), t.rows, t.cols); }
MapMat val_mat(Tensor& t) { return MapMat(t.v.data(), t.rows, t.cols); }
MapMat grad_mat(Tensor& t) { return MapMat(t.g.data(), t.rows, t.cols); }
CMapMat grad_cmat(const Tensor& t) { return CMapMat(t.g.data(), t.rows, t.cols); }

[[noreturn]] void shape_fail(const char* op, const Tensor& a, const Tensor& b) {
  fail("shape-mismatch", std::string(op) + " on " + shape_str(a) + " and " + shape_str(b));
}

}  // namespace

Tape::Ref Tape::push(Tensor t, bool needs_grad) {
  nodes_.push_back(Node{std::move(t), needs_grad, nullptr, {}});
  return static_cast<Ref>(nodes_.size() - 1);
}

Tape::Ref Tape::param(Tensor& external) {
  Ref r = push(Tensor(external.rows, external.cols), true);
  nodes_[r].t.v = external.v;
  nodes_[r].external = &external;
  nodes_[r].backward = [this, r] {
    Node& n = nodes_[r];
    for (size_t i = 0; i < n.t.g.size(); ++i) n.external->g[i] += n.t.g[i];
  };
  return r;
}

Tape::Ref Tape::input(const Tensor& t) { return push(t, true); }

Tape::Ref Tape::constant(const Tensor& t) { return push(t, false); }
Tape::Ref Tape::constant(Tensor&& t) { return push(std::move(t), false); }

Tape::Ref Tape::matmul(Ref a, Ref b, bool trans_a, bool trans_b) {
  const Tensor& ta = nodes_[a].t;
  const Tensor& tb = nodes_[b].t;
  int am = trans_a ? ta.cols : ta.rows;
  int ak = trans_a ? ta.rows : ta.cols;
  int bk = trans_b ? tb.cols : tb.rows;
  int bn = trans_b ? tb.rows : tb.cols;
  if (ak != bk) shape_fail("matmul", ta, tb);

  Tensor out(am, bn);
  {
    auto A = as_mat(ta);
    auto B = as_mat(tb);
    auto C = val_mat(out);
    if (!trans_a && !trans_b) C.noalias() = A * B;
    else if (trans_a && !trans_b) C.noalias() = A.transpose() * B;
    else if (!trans_a && trans_b) C.noalias() = A * B.transpose();
    else C.noalias() = A.transpose() * B.transpose();
  }
  bool ng = tracked(a) || tracked(b);
  Ref r = push(std::move(out), ng);
  if (ng) {
    nodes_[r].backward = [this, r, a, b, trans_a, trans_b] {
      auto dC = grad_cmat(nodes_[r].t);
      auto A = as_mat(nodes_[a].t);
      auto B = as_mat(nodes_[b].t);
      if (tracked(a)) {
        auto dA = grad_mat(nodes_[a].t);
        if (!trans_a && !trans_b) dA.noalias() += dC * B.transpose();
        else if (!trans_a && trans_b) dA.noalias() += dC * B;
        else if (trans_a && !trans_b) dA.noalias() += B * dC.transpose();
        else dA.noalias() += B.transpose() * dC.transpose();
      }
      if (tracked(b)) {
        auto dB = grad_mat(nodes_[b].t);
        if (!trans_a && !trans_b) dB.noalias() += A.transpose() * dC;
        else if (trans_a && !trans_b) dB.noalias() += A * dC;
        else if (!trans_a && trans_b) dB.noalias() += dC.transpose() * A;
        else dB.noalias() += dC.transpose() * A.transpose();
      }
    };
  }
  return r;
}

Tape::Ref Tape::add(Ref a, Ref b) {
  const Tensor& ta = nodes_[a].t;
  const Tensor& tb = nodes_[b].t;
  if (!same_shape(ta, tb)) shape_fail("add", ta, tb);
  Tensor out = ta;
  for (size_t i = 0; i < out.v.size(); ++i) out.v[i] += tb.v[i];
  out.zero_grad();
  bool ng = tracked(a) || tracked(b);
  Ref r = push(std::move(out), ng);
  if (ng) nodes_[r].backward = [this, r, a, b] {
    const auto& g = nodes_[r].t.g;
    if (tracked(a))
      for (size_t i = 0; i < g.size(); ++i) nodes_[a].t.g[i] += g[i];
    if (tracked(b))
      for (size_t i = 0; i < g.size(); ++i) nodes_[b].t.g[i] += g[i];
  };
  return r;
}

Tape::Ref Tape::sub(Ref a, Ref b) {
  const Tensor& ta = nodes_[a].t;
  const Tensor& tb = nodes_[b].t;
  if (!same_shape(ta, tb)) shape_fail("sub", ta, tb);
  Tensor out = ta;
  for (size_t i = 0; i < out.v.size(); ++i) out.v[i] -= tb.v[i];
  out.zero_grad();
  bool ng = tracked(a) || tracked(b);
  Ref r = push(std::move(out), ng);
  if (ng) nodes_[r].backward = [this, r, a, b] {
    const auto& g = nodes_[r].t.g;
    if (tracked(a))
      for (size_t i = 0; i < g.size(); ++i) nodes_[a].t.g[i] += g[i];
    if (tracked(b))
      for (size_t i = 0; i < g.size(); ++i) nodes_[b].t.g[i] -= g[i];
  };
  return r;
}

Tape::Ref Tape::mul(Ref a, Ref b) {
  const Tensor& ta = nodes_[a].t;
  const Tensor& tb = nodes_[b].t;
  if (!same_shape(ta, tb)) shape_fail("mul", ta, tb);
  Tensor out = ta;
  for (size_t i = 0; i < out.v.size(); ++i) out.v[i] *= tb.v[i];
  out.zero_grad();
  bool ng = tracked(a) || tracked(b);
  Ref r = push(std::move(out), ng);
  if (ng) nodes_[r].backward = [this, r, a, b] {
    const auto& g = nodes_[r].t.g;
    if (tracked(a))
      for (size_t i = 0; i < g.size(); ++i) nodes_[a].t.g[i] += g[i] * nodes_[b].t.v[i];
    if (tracked(b))
      for (size_t i = 0; i < g.size(); ++i) nodes_[b].t.g[i] += g[i] * nodes_[a].t.v[i];
  };
  return r;
}

Tape::Ref Tape::add_rowvec(Ref a, Ref row) {
  const Tensor& ta = nodes_[a].t;
  const Tensor& tr = nodes_[row].t;
  if (tr.rows != 1 || tr.cols != ta.cols) shape_fail("add_rowvec", ta, tr);
  Tensor out = ta;
  for (int i = 0; i < ta.rows; ++i)
    for (int j = 0; j < ta.cols; ++j) out.at(i, j) += tr.at(0, j);
  out.zero_grad();
  bool ng = tracked(a) || tracked(row);
  Ref r = push(std::move(out), ng);
  if (ng) nodes_[r].backward = [this, r, a, row] {
    const Tensor& t = nodes_[r].t;
    if (tracked(a))
      for (size_t i = 0; i < t.g.size(); ++i) nodes_[a].t.g[i] += t.g[i];
    if (tracked(row))
      for (int i = 0; i < t.rows; ++i)
        for (int j = 0; j < t.cols; ++j) nodes_[row].t.g[j] += t.g[static_cast<size_t>(i) * t.cols + j];
  };
  return r;
}

Tape::Ref Tape::scale(Ref a, double s) {
  Tensor out = nodes_[a].t;
  for (double& x : out.v) x *= s;
  out.zero_grad();
  bool ng = tracked(a);
  Ref r = push(std::move(out), ng);
  if (ng) nodes_[r].backward = [this, r, a, s] {
    const auto& g = nodes_[r].t.g;
    for (size_t i = 0; i < g.size(); ++i) nodes_[a].t.g[i] += g[i] * s;
  };
  return r;
}

Tape::Ref Tape::add_const(Ref a, double s) {
  Tensor out = nodes_[a].t;
  for (double& x : out.v) x += s;
  out.zero_grad();
  bool ng = tracked(a);
  Ref r = push(std::move(out), ng);
  if (ng) nodes_[r].backward = [this, r, a] {
    const auto& g = nodes_[r].t.g;
    for (size_t i = 0; i < g.size(); ++i) nodes_[a].t.g[i] += g[i];
  };
  return r;
}

Tape::Ref Tape::sigmoid(Ref a) {
  Tensor out = nodes_[a].t;
  for (double& x : out.v) x = 1.0 / (1.0 + std::exp(-x));
  out.zero_grad();
  bool ng = tracked(a);
  Ref r = push(std::move(out), ng);
  if (ng) nodes_[r].backward = [this, r, a] {
    const Tensor& t = nodes_[r].t;
    for (size_t i = 0; i < t.g.size(); ++i)
      nodes_[a].t.g[i] += t.g[i] * t.v[i] * (1.0 - t.v[i]);
  };
  return r;
}

Tape::Ref Tape::tanh(Ref a) {
  Tensor out = nodes_[a].t;
  for (double& x : out.v) x = std::tanh(x);
  out.zero_grad();
  bool ng = tracked(a);
  Ref r = push(std::move(out), ng);
  if (ng) nodes_[r].backward = [this, r, a] {
    const Tensor& t = nodes_[r].t;
    for (size_t i = 0; i < t.g.size(); ++i)
      nodes_[a].t.g[i] += t.g[i] * (1.0 - t.v[i] * t.v[i]);
  };
  return r;
}

Tape::Ref Tape::relu(Ref a) {
  Tensor out = nodes_[a].t;
  for (double& x : out.v) x = x > 0.0 ? x : 0.0;
  out.zero_grad();
  bool ng = tracked(a);
  Ref r = push(std::move(out), ng);
  if (ng) nodes_[r].backward = [this, r, a] {
    const Tensor& t = nodes_[r].t;
    for (size_t i = 0; i < t.g.size(); ++i)
      if (nodes_[a].t.v[i] > 0.0) nodes_[a].t.g[i] += t.g[i];
  };
  return r;
}

Tape::Ref Tape::exp(Ref a) {
  Tensor out = nodes_[a].t;
  for (double& x : out.v) x = std::exp(x);
  out.zero_grad();
  bool ng = tracked(a);
  Ref r = push(std::move(out), ng);
  if (ng) nodes_[r].backward = [this, r, a] {
    const Tensor& t = nodes_[r].t;
    for (size_t i = 0; i < t.g.size(); ++i) nodes_[a].t.g[i] += t.g[i] * t.v[i];
  };
  return r;
}

Tape::Ref Tape::square(Ref a) {
  Tensor out = nodes_[a].t;
  for (double& x : out.v) x = x * x;
  out.zero_grad();
  bool ng = tracked(a);
  Ref r = push(std::move(out), ng);
  if (ng) nodes_[r].backward = [this, r, a] {
    const Tensor& t = nodes_[r].t;
    for (size_t i = 0; i < t.g.size(); ++i)
      nodes_[a].t.g[i] += t.g[i] * 2.0 * nodes_[a].t.v[i];
  };
  return r;
}

Tape::Ref Tape::softmax_rows(Ref a, const std::vector<int>& allowed_prefix) {
  const Tensor& ta = nodes_[a].t;
  if (!allowed_prefix.empty() && static_cast<int>(allowed_prefix.size()) != ta.rows)
    fail("shape-mismatch", "softmax mask length " + std::to_string(allowed_prefix.size()) +
                               " vs " + shape_str(ta));
  Tensor out(ta.rows, ta.cols);
  for (int i = 0; i < ta.rows; ++i) {
    int k = allowed_prefix.empty() ? ta.cols : allowed_prefix[i];
    if (k < 1 || k > ta.cols) fail("shape-mismatch", "softmax mask out of range");
    double m = ta.at(i, 0);
    for (int j = 1; j < k; ++j) m = std::max(m, ta.at(i, j));
    double z = 0.0;
    for (int j = 0; j < k; ++j) {
      double e = std::exp(ta.at(i, j) - m);
      out.at(i, j) = e;
      z += e;
    }
    for (int j = 0; j < k; ++j) out.at(i, j) /= z;
    // masked columns stay exactly 0, so no gradient ever flows through them
  }
  bool ng = tracked(a);
  Ref r = push(std::move(out), ng);
  if (ng) {
    std::vector<int> prefix = allowed_prefix;
    nodes_[r].backward = [this, r, a, prefix] {
      const Tensor& t = nodes_[r].t;
      for (int i = 0; i < t.rows; ++i) {
        int k = prefix.empty() ? t.cols : prefix[i];
        double dot = 0.0;
        for (int j = 0; j < k; ++j)
          dot += t.at(i, j) * t.g[static_cast<size_t>(i) * t.cols + j];
        for (int j = 0; j < k; ++j) {
          double w = t.at(i, j);
          double dg = t.g[static_cast<size_t>(i) * t.cols + j];
          nodes_[a].t.g[static_cast<size_t>(i) * t.cols + j] += w * (dg - dot);
        }
      }
    };
  }
  return r;
}

Tape::Ref Tape::layer_norm(Ref x, Ref gamma, Ref beta, double eps) {
  const Tensor& tx = nodes_[x].t;
  const Tensor& tg = nodes_[gamma].t;
  const Tensor& tb = nodes_[beta].t;
  if (tg.rows != 1 || tg.cols != tx.cols || !same_shape(tg, tb))
    shape_fail("layer_norm", tx, tg);

  Tensor out(tx.rows, tx.cols);
  std::vector<double> inv_std(tx.rows);
  std::vector<double> xhat(tx.v.size());
  for (int i = 0; i < tx.rows; ++i) {
    double mean = 0.0;
    for (int j = 0; j < tx.cols; ++j) mean += tx.at(i, j);
    mean /= tx.cols;
    double var = 0.0;
    for (int j = 0; j < tx.cols; ++j) {
      double d = tx.at(i, j) - mean;
      var += d * d;
    }
    var /= tx.cols;
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (int j = 0; j < tx.cols; ++j) {
      double h = (tx.at(i, j) - mean) * inv_std[i];
      xhat[static_cast<size_t>(i) * tx.cols + j] = h;
      out.at(i, j) = tg.at(0, j) * h + tb.at(0, j);
    }
  }
  bool ng = tracked(x) || tracked(gamma) || tracked(beta);
  Ref r = push(std::move(out), ng);
  if (ng) {
    nodes_[r].backward = [this, r, x, gamma, beta, inv_std = std::move(inv_std),
                          xhat = std::move(xhat)] {
      const Tensor& t = nodes_[r].t;
      const Tensor& tg = nodes_[gamma].t;
      int cols = t.cols;
      for (int i = 0; i < t.rows; ++i) {
        const double* go = t.g.data() + static_cast<size_t>(i) * cols;
        const double* xh = xhat.data() + static_cast<size_t>(i) * cols;
        if (tracked(gamma))
          for (int j = 0; j < cols; ++j) nodes_[gamma].t.g[j] += go[j] * xh[j];
        if (tracked(beta))
          for (int j = 0; j < cols; ++j) nodes_[beta].t.g[j] += go[j];
        if (tracked(x)) {
          double mean_dx = 0.0, mean_dxx = 0.0;
          for (int j = 0; j < cols; ++j) {
            double dxh = go[j] * tg.at(0, j);
            mean_dx += dxh;
            mean_dxx += dxh * xh[j];
          }
          mean_dx /= cols;
          mean_dxx /= cols;
          for (int j = 0; j < cols; ++j) {
            double dxh = go[j] * tg.at(0, j);
            nodes_[x].t.g[static_cast<size_t>(i) * cols + j] +=
                inv_std[i] * (dxh - mean_dx - xh[j] * mean_dxx);
          }
        }
      }
    };
  }
  return r;
}

Tape::Ref Tape::concat_cols(Ref a, Ref b) {
  const Tensor& ta = nodes_[a].t;
  const Tensor& tb = nodes_[b].t;
  if (ta.rows != tb.rows) shape_fail("concat_cols", ta, tb);
  Tensor out(ta.rows, ta.cols + tb.cols);
  for (int i = 0; i < ta.rows; ++i) {
    for (int j = 0; j < ta.cols; ++j) out.at(i, j) = ta.at(i, j);
    for (int j = 0; j < tb.cols; ++j) out.at(i, ta.cols + j) = tb.at(i, j);
  }
  bool ng = tracked(a) || tracked(b);
  Ref r = push(std::move(out), ng);
  if (ng) nodes_[r].backward = [this, r, a, b] {
    const Tensor& t = nodes_[r].t;
    Tensor& na = nodes_[a].t;
    Tensor& nb = nodes_[b].t;
    for (int i = 0; i < t.rows; ++i) {
      if (tracked(a))
        for (int j = 0; j < na.cols; ++j)
          na.g[static_cast<size_t>(i) * na.cols + j] += t.g[static_cast<size_t>(i) * t.cols + j];
      if (tracked(b))
        for (int j = 0; j < nb.cols; ++j)
          nb.g[static_cast<size_t>(i) * nb.cols + j] +=
              t.g[static_cast<size_t>(i) * t.cols + na.cols + j];
    }
  };
  return r;
}

Tape::Ref Tape::slice_cols(Ref a, int c0, int c1) {
  const Tensor& ta = nodes_[a].t;
  if (c0 < 0 || c1 > ta.cols || c0 >= c1) fail("shape-mismatch", "bad column slice");
  Tensor out(ta.rows, c1 - c0);
  for (int i = 0; i < ta.rows; ++i)
    for (int j = c0; j < c1; ++j) out.at(i, j - c0) = ta.at(i, j);
  bool ng = tracked(a);
  Ref r = push(std::move(out), ng);
  if (ng) nodes_[r].backward = [this, r, a, c0] {
    const Tensor& t = nodes_[r].t;
    Tensor& na = nodes_[a].t;
    for (int i = 0; i < t.rows; ++i)
      for (int j = 0; j < t.cols; ++j)
        na.g[static_cast<size_t>(i) * na.cols + c0 + j] +=
            t.g[static_cast<size_t>(i) * t.cols + j];
  };
  return r;
}

Tape::Ref Tape::slice_rows(Ref a, int r0, int r1) {
  const Tensor& ta = nodes_[a].t;
  if (r0 < 0 || r1 > ta.rows || r0 >= r1) fail("shape-mismatch", "bad row slice");
  Tensor out(r1 - r0, ta.cols);
  std::copy(ta.v.begin() + static_cast<size_t>(r0) * ta.cols,
            ta.v.begin() + static_cast<size_t>(r1) * ta.cols, out.v.begin());
  bool ng = tracked(a);
  Ref r = push(std::move(out), ng);
  if (ng) nodes_[r].backward = [this, r, a, r0] {
    const Tensor& t = nodes_[r].t;
    Tensor& na = nodes_[a].t;
    for (size_t i = 0; i < t.g.size(); ++i)
      na.g[static_cast<size_t>(r0) * na.cols + i] += t.g[i];
  };
  return r;
}

Tape::Ref Tape::concat_rows(const std::vector<Ref>& parts) {
  if (parts.empty()) fail("shape-mismatch", "concat_rows of nothing");
  int cols = nodes_[parts[0]].t.cols;
  int rows = 0;
  bool ng = false;
  for (Ref p : parts) {
    if (nodes_[p].t.cols != cols) shape_fail("concat_rows", nodes_[parts[0]].t, nodes_[p].t);
    rows += nodes_[p].t.rows;
    ng = ng || tracked(p);
  }
  Tensor out(rows, cols);
  size_t off = 0;
  for (Ref p : parts) {
    const Tensor& t = nodes_[p].t;
    std::copy(t.v.begin(), t.v.end(), out.v.begin() + off);
    off += t.v.size();
  }
  Ref r = push(std::move(out), ng);
  if (ng) {
    std::vector<Ref> ps = parts;
    nodes_[r].backward = [this, r, ps] {
      const Tensor& t = nodes_[r].t;
      size_t off = 0;
      for (Ref p : ps) {
        Tensor& np = nodes_[p].t;
        if (tracked(p))
          for (size_t i = 0; i < np.g.size(); ++i) np.g[i] += t.g[off + i];
        off += np.v.size();
      }
    };
  }
  return r;
}

Tape::Ref Tape::tile_rows(Ref row, int n) {
  const Tensor& tr = nodes_[row].t;
  if (tr.rows != 1) fail("shape-mismatch", "tile_rows expects a row vector");
  Tensor out(n, tr.cols);
  for (int i = 0; i < n; ++i)
    std::copy(tr.v.begin(), tr.v.end(), out.v.begin() + static_cast<size_t>(i) * tr.cols);
  bool ng = tracked(row);
  Ref r = push(std::move(out), ng);
  if (ng) nodes_[r].backward = [this, r, row] {
    const Tensor& t = nodes_[r].t;
    Tensor& nr = nodes_[row].t;
    for (int i = 0; i < t.rows; ++i)
      for (int j = 0; j < t.cols; ++j) nr.g[j] += t.g[static_cast<size_t>(i) * t.cols + j];
  };
  return r;
}

Tape::Ref Tape::embed_rows(Ref table, const std::vector<int>& indices) {
  const Tensor& tt = nodes_[table].t;
  Tensor out(static_cast<int>(indices.size()), tt.cols);
  for (size_t i = 0; i < indices.size(); ++i) {
    int idx = indices[i];
    if (idx < 0 || idx >= tt.rows)
      fail("bad-index", "embedding index " + std::to_string(idx) + " out of range");
    std::copy(tt.v.begin() + static_cast<size_t>(idx) * tt.cols,
              tt.v.begin() + static_cast<size_t>(idx + 1) * tt.cols,
              out.v.begin() + i * tt.cols);
  }
  bool ng = tracked(table);
  Ref r = push(std::move(out), ng);
  if (ng) {
    std::vector<int> idx = indices;
    nodes_[r].backward = [this, r, table, idx] {
      const Tensor& t = nodes_[r].t;
      Tensor& nt = nodes_[table].t;
      for (size_t i = 0; i < idx.size(); ++i)
        for (int j = 0; j < t.cols; ++j)
          nt.g[static_cast<size_t>(idx[i]) * nt.cols + j] += t.g[i * t.cols + j];
    };
  }
  return r;
}

Tape::Ref Tape::max_axis(Ref a, int axis) {
  const Tensor& ta = nodes_[a].t;
  if (axis != 0 && axis != 1) fail("bad-config", "max_axis axis must be 0 or 1");
  Tensor out = axis == 0 ? Tensor(1, ta.cols) : Tensor(ta.rows, 1);
  std::vector<int> arg(axis == 0 ? ta.cols : ta.rows, 0);
  if (axis == 0) {
    for (int j = 0; j < ta.cols; ++j) {
      double best = ta.at(0, j);
      int bi = 0;
      for (int i = 1; i < ta.rows; ++i)
        if (ta.at(i, j) > best) { best = ta.at(i, j); bi = i; }
      out.at(0, j) = best;
      arg[j] = bi;
    }
  } else {
    for (int i = 0; i < ta.rows; ++i) {
      double best = ta.at(i, 0);
      int bj = 0;
      for (int j = 1; j < ta.cols; ++j)
        if (ta.at(i, j) > best) { best = ta.at(i, j); bj = j; }
      out.at(i, 0) = best;
      arg[i] = bj;
    }
  }
  bool ng = tracked(a);
  Ref r = push(std::move(out), ng);
  if (ng) nodes_[r].backward = [this, r, a, axis, arg = std::move(arg)] {
    const Tensor& t = nodes_[r].t;
    Tensor& na = nodes_[a].t;
    if (axis == 0) {
      for (int j = 0; j < na.cols; ++j)
        na.g[static_cast<size_t>(arg[j]) * na.cols + j] += t.g[j];
    } else {
      for (int i = 0; i < na.rows; ++i)
        na.g[static_cast<size_t>(i) * na.cols + arg[i]] += t.g[i];
    }
  };
  return r;
}

Tape::Ref Tape::sum_all(Ref a) {
  const Tensor& ta = nodes_[a].t;
  Tensor out(1, 1);
  double s = 0.0;
  for (double x : ta.v) s += x;
  out.v[0] = s;
  bool ng = tracked(a);
  Ref r = push(std::move(out), ng);
  if (ng) nodes_[r].backward = [this, r, a] {
    double g = nodes_[r].t.g[0];
    for (double& x : nodes_[a].t.g) x += g;
  };
  return r;
}

Tape::Ref Tape::mean_all(Ref a) {
  const Tensor& ta = nodes_[a].t;
  double inv = 1.0 / static_cast<double>(ta.size());
  return scale(sum_all(a), inv);
}

void Tape::backward(Ref scalar_loss) {
  Tensor& loss = nodes_[scalar_loss].t;
  if (loss.size() != 1) fail("shape-mismatch", "backward expects a scalar loss");
  loss.g[0] = 1.0;
  for (Ref r = scalar_loss; r >= 0; --r)
    if (nodes_[r].needs_grad && nodes_[r].backward) nodes_[r].backward();
}

}  // namespace insyn::nn
