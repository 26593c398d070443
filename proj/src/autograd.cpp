#include "histoseg/core/autograd.hpp"

#include <algorithm>
#include <cmath>

#include "histoseg/core/error.hpp"

namespace histoseg::core {

namespace {

void check(bool ok, Error::Kind kind, const std::string& msg) {
  if (!ok) fail(kind, msg);
}

void add_into(Tensor& dst, const Tensor& src) {
  for (size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

}  // namespace

Param& ParamStore::create(const std::string& name, Tensor init) {
  check(!index_.count(name), Error::Kind::argument, "duplicate parameter name: " + name);
  auto p = std::make_unique<Param>();
  p->name = name;
  p->grad = Tensor::zeros(init.shape);
  p->value = std::move(init);
  Param* raw = p.get();
  items_.push_back(std::move(p));
  index_[name] = raw;
  return *raw;
}

Param* ParamStore::find(const std::string& name) {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : it->second;
}

const Param* ParamStore::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : it->second;
}

int64_t ParamStore::total_count() const {
  int64_t n = 0;
  for (const auto& p : items_) n += p->value.numel();
  return n;
}

void ParamStore::zero_grads() {
  for (auto& p : items_)
    std::fill(p->grad.data.begin(), p->grad.data.end(), 0.0);
}

Node* Graph::make(Tensor val, bool needs) {
  nodes_.push_back(Node{});
  Node* n = &nodes_.back();
  n->val = std::move(val);
  n->needs = needs;
  return n;
}

Var Graph::constant(Tensor v) { return make(std::move(v), false); }

Var Graph::leaf(Tensor v, bool needs_grad) { return make(std::move(v), needs_grad); }

Var Graph::param(Param& p) {
  Node* n = make(p.value, true);
  bindings_.emplace_back(n, &p);
  return n;
}

Tensor& Graph::grad_of(Node* n) {
  if (n->grad.empty()) n->grad = Tensor::zeros(n->val.shape);
  return n->grad;
}

void Graph::backward(Var root) {
  check(!swept_, Error::Kind::contract, "Graph::backward called twice on one tape");
  check(root->needs, Error::Kind::contract, "backward root does not require gradients");
  check(root->val.numel() == 1, Error::Kind::shape, "backward root must be scalar");
  swept_ = true;
  grad_of(root).data[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (it->needs && !it->grad.empty() && it->back) it->back();
  }
  for (auto& [node, param] : bindings_) {
    if (!node->grad.empty()) add_into(param->grad, node->grad);
  }
}

// ---------------------------------------------------------------------------
// Ops
// ---------------------------------------------------------------------------

Var add(Graph& g, Var a, Var b) {
  check(a->val.same_shape(b->val), Error::Kind::shape,
        "add: shape mismatch " + shape_str(a->val.shape) + " vs " + shape_str(b->val.shape));
  Tensor out = a->val;
  add_into(out, b->val);
  Node* n = g.make(std::move(out), a->needs || b->needs);
  if (n->needs) n->back = [n, a, b] {
    if (a->needs) add_into(Graph::grad_of(a), n->grad);
    if (b->needs) add_into(Graph::grad_of(b), n->grad);
  };
  return n;
}

Var sub(Graph& g, Var a, Var b) {
  check(a->val.same_shape(b->val), Error::Kind::shape, "sub: shape mismatch");
  Tensor out = a->val;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] -= b->val.data[i];
  Node* n = g.make(std::move(out), a->needs || b->needs);
  if (n->needs) n->back = [n, a, b] {
    if (a->needs) add_into(Graph::grad_of(a), n->grad);
    if (b->needs) {
      Tensor& gb = Graph::grad_of(b);
      for (size_t i = 0; i < gb.data.size(); ++i) gb.data[i] -= n->grad.data[i];
    }
  };
  return n;
}

Var scale(Graph& g, Var a, double c) {
  Tensor out = a->val;
  for (auto& v : out.data) v *= c;
  Node* n = g.make(std::move(out), a->needs);
  if (n->needs) n->back = [n, a, c] {
    Tensor& ga = Graph::grad_of(a);
    for (size_t i = 0; i < ga.data.size(); ++i) ga.data[i] += c * n->grad.data[i];
  };
  return n;
}

Var scale_by(Graph& g, Var a, Var s) {
  check(s->val.numel() == 1, Error::Kind::shape, "scale_by: scale must be scalar");
  const double c = s->val.data[0];
  Tensor out = a->val;
  for (auto& v : out.data) v *= c;
  Node* n = g.make(std::move(out), a->needs || s->needs);
  if (n->needs) n->back = [n, a, s, c] {
    if (a->needs) {
      Tensor& ga = Graph::grad_of(a);
      for (size_t i = 0; i < ga.data.size(); ++i) ga.data[i] += c * n->grad.data[i];
    }
    if (s->needs) {
      double acc = 0.0;
      for (size_t i = 0; i < a->val.data.size(); ++i) acc += a->val.data[i] * n->grad.data[i];
      Graph::grad_of(s).data[0] += acc;
    }
  };
  return n;
}

Var gelu(Graph& g, Var x) {
  Tensor out = x->val;
  for (auto& v : out.data) v = 0.5 * v * (1.0 + std::erf(v * kInvSqrt2));
  Node* n = g.make(std::move(out), x->needs);
  if (n->needs) n->back = [n, x] {
    Tensor& gx = Graph::grad_of(x);
    for (size_t i = 0; i < gx.data.size(); ++i) {
      double v = x->val.data[i];
      double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
      double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
      gx.data[i] += (cdf + v * pdf) * n->grad.data[i];
    }
  };
  return n;
}

Var clamp_v(Graph& g, Var x, double lo, double hi) {
  Tensor out = x->val;
  for (auto& v : out.data) v = std::clamp(v, lo, hi);
  Node* n = g.make(std::move(out), x->needs);
  if (n->needs) n->back = [n, x, lo, hi] {
    Tensor& gx = Graph::grad_of(x);
    for (size_t i = 0; i < gx.data.size(); ++i) {
      double v = x->val.data[i];
      if (v > lo && v < hi) gx.data[i] += n->grad.data[i];
    }
  };
  return n;
}

Var chw_to_tokens(Graph& g, Var x) {
  check(x->val.rank() == 3, Error::Kind::shape, "chw_to_tokens: want CHW");
  const int c = x->val.dim(0), h = x->val.dim(1), w = x->val.dim(2);
  Tensor out = Tensor::zeros({h * w, c});
  for (int ch = 0; ch < c; ++ch)
    for (int p = 0; p < h * w; ++p)
      out.data[static_cast<size_t>(p) * c + ch] = x->val.data[static_cast<size_t>(ch) * h * w + p];
  Node* n = g.make(std::move(out), x->needs);
  if (n->needs) n->back = [n, x, c, h, w] {
    Tensor& gx = Graph::grad_of(x);
    for (int ch = 0; ch < c; ++ch)
      for (int p = 0; p < h * w; ++p)
        gx.data[static_cast<size_t>(ch) * h * w + p] += n->grad.data[static_cast<size_t>(p) * c + ch];
  };
  return n;
}

Var pad_cols(Graph& g, Var x, int out_cols) {
  check(x->val.rank() == 2, Error::Kind::shape, "pad_cols: want matrix");
  const int rows = x->val.dim(0), cols = x->val.dim(1);
  check(out_cols >= cols, Error::Kind::shape, "pad_cols: target narrower than input");
  Tensor out = Tensor::zeros({rows, out_cols});
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) out(i, j) = x->val(i, j);
  Node* n = g.make(std::move(out), x->needs);
  if (n->needs) n->back = [n, x, rows, cols] {
    Tensor& gx = Graph::grad_of(x);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) gx(i, j) += n->grad(i, j);
  };
  return n;
}

Var matmul(Graph& g, Var a, Var b) {
  check(a->val.rank() == 2 && b->val.rank() == 2 && a->val.dim(1) == b->val.dim(0),
        Error::Kind::shape,
        "matmul: incompatible " + shape_str(a->val.shape) + " x " + shape_str(b->val.shape));
  const int nn = a->val.dim(0), k = a->val.dim(1), m = b->val.dim(1);
  Tensor out = Tensor::zeros({nn, m});
  for (int i = 0; i < nn; ++i) {
    const double* ai = a->val.data.data() + static_cast<size_t>(i) * k;
    double* oi = out.data.data() + static_cast<size_t>(i) * m;
    for (int l = 0; l < k; ++l) {
      const double av = ai[l];
      if (av == 0.0) continue;
      const double* bl = b->val.data.data() + static_cast<size_t>(l) * m;
      for (int j = 0; j < m; ++j) oi[j] += av * bl[j];
    }
  }
  Node* n = g.make(std::move(out), a->needs || b->needs);
  if (n->needs) n->back = [n, a, b, nn, k, m] {
    if (a->needs) {
      Tensor& ga = Graph::grad_of(a);
      for (int i = 0; i < nn; ++i)
        for (int l = 0; l < k; ++l) {
          const double* gi = n->grad.data.data() + static_cast<size_t>(i) * m;
          const double* bl = b->val.data.data() + static_cast<size_t>(l) * m;
          double acc = 0.0;
          for (int j = 0; j < m; ++j) acc += gi[j] * bl[j];
          ga.data[static_cast<size_t>(i) * k + l] += acc;
        }
    }
    if (b->needs) {
      Tensor& gb = Graph::grad_of(b);
      for (int l = 0; l < k; ++l)
        for (int i = 0; i < nn; ++i) {
          const double av = a->val.data[static_cast<size_t>(i) * k + l];
          if (av == 0.0) continue;
          const double* gi = n->grad.data.data() + static_cast<size_t>(i) * m;
          double* gbl = gb.data.data() + static_cast<size_t>(l) * m;
          for (int j = 0; j < m; ++j) gbl[j] += av * gi[j];
        }
    }
  };
  return n;
}

Var transpose2(Graph& g, Var a) {
  check(a->val.rank() == 2, Error::Kind::shape, "transpose2: want matrix");
  const int r = a->val.dim(0), c = a->val.dim(1);
  Tensor out = Tensor::zeros({c, r});
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out(j, i) = a->val(i, j);
  Node* n = g.make(std::move(out), a->needs);
  if (n->needs) n->back = [n, a, r, c] {
    Tensor& ga = Graph::grad_of(a);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) ga(i, j) += n->grad(j, i);
  };
  return n;
}

Var linear(Graph& g, Var x, Var w, Var b) {
  check(x->val.rank() == 2 && w->val.rank() == 2 && b->val.rank() == 1, Error::Kind::shape,
        "linear: bad ranks");
  const int nn = x->val.dim(0), d = x->val.dim(1), h = w->val.dim(0);
  check(w->val.dim(1) == d && b->val.dim(0) == h, Error::Kind::shape, "linear: dim mismatch");
  Tensor out = Tensor::zeros({nn, h});
  for (int i = 0; i < nn; ++i)
    for (int o = 0; o < h; ++o) {
      const double* xi = x->val.data.data() + static_cast<size_t>(i) * d;
      const double* wo = w->val.data.data() + static_cast<size_t>(o) * d;
      double acc = b->val(o);
      for (int j = 0; j < d; ++j) acc += xi[j] * wo[j];
      out(i, o) = acc;
    }
  Node* n = g.make(std::move(out), x->needs || w->needs || b->needs);
  if (n->needs) n->back = [n, x, w, b, nn, d, h] {
    for (int i = 0; i < nn; ++i)
      for (int o = 0; o < h; ++o) {
        const double go = n->grad(i, o);
        if (go == 0.0) continue;
        if (x->needs) {
          Tensor& gx = Graph::grad_of(x);
          const double* wo = w->val.data.data() + static_cast<size_t>(o) * d;
          double* gxi = gx.data.data() + static_cast<size_t>(i) * d;
          for (int j = 0; j < d; ++j) gxi[j] += go * wo[j];
        }
        if (w->needs) {
          Tensor& gw = Graph::grad_of(w);
          const double* xi = x->val.data.data() + static_cast<size_t>(i) * d;
          double* gwo = gw.data.data() + static_cast<size_t>(o) * d;
          for (int j = 0; j < d; ++j) gwo[j] += go * xi[j];
        }
        if (b->needs) Graph::grad_of(b)(o) += go;
      }
  };
  return n;
}

Var l2norm_rows(Graph& g, Var x, double eps) {
  check(x->val.rank() == 2, Error::Kind::shape, "l2norm_rows: want matrix");
  const int rows = x->val.dim(0), cols = x->val.dim(1);
  Tensor out = Tensor::zeros({rows, cols});
  std::vector<double> norms(static_cast<size_t>(rows));
  for (int i = 0; i < rows; ++i) {
    const double* xi = x->val.data.data() + static_cast<size_t>(i) * cols;
    double sq = 0.0;
    for (int j = 0; j < cols; ++j) sq += xi[j] * xi[j];
    const double nrm = std::sqrt(sq);
    norms[static_cast<size_t>(i)] = nrm;
    const double inv = 1.0 / (nrm + eps);
    for (int j = 0; j < cols; ++j) out(i, j) = xi[j] * inv;
  }
  Node* n = g.make(std::move(out), x->needs);
  if (n->needs) n->back = [n, x, rows, cols, eps, norms = std::move(norms)] {
    Tensor& gx = Graph::grad_of(x);
    for (int i = 0; i < rows; ++i) {
      const double nrm = norms[static_cast<size_t>(i)];
      const double d = nrm + eps;
      const double* xi = x->val.data.data() + static_cast<size_t>(i) * cols;
      const double* gi = n->grad.data.data() + static_cast<size_t>(i) * cols;
      double gdotx = 0.0;
      for (int j = 0; j < cols; ++j) gdotx += gi[j] * xi[j];
      double* gxi = gx.data.data() + static_cast<size_t>(i) * cols;
      for (int j = 0; j < cols; ++j) {
        double t = gi[j] / d;
        if (nrm > 1e-300) t -= xi[j] * gdotx / (nrm * d * d);
        gxi[j] += t;
      }
    }
  };
  return n;
}

Var conv1x1(Graph& g, Var x, Var w, Var b) {
  check(x->val.rank() == 3 && w->val.rank() == 2 && b->val.rank() == 1, Error::Kind::shape,
        "conv1x1: bad ranks");
  const int ci = x->val.dim(0), h = x->val.dim(1), wd = x->val.dim(2);
  const int co = w->val.dim(0);
  check(w->val.dim(1) == ci && b->val.dim(0) == co, Error::Kind::shape, "conv1x1: dim mismatch");
  const int hw = h * wd;
  Tensor out = Tensor::zeros({co, h, wd});
  for (int o = 0; o < co; ++o) {
    double* op = out.data.data() + static_cast<size_t>(o) * hw;
    const double bias = b->val(o);
    for (int p = 0; p < hw; ++p) op[p] = bias;
    for (int i = 0; i < ci; ++i) {
      const double wv = w->val(o, i);
      if (wv == 0.0) continue;
      const double* xp = x->val.data.data() + static_cast<size_t>(i) * hw;
      for (int p = 0; p < hw; ++p) op[p] += wv * xp[p];
    }
  }
  Node* n = g.make(std::move(out), x->needs || w->needs || b->needs);
  if (n->needs) n->back = [n, x, w, b, ci, co, hw] {
    for (int o = 0; o < co; ++o) {
      const double* gp = n->grad.data.data() + static_cast<size_t>(o) * hw;
      if (b->needs) {
        double acc = 0.0;
        for (int p = 0; p < hw; ++p) acc += gp[p];
        Graph::grad_of(b)(o) += acc;
      }
      for (int i = 0; i < ci; ++i) {
        if (w->needs) {
          const double* xp = x->val.data.data() + static_cast<size_t>(i) * hw;
          double acc = 0.0;
          for (int p = 0; p < hw; ++p) acc += gp[p] * xp[p];
          Graph::grad_of(w)(o, i) += acc;
        }
        if (x->needs) {
          const double wv = w->val(o, i);
          if (wv != 0.0) {
            double* gxp = Graph::grad_of(x).data.data() + static_cast<size_t>(i) * hw;
            for (int p = 0; p < hw; ++p) gxp[p] += wv * gp[p];
          }
        }
      }
    }
  };
  return n;
}

Var dwconv3x3(Graph& g, Var x, Var w, Var b) {
  check(x->val.rank() == 3 && w->val.rank() == 3 && b->val.rank() == 1, Error::Kind::shape,
        "dwconv3x3: bad ranks");
  const int c = x->val.dim(0), h = x->val.dim(1), wd = x->val.dim(2);
  check(w->val.dim(0) == c && w->val.dim(1) == 3 && w->val.dim(2) == 3 && b->val.dim(0) == c,
        Error::Kind::shape, "dwconv3x3: dim mismatch");
  Tensor out = Tensor::zeros({c, h, wd});
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < h; ++y)
      for (int xx = 0; xx < wd; ++xx) {
        double acc = b->val(ch);
        for (int ky = 0; ky < 3; ++ky) {
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= h) continue;
          for (int kx = 0; kx < 3; ++kx) {
            const int sx = xx + kx - 1;
            if (sx < 0 || sx >= wd) continue;
            acc += w->val(ch, ky, kx) * x->val(ch, sy, sx);
          }
        }
        out(ch, y, xx) = acc;
      }
  Node* n = g.make(std::move(out), x->needs || w->needs || b->needs);
  if (n->needs) n->back = [n, x, w, b, c, h, wd] {
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < wd; ++xx) {
          const double go = n->grad(ch, y, xx);
          if (go == 0.0) continue;
          if (b->needs) Graph::grad_of(b)(ch) += go;
          for (int ky = 0; ky < 3; ++ky) {
            const int sy = y + ky - 1;
            if (sy < 0 || sy >= h) continue;
            for (int kx = 0; kx < 3; ++kx) {
              const int sx = xx + kx - 1;
              if (sx < 0 || sx >= wd) continue;
              if (w->needs) Graph::grad_of(w)(ch, ky, kx) += go * x->val(ch, sy, sx);
              if (x->needs) Graph::grad_of(x)(ch, sy, sx) += go * w->val(ch, ky, kx);
            }
          }
        }
  };
  return n;
}

Var channel_norm(Graph& g, Var x, Var gamma, Var beta, double eps) {
  check(x->val.rank() == 3, Error::Kind::shape, "channel_norm: want CHW");
  const int c = x->val.dim(0), h = x->val.dim(1), w = x->val.dim(2);
  check(gamma->val.dim(0) == c && beta->val.dim(0) == c, Error::Kind::shape,
        "channel_norm: affine dim mismatch");
  const int hw = h * w;
  Tensor out = Tensor::zeros({c, h, w});
  std::vector<double> mu(static_cast<size_t>(c)), inv_s(static_cast<size_t>(c));
  for (int ch = 0; ch < c; ++ch) {
    const double* xp = x->val.data.data() + static_cast<size_t>(ch) * hw;
    double m = 0.0;
    for (int p = 0; p < hw; ++p) m += xp[p];
    m /= hw;
    double var = 0.0;
    for (int p = 0; p < hw; ++p) var += (xp[p] - m) * (xp[p] - m);
    var /= hw;
    const double is = 1.0 / std::sqrt(var + eps);
    mu[static_cast<size_t>(ch)] = m;
    inv_s[static_cast<size_t>(ch)] = is;
    double* op = out.data.data() + static_cast<size_t>(ch) * hw;
    const double gm = gamma->val(ch), bt = beta->val(ch);
    for (int p = 0; p < hw; ++p) op[p] = gm * (xp[p] - m) * is + bt;
  }
  Node* n = g.make(std::move(out), x->needs || gamma->needs || beta->needs);
  if (n->needs) n->back = [n, x, gamma, beta, c, hw, mu = std::move(mu), inv_s = std::move(inv_s)] {
    for (int ch = 0; ch < c; ++ch) {
      const double* xp = x->val.data.data() + static_cast<size_t>(ch) * hw;
      const double* gp = n->grad.data.data() + static_cast<size_t>(ch) * hw;
      const double m = mu[static_cast<size_t>(ch)], is = inv_s[static_cast<size_t>(ch)];
      double sum_g = 0.0, sum_gx = 0.0;
      for (int p = 0; p < hw; ++p) {
        sum_g += gp[p];
        sum_gx += gp[p] * (xp[p] - m) * is;
      }
      if (beta->needs) Graph::grad_of(beta)(ch) += sum_g;
      if (gamma->needs) Graph::grad_of(gamma)(ch) += sum_gx;
      if (x->needs) {
        const double gm = gamma->val(ch);
        double* gxp = Graph::grad_of(x).data.data() + static_cast<size_t>(ch) * hw;
        const double mean_g = sum_g / hw, mean_gx = sum_gx / hw;
        for (int p = 0; p < hw; ++p) {
          const double xh = (xp[p] - m) * is;
          gxp[p] += gm * is * (gp[p] - mean_g - xh * mean_gx);
        }
      }
    }
  };
  return n;
}

Var col_mean(Graph& g, Var x) {
  check(x->val.rank() == 2, Error::Kind::shape, "col_mean: want matrix");
  const int rows = x->val.dim(0), cols = x->val.dim(1);
  Tensor out = Tensor::zeros({cols});
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) out(j) += x->val(i, j);
  for (int j = 0; j < cols; ++j) out(j) /= rows;
  Node* n = g.make(std::move(out), x->needs);
  if (n->needs) n->back = [n, x, rows, cols] {
    Tensor& gx = Graph::grad_of(x);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) gx(i, j) += n->grad(j) / rows;
  };
  return n;
}

Var mse_vs(Graph& g, Var x, const Tensor& target) {
  check(x->val.same_shape(target), Error::Kind::shape, "mse_vs: shape mismatch");
  const int64_t nelem = x->val.numel();
  double acc = 0.0;
  for (int64_t i = 0; i < nelem; ++i) {
    const double d = x->val.data[static_cast<size_t>(i)] - target.data[static_cast<size_t>(i)];
    acc += d * d;
  }
  Node* n = g.make(Tensor::scalar(acc / static_cast<double>(nelem)), x->needs);
  if (n->needs) n->back = [n, x, target, nelem] {
    const double go = n->grad.data[0];
    Tensor& gx = Graph::grad_of(x);
    for (int64_t i = 0; i < nelem; ++i) {
      const double d = x->val.data[static_cast<size_t>(i)] - target.data[static_cast<size_t>(i)];
      gx.data[static_cast<size_t>(i)] += go * 2.0 * d / static_cast<double>(nelem);
    }
  };
  return n;
}

Var bce_logits(Graph& g, Var z, const Tensor& targets) {
  check(z->val.same_shape(targets), Error::Kind::shape, "bce_logits: shape mismatch");
  const int64_t nelem = z->val.numel();
  check(nelem > 0, Error::Kind::shape, "bce_logits: empty input");
  double acc = 0.0;
  for (int64_t i = 0; i < nelem; ++i) {
    const double zv = z->val.data[static_cast<size_t>(i)];
    const double yv = targets.data[static_cast<size_t>(i)];
    // max(z,0) - z*y + log(1+exp(-|z|)): the overflow-stable form.
    acc += std::max(zv, 0.0) - zv * yv + std::log1p(std::exp(-std::abs(zv)));
  }
  Node* n = g.make(Tensor::scalar(acc / static_cast<double>(nelem)), z->needs);
  if (n->needs) n->back = [n, z, targets, nelem] {
    const double go = n->grad.data[0];
    Tensor& gz = Graph::grad_of(z);
    for (int64_t i = 0; i < nelem; ++i) {
      const double zv = z->val.data[static_cast<size_t>(i)];
      const double sig = 1.0 / (1.0 + std::exp(-zv));
      gz.data[static_cast<size_t>(i)] +=
          go * (sig - targets.data[static_cast<size_t>(i)]) / static_cast<double>(nelem);
    }
  };
  return n;
}

Var rows_dot(Graph& g, Var m, const Tensor& q) {
  check(m->val.rank() == 2 && q.rank() == 1 && m->val.dim(1) == q.dim(0), Error::Kind::shape,
        "rows_dot: dim mismatch");
  const int rows = m->val.dim(0), cols = m->val.dim(1);
  Tensor out = Tensor::zeros({rows});
  for (int i = 0; i < rows; ++i) {
    double acc = 0.0;
    for (int j = 0; j < cols; ++j) acc += m->val(i, j) * q(j);
    out(i) = acc;
  }
  Node* n = g.make(std::move(out), m->needs);
  if (n->needs) n->back = [n, m, q, rows, cols] {
    Tensor& gm = Graph::grad_of(m);
    for (int i = 0; i < rows; ++i) {
      const double go = n->grad(i);
      if (go == 0.0) continue;
      for (int j = 0; j < cols; ++j) gm(i, j) += go * q(j);
    }
  };
  return n;
}

Var dot_with(Graph& g, Var v, const Tensor& q) {
  check(v->val.rank() == 1 && v->val.same_shape(q), Error::Kind::shape, "dot_with: dim mismatch");
  double acc = 0.0;
  for (int64_t i = 0; i < v->val.numel(); ++i)
    acc += v->val.data[static_cast<size_t>(i)] * q.data[static_cast<size_t>(i)];
  Node* n = g.make(Tensor::scalar(acc), v->needs);
  if (n->needs) n->back = [n, v, q] {
    const double go = n->grad.data[0];
    Tensor& gv = Graph::grad_of(v);
    for (size_t i = 0; i < gv.data.size(); ++i) gv.data[i] += go * q.data[i];
  };
  return n;
}

Var row_of(Graph& g, Var m, int r) {
  check(m->val.rank() == 2 && r >= 0 && r < m->val.dim(0), Error::Kind::shape,
        "row_of: row out of range");
  const int d = m->val.dim(1);
  Tensor out = Tensor::zeros({d});
  for (int j = 0; j < d; ++j) out(j) = m->val(r, j);
  Node* n = g.make(std::move(out), m->needs);
  if (n->needs) n->back = [n, m, r, d] {
    Tensor& gm = Graph::grad_of(m);
    for (int j = 0; j < d; ++j) gm(r, j) += n->grad.data[static_cast<size_t>(j)];
  };
  return n;
}

Var gather1(Graph& g, Var v, int i) {
  check(v->val.rank() == 1 && i >= 0 && i < v->val.dim(0), Error::Kind::shape,
        "gather1: index out of range");
  Node* n = g.make(Tensor::scalar(v->val(i)), v->needs);
  if (n->needs) n->back = [n, v, i] { Graph::grad_of(v)(i) += n->grad.data[0]; };
  return n;
}

Var concat_scalars(Graph& g, const std::vector<Var>& vars, const std::vector<double>& consts) {
  const int nv = static_cast<int>(vars.size()), nc = static_cast<int>(consts.size());
  check(nv + nc > 0, Error::Kind::shape, "concat_scalars: empty");
  Tensor out = Tensor::zeros({nv + nc});
  bool needs = false;
  for (int i = 0; i < nv; ++i) {
    check(vars[static_cast<size_t>(i)]->val.numel() == 1, Error::Kind::shape,
          "concat_scalars: non-scalar entry");
    out(i) = vars[static_cast<size_t>(i)]->val.data[0];
    needs = needs || vars[static_cast<size_t>(i)]->needs;
  }
  for (int i = 0; i < nc; ++i) out(nv + i) = consts[static_cast<size_t>(i)];
  Node* n = g.make(std::move(out), needs);
  if (n->needs) n->back = [n, vars] {
    for (size_t i = 0; i < vars.size(); ++i)
      if (vars[i]->needs) Graph::grad_of(vars[i]).data[0] += n->grad(static_cast<int>(i));
  };
  return n;
}

Var logsumexp_v(Graph& g, Var v) {
  check(v->val.rank() == 1 && v->val.numel() > 0, Error::Kind::shape, "logsumexp_v: want vector");
  double mx = v->val.data[0];
  for (double x : v->val.data) mx = std::max(mx, x);
  double sum = 0.0;
  for (double x : v->val.data) sum += std::exp(x - mx);
  Node* n = g.make(Tensor::scalar(mx + std::log(sum)), v->needs);
  if (n->needs) n->back = [n, v, mx, sum] {
    const double go = n->grad.data[0];
    Tensor& gv = Graph::grad_of(v);
    for (size_t i = 0; i < gv.data.size(); ++i)
      gv.data[i] += go * std::exp(v->val.data[i] - mx) / sum;
  };
  return n;
}

Var mean_scalars(Graph& g, const std::vector<Var>& xs) {
  if (xs.empty()) return g.constant(Tensor::scalar(0.0));
  double acc = 0.0;
  bool needs = false;
  for (Var x : xs) {
    check(x->val.numel() == 1, Error::Kind::shape, "mean_scalars: non-scalar entry");
    acc += x->val.data[0];
    needs = needs || x->needs;
  }
  const double inv = 1.0 / static_cast<double>(xs.size());
  Node* n = g.make(Tensor::scalar(acc * inv), needs);
  if (n->needs) n->back = [n, xs, inv] {
    for (Var x : xs)
      if (x->needs) Graph::grad_of(x).data[0] += n->grad.data[0] * inv;
  };
  return n;
}

}  // namespace histoseg::core
