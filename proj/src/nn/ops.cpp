#include "prefalign/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "prefalign/common/error.hpp"

namespace prefalign::nn {

using detail::make_result;

namespace {

void require(bool cond, const char* what) {
  if (!cond) throw Error(what);
}

bool same_shape(const Tensor& a, const Tensor& b) { return a.rows() == b.rows() && a.cols() == b.cols(); }

// out[m x n] += a[m x k] * b[k x n]
void gemm_nn(const double* a, const double* b, double* out, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    double* orow = out + static_cast<std::size_t>(i) * n;
    const double* arow = a + static_cast<std::size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
}

// out[m x k] += a[m x n] * b[k x n]^T
void gemm_nt(const double* a, const double* b, double* out, int m, int n, int k) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * n;
    double* orow = out + static_cast<std::size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const double* brow = b + static_cast<std::size_t>(p) * n;
      double acc = 0.0;
      for (int j = 0; j < n; ++j) acc += arow[j] * brow[j];
      orow[p] += acc;
    }
  }
}

// out[k x n] += a[m x k]^T * b[m x n]
void gemm_tn(const double* a, const double* b, double* out, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * k;
    const double* brow = b + static_cast<std::size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      double* orow = out + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
}

template <class F, class DF>
Tensor unary(const Tensor& a, F f, DF df) {
  Tensor out = make_result(a.rows(), a.cols(), {&a});
  auto in = a.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < in.size(); ++i) ov[i] = f(in[i]);
  if (out.requires_grad()) {
    out.node()->backward = [df](Node& self) {
      Node& p = *self.parents[0];
      if (!p.requires_grad) return;
      p.ensure_grad();
      for (std::size_t i = 0; i < p.value.size(); ++i) p.grad[i] += self.grad[i] * df(p.value[i], self.value[i]);
    };
  }
  return out;
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.cols() == b.rows(), "matmul: inner dimensions differ");
  const int m = a.rows(), k = a.cols(), n = b.cols();
  Tensor out = make_result(m, n, {&a, &b});
  gemm_nn(a.values().data(), b.values().data(), out.values().data(), m, k, n);
  if (out.requires_grad()) {
    out.node()->backward = [m, k, n](Node& self) {
      Node& pa = *self.parents[0];
      Node& pb = *self.parents[1];
      if (pa.requires_grad) {
        pa.ensure_grad();
        gemm_nt(self.grad.data(), pb.value.data(), pa.grad.data(), m, n, k);
      }
      if (pb.requires_grad) {
        pb.ensure_grad();
        gemm_tn(pa.value.data(), self.grad.data(), pb.grad.data(), m, k, n);
      }
    };
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require(same_shape(a, b), "add: shape mismatch");
  Tensor out = make_result(a.rows(), a.cols(), {&a, &b});
  auto av = a.values(), bv = b.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] + bv[i];
  if (out.requires_grad()) {
    out.node()->backward = [](Node& self) {
      for (auto& pp : self.parents) {
        if (!pp->requires_grad) continue;
        pp->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) pp->grad[i] += self.grad[i];
      }
    };
  }
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require(same_shape(a, b), "sub: shape mismatch");
  Tensor out = make_result(a.rows(), a.cols(), {&a, &b});
  auto av = a.values(), bv = b.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] - bv[i];
  if (out.requires_grad()) {
    out.node()->backward = [](Node& self) {
      Node& pa = *self.parents[0];
      Node& pb = *self.parents[1];
      if (pa.requires_grad) {
        pa.ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i];
      }
      if (pb.requires_grad) {
        pb.ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) pb.grad[i] -= self.grad[i];
      }
    };
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require(same_shape(a, b), "mul: shape mismatch");
  Tensor out = make_result(a.rows(), a.cols(), {&a, &b});
  auto av = a.values(), bv = b.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * bv[i];
  if (out.requires_grad()) {
    out.node()->backward = [](Node& self) {
      Node& pa = *self.parents[0];
      Node& pb = *self.parents[1];
      if (pa.requires_grad) {
        pa.ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i] * pb.value[i];
      }
      if (pb.requires_grad) {
        pb.ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) pb.grad[i] += self.grad[i] * pa.value[i];
      }
    };
  }
  return out;
}

Tensor add_row(const Tensor& a, const Tensor& row) {
  require(row.rows() == 1 && row.cols() == a.cols(), "add_row: bias must be 1 x cols");
  const int m = a.rows(), n = a.cols();
  Tensor out = make_result(m, n, {&a, &row});
  auto av = a.values(), rv = row.values();
  auto ov = out.values();
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) ov[static_cast<std::size_t>(i) * n + j] = av[static_cast<std::size_t>(i) * n + j] + rv[j];
  if (out.requires_grad()) {
    out.node()->backward = [m, n](Node& self) {
      Node& pa = *self.parents[0];
      Node& pr = *self.parents[1];
      if (pa.requires_grad) {
        pa.ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i];
      }
      if (pr.requires_grad) {
        pr.ensure_grad();
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < n; ++j) pr.grad[j] += self.grad[static_cast<std::size_t>(i) * n + j];
      }
    };
  }
  return out;
}

Tensor scale(const Tensor& a, double s) {
  return unary(a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor exp(const Tensor& a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor tanh(const Tensor& a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor square(const Tensor& a) {
  return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor gelu(const Tensor& a) {
  return unary(
      a,
      [](double x) { return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + 0.044715 * x * x * x))); },
      [](double x, double) {
        const double inner = kGeluC * (x + 0.044715 * x * x * x);
        const double t = std::tanh(inner);
        const double dinner = kGeluC * (1.0 + 3.0 * 0.044715 * x * x);
        return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * dinner;
      });
}

Tensor log_sigmoid(const Tensor& a) {
  return unary(
      a,
      [](double x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); },
      // d/dx log sigma(x) = sigma(-x)
      [](double x, double) { return x >= 0 ? std::exp(-x) / (1.0 + std::exp(-x)) : 1.0 / (1.0 + std::exp(x)); });
}

Tensor sum(const Tensor& a) {
  Tensor out = make_result(1, 1, {&a});
  double acc = 0.0;
  for (double v : a.values()) acc += v;
  out.values()[0] = acc;
  if (out.requires_grad()) {
    out.node()->backward = [](Node& self) {
      Node& p = *self.parents[0];
      if (!p.requires_grad) return;
      p.ensure_grad();
      for (double& g : p.grad) g += self.grad[0];
    };
  }
  return out;
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.size())); }

Tensor row_sum(const Tensor& a) {
  const int m = a.rows(), n = a.cols();
  Tensor out = make_result(m, 1, {&a});
  auto av = a.values();
  for (int i = 0; i < m; ++i) {
    double acc = 0.0;
    for (int j = 0; j < n; ++j) acc += av[static_cast<std::size_t>(i) * n + j];
    out.values()[i] = acc;
  }
  if (out.requires_grad()) {
    out.node()->backward = [m, n](Node& self) {
      Node& p = *self.parents[0];
      if (!p.requires_grad) return;
      p.ensure_grad();
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) p.grad[static_cast<std::size_t>(i) * n + j] += self.grad[i];
    };
  }
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  const int m = x.rows(), n = x.cols();
  require(gain.rows() == 1 && gain.cols() == n && bias.rows() == 1 && bias.cols() == n,
          "layer_norm: gain/bias must be 1 x cols");
  Tensor out = make_result(m, n, {&x, &gain, &bias});
  // Cache normalized values and inverse std for the backward pass.
  auto xhat = std::make_shared<std::vector<double>>(static_cast<std::size_t>(m) * n);
  auto rstd = std::make_shared<std::vector<double>>(m);
  auto xv = x.values(), gv = gain.values(), bv = bias.values();
  auto ov = out.values();
  for (int i = 0; i < m; ++i) {
    const double* row = xv.data() + static_cast<std::size_t>(i) * n;
    double mu = 0.0;
    for (int j = 0; j < n; ++j) mu += row[j];
    mu /= n;
    double var = 0.0;
    for (int j = 0; j < n; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= n;
    const double r = 1.0 / std::sqrt(var + eps);
    (*rstd)[i] = r;
    for (int j = 0; j < n; ++j) {
      const std::size_t idx = static_cast<std::size_t>(i) * n + j;
      (*xhat)[idx] = (row[j] - mu) * r;
      ov[idx] = (*xhat)[idx] * gv[j] + bv[j];
    }
  }
  if (out.requires_grad()) {
    out.node()->backward = [m, n, xhat, rstd](Node& self) {
      Node& px = *self.parents[0];
      Node& pg = *self.parents[1];
      Node& pb = *self.parents[2];
      if (pg.requires_grad) pg.ensure_grad();
      if (pb.requires_grad) pb.ensure_grad();
      if (px.requires_grad) px.ensure_grad();
      std::vector<double> dxhat(n);
      for (int i = 0; i < m; ++i) {
        double s1 = 0.0, s2 = 0.0;
        for (int j = 0; j < n; ++j) {
          const std::size_t idx = static_cast<std::size_t>(i) * n + j;
          const double go = self.grad[idx];
          if (pg.requires_grad) pg.grad[j] += go * (*xhat)[idx];
          if (pb.requires_grad) pb.grad[j] += go;
          dxhat[j] = go * pg.value[j];
          s1 += dxhat[j];
          s2 += dxhat[j] * (*xhat)[idx];
        }
        if (!px.requires_grad) continue;
        const double r = (*rstd)[i];
        for (int j = 0; j < n; ++j) {
          const std::size_t idx = static_cast<std::size_t>(i) * n + j;
          px.grad[idx] += r * (dxhat[j] - s1 / n - (*xhat)[idx] * s2 / n);
        }
      }
    };
  }
  return out;
}

Tensor embedding(const Tensor& table, std::span<const int> ids) {
  const int n = table.cols();
  const int m = static_cast<int>(ids.size());
  for (int id : ids) require(id >= 0 && id < table.rows(), "embedding: id out of range");
  Tensor out = make_result(m, n, {&table});
  auto tv = table.values();
  auto ov = out.values();
  for (int i = 0; i < m; ++i)
    std::copy_n(tv.data() + static_cast<std::size_t>(ids[i]) * n, n, ov.data() + static_cast<std::size_t>(i) * n);
  if (out.requires_grad()) {
    std::vector<int> idcopy(ids.begin(), ids.end());
    out.node()->backward = [n, idcopy = std::move(idcopy)](Node& self) {
      Node& p = *self.parents[0];
      if (!p.requires_grad) return;
      p.ensure_grad();
      for (std::size_t i = 0; i < idcopy.size(); ++i) {
        double* dst = p.grad.data() + static_cast<std::size_t>(idcopy[i]) * n;
        const double* src = self.grad.data() + i * n;
        for (int j = 0; j < n; ++j) dst[j] += src[j];
      }
    };
  }
  return out;
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, int heads, bool causal) {
  const int tq = q.rows(), tk = k.rows(), d = q.cols();
  require(k.cols() == d && v.cols() == d && v.rows() == tk, "attention: q/k/v shapes disagree");
  require(heads > 0 && d % heads == 0, "attention: width must be divisible by head count");
  require(!causal || tq == tk, "attention: causal attention needs equal lengths");
  const int hd = d / heads;
  const double sc = 1.0 / std::sqrt(static_cast<double>(hd));
  Tensor out = make_result(tq, d, {&q, &k, &v});

  // probs[h][i * tk + j]
  auto probs = std::make_shared<std::vector<double>>(static_cast<std::size_t>(heads) * tq * tk, 0.0);
  auto qv = q.values(), kv = k.values(), vv = v.values();
  auto ov = out.values();
  for (int h = 0; h < heads; ++h) {
    const int off = h * hd;
    for (int i = 0; i < tq; ++i) {
      double* prow = probs->data() + (static_cast<std::size_t>(h) * tq + i) * tk;
      const int limit = causal ? i + 1 : tk;
      double mx = -std::numeric_limits<double>::infinity();
      for (int j = 0; j < limit; ++j) {
        double s = 0.0;
        for (int c = 0; c < hd; ++c) s += qv[static_cast<std::size_t>(i) * d + off + c] * kv[static_cast<std::size_t>(j) * d + off + c];
        prow[j] = s * sc;
        mx = std::max(mx, prow[j]);
      }
      double z = 0.0;
      for (int j = 0; j < limit; ++j) {
        prow[j] = std::exp(prow[j] - mx);
        z += prow[j];
      }
      for (int j = 0; j < limit; ++j) prow[j] /= z;
      for (int j = 0; j < limit; ++j) {
        const double p = prow[j];
        for (int c = 0; c < hd; ++c) ov[static_cast<std::size_t>(i) * d + off + c] += p * vv[static_cast<std::size_t>(j) * d + off + c];
      }
    }
  }

  if (out.requires_grad()) {
    out.node()->backward = [tq, tk, d, hd, heads, sc, causal, probs](Node& self) {
      Node& pq = *self.parents[0];
      Node& pk = *self.parents[1];
      Node& pv = *self.parents[2];
      if (pq.requires_grad) pq.ensure_grad();
      if (pk.requires_grad) pk.ensure_grad();
      if (pv.requires_grad) pv.ensure_grad();
      std::vector<double> dp(tk);
      for (int h = 0; h < heads; ++h) {
        const int off = h * hd;
        for (int i = 0; i < tq; ++i) {
          const double* prow = probs->data() + (static_cast<std::size_t>(h) * tq + i) * tk;
          const double* go = self.grad.data() + static_cast<std::size_t>(i) * d + off;
          const int limit = causal ? i + 1 : tk;
          double dot = 0.0;
          for (int j = 0; j < limit; ++j) {
            const double* vrow = pv.value.data() + static_cast<std::size_t>(j) * d + off;
            double s = 0.0;
            for (int c = 0; c < hd; ++c) s += go[c] * vrow[c];
            dp[j] = s;
            dot += s * prow[j];
            if (pv.requires_grad) {
              double* dv = pv.grad.data() + static_cast<std::size_t>(j) * d + off;
              for (int c = 0; c < hd; ++c) dv[c] += prow[j] * go[c];
            }
          }
          for (int j = 0; j < limit; ++j) {
            const double ds = prow[j] * (dp[j] - dot) * sc;
            if (ds == 0.0) continue;
            const double* qrow = pq.value.data() + static_cast<std::size_t>(i) * d + off;
            const double* krow = pk.value.data() + static_cast<std::size_t>(j) * d + off;
            if (pq.requires_grad) {
              double* dq = pq.grad.data() + static_cast<std::size_t>(i) * d + off;
              for (int c = 0; c < hd; ++c) dq[c] += ds * krow[c];
            }
            if (pk.requires_grad) {
              double* dk = pk.grad.data() + static_cast<std::size_t>(j) * d + off;
              for (int c = 0; c < hd; ++c) dk[c] += ds * qrow[c];
            }
          }
        }
      }
    };
  }
  return out;
}

Tensor log_softmax_pick(const Tensor& logits, std::span<const int> targets) {
  const int m = logits.rows(), n = logits.cols();
  require(static_cast<int>(targets.size()) == m, "log_softmax_pick: one target per row required");
  for (int t : targets) require(t < n, "log_softmax_pick: target out of range");
  Tensor out = make_result(m, 1, {&logits});
  auto probs = std::make_shared<std::vector<double>>(static_cast<std::size_t>(m) * n);
  auto lv = logits.values();
  for (int i = 0; i < m; ++i) {
    const double* row = lv.data() + static_cast<std::size_t>(i) * n;
    double mx = *std::max_element(row, row + n);
    double z = 0.0;
    for (int j = 0; j < n; ++j) z += std::exp(row[j] - mx);
    const double lse = mx + std::log(z);
    for (int j = 0; j < n; ++j) (*probs)[static_cast<std::size_t>(i) * n + j] = std::exp(row[j] - lse);
    out.values()[i] = targets[i] >= 0 ? row[targets[i]] - lse : 0.0;
  }
  if (out.requires_grad()) {
    std::vector<int> tcopy(targets.begin(), targets.end());
    out.node()->backward = [m, n, probs, tcopy = std::move(tcopy)](Node& self) {
      Node& p = *self.parents[0];
      if (!p.requires_grad) return;
      p.ensure_grad();
      for (int i = 0; i < m; ++i) {
        if (tcopy[i] < 0) continue;
        const double g = self.grad[i];
        double* dst = p.grad.data() + static_cast<std::size_t>(i) * n;
        const double* pr = probs->data() + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) dst[j] -= g * pr[j];
        dst[tcopy[i]] += g;
      }
    };
  }
  return out;
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  require(a.rows() == b.rows(), "concat_cols: row counts differ");
  const int m = a.rows(), na = a.cols(), nb = b.cols(), n = na + nb;
  Tensor out = make_result(m, n, {&a, &b});
  auto av = a.values(), bv = b.values();
  auto ov = out.values();
  for (int i = 0; i < m; ++i) {
    std::copy_n(av.data() + static_cast<std::size_t>(i) * na, na, ov.data() + static_cast<std::size_t>(i) * n);
    std::copy_n(bv.data() + static_cast<std::size_t>(i) * nb, nb, ov.data() + static_cast<std::size_t>(i) * n + na);
  }
  if (out.requires_grad()) {
    out.node()->backward = [m, na, nb, n](Node& self) {
      Node& pa = *self.parents[0];
      Node& pb = *self.parents[1];
      if (pa.requires_grad) pa.ensure_grad();
      if (pb.requires_grad) pb.ensure_grad();
      for (int i = 0; i < m; ++i) {
        const double* g = self.grad.data() + static_cast<std::size_t>(i) * n;
        if (pa.requires_grad)
          for (int j = 0; j < na; ++j) pa.grad[static_cast<std::size_t>(i) * na + j] += g[j];
        if (pb.requires_grad)
          for (int j = 0; j < nb; ++j) pb.grad[static_cast<std::size_t>(i) * nb + j] += g[na + j];
      }
    };
  }
  return out;
}

Tensor slice_cols(const Tensor& a, int start, int count) {
  require(start >= 0 && count >= 0 && start + count <= a.cols(), "slice_cols: out of range");
  const int m = a.rows(), n = a.cols();
  Tensor out = make_result(m, count, {&a});
  auto av = a.values();
  auto ov = out.values();
  for (int i = 0; i < m; ++i)
    std::copy_n(av.data() + static_cast<std::size_t>(i) * n + start, count, ov.data() + static_cast<std::size_t>(i) * count);
  if (out.requires_grad()) {
    out.node()->backward = [m, n, start, count](Node& self) {
      Node& p = *self.parents[0];
      if (!p.requires_grad) return;
      p.ensure_grad();
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < count; ++j)
          p.grad[static_cast<std::size_t>(i) * n + start + j] += self.grad[static_cast<std::size_t>(i) * count + j];
    };
  }
  return out;
}

Tensor slice_rows(const Tensor& a, int start, int count) {
  require(start >= 0 && count >= 0 && start + count <= a.rows(), "slice_rows: out of range");
  const int n = a.cols();
  Tensor out = make_result(count, n, {&a});
  auto av = a.values();
  std::copy_n(av.data() + static_cast<std::size_t>(start) * n, static_cast<std::size_t>(count) * n, out.values().data());
  if (out.requires_grad()) {
    out.node()->backward = [n, start](Node& self) {
      Node& p = *self.parents[0];
      if (!p.requires_grad) return;
      p.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[static_cast<std::size_t>(start) * n + i] += self.grad[i];
    };
  }
  return out;
}

std::vector<double> softmax_row(std::span<const double> logits, double temperature) {
  std::vector<double> p(logits.size());
  double mx = -std::numeric_limits<double>::infinity();
  for (double l : logits) mx = std::max(mx, l / temperature);
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] / temperature - mx);
    z += p[i];
  }
  for (double& x : p) x /= z;
  return p;
}

}  // namespace prefalign::nn
