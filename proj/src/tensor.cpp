#include "ureg/tensor.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace ureg {

namespace {

// Contracts matrix M into tensor slot `slot`: out[..., p, ...] = sum_q M(p,q) in[..., q, ...].
Vec contract_slot(const Vec& in, int dim, int rank, int slot, const Mat& M) {
  Vec out = Vec::Zero(in.size());
  int stride = 1;
  for (int s = rank - 1; s > slot; --s) stride *= dim;
  const int block = stride * dim;
  const int nblocks = static_cast<int>(in.size()) / block;
  for (int b = 0; b < nblocks; ++b) {
    const int base = b * block;
    for (int inner = 0; inner < stride; ++inner) {
      for (int p = 0; p < dim; ++p) {
        double acc = 0.0;
        for (int q = 0; q < dim; ++q) acc += M(p, q) * in[base + q * stride + inner];
        out[base + p * stride + inner] = acc;
      }
    }
  }
  return out;
}

}  // namespace

TensorComponents TensorJets::values() const {
  TensorComponents out;
  out.valence = valence;
  out.dim = dim;
  out.a.resize(static_cast<int>(comp.size()));
  for (int i = 0; i < static_cast<int>(comp.size()); ++i) out.a[i] = comp[i].value();
  return out;
}

MetricJets metric_inverse(const MetricJets& g) {
  const int m = g.dim;
  const auto space = g.entries[0].space();
  const int n = space->size();

  // Coefficient matrices of G in the graded basis.
  std::vector<Mat> G(n, Mat(m, m));
  for (int c = 0; c < n; ++c)
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) G[c](i, j) = g.at(i, j).coeff(c);

  Eigen::LLT<Mat> llt(G[0]);
  if (llt.info() != Eigen::Success) throw NumericError("metric_inverse: matrix is not SPD");
  std::vector<Mat> H(n);
  H[0] = llt.solve(Mat::Identity(m, m));

  for (int c = 1; c < n; ++c) {
    Mat acc = Mat::Zero(m, m);
    for (const auto& [i, j] : space->splits(c)) {
      if (i == 0) continue;  // G_0 term belongs to the left-hand side
      acc += G[i] * H[j];
    }
    H[c] = -H[0] * acc;
  }

  MetricJets out;
  out.dim = m;
  out.entries.assign(m * m, Jet(space, 0.0));
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      for (int c = 0; c < n; ++c) out.at(i, j).coeffs()[c] = H[c](i, j);
  return out;
}

ChristoffelField christoffel(const MetricJets& g) {
  const int m = g.dim;
  if (g.order() < 1) throw Error("christoffel requires metric jets of order >= 1");
  const int K = g.order() - 1;

  MetricJets ginv_full = metric_inverse(g);

  // Partial-derivative jets of the metric, order K.
  std::vector<Jet> dg(m * m * m, Jet(JetSpace::get(m, K), 0.0));
  auto dg_at = [&](int d, int i, int j) -> Jet& { return dg[(d * m + i) * m + j]; };
  for (int d = 0; d < m; ++d)
    for (int i = 0; i < m; ++i)
      for (int j = i; j < m; ++j) {
        dg_at(d, i, j) = g.at(i, j).partial(d);
        if (j != i) dg_at(d, j, i) = dg_at(d, i, j);
      }

  std::vector<Jet> ginv(m * m, Jet(JetSpace::get(m, K), 0.0));
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) ginv[i * m + j] = ginv_full.at(i, j).truncated(K);

  ChristoffelField out;
  out.dim = m;
  out.comp.assign(m * m * m, Jet(JetSpace::get(m, K), 0.0));
  for (int k = 0; k < m; ++k)
    for (int i = 0; i < m; ++i)
      for (int j = i; j < m; ++j) {
        Jet acc(JetSpace::get(m, K), 0.0);
        for (int l = 0; l < m; ++l) {
          Jet term = dg_at(i, j, l) + dg_at(j, i, l) - dg_at(l, i, j);
          acc += ginv[k * m + l] * term;
        }
        acc *= 0.5;
        out.at(k, i, j) = acc;
        if (j != i) out.at(k, j, i) = acc;
      }
  return out;
}

ChristoffelField christoffel(const Chart& chart, const Vec& x, int jet_order) {
  MetricJets g = pullback_metric(chart, x, jet_order + 1);
  return christoffel(g);
}

TensorJets curvature_jets(const ChristoffelField& gamma) {
  const int m = gamma.dim;
  if (gamma.order() < 1) throw Error("curvature requires Christoffel jets of order >= 1");
  const int K = gamma.order() - 1;
  auto space = JetSpace::get(m, K);

  // Truncated copy for the quadratic terms.
  std::vector<Jet> G(m * m * m, Jet(space, 0.0));
  auto g_at = [&](int k, int i, int j) -> const Jet& { return G[(k * m + i) * m + j]; };
  for (int idx = 0; idx < m * m * m; ++idx) G[idx] = gamma.comp[idx].truncated(K);

  TensorJets R;
  R.valence = Valence{1, 3};
  R.dim = m;
  R.comp.assign(dense_size(m, R.valence), Jet(space, 0.0));
  auto r_at = [&](int l, int i, int j, int k) -> Jet& {
    return R.comp[((l * m + i) * m + j) * m + k];
  };

  for (int l = 0; l < m; ++l)
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        for (int k = 0; k < m; ++k) {
          if (j == i) {
            r_at(l, i, j, k) = Jet(space, 0.0);
            continue;
          }
          Jet acc = gamma.at(l, j, k).partial(i) - gamma.at(l, i, k).partial(j);
          for (int r = 0; r < m; ++r)
            acc += g_at(r, j, k) * g_at(l, i, r) - g_at(r, i, k) * g_at(l, j, r);
          r_at(l, i, j, k) = acc;
        }
  return R;
}

TensorJets covariant_derivative(const TensorJets& a, const ChristoffelField& gamma) {
  const int m = a.dim;
  if (a.comp.empty()) throw Error("covariant_derivative of an empty tensor");
  const int q = a.comp[0].order();
  if (q < 1) throw Error("covariant_derivative requires field jets of order >= 1");
  if (gamma.order() < q - 1) throw Error("covariant_derivative: insufficient Christoffel jet order");
  const int K = q - 1;
  auto space = JetSpace::get(m, K);

  std::vector<Jet> G(m * m * m, Jet(space, 0.0));
  for (int idx = 0; idx < m * m * m; ++idx) G[idx] = gamma.comp[idx].truncated(K);
  auto g_at = [&](int k, int i, int j) -> const Jet& { return G[(k * m + i) * m + j]; };

  std::vector<Jet> atr(a.comp.size(), Jet(space, 0.0));
  for (std::size_t idx = 0; idx < a.comp.size(); ++idx) atr[idx] = a.comp[idx].truncated(K);

  const int rank = a.valence.rank();
  const int in_size = static_cast<int>(a.comp.size());

  TensorJets out;
  out.valence = Valence{a.valence.up, a.valence.down + 1};
  out.dim = m;
  out.comp.assign(dense_size(m, out.valence), Jet(space, 0.0));

  std::vector<int> digits(rank);
  for (int flat = 0; flat < in_size; ++flat) {
    int f = flat;
    for (int s = rank - 1; s >= 0; --s) {
      digits[s] = f % m;
      f /= m;
    }
    for (int r = 0; r < m; ++r) {
      Jet acc = a.comp[flat].partial(r);
      // + Gamma^{i_s}_{r l} a^{..l..}; upper slots first in the layout.
      for (int s = 0; s < a.valence.up; ++s) {
        const int is = digits[s];
        int stride = 1;
        for (int t = rank - 1; t > s; --t) stride *= m;
        const int base = flat - is * stride;
        for (int l = 0; l < m; ++l) acc += g_at(is, r, l) * atr[base + l * stride];
      }
      // - Gamma^{l}_{r j_s} a_{..l..}
      for (int s = a.valence.up; s < rank; ++s) {
        const int js = digits[s];
        int stride = 1;
        for (int t = rank - 1; t > s; --t) stride *= m;
        const int base = flat - js * stride;
        for (int l = 0; l < m; ++l) acc -= g_at(l, r, js) * atr[base + l * stride];
      }
      out.comp[flat * m + r] = acc;
    }
  }
  return out;
}

namespace {

CurvatureAtPoint curvature_from_metric(const MetricJets& g, const PointRef& at) {
  ChristoffelField gamma = christoffel(g);
  TensorJets Rj = curvature_jets(gamma);

  CurvatureAtPoint out;
  out.dim = g.dim;
  out.up = Rj.values();
  out.up.at = at;
  out.metric = g.value();
  out.metric_inv = out.metric.llt().solve(Mat::Identity(g.dim, g.dim));

  const int m = g.dim;
  out.lowered.valence = Valence{0, 4};
  out.lowered.dim = m;
  out.lowered.at = at;
  out.lowered.a = Vec::Zero(dense_size(m, out.lowered.valence));
  // R_{lijk} = g_{km} R^m_{lij}: move the upper slot to the last position.
  for (int l = 0; l < m; ++l)
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        for (int k = 0; k < m; ++k) {
          double acc = 0.0;
          for (int mm = 0; mm < m; ++mm)
            acc += out.metric(k, mm) * out.up.a[((mm * m + l) * m + i) * m + j];
          out.lowered.a[((l * m + i) * m + j) * m + k] = acc;
        }

  out.scalar = scalar_curvature(out.up, out.metric_inv);
  return out;
}

}  // namespace

CurvatureAtPoint curvature(const Chart& chart, const Vec& x) {
  MetricJets g = pullback_metric(chart, x, 2);
  PointRef at{chart.id, x};
  return curvature_from_metric(g, at);
}

CurvatureAtPoint curvature_at(const MetricJets& g, const PointRef& at) {
  return curvature_from_metric(g, at);
}

double CurvatureAtPoint::sectional(const Vec& u, const Vec& v) const {
  return sectional_curvature(lowered, metric, u, v);
}

TensorComponents nabla_k_R(const Chart& chart, const Vec& x, int k) {
  if (k < 0) throw Error("nabla_k_R: negative order");
  MetricJets g = pullback_metric(chart, x, k + 2);
  ChristoffelField gamma = christoffel(g);
  TensorJets cur = curvature_jets(gamma);
  for (int step = 0; step < k; ++step) cur = covariant_derivative(cur, gamma);
  TensorComponents out = cur.values();
  out.at = PointRef{chart.id, x};
  return out;
}

double bundle_norm(const TensorComponents& a, const Mat& g) {
  const int m = a.dim;
  const int rank = a.valence.rank();
  if (rank == 0) return std::abs(a.a[0]);
  const Mat ginv = g.llt().solve(Mat::Identity(m, m));

  Vec b = a.a;
  for (int s = 0; s < a.valence.up; ++s) b = contract_slot(b, m, rank, s, g);
  for (int s = a.valence.up; s < rank; ++s) b = contract_slot(b, m, rank, s, ginv);

  const double n2 = a.a.dot(b);
  if (n2 < -1e-9) throw NumericError("bundle norm produced a negative square");
  return std::sqrt(std::max(0.0, n2));
}

double sectional_curvature(const TensorComponents& lowered, const Mat& g, const Vec& u, const Vec& v) {
  const int m = lowered.dim;
  const double uu = u.dot(g * u), vv = v.dot(g * v), uv = u.dot(g * v);
  const double denom = uu * vv - uv * uv;
  if (denom < 1e-12) throw NumericError("sectional curvature of a degenerate plane");
  double num = 0.0;
  for (int l = 0; l < m; ++l)
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        for (int k = 0; k < m; ++k)
          num += lowered.a[((l * m + i) * m + j) * m + k] * u[l] * v[i] * v[j] * u[k];
  return num / denom;
}

double scalar_curvature(const TensorComponents& up, const Mat& g_inv) {
  const int m = up.dim;
  double s = 0.0;
  for (int j = 0; j < m; ++j)
    for (int k = 0; k < m; ++k) {
      double ric = 0.0;
      for (int l = 0; l < m; ++l) ric += up.a[((l * m + l) * m + j) * m + k];
      s += g_inv(j, k) * ric;
    }
  return s;
}

}  // namespace ureg
