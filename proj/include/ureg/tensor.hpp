#pragma once

#include <vector>

#include "ureg/chart.hpp"
#include "ureg/jet.hpp"
#include "ureg/types.hpp"

namespace ureg {

// Valence of a (sigma, tau)-tensor: `up` contravariant and `down` covariant
// slots. Components are stored densely, upper indices first, row-major.
struct Valence {
  int up = 0;
  int down = 0;
  int rank() const { return up + down; }
  bool operator==(const Valence&) const = default;
};

inline int dense_size(int dim, Valence v) {
  int n = 1;
  for (int i = 0; i < v.rank(); ++i) n *= dim;
  return n;
}

// Dense component array of a (sigma, tau)-tensor at a point.
struct TensorComponents {
  Valence valence;
  int dim = 0;
  Vec a;  // dense_size(dim, valence) entries
  PointRef at;

  double& operator()(std::initializer_list<int> idx) { return a[flat(idx)]; }
  double operator()(std::initializer_list<int> idx) const { return a[flat(idx)]; }
  int flat(std::initializer_list<int> idx) const {
    int f = 0;
    for (int i : idx) f = f * dim + i;
    return f;
  }
};

// Same layout with jet-valued components; used internally to push covariant
// derivatives through.
struct TensorJets {
  Valence valence;
  int dim = 0;
  std::vector<Jet> comp;

  Jet& at(int flat) { return comp[flat]; }
  const Jet& at(int flat) const { return comp[flat]; }
  TensorComponents values() const;
};

// Christoffel symbols Gamma^k_{ij} with jets; symmetric in (i,j).
struct ChristoffelField {
  int dim = 0;
  std::vector<Jet> comp;  // index (k*m + i)*m + j

  const Jet& at(int k, int i, int j) const { return comp[(k * dim + i) * dim + j]; }
  Jet& at(int k, int i, int j) { return comp[(k * dim + i) * dim + j]; }
  double value(int k, int i, int j) const { return at(k, i, j).value(); }
  int order() const { return comp.empty() ? -1 : comp[0].order(); }
};

struct CurvatureAtPoint {
  int dim = 0;
  TensorComponents up;       // R^l_{ijk}, valence (1,3), layout [l][i][j][k]
  TensorComponents lowered;  // R_{lijk} = g_{km} R^m_{lij}: 4-covariant, slots (l,i|j,k)
  double scalar = 0.0;
  Mat metric;      // g at the point
  Mat metric_inv;  // g^* at the point

  // K(u,v) = R(u,v,v,u) / (|u|^2 |v|^2 - <u,v>^2).
  double sectional(const Vec& u, const Vec& v) const;
};

// Inverse metric with jets to the same order, via the Taylor-coefficient
// recursion for H = G^{-1}: H_0 = G_0^{-1}, H_a = -H_0 sum_{0<b<=a} G_b H_{a-b}.
MetricJets metric_inverse(const MetricJets& g);

// Gamma^k_{ij} = 1/2 g^{kl} (d_i g_{jl} + d_j g_{il} - d_l g_{ij}), with jets
// to metric order minus one.
ChristoffelField christoffel(const MetricJets& g);

// Convenience: evaluate the chart metric at x with jets to jet_order+1 and
// assemble Christoffel jets of order jet_order.
ChristoffelField christoffel(const Chart& chart, const Vec& x, int jet_order);

// R^l_{ijk} = d_i Gamma^l_{jk} - d_j Gamma^l_{ik}
//           + sum_r (Gamma^r_{jk} Gamma^l_{ir} - Gamma^r_{ik} Gamma^l_{jr}),
// with jets to Christoffel order minus one.
TensorJets curvature_jets(const ChristoffelField& gamma);

// Full curvature package at a point (values, lowered form, scalar).
CurvatureAtPoint curvature(const Chart& chart, const Vec& x);

// Same from pre-evaluated metric jets (order >= 2).
CurvatureAtPoint curvature_at(const MetricJets& g, const PointRef& at = {});

// One covariant derivative: valence (s,t) -> (s,t+1), the new covariant index
// appended last. Consumes one jet order of `a`; Christoffels must carry at
// least order(a)-1 jets.
TensorJets covariant_derivative(const TensorJets& a, const ChristoffelField& gamma);

// k-fold covariant derivative of the curvature tensor, valence (1, 3+k).
TensorComponents nabla_k_R(const Chart& chart, const Vec& x, int k);

// |a|_g via the bundle metric induced by g on (sigma,tau)-tensors.
double bundle_norm(const TensorComponents& a, const Mat& g);

// Sectional curvature from the lowered tensor.
double sectional_curvature(const TensorComponents& lowered, const Mat& g, const Vec& u, const Vec& v);

// Scalar curvature g^{jk} Ric_{jk} with Ric_{jk} = R^l_{ljk}.
double scalar_curvature(const TensorComponents& up, const Mat& g_inv);

}  // namespace ureg
