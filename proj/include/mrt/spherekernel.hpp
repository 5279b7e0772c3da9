#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <vector>

#include "mrt/common.hpp"
#include "mrt/raytransform.hpp"
#include "mrt/symtensor.hpp"
#include "mrt/tensorfield.hpp"

namespace mrt {

// Analysis of the null space of the unit-speed weighted ray transforms
// J^{m,k}F = sum_r I^k f^(r) restricted to |xi| = 1.  The tools here work on
// one distinguished coordinate axis: fields are sliced on hyperplanes
// {x_axis = const}, sampled in polar coordinates (r, theta) about a center
// placed outside the support, and contracted against the isotropic complex
// vector zeta = e_axis + i omega whose square vanishes.  Membership in the
// null space is equivalent to a closed-form relation tying the top even and
// odd ranks to the lower ones; construct_v realizes the potential that
// certifies it, and plancherel_check exposes the positivity bookkeeping that
// forces the even chain to vanish.

// Quadrature nodes on the unit sphere S^{d-1} embedded in R^d, d in {1,2,3}.
//   d = 1: the two points +-1 with unit weights (total measure 2)
//   d = 2: `resolution` equispaced angles, weight 2*pi/resolution
//   d = 3: Gauss-Legendre in the polar cosine (order `resolution`) crossed
//          with 2*resolution equispaced azimuths (total measure 4*pi)
struct ThetaGrid {
  int ambient = 0;              // d: directions are unit vectors in R^d
  std::vector<Vec> dirs;        // padded with zeros beyond d entries
  std::vector<double> weights;  // positive, sum to the sphere measure
  int count() const { return int(dirs.size()); }
};

ThetaGrid make_theta_grid(int ambient, int resolution);

// The axes other than `axis`, in increasing order; they index the reduced
// (dim-1)-dimensional tensor algebra that the slice machinery works in.
std::vector<int> nonaxis_axes(int dim, int axis);

// zeta = e_axis + i * omega with omega a unit vector in the non-axis
// coordinates (given by its dim-1 reduced components).  zeta . zeta = 0.
std::array<std::complex<double>, kMaxDim> null_vector(int dim, int axis, const Vec& omega);

// Geometry of one polar-sampled slice {x_axis = slice_coord}.  The center's
// axis component is ignored; r runs signed and uniform over [-r_max, r_max]
// so each theta line is a full line through the center, and the center must
// sit outside the sampled field's support for the moment conditions to
// carry their usual meaning.
struct SliceSpec {
  int dim = 0;   // ambient dimension n
  int rank = 0;  // tensor rank m
  int axis = 0;  // distinguished axis
  double slice_coord = 0.0;
  Vec center{};  // polar center; only the non-axis components are used
  double r_max = 1.0;
  int r_nodes = 129;
  ThetaGrid thetas;  // directions in R^{dim-1}

  void validate() const;
  double dr() const { return 2.0 * r_max / double(r_nodes - 1); }
};

// A rank-m symmetric tensor field sampled on one slice in (theta, r) layout.
class SliceField {
 public:
  SliceField() = default;
  explicit SliceField(SliceSpec spec);

  // Pointwise sample of an ambient-space tensor function.
  static SliceField sample(const SliceSpec& spec,
                           const std::function<SymTensor(const Vec&)>& fn);
  // Sample a gridded field (rank is taken from the field).
  static SliceField from_field(const SymTensorField& f, SliceSpec spec);

  const SliceSpec& spec() const { return spec_; }
  int ncomp() const { return ncomp_; }
  double r(int ri) const;
  Vec point(int ti, int ri) const;  // embedded ambient sample point

  double* values(int ti, int ri);
  const double* values(int ti, int ri) const;
  SymTensor tensor(int ti, int ri) const;
  void set_tensor(int ti, int ri, const SymTensor& t);

  // sqrt( sum_{theta,r} theta_weight * dr * |f|^2 ), multiplicity-weighted.
  double l2_norm() const;

 private:
  SliceSpec spec_;
  int ncomp_ = 0;
  std::vector<double> data_;
};

// Weighted moments of the slice data against powers of r and the m-fold
// null-vector contraction:
//   M(alpha, theta) = sum_j dr * r_j^alpha * < f(c + r_j omega), zeta^{(x) m} >
// for alpha = 0..m.  All of them vanish when the slice comes from a bundle
// in the null space, and any i_delta-form is annihilated pointwise because
// zeta . zeta = 0.
struct MomentConditionReport {
  int alpha_count = 0;
  int theta_count = 0;
  std::vector<std::complex<double>> residual;  // [alpha * theta_count + t]
  double max_abs = 0.0;

  std::complex<double> at(int alpha, int t) const {
    return residual[std::size_t(alpha) * std::size_t(theta_count) + std::size_t(t)];
  }
};

MomentConditionReport moment_conditions(const SliceField& f);

// The rank-p tensor over the non-axis coordinates obtained by fixing all
// remaining m-p slots of g to `axis` and scaling by binom(m, p).
SymTensor slot_piece(const SymTensor& g, int axis, int p);

// Explicit potential: given a rank-m tensor (m >= 2), produce the rank-(m-2)
// tensor v whose components with p non-axis indices are
//   binom(m-2, m-p-2)^{-1} sum_{l=1}^{floor((p+2)/2)} (-1)^{l-1}
//       (i_delta^{l-1} fpiece^{p+2-2l})_{j1..jp}
// with the Kronecker lifts taken in the reduced (dim-1)-dimensional algebra.
// When f = i_delta(w), i_delta(construct_v_point(f)) reproduces f exactly.
SymTensor construct_v_point(const SymTensor& f, int axis);

// Pointwise construct_v_point over a slice; rank drops by 2.
SliceField construct_v(const SliceField& f);

// Lifted cumulative sums of the even and odd ranks of a bundle:
//   G1 = sum_{l=0}^{floor(m/2)}     i_delta^{floor(m/2)-l}     f^(2l)
//   G2 = sum_{l=0}^{floor((m-1)/2)} i_delta^{floor((m-1)/2)-l} f^(2l+1)
// The bundle lies in the null space of the unit-speed transforms exactly
// when both vanish identically.  For m = 0, G2 is a rank-0 zero field.
struct GPair {
  SymTensorField G1;
  SymTensorField G2;
};

GPair build_G(const TensorBundle& F);

// The positivity bookkeeping for an even-rank tensor g (rank m = 2k):
//   total = <gpiece^{2k}, gpiece^{2k}> + sum_{l=1}^{k} d_{2k-2l} <gpiece^{2k-2l}, gpiece^{2k-2l}>
// with d_q = 1/binom(m, q) > 0, inner products in the reduced algebra.
// total = 0 forces every even piece to vanish.  term[0] is the top summand,
// term[l] the weighted one for 2k-2l; piece_norm[p] reports |gpiece^p| for
// every p = 0..m (odd ones included, for context).
struct PlancherelReport {
  std::vector<double> term;
  double total = 0.0;
  std::vector<double> piece_norm;
};

PlancherelReport plancherel_check(const SymTensor& g, int axis = 0);

// d_q = 1/binom(m, q); strictly positive for 0 <= q <= m.
double plancherel_weight(int m, int q);

// Two-sided membership test for the null space of the unit-speed transforms.
//   forward:  max_{k=0..m, rays} |J^{m,k}F(ray)| <= tol
//   reverse:  |G1|, |G2| <= tol * max(1, |F|)   (the closed-form relation)
//   top_only: the k = m residual alone, which already decides membership
// Verdicts are reported separately so tests can assert they agree.
struct KernelReport {
  bool in_kernel_forward = false;
  bool in_kernel_reverse = false;
  bool in_kernel_top_only = false;
  bool agree = false;
  std::vector<double> per_k_residual;  // max over rays of |J^{m,k}F|, k = 0..m
  double residual_even = 0.0;          // |G1| / max(1, |F|)
  double residual_odd = 0.0;           // |G2| / max(1, |F|)
  double bundle_norm = 0.0;
  double tol = 0.0;
};

KernelReport kernel_membership(const TensorBundle& F, const std::vector<Ray>& rays,
                               double tol = 1e-6, const QuadratureSpec& quad = {});

// Deterministic unit-speed probe rays: base points uniform in the cube
// [-x_radius, x_radius]^dim, directions uniform on the sphere.
std::vector<Ray> random_unit_rays(int dim, int count, std::uint64_t seed,
                                  double x_radius = 0.5);

}  // namespace mrt
