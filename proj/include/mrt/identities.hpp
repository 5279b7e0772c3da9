#pragma once

#include <functional>
#include <unordered_map>
#include <vector>

#include "mrt/raytransform.hpp"

namespace mrt {

// Central-difference configuration shared by the identity checks and the
// derivative-based recovery formulas.  Steps are in length units of the
// respective variable; `order` selects 2nd- or 4th-order central stencils
// for first and second derivatives (third and fourth derivatives always
// fall back to 2nd order so the stencil stays within 5 points per axis).
struct FDStencil {
  double h_x = 1e-2;
  double h_xi = 1e-2;
  int order = 4;

  void validate() const;
};

// Evaluator family k -> I^{m,k}F(x, xi).  Decouples the identity checks and
// the inversion formulas from how the moments are produced (direct
// quadrature, cached, or synthetic data).
using MomentFn = std::function<double(int k, const Vec& x, const Vec& xi)>;

// Scalar phase-space function (x, xi) -> value, used by apply_P.
using PhaseFn = std::function<double(const Vec& x, const Vec& xi)>;

// Fresh-quadrature evaluator: every call integrates anew.  The bundle must
// outlive the returned function.
MomentFn moment_evaluator(const TensorBundle& F, const QuadratureSpec& quad = {});

// Memoizing wrapper keyed on the exact (k, x, xi) bit patterns.  Useful for
// the nested stencils of the recovery formulas, whose lattices revisit the
// same phase-space points many times.  Identity checks keep their default
// fresh evaluation so the check stays an independent oracle; pass a cached
// evaluator explicitly only where speed matters more than independence.
class MomentCache {
 public:
  explicit MomentCache(MomentFn inner) : inner_(std::move(inner)) {}

  double operator()(int k, const Vec& x, const Vec& xi);

  // Adapter so the cache can be handed to anything expecting a MomentFn.
  MomentFn fn() {
    return [this](int k, const Vec& x, const Vec& xi) { return (*this)(k, x, xi); };
  }

  std::size_t size() const { return map_.size(); }
  std::size_t hits() const { return hits_; }

 private:
  struct Key {
    int k = 0;
    Vec x{};
    Vec xi{};
    bool operator==(const Key& o) const;
  };
  struct KeyHash {
    std::size_t operator()(const Key& key) const;
  };

  MomentFn inner_;
  std::unordered_map<Key, double, KeyHash> map_;
  std::size_t hits_ = 0;
};

// P_p(xi, d_xi) applied to a scalar evaluator: sums xi^{i1}...xi^{ip}
// d^p/d(xi^{i1})...d(xi^{ip}) over all p-tuples of axes, each mixed partial
// taken by nested central differences with step stencil.h_xi.  Orders above
// 4 are rejected: the FD noise amplification makes the value meaningless.
double apply_P(const PhaseFn& fn, int p, const Ray& ray, int dim, const FDStencil& stencil = {});

// The index-lowered bundle (F)_{i_s}: the rank-p part of the result is
// (p+1) * fix_last(f^{(p+1)}, axis), so the top rank drops by one.
TensorBundle index_descend(const TensorBundle& F, int axis);

// |I^{m-1,k}(F)_axis - (d_xi I^{m,k}F - d_x I^{m,k+1}F)| at one ray: the
// left side by direct quadrature of the lowered bundle, the right side by
// central differences of fresh quadratures.
double check_index_descent(const TensorBundle& F, int k, int axis, const Ray& ray,
                           const QuadratureSpec& quad = {}, const FDStencil& stencil = {});

// |<xi, d_x>^p I^{m,k}F - (-1)^p C(k,p) p! I^{m,k-p}F| at one ray; the RHS
// is zero when p > k.  The directional derivative is a 1D stencil in s on
// g(s) = I^{m,k}F(x + s xi, xi) with step stencil.h_x.
double check_transport_power(const TensorBundle& F, int k, int p, const Ray& ray,
                             const QuadratureSpec& quad = {}, const FDStencil& stencil = {});

// |P_order I^k f - prod_{j=1..order}(l-k-j) I^k f| for a single rank-l
// field.  Orders above 3 are rejected (stencil depth).
double check_euler(const SymTensorField& f, int k, int order, const Ray& ray,
                   const QuadratureSpec& quad = {}, const FDStencil& stencil = {});

// max over lambda of |I^k f(x, lambda xi) - lambda^{l-k-1} I^k f(x, xi)|
// relative to the expected value.  Requires every lambda > 0.
double check_homogeneity(const SymTensorField& f, int k, const Ray& ray,
                         const std::vector<double>& lambdas, const QuadratureSpec& quad = {});

// Tolerance normalizer: max over rays of |I^{m,k}F|, floored at 1e-8.
double moment_scale(const TensorBundle& F, int k, const std::vector<Ray>& rays,
                    const QuadratureSpec& quad = {});

}  // namespace mrt
