#pragma once

#include "mrt/tensorfield.hpp"

namespace mrt {

// An oriented line x + t*xi. The direction need not be normalized: the
// weighted transforms below deliberately keep raw powers of xi so that the
// scaling law in |xi| remains a checkable theorem rather than a convention.
struct Ray {
  Vec x{};
  Vec xi{};

  void validate(int dim) const {
    Vec v = xi;
    if (norm2(v, dim) <= 1e-12) throw std::invalid_argument("Ray: |xi| too small");
  }
};

struct QuadratureSpec {
  int panels = 32;  // composite Gauss-Legendre panels per chord
  int order = 8;    // nodes per panel

  void validate() const {
    if (panels < 4) throw std::invalid_argument("QuadratureSpec: need at least 4 panels");
    if (order < 2 || order > 64) throw std::invalid_argument("QuadratureSpec: order out of range");
  }
};

// Weighted transform of a single rank-p field:
//   integral of t^k f_{i1..ip}(x + t xi) xi^{i1} ... xi^{ip} dt,
// the chord clipped analytically to the support ball.
double mrt_rank(const SymTensorField& f, const Ray& ray, int k,
                const QuadratureSpec& quad = {});

// Same weighted integral summed over every rank of the bundle.
double mrt_bundle(const TensorBundle& F, const Ray& ray, int k,
                  const QuadratureSpec& quad = {});

// Sphere-bundle restriction: requires |xi| = 1 to 1e-12.
double mrt_sphere(const TensorBundle& F, const Ray& ray, int k,
                  const QuadratureSpec& quad = {});

// ---------------------------------------------------------------------------
// Adjoint of the rank-m weighted transform: for a smooth data function
// psi(x, xi) supported on an annulus in xi,
//   [A psi]_{i1..im}(x) = integral over xi and t of
//                         t^k xi^{i1}..xi^{im} psi(x - t xi, xi).

struct AdjointDomain {
  double xi_min = 0.5;   // annulus bounds in |xi|
  double xi_max = 2.0;
  Vec x_center{};        // ball containing the x-support of psi
  double x_radius = 1.0;
  int xi_cells = 12;     // quadrature panels per xi axis over [-xi_max, xi_max]
  int xi_order = 6;

  void validate() const {
    if (!(xi_min > 0.0) || !(xi_max > xi_min)) throw std::invalid_argument("AdjointDomain: bad annulus");
    if (!(x_radius > 0.0)) throw std::invalid_argument("AdjointDomain: bad x ball");
  }
};

using PhaseSpaceFn = std::function<double(const Vec& x, const Vec& xi)>;

SymTensor adjoint_apply(const PhaseSpaceFn& psi, const AdjointDomain& dom, int dim, int m,
                        int k, const Vec& x, const QuadratureSpec& quad = {});

// ---------------------------------------------------------------------------
// Batch sampling.

struct MomentSamples {
  std::vector<int> ks;
  std::vector<Ray> rays;
  // value of moment ks[i] on rays[j] at values[i*rays.size() + j]
  std::vector<double> values;
  int dim = 0;

  double value(int ki, std::size_t rj) const { return values[size_t(ki) * rays.size() + rj]; }
};

MomentSamples sample_moments(const TensorBundle& F, const std::vector<Ray>& rays,
                             const std::vector<int>& ks, const QuadratureSpec& quad = {},
                             int threads = 0);

void write_moments_csv(const MomentSamples& s, const std::string& path);
std::vector<Ray> load_ray_grid_json(const std::string& path, int dim);

}  // namespace mrt
