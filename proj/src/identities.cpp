#include "mrt/identities.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace mrt {

namespace {

// Per-axis central stencil: signed node offsets (units of h) and the
// finite-difference weights for one derivative order, already divided by
// the appropriate power of h.
struct AxisStencil {
  std::vector<double> offsets;  // physical offsets j*h
  std::vector<double> weights;
};

// Derivatives of order 1 and 2 honor the requested accuracy; orders 3 and 4
// drop to 2nd order so every stencil fits in 5 points per axis.
int effective_accuracy(int deriv, int requested) {
  return deriv <= 2 ? requested : 2;
}

AxisStencil make_axis_stencil(int deriv, double h, int accuracy) {
  AxisStencil st;
  const std::vector<double> offs = central_offsets(deriv, effective_accuracy(deriv, accuracy));
  st.offsets.reserve(offs.size());
  for (double j : offs) st.offsets.push_back(h * j);
  st.weights = fd_weights(0.0, st.offsets, deriv);
  return st;
}

// Mixed partial derivative with per-axis orders `deriv[a]`, step h, of a
// function of a point shift.  Walks the tensor-product stencil; axes with
// order zero contribute a single unshifted node.
double mixed_partial(const std::function<double(const Vec& shift)>& fn, const int* deriv, int dim,
                     double h, int accuracy) {
  std::vector<int> axes;
  std::vector<AxisStencil> stencils;
  for (int a = 0; a < dim; ++a) {
    if (deriv[a] > 0) {
      axes.push_back(a);
      stencils.push_back(make_axis_stencil(deriv[a], h, accuracy));
    }
  }
  if (axes.empty()) {
    Vec zero{};
    return fn(zero);
  }
  const int na = static_cast<int>(axes.size());
  std::vector<int> idx(axes.size(), 0);
  double acc = 0.0;
  while (true) {
    Vec shift{};
    double w = 1.0;
    for (int i = 0; i < na; ++i) {
      shift[static_cast<std::size_t>(axes[static_cast<std::size_t>(i)])] =
          stencils[static_cast<std::size_t>(i)].offsets[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])];
      w *= stencils[static_cast<std::size_t>(i)].weights[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])];
    }
    acc += w * fn(shift);
    int carry = na - 1;
    while (carry >= 0) {
      idx[static_cast<std::size_t>(carry)] += 1;
      if (idx[static_cast<std::size_t>(carry)] <
          static_cast<int>(stencils[static_cast<std::size_t>(carry)].offsets.size()))
        break;
      idx[static_cast<std::size_t>(carry)] = 0;
      --carry;
    }
    if (carry < 0) break;
  }
  return acc;
}

Vec shifted(const Vec& base, const Vec& shift) {
  Vec out = base;
  for (std::size_t a = 0; a < out.size(); ++a) out[a] += shift[a];
  return out;
}

}  // namespace

void FDStencil::validate() const {
  if (!(h_x > 0.0) || !(h_xi > 0.0)) throw std::invalid_argument("FDStencil: steps must be positive");
  if (order != 2 && order != 4) throw std::invalid_argument("FDStencil: order must be 2 or 4");
}

MomentFn moment_evaluator(const TensorBundle& F, const QuadratureSpec& quad) {
  return [&F, quad](int k, const Vec& x, const Vec& xi) {
    Ray ray;
    ray.x = x;
    ray.xi = xi;
    return mrt_bundle(F, ray, k, quad);
  };
}

bool MomentCache::Key::operator==(const Key& o) const {
  return k == o.k && std::memcmp(x.data(), o.x.data(), sizeof(x)) == 0 &&
         std::memcmp(xi.data(), o.xi.data(), sizeof(xi)) == 0;
}

std::size_t MomentCache::KeyHash::operator()(const Key& key) const {
  // FNV-1a over the raw bytes; keys differing in any bit hash differently.
  const unsigned char* p = reinterpret_cast<const unsigned char*>(&key.x);
  std::size_t h = 1469598103934665603ull ^ static_cast<std::size_t>(key.k);
  for (std::size_t i = 0; i < sizeof(Vec) * 2; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

double MomentCache::operator()(int k, const Vec& x, const Vec& xi) {
  Key key;
  key.k = k;
  key.x = x;
  key.xi = xi;
  auto it = map_.find(key);
  if (it != map_.end()) {
    ++hits_;
    return it->second;
  }
  const double value = inner_(k, x, xi);
  map_.emplace(key, value);
  return value;
}

double apply_P(const PhaseFn& fn, int p, const Ray& ray, int dim, const FDStencil& stencil) {
  stencil.validate();
  if (p < 0) throw std::invalid_argument("apply_P: order must be non-negative");
  if (p > 4) throw std::invalid_argument("apply_P: order above 4 amplifies FD noise beyond use");
  if (dim < 1 || dim > kMaxDim) throw std::invalid_argument("apply_P: dim out of range");
  if (p == 0) return fn(ray.x, ray.xi);

  // Group the p-tuples (i1..ip) by their derivative profile: a canonical
  // multi-index alpha with multiplicity p!/prod(alpha_a!) counts how many
  // tuples request the same mixed partial, and the xi-monomial coefficient
  // is evaluated at the base point.
  const ComponentSpace& profiles = component_space(p, dim);
  double total = 0.0;
  for (int c = 0; c < profiles.size; ++c) {
    const MultiIndex& alpha = profiles.index[static_cast<std::size_t>(c)];
    int deriv[kMaxDim] = {0, 0, 0, 0};
    double mono = 1.0;
    for (int s = 0; s < p; ++s) {
      const int axis = alpha.ix[static_cast<std::size_t>(s)];
      deriv[axis] += 1;
      mono *= ray.xi[static_cast<std::size_t>(axis)];
    }
    // Mixed partials cap the per-axis order at 4 by construction (p <= 4).
    const double d = mixed_partial(
        [&](const Vec& shift) { return fn(ray.x, shifted(ray.xi, shift)); }, deriv, dim,
        stencil.h_xi, stencil.order);
    total += profiles.mult[static_cast<std::size_t>(c)] * mono * d;
  }
  return total;
}

TensorBundle index_descend(const TensorBundle& F, int axis) {
  const int m = F.top_rank();
  const int dim = F.grid().dim;
  if (m < 1) throw std::invalid_argument("index_descend: bundle has no rank to lower");
  if (axis < 0 || axis >= dim) throw std::invalid_argument("index_descend: axis out of range");

  std::vector<SymTensorField> parts;
  parts.reserve(static_cast<std::size_t>(m));
  const std::int64_t total = F.grid().node_count();
  for (int p = 0; p + 1 <= m; ++p) {
    const SymTensorField& src = F.part(p + 1);
    SymTensorField dst(F.grid(), p, src.support_radius());
    SymTensor t(p + 1, dim);
    for (std::int64_t node = 0; node < total; ++node) {
      std::memcpy(t.data(), src.node_data(node), sizeof(double) * static_cast<std::size_t>(t.size()));
      SymTensor low = scale(fix_last(t, axis), static_cast<double>(p + 1));
      std::memcpy(dst.node_data(node), low.data(), sizeof(double) * static_cast<std::size_t>(low.size()));
    }
    parts.push_back(std::move(dst));
  }
  return TensorBundle(std::move(parts));
}

double check_index_descent(const TensorBundle& F, int k, int axis, const Ray& ray,
                           const QuadratureSpec& quad, const FDStencil& stencil) {
  stencil.validate();
  const int m = F.top_rank();
  if (k < 0 || k > m - 1) throw std::invalid_argument("check_index_descent: need 0 <= k <= m-1");
  const int dim = F.grid().dim;
  if (axis < 0 || axis >= dim) throw std::invalid_argument("check_index_descent: axis out of range");

  const TensorBundle lowered = index_descend(F, axis);
  const double lhs = mrt_bundle(lowered, ray, k, quad);

  int deriv[kMaxDim] = {0, 0, 0, 0};
  deriv[axis] = 1;
  const double d_xi = mixed_partial(
      [&](const Vec& shift) {
        Ray r = ray;
        r.xi = shifted(ray.xi, shift);
        return mrt_bundle(F, r, k, quad);
      },
      deriv, dim, stencil.h_xi, stencil.order);
  const double d_x = mixed_partial(
      [&](const Vec& shift) {
        Ray r = ray;
        r.x = shifted(ray.x, shift);
        return mrt_bundle(F, r, k + 1, quad);
      },
      deriv, dim, stencil.h_x, stencil.order);

  return std::fabs(lhs - (d_xi - d_x));
}

double check_transport_power(const TensorBundle& F, int k, int p, const Ray& ray,
                             const QuadratureSpec& quad, const FDStencil& stencil) {
  stencil.validate();
  if (p < 1) throw std::invalid_argument("check_transport_power: power must be >= 1");
  if (p > 4) throw std::invalid_argument("check_transport_power: stencil depth above 4 unsupported");
  if (k < 0 || k > F.top_rank())
    throw std::invalid_argument("check_transport_power: k out of range");

  // <xi, d_x>^p is the p-th derivative of s -> I^{m,k}F(x + s xi, xi).
  const AxisStencil st = make_axis_stencil(p, stencil.h_x, stencil.order);
  double lhs = 0.0;
  for (std::size_t j = 0; j < st.offsets.size(); ++j) {
    Ray r = ray;
    for (std::size_t a = 0; a < r.x.size(); ++a) r.x[a] += st.offsets[j] * ray.xi[a];
    lhs += st.weights[j] * mrt_bundle(F, r, k, quad);
  }

  double rhs = 0.0;
  if (p <= k) {
    const double sign = (p % 2 == 0) ? 1.0 : -1.0;
    rhs = sign * binom(k, p) * factorial(p) * mrt_bundle(F, ray, k - p, quad);
  }
  return std::fabs(lhs - rhs);
}

double check_euler(const SymTensorField& f, int k, int order, const Ray& ray,
                   const QuadratureSpec& quad, const FDStencil& stencil) {
  if (order < 0) throw std::invalid_argument("check_euler: order must be non-negative");
  if (order > 3) throw std::invalid_argument("check_euler: stencil depth above 3 unsupported");
  if (k < 0) throw std::invalid_argument("check_euler: k must be non-negative");

  const int l = f.rank();
  const PhaseFn fn = [&](const Vec& x, const Vec& xi) {
    Ray r;
    r.x = x;
    r.xi = xi;
    return mrt_rank(f, r, k, quad);
  };
  const double lhs = apply_P(fn, order, ray, f.grid().dim, stencil);

  double factor = 1.0;
  for (int j = 1; j <= order; ++j) factor *= static_cast<double>(l - k - j);
  const double rhs = factor * mrt_rank(f, ray, k, quad);
  return std::fabs(lhs - rhs);
}

double check_homogeneity(const SymTensorField& f, int k, const Ray& ray,
                         const std::vector<double>& lambdas, const QuadratureSpec& quad) {
  const int l = f.rank();
  const double base = mrt_rank(f, ray, k, quad);
  double worst = 0.0;
  for (double lam : lambdas) {
    if (!(lam > 0.0)) throw std::invalid_argument("check_homogeneity: lambdas must be positive");
    Ray r = ray;
    for (std::size_t a = 0; a < r.xi.size(); ++a) r.xi[a] *= lam;
    const double got = mrt_rank(f, r, k, quad);
    const double want = std::pow(lam, l - k - 1) * base;
    const double rel = std::fabs(got - want) / std::max(std::fabs(want), 1e-12);
    worst = std::max(worst, rel);
  }
  return worst;
}

double moment_scale(const TensorBundle& F, int k, const std::vector<Ray>& rays,
                    const QuadratureSpec& quad) {
  double scale = 1e-8;
  for (const Ray& ray : rays) scale = std::max(scale, std::fabs(mrt_bundle(F, ray, k, quad)));
  return scale;
}

}  // namespace mrt
