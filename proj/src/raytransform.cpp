#include "mrt/raytransform.hpp"

#include <fstream>

#include "nlohmann/json.hpp"

namespace mrt {

namespace {

// Chord of the support ball |x + t xi - c| <= R, as a t-interval.
bool clip_to_ball(const Vec& x, const Vec& xi, const Vec& c, double R, int dim, double& t0,
                  double& t1) {
  Vec d{};
  for (int a = 0; a < dim; ++a) d[size_t(a)] = x[size_t(a)] - c[size_t(a)];
  double A = dot(xi, xi, dim);
  double B = 2.0 * dot(xi, d, dim);
  double C = dot(d, d, dim) - R * R;
  double disc = B * B - 4.0 * A * C;
  if (disc <= 0.0) return false;
  double sq = std::sqrt(disc);
  t0 = (-B - sq) / (2.0 * A);
  t1 = (-B + sq) / (2.0 * A);
  return true;
}

}  // namespace

double mrt_rank(const SymTensorField& f, const Ray& ray, int k, const QuadratureSpec& quad) {
  const int dim = f.grid().dim;
  ray.validate(dim);
  quad.validate();
  if (k < 0) throw std::invalid_argument("mrt_rank: negative moment order");

  double t0, t1;
  if (!clip_to_ball(ray.x, ray.xi, f.support_center(), f.support_radius(), dim, t0, t1))
    return 0.0;

  // Precompute the multiplicity-weighted xi monomial for every canonical
  // component; per quadrature node only a dot product with the interpolated
  // component vector remains.
  const ComponentSpace& cs = component_space(f.rank(), dim);
  std::vector<double> mono(size_t(cs.size));
  for (int c = 0; c < cs.size; ++c) {
    double p = cs.mult[size_t(c)];
    const MultiIndex& m = cs.index[size_t(c)];
    for (int i = 0; i < f.rank(); ++i) p *= ray.xi[size_t(m[i])];
    mono[size_t(c)] = p;
  }

  const GaussRule& rule = gauss_legendre(quad.order);
  std::vector<double> comp(size_t(cs.size));
  double total = 0.0;
  const double dt = (t1 - t0) / double(quad.panels);
  for (int p = 0; p < quad.panels; ++p) {
    double a = t0 + dt * double(p);
    double mid = a + 0.5 * dt, half = 0.5 * dt;
    double acc = 0.0;
    for (int q = 0; q < quad.order; ++q) {
      double t = mid + half * rule.node[size_t(q)];
      Vec pos{};
      for (int d = 0; d < dim; ++d) pos[size_t(d)] = ray.x[size_t(d)] + t * ray.xi[size_t(d)];
      f.eval_into(pos, comp.data());
      double val = 0.0;
      for (int c = 0; c < cs.size; ++c) val += mono[size_t(c)] * comp[size_t(c)];
      double tk = 1.0;
      for (int i = 0; i < k; ++i) tk *= t;
      acc += rule.weight[size_t(q)] * tk * val;
    }
    total += acc * half;
  }
  return total;
}

double mrt_bundle(const TensorBundle& F, const Ray& ray, int k, const QuadratureSpec& quad) {
  double s = 0.0;
  for (int r = 0; r <= F.top_rank(); ++r) s += mrt_rank(F.part(r), ray, k, quad);
  return s;
}

double mrt_sphere(const TensorBundle& F, const Ray& ray, int k, const QuadratureSpec& quad) {
  Vec xi = ray.xi;
  if (std::abs(norm2(xi, F.grid().dim) - 1.0) > 1e-12)
    throw std::invalid_argument("mrt_sphere: direction must lie on the unit sphere");
  return mrt_bundle(F, ray, k, quad);
}

SymTensor adjoint_apply(const PhaseSpaceFn& psi, const AdjointDomain& dom, int dim, int m,
                        int k, const Vec& x, const QuadratureSpec& quad) {
  dom.validate();
  quad.validate();
  SymTensor out(m, dim);
  const ComponentSpace& cs = component_space(m, dim);
  const GaussRule& xi_rule = gauss_legendre(dom.xi_order);
  const GaussRule& t_rule = gauss_legendre(quad.order);

  // Tensor-product panels over the xi box [-xi_max, xi_max]^dim; integrand
  // vanishes off the annulus because psi does.
  const double lo = -dom.xi_max, hi = dom.xi_max;
  const double dxi = (hi - lo) / double(dom.xi_cells);
  std::array<int, kMaxDim> cell{};
  std::array<int, kMaxDim> node{};
  const double rmin2 = dom.xi_min * dom.xi_min * 0.999999;  // cheap reject only
  for (;;) {
    // one xi panel
    for (;;) {
      Vec xi{};
      double wxi = 1.0;
      for (int a = 0; a < dim; ++a) {
        double mid = lo + dxi * (double(cell[size_t(a)]) + 0.5);
        xi[size_t(a)] = mid + 0.5 * dxi * xi_rule.node[size_t(node[size_t(a)])];
        wxi *= 0.5 * dxi * xi_rule.weight[size_t(node[size_t(a)])];
      }
      double r2 = dot(xi, xi, dim);
      if (r2 >= rmin2 && r2 <= dom.xi_max * dom.xi_max * 1.000001) {
        // t runs over the chord where x - t xi stays inside psi's x-ball
        Vec nxi{};
        for (int a = 0; a < dim; ++a) nxi[size_t(a)] = -xi[size_t(a)];
        double t0, t1;
        if (clip_to_ball(x, nxi, dom.x_center, dom.x_radius, dim, t0, t1)) {
          const double dt = (t1 - t0) / double(quad.panels);
          double inner_acc = 0.0;
          for (int p = 0; p < quad.panels; ++p) {
            double a0 = t0 + dt * double(p);
            double mid = a0 + 0.5 * dt, half = 0.5 * dt;
            double acc = 0.0;
            for (int q = 0; q < quad.order; ++q) {
              double t = mid + half * t_rule.node[size_t(q)];
              Vec pos{};
              for (int d = 0; d < dim; ++d)
                pos[size_t(d)] = x[size_t(d)] - t * xi[size_t(d)];
              double tk = 1.0;
              for (int i = 0; i < k; ++i) tk *= t;
              acc += t_rule.weight[size_t(q)] * tk * psi(pos, xi);
            }
            inner_acc += acc * half;
          }
          for (int c = 0; c < cs.size; ++c) {
            double mono = 1.0;
            const MultiIndex& mi = cs.index[size_t(c)];
            for (int i = 0; i < m; ++i) mono *= xi[size_t(mi[i])];
            out[c] += wxi * mono * inner_acc;
          }
        }
      }
      int a = dim - 1;
      while (a >= 0 && ++node[size_t(a)] == dom.xi_order) {
        node[size_t(a)] = 0;
        --a;
      }
      if (a < 0) break;
    }
    int a = dim - 1;
    while (a >= 0 && ++cell[size_t(a)] == dom.xi_cells) {
      cell[size_t(a)] = 0;
      --a;
    }
    if (a < 0) break;
  }
  return out;
}

MomentSamples sample_moments(const TensorBundle& F, const std::vector<Ray>& rays,
                             const std::vector<int>& ks, const QuadratureSpec& quad,
                             int threads) {
  MomentSamples s;
  s.ks = ks;
  s.rays = rays;
  s.dim = F.grid().dim;
  s.values.assign(ks.size() * rays.size(), 0.0);
  parallel_for(std::int64_t(rays.size()), [&](std::int64_t j) {
    for (std::size_t ki = 0; ki < ks.size(); ++ki)
      s.values[ki * rays.size() + std::size_t(j)] =
          mrt_bundle(F, rays[std::size_t(j)], ks[ki], quad);
  }, threads);
  return s;
}

void write_moments_csv(const MomentSamples& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_moments_csv: cannot open " + path);
  out << "k";
  for (int a = 0; a < s.dim; ++a) out << ",x" << (a + 1);
  for (int a = 0; a < s.dim; ++a) out << ",xi" << (a + 1);
  out << ",value\n";
  char buf[64];
  for (std::size_t ki = 0; ki < s.ks.size(); ++ki) {
    for (std::size_t j = 0; j < s.rays.size(); ++j) {
      out << s.ks[ki];
      for (int a = 0; a < s.dim; ++a) {
        std::snprintf(buf, sizeof buf, ",%.17g", s.rays[j].x[size_t(a)]);
        out << buf;
      }
      for (int a = 0; a < s.dim; ++a) {
        std::snprintf(buf, sizeof buf, ",%.17g", s.rays[j].xi[size_t(a)]);
        out << buf;
      }
      std::snprintf(buf, sizeof buf, ",%.17g", s.value(int(ki), j));
      out << buf << "\n";
    }
  }
}

std::vector<Ray> load_ray_grid_json(const std::string& path, int dim) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_ray_grid_json: cannot open " + path);
  nlohmann::json doc = nlohmann::json::parse(in);
  std::vector<Ray> rays;
  for (const auto& r : doc.at("rays")) {
    auto xv = r.at("x").get<std::vector<double>>();
    auto xiv = r.at("xi").get<std::vector<double>>();
    if (int(xv.size()) != dim || int(xiv.size()) != dim)
      throw std::runtime_error("load_ray_grid_json: ray dimension mismatch");
    Ray ray;
    for (int a = 0; a < dim; ++a) {
      ray.x[size_t(a)] = xv[size_t(a)];
      ray.xi[size_t(a)] = xiv[size_t(a)];
    }
    ray.validate(dim);
    rays.push_back(ray);
  }
  return rays;
}

}  // namespace mrt
