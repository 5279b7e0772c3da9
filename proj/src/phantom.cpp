#include "mrt/phantom.hpp"

#include <cstring>

namespace mrt {

GridSpec PhantomSpec::make_grid() const {
  GridSpec g;
  g.dim = dim;
  for (int a = 0; a < dim; ++a) {
    g.counts[size_t(a)] = nodes;
    g.spacing[size_t(a)] = 2.0 * extent / double(nodes - 1);
    g.origin[size_t(a)] = -extent;
  }
  return g;
}

double PhantomSpec::resolve_support() const {
  if (support_radius > 0.0) return support_radius;
  double h = 2.0 * extent / double(nodes - 1);
  return extent - 2.5 * h;  // leaves the mandatory two-cell margin
}

std::function<double(const Vec&)> random_profile(Rng& rng, int dim, double radius) {
  struct Blob {
    Vec c;
    Vec invw;
    double amp;
  };
  std::vector<Blob> blobs;
  int nb = 2;
  for (int b = 0; b < nb; ++b) {
    Blob bl{};
    for (int a = 0; a < dim; ++a) {
      bl.c[size_t(a)] = rng.uniform(-0.3 * radius, 0.3 * radius);
      bl.invw[size_t(a)] = 1.0 / rng.uniform(0.18 * radius, 0.35 * radius);
    }
    bl.amp = rng.uniform(-1.0, 1.0);
    if (std::abs(bl.amp) < 0.2) bl.amp = bl.amp < 0 ? -0.2 : 0.2;
    blobs.push_back(bl);
  }
  return [blobs, dim, radius](const Vec& x) {
    double r2 = 0.0;
    for (int a = 0; a < dim; ++a) r2 += x[size_t(a)] * x[size_t(a)];
    double u2 = r2 / (radius * radius);
    if (u2 >= 1.0) return 0.0;
    double window = (1.0 - u2) * (1.0 - u2) * (1.0 - u2);
    double v = 0.0;
    for (const auto& bl : blobs) {
      double q = 0.0;
      for (int a = 0; a < dim; ++a) {
        double d = (x[size_t(a)] - bl.c[size_t(a)]) * bl.invw[size_t(a)];
        q += d * d;
      }
      v += bl.amp * std::exp(-q);
    }
    return v * window;
  };
}

namespace {

std::function<double(const Vec&)> random_poly_bump(Rng& rng, int dim, double radius) {
  // degree-2 polynomial in x/radius times (1-u^2)^4
  std::array<double, 1 + kMaxDim + kMaxDim * kMaxDim> coef{};
  for (auto& c : coef) c = 0.0;
  coef[0] = rng.uniform(-1.0, 1.0);
  for (int a = 0; a < dim; ++a) coef[size_t(1 + a)] = rng.uniform(-1.0, 1.0);
  for (int a = 0; a < dim; ++a)
    for (int b = 0; b < dim; ++b) coef[size_t(1 + kMaxDim + a * kMaxDim + b)] = rng.uniform(-0.5, 0.5);
  return [coef, dim, radius](const Vec& x) {
    double r2 = 0.0;
    for (int a = 0; a < dim; ++a) r2 += x[size_t(a)] * x[size_t(a)];
    double u2 = r2 / (radius * radius);
    if (u2 >= 1.0) return 0.0;
    double w = (1.0 - u2);
    w = w * w;
    w = w * w;  // (1-u^2)^4
    double p = coef[0];
    for (int a = 0; a < dim; ++a) p += coef[size_t(1 + a)] * x[size_t(a)] / radius;
    for (int a = 0; a < dim; ++a)
      for (int b = 0; b < dim; ++b)
        p += coef[size_t(1 + kMaxDim + a * kMaxDim + b)] * x[size_t(a)] * x[size_t(b)] / (radius * radius);
    return p * w;
  };
}

SymTensorField sample_componentwise(const GridSpec& grid, int rank, double radius,
                                    const std::vector<std::function<double(const Vec&)>>& comps) {
  return SymTensorField::sample(grid, rank, radius, [&](const Vec& x) {
    SymTensor t(rank, grid.dim);
    for (int c = 0; c < t.size(); ++c) t[c] = comps[size_t(c)](x);
    return t;
  });
}

}  // namespace

SymTensorField make_phantom_field(const PhantomSpec& spec, int rank, Rng& rng) {
  GridSpec grid = spec.make_grid();
  double radius = spec.resolve_support();
  const int nc = component_count(rank, spec.dim);
  std::vector<std::function<double(const Vec&)>> comps;
  comps.reserve(size_t(nc));
  if (spec.kind == "polynomial-bump") {
    for (int c = 0; c < nc; ++c) comps.push_back(random_poly_bump(rng, spec.dim, radius));
  } else {
    for (int c = 0; c < nc; ++c) comps.push_back(random_profile(rng, spec.dim, radius));
  }
  return sample_componentwise(grid, rank, radius, comps);
}

void project_to_kernel(TensorBundle& F) {
  const int m = F.top_rank();
  const int dim = F.grid().dim;
  const int even_top = 2 * (m / 2);
  const int odd_top = 2 * ((m - 1) / 2) + 1;
  const std::int64_t total = F.grid().node_count();

  // top even rank: f^(even_top) = -i_delta( sum_l i_delta^{m/2 - l} f^(2l-2) )
  for (std::int64_t node = 0; node < total; ++node) {
    {
      SymTensor acc(even_top - 2 >= 0 ? even_top - 2 : 0, dim);
      bool any = false;
      for (int l = 1; 2 * l - 2 < even_top; ++l) {
        const SymTensorField& src = F.part(2 * l - 2);
        SymTensor t(src.rank(), dim);
        std::memcpy(t.data(), src.node_data(node), sizeof(double) * std::size_t(src.ncomp()));
        SymTensor lifted = i_delta_pow(t, m / 2 - l);
        acc = any ? add(acc, lifted) : lifted;
        any = true;
      }
      if (any) {
        SymTensor top = scale(i_delta(acc), -1.0);
        std::memcpy(F.part(even_top).node_data(node), top.data(),
                    sizeof(double) * std::size_t(F.part(even_top).ncomp()));
      } else {
        std::memset(F.part(even_top).node_data(node), 0,
                    sizeof(double) * std::size_t(F.part(even_top).ncomp()));
      }
    }
    if (odd_top >= 1 && odd_top <= m) {
      SymTensor acc(odd_top - 2 >= 0 ? odd_top - 2 : 0, dim);
      bool any = false;
      for (int l = 1; 2 * l - 1 < odd_top; ++l) {
        const SymTensorField& src = F.part(2 * l - 1);
        SymTensor t(src.rank(), dim);
        std::memcpy(t.data(), src.node_data(node), sizeof(double) * std::size_t(src.ncomp()));
        SymTensor lifted = i_delta_pow(t, (m - 1) / 2 - l);
        acc = any ? add(acc, lifted) : lifted;
        any = true;
      }
      if (any) {
        SymTensor top = scale(i_delta(acc), -1.0);
        std::memcpy(F.part(odd_top).node_data(node), top.data(),
                    sizeof(double) * std::size_t(F.part(odd_top).ncomp()));
      } else {
        std::memset(F.part(odd_top).node_data(node), 0,
                    sizeof(double) * std::size_t(F.part(odd_top).ncomp()));
      }
    }
  }
}

TensorBundle make_phantom(const PhantomSpec& spec) {
  if (spec.dim < 2 || spec.dim > kMaxDim) throw std::invalid_argument("PhantomSpec: dim out of range");
  if (spec.top_rank < 0 || spec.top_rank > 6) throw std::invalid_argument("PhantomSpec: rank out of range");
  Rng rng(spec.seed);
  std::vector<SymTensorField> parts;
  parts.reserve(size_t(spec.top_rank + 1));

  if (spec.kind == "gaussian" || spec.kind == "polynomial-bump") {
    for (int r = 0; r <= spec.top_rank; ++r) parts.push_back(make_phantom_field(spec, r, rng));
    return TensorBundle(std::move(parts));
  }
  if (spec.kind == "i_delta-lifted") {
    // every rank r >= 2*lift_level becomes a lift of a random core
    for (int r = 0; r <= spec.top_rank; ++r) {
      int lev = std::min(spec.lift_level, r / 2);
      SymTensorField core = make_phantom_field(spec, r - 2 * lev, rng);
      if (lev == 0) {
        parts.push_back(std::move(core));
        continue;
      }
      SymTensorField out(spec.make_grid(), r, spec.resolve_support());
      const std::int64_t total = out.grid().node_count();
      for (std::int64_t node = 0; node < total; ++node) {
        SymTensor t(core.rank(), spec.dim);
        std::memcpy(t.data(), core.node_data(node), sizeof(double) * std::size_t(core.ncomp()));
        SymTensor lifted = i_delta_pow(t, lev);
        std::memcpy(out.node_data(node), lifted.data(), sizeof(double) * std::size_t(out.ncomp()));
      }
      parts.push_back(std::move(out));
    }
    return TensorBundle(std::move(parts));
  }
  if (spec.kind == "kernel-member") {
    for (int r = 0; r <= spec.top_rank; ++r) parts.push_back(make_phantom_field(spec, r, rng));
    TensorBundle F(std::move(parts));
    project_to_kernel(F);
    return F;
  }
  throw std::invalid_argument("PhantomSpec: unknown kind '" + spec.kind + "'");
}

}  // namespace mrt
