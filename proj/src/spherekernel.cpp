#include "mrt/spherekernel.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "mrt/phantom.hpp"

namespace mrt {

ThetaGrid make_theta_grid(int ambient, int resolution) {
  ThetaGrid g;
  g.ambient = ambient;
  if (ambient == 1) {
    Vec plus{};
    plus[0] = 1.0;
    Vec minus{};
    minus[0] = -1.0;
    g.dirs = {plus, minus};
    g.weights = {1.0, 1.0};
    return g;
  }
  if (ambient == 2) {
    if (resolution < 2) throw std::invalid_argument("make_theta_grid: need >= 2 angles");
    const double w = 2.0 * M_PI / double(resolution);
    for (int t = 0; t < resolution; ++t) {
      const double phi = 2.0 * M_PI * double(t) / double(resolution);
      Vec d{};
      d[0] = std::cos(phi);
      d[1] = std::sin(phi);
      g.dirs.push_back(d);
      g.weights.push_back(w);
    }
    return g;
  }
  if (ambient == 3) {
    if (resolution < 2) throw std::invalid_argument("make_theta_grid: need polar order >= 2");
    const GaussRule& rule = gauss_legendre(resolution);
    const int azim = 2 * resolution;
    const double wphi = 2.0 * M_PI / double(azim);
    for (int i = 0; i < resolution; ++i) {
      const double c = rule.node[std::size_t(i)];
      const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
      for (int a = 0; a < azim; ++a) {
        const double phi = 2.0 * M_PI * double(a) / double(azim);
        Vec d{};
        d[0] = s * std::cos(phi);
        d[1] = s * std::sin(phi);
        d[2] = c;
        g.dirs.push_back(d);
        g.weights.push_back(rule.weight[std::size_t(i)] * wphi);
      }
    }
    return g;
  }
  throw std::invalid_argument("make_theta_grid: ambient must be 1, 2, or 3");
}

std::vector<int> nonaxis_axes(int dim, int axis) {
  if (dim < 2 || dim > kMaxDim) throw std::invalid_argument("nonaxis_axes: dim out of range");
  if (axis < 0 || axis >= dim) throw std::invalid_argument("nonaxis_axes: axis out of range");
  std::vector<int> out;
  out.reserve(std::size_t(dim - 1));
  for (int a = 0; a < dim; ++a)
    if (a != axis) out.push_back(a);
  return out;
}

std::array<std::complex<double>, kMaxDim> null_vector(int dim, int axis, const Vec& omega) {
  const std::vector<int> rest = nonaxis_axes(dim, axis);
  std::array<std::complex<double>, kMaxDim> zeta{};
  zeta[std::size_t(axis)] = std::complex<double>(1.0, 0.0);
  for (int q = 0; q < dim - 1; ++q)
    zeta[std::size_t(rest[std::size_t(q)])] = std::complex<double>(0.0, omega[std::size_t(q)]);
  return zeta;
}

void SliceSpec::validate() const {
  if (dim < 2 || dim > kMaxDim) throw std::invalid_argument("SliceSpec: dim out of range");
  if (rank < 0 || rank > kMaxRank) throw std::invalid_argument("SliceSpec: rank out of range");
  if (axis < 0 || axis >= dim) throw std::invalid_argument("SliceSpec: axis out of range");
  if (!(r_max > 0.0)) throw std::invalid_argument("SliceSpec: r_max must be positive");
  if (r_nodes < 9) throw std::invalid_argument("SliceSpec: need at least 9 radial nodes");
  if (thetas.ambient != dim - 1)
    throw std::invalid_argument("SliceSpec: theta grid must live in dim-1 coordinates");
  if (thetas.dirs.empty() || thetas.dirs.size() != thetas.weights.size())
    throw std::invalid_argument("SliceSpec: malformed theta grid");
}

SliceField::SliceField(SliceSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  ncomp_ = component_count(spec_.rank, spec_.dim);
  data_.assign(std::size_t(spec_.thetas.count()) * std::size_t(spec_.r_nodes) *
                   std::size_t(ncomp_),
               0.0);
}

double SliceField::r(int ri) const { return -spec_.r_max + spec_.dr() * double(ri); }

Vec SliceField::point(int ti, int ri) const {
  const std::vector<int> rest = nonaxis_axes(spec_.dim, spec_.axis);
  const Vec& dir = spec_.thetas.dirs[std::size_t(ti)];
  const double rr = r(ri);
  Vec p = spec_.center;
  p[std::size_t(spec_.axis)] = spec_.slice_coord;
  for (int q = 0; q < spec_.dim - 1; ++q)
    p[std::size_t(rest[std::size_t(q)])] += rr * dir[std::size_t(q)];
  return p;
}

double* SliceField::values(int ti, int ri) {
  return data_.data() +
         (std::size_t(ti) * std::size_t(spec_.r_nodes) + std::size_t(ri)) * std::size_t(ncomp_);
}

const double* SliceField::values(int ti, int ri) const {
  return data_.data() +
         (std::size_t(ti) * std::size_t(spec_.r_nodes) + std::size_t(ri)) * std::size_t(ncomp_);
}

SymTensor SliceField::tensor(int ti, int ri) const {
  SymTensor t(spec_.rank, spec_.dim);
  std::memcpy(t.data(), values(ti, ri), sizeof(double) * std::size_t(ncomp_));
  return t;
}

void SliceField::set_tensor(int ti, int ri, const SymTensor& t) {
  if (t.rank() != spec_.rank || t.dim() != spec_.dim)
    throw std::invalid_argument("SliceField: tensor shape mismatch");
  std::memcpy(values(ti, ri), t.data(), sizeof(double) * std::size_t(ncomp_));
}

SliceField SliceField::sample(const SliceSpec& spec,
                              const std::function<SymTensor(const Vec&)>& fn) {
  SliceField out(spec);
  for (int t = 0; t < spec.thetas.count(); ++t)
    for (int j = 0; j < spec.r_nodes; ++j) out.set_tensor(t, j, fn(out.point(t, j)));
  return out;
}

SliceField SliceField::from_field(const SymTensorField& f, SliceSpec spec) {
  spec.rank = f.rank();
  spec.dim = f.grid().dim;
  SliceField out(spec);
  for (int ti = 0; ti < spec.thetas.count(); ++ti)
    for (int j = 0; j < spec.r_nodes; ++j) f.eval_into(out.point(ti, j), out.values(ti, j));
  return out;
}

double SliceField::l2_norm() const {
  double acc = 0.0;
  const double dr = spec_.dr();
  for (int t = 0; t < spec_.thetas.count(); ++t) {
    const double wt = spec_.thetas.weights[std::size_t(t)] * dr;
    for (int j = 0; j < spec_.r_nodes; ++j) {
      const SymTensor f = tensor(t, j);
      acc += wt * inner(f, f);
    }
  }
  return std::sqrt(acc);
}

MomentConditionReport moment_conditions(const SliceField& f) {
  const SliceSpec& spec = f.spec();
  const int m = spec.rank;
  MomentConditionReport rep;
  rep.alpha_count = m + 1;
  rep.theta_count = spec.thetas.count();
  rep.residual.assign(std::size_t(rep.alpha_count) * std::size_t(rep.theta_count),
                      std::complex<double>(0.0, 0.0));
  const double dr = spec.dr();
  for (int t = 0; t < rep.theta_count; ++t) {
    const auto zeta = null_vector(spec.dim, spec.axis, spec.thetas.dirs[std::size_t(t)]);
    for (int j = 0; j < spec.r_nodes; ++j) {
      const std::complex<double> base = contract_full(f.tensor(t, j), zeta) * dr;
      const double rj = f.r(j);
      double rpow = 1.0;
      for (int alpha = 0; alpha <= m; ++alpha) {
        rep.residual[std::size_t(alpha) * std::size_t(rep.theta_count) + std::size_t(t)] +=
            rpow * base;
        rpow *= rj;
      }
    }
  }
  for (const std::complex<double>& z : rep.residual) rep.max_abs = std::max(rep.max_abs, std::abs(z));
  return rep;
}

SymTensor slot_piece(const SymTensor& g, int axis, int p) {
  const int m = g.rank();
  const int n = g.dim();
  if (p < 0 || p > m) throw std::invalid_argument("slot_piece: p out of range");
  const std::vector<int> rest = nonaxis_axes(n, axis);
  const ComponentSpace& red = component_space(p, n - 1);
  SymTensor out(p, n - 1);
  const double c = binom(m, p);
  for (int o = 0; o < red.size; ++o) {
    const MultiIndex& jj = red.index[std::size_t(o)];
    MultiIndex full;
    full.rank = std::uint8_t(m);
    for (int q = 0; q < p; ++q) full.ix[std::size_t(q)] = std::uint8_t(rest[std::size_t(jj[q])]);
    for (int q = p; q < m; ++q) full.ix[std::size_t(q)] = std::uint8_t(axis);
    full.canonicalize();
    out[o] = c * g.at(full);
  }
  return out;
}

SymTensor construct_v_point(const SymTensor& f, int axis) {
  const int m = f.rank();
  const int n = f.dim();
  if (m < 2) throw std::invalid_argument("construct_v_point: rank must be >= 2");
  if (axis < 0 || axis >= n) throw std::invalid_argument("construct_v_point: axis out of range");
  const std::vector<int> rest = nonaxis_axes(n, axis);
  int inv[kMaxDim];
  for (int q = 0; q < n - 1; ++q) inv[rest[std::size_t(q)]] = q;

  // Lift table: lifted[q][e] = i_delta^e slot_piece(f, axis, q), built lazily.
  std::vector<std::vector<SymTensor>> lifted(std::size_t(m + 1));
  auto lift = [&](int q, int e) -> const SymTensor& {
    std::vector<SymTensor>& row = lifted[std::size_t(q)];
    if (row.empty()) row.push_back(slot_piece(f, axis, q));
    while (int(row.size()) <= e) row.push_back(i_delta(row.back()));
    return row[std::size_t(e)];
  };

  SymTensor v(m - 2, n);
  const ComponentSpace& full = component_space(m - 2, n);
  for (int o = 0; o < full.size; ++o) {
    const MultiIndex& vi = full.index[std::size_t(o)];
    MultiIndex jj;
    int p = 0;
    for (int q = 0; q < m - 2; ++q)
      if (vi[q] != axis) jj.ix[std::size_t(p++)] = std::uint8_t(inv[vi[q]]);
    jj.rank = std::uint8_t(p);
    jj.canonicalize();
    double acc = 0.0;
    double sign = 1.0;
    for (int l = 1; p + 2 - 2 * l >= 0; ++l) {
      acc += sign * lift(p + 2 - 2 * l, l - 1).at(jj);
      sign = -sign;
    }
    v[o] = acc / binom(m - 2, m - p - 2);
  }
  return v;
}

SliceField construct_v(const SliceField& f) {
  const SliceSpec& in = f.spec();
  if (in.rank < 2) throw std::invalid_argument("construct_v: rank must be >= 2");
  SliceSpec spec = in;
  spec.rank = in.rank - 2;
  SliceField out(spec);
  for (int t = 0; t < spec.thetas.count(); ++t)
    for (int j = 0; j < spec.r_nodes; ++j)
      out.set_tensor(t, j, construct_v_point(f.tensor(t, j), in.axis));
  return out;
}

GPair build_G(const TensorBundle& F) {
  const int m = F.top_rank();
  const int dim = F.grid().dim;
  const double radius = F.part(0).support_radius();
  const int keven = m / 2;
  const int kodd = (m - 1) / 2;  // only meaningful when m >= 1
  const int rank1 = 2 * keven;
  const int rank2 = m >= 1 ? 2 * kodd + 1 : 0;

  GPair out{SymTensorField(F.grid(), rank1, radius), SymTensorField(F.grid(), rank2, radius)};
  const std::int64_t total = F.grid().node_count();
  for (std::int64_t node = 0; node < total; ++node) {
    SymTensor g1(rank1, dim);
    for (int l = 0; l <= keven; ++l) {
      const SymTensorField& src = F.part(2 * l);
      SymTensor t(src.rank(), dim);
      std::memcpy(t.data(), src.node_data(node), sizeof(double) * std::size_t(src.ncomp()));
      g1 = add(g1, i_delta_pow(t, keven - l));
    }
    std::memcpy(out.G1.node_data(node), g1.data(), sizeof(double) * std::size_t(out.G1.ncomp()));
    if (m >= 1) {
      SymTensor g2(rank2, dim);
      for (int l = 0; l <= kodd; ++l) {
        const SymTensorField& src = F.part(2 * l + 1);
        SymTensor t(src.rank(), dim);
        std::memcpy(t.data(), src.node_data(node), sizeof(double) * std::size_t(src.ncomp()));
        g2 = add(g2, i_delta_pow(t, kodd - l));
      }
      std::memcpy(out.G2.node_data(node), g2.data(), sizeof(double) * std::size_t(out.G2.ncomp()));
    }
  }
  out.G1.enforce_support();
  out.G2.enforce_support();
  return out;
}

double plancherel_weight(int m, int q) {
  if (q < 0 || q > m) throw std::invalid_argument("plancherel_weight: q out of range");
  return 1.0 / binom(m, q);
}

PlancherelReport plancherel_check(const SymTensor& g, int axis) {
  const int m = g.rank();
  if (m % 2 != 0) throw std::invalid_argument("plancherel_check: rank must be even");
  const int k = m / 2;
  PlancherelReport rep;
  rep.piece_norm.resize(std::size_t(m + 1));
  for (int p = 0; p <= m; ++p) rep.piece_norm[std::size_t(p)] = norm(slot_piece(g, axis, p));
  rep.term.resize(std::size_t(k + 1));
  {
    const SymTensor top = slot_piece(g, axis, m);
    rep.term[0] = inner(top, top);
  }
  for (int l = 1; l <= k; ++l) {
    const SymTensor piece = slot_piece(g, axis, m - 2 * l);
    rep.term[std::size_t(l)] = plancherel_weight(m, m - 2 * l) * inner(piece, piece);
  }
  for (double t : rep.term) rep.total += t;
  return rep;
}

KernelReport kernel_membership(const TensorBundle& F, const std::vector<Ray>& rays, double tol,
                               const QuadratureSpec& quad) {
  if (rays.empty()) throw std::invalid_argument("kernel_membership: need at least one ray");
  const int m = F.top_rank();
  KernelReport rep;
  rep.tol = tol;
  rep.per_k_residual.assign(std::size_t(m + 1), 0.0);
  for (const Ray& ray : rays)
    for (int k = 0; k <= m; ++k) {
      const double val = std::abs(mrt_sphere(F, ray, k, quad));
      rep.per_k_residual[std::size_t(k)] = std::max(rep.per_k_residual[std::size_t(k)], val);
    }
  double fwd = 0.0;
  for (double v : rep.per_k_residual) fwd = std::max(fwd, v);
  rep.in_kernel_forward = fwd <= tol;
  rep.in_kernel_top_only = rep.per_k_residual[std::size_t(m)] <= tol;

  double sq = 0.0;
  for (int r = 0; r <= m; ++r) {
    const double nr = F.part(r).l2_norm();
    sq += nr * nr;
  }
  rep.bundle_norm = std::sqrt(sq);
  const double scale = std::max(1.0, rep.bundle_norm);
  const GPair g = build_G(F);
  rep.residual_even = g.G1.l2_norm() / scale;
  rep.residual_odd = g.G2.l2_norm() / scale;
  rep.in_kernel_reverse = rep.residual_even <= tol && rep.residual_odd <= tol;
  rep.agree = rep.in_kernel_forward == rep.in_kernel_reverse;
  return rep;
}

std::vector<Ray> random_unit_rays(int dim, int count, std::uint64_t seed, double x_radius) {
  if (dim < 2 || dim > kMaxDim) throw std::invalid_argument("random_unit_rays: dim out of range");
  if (count < 1) throw std::invalid_argument("random_unit_rays: count must be positive");
  Rng rng(seed);
  std::vector<Ray> rays;
  rays.reserve(std::size_t(count));
  while (int(rays.size()) < count) {
    Ray ray;
    for (int a = 0; a < dim; ++a) ray.x[std::size_t(a)] = rng.uniform(-x_radius, x_radius);
    Vec v{};
    double n2 = 0.0;
    for (int a = 0; a < dim; ++a) {
      v[std::size_t(a)] = rng.uniform(-1.0, 1.0);
      n2 += v[std::size_t(a)] * v[std::size_t(a)];
    }
    if (n2 < 0.01 || n2 > 1.0) continue;  // rejection keeps directions uniform
    const double inv = 1.0 / std::sqrt(n2);
    for (int a = 0; a < dim; ++a) ray.xi[std::size_t(a)] = v[std::size_t(a)] * inv;
    rays.push_back(ray);
  }
  return rays;
}

}  // namespace mrt
