#include "mrt/tensorfield.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "nlohmann/json.hpp"

namespace mrt {

using nlohmann::json;

void GridSpec::validate() const {
  if (dim < 2 || dim > kMaxDim) throw std::invalid_argument("GridSpec: dim must be in 2..4");
  for (int a = 0; a < dim; ++a) {
    if (!(spacing[size_t(a)] > 0.0)) throw std::invalid_argument("GridSpec: spacing must be positive");
    if (counts[size_t(a)] < 4) throw std::invalid_argument("GridSpec: need at least 4 nodes per axis");
  }
}

bool GridSpec::operator==(const GridSpec& o) const {
  if (dim != o.dim) return false;
  for (int a = 0; a < dim; ++a) {
    if (origin[size_t(a)] != o.origin[size_t(a)]) return false;
    if (spacing[size_t(a)] != o.spacing[size_t(a)]) return false;
    if (counts[size_t(a)] != o.counts[size_t(a)]) return false;
  }
  return true;
}

SymTensorField::SymTensorField(GridSpec grid, int rank, double support_radius)
    : grid_(grid), rank_(rank), support_radius_(support_radius) {
  grid_.validate();
  if (rank < 0 || rank > kMaxRank) throw std::invalid_argument("SymTensorField: rank out of range");
  if (!(support_radius > 0.0)) throw std::invalid_argument("SymTensorField: support radius must be positive");
  // the support ball plus the two-cell interpolation margin must fit the box
  for (int a = 0; a < grid_.dim; ++a) {
    double half = 0.5 * grid_.spacing[size_t(a)] * double(grid_.counts[size_t(a)] - 1);
    if (support_radius_ + 2.0 * grid_.spacing[size_t(a)] > half)
      throw std::invalid_argument("SymTensorField: support ball too close to the grid boundary");
  }
  ncomp_ = component_count(rank_, grid_.dim);
  data_.assign(std::size_t(grid_.node_count()) * std::size_t(ncomp_), 0.0);
}

SymTensorField SymTensorField::sample(const GridSpec& grid, int rank, double support_radius,
                                      const std::function<SymTensor(const Vec&)>& fn) {
  SymTensorField f(grid, rank, support_radius);
  const Vec c = f.support_center();
  std::array<int, kMaxDim> idx{};
  const std::int64_t total = grid.node_count();
  for (std::int64_t node = 0; node < total; ++node) {
    std::int64_t rem = node;
    for (int a = grid.dim - 1; a >= 0; --a) {
      idx[size_t(a)] = int(rem % grid.counts[size_t(a)]);
      rem /= grid.counts[size_t(a)];
    }
    Vec p = grid.node_pos(idx);
    Vec d{};
    for (int a = 0; a < grid.dim; ++a) d[size_t(a)] = p[size_t(a)] - c[size_t(a)];
    if (norm2(d, grid.dim) >= support_radius) continue;  // stays exactly zero
    SymTensor t = fn(p);
    if (t.rank() != rank || t.dim() != grid.dim)
      throw std::invalid_argument("SymTensorField::sample: callback shape mismatch");
    std::memcpy(f.node_data(node), t.data(), sizeof(double) * std::size_t(f.ncomp_));
  }
  return f;
}

void SymTensorField::enforce_support() {
  const Vec c = support_center();
  std::array<int, kMaxDim> idx{};
  const std::int64_t total = grid_.node_count();
  for (std::int64_t node = 0; node < total; ++node) {
    std::int64_t rem = node;
    for (int a = grid_.dim - 1; a >= 0; --a) {
      idx[size_t(a)] = int(rem % grid_.counts[size_t(a)]);
      rem /= grid_.counts[size_t(a)];
    }
    Vec p = grid_.node_pos(idx);
    Vec d{};
    for (int a = 0; a < grid_.dim; ++a) d[size_t(a)] = p[size_t(a)] - c[size_t(a)];
    if (norm2(d, grid_.dim) >= support_radius_)
      std::memset(node_data(node), 0, sizeof(double) * std::size_t(ncomp_));
  }
}

namespace {

// Lagrange cubic through nodes at -1,0,1,2 evaluated at fractional s in [0,1].
inline void cubic_weights(double s, double w[4]) {
  w[0] = -s * (s - 1.0) * (s - 2.0) / 6.0;
  w[1] = (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0;
  w[2] = -s * (s + 1.0) * (s - 2.0) / 2.0;
  w[3] = s * (s + 1.0) * (s - 1.0) / 6.0;
}

}  // namespace

void SymTensorField::eval_into(const Vec& x, double* out) const {
  for (int c = 0; c < ncomp_; ++c) out[c] = 0.0;
  const Vec ctr = support_center();
  Vec d{};
  for (int a = 0; a < grid_.dim; ++a) d[size_t(a)] = x[size_t(a)] - ctr[size_t(a)];
  if (norm2(d, grid_.dim) >= support_radius_) return;

  int base[kMaxDim];
  double w[kMaxDim][4];
  for (int a = 0; a < grid_.dim; ++a) {
    double u = (x[size_t(a)] - grid_.origin[size_t(a)]) / grid_.spacing[size_t(a)];
    if (u < 0.0 || u > double(grid_.counts[size_t(a)] - 1))
      throw std::domain_error("SymTensorField::eval: point outside the grid box");
    int i = int(std::floor(u));
    if (i < 1) i = 1;
    if (i > grid_.counts[size_t(a)] - 3) i = grid_.counts[size_t(a)] - 3;
    base[a] = i - 1;
    cubic_weights(u - double(i), w[a]);
  }

  // Tensor-product accumulation over the 4^dim window.
  const int dim = grid_.dim;
  std::array<int, kMaxDim> off{};
  for (;;) {
    double wt = 1.0;
    std::int64_t node = 0;
    for (int a = 0; a < dim; ++a) {
      wt *= w[a][off[size_t(a)]];
      node = node * grid_.counts[size_t(a)] + (base[a] + off[size_t(a)]);
    }
    const double* src = node_data(node);
    for (int c = 0; c < ncomp_; ++c) out[c] += wt * src[c];
    int a = dim - 1;
    while (a >= 0 && ++off[size_t(a)] == 4) {
      off[size_t(a)] = 0;
      --a;
    }
    if (a < 0) break;
  }
}

SymTensor SymTensorField::eval(const Vec& x) const {
  SymTensor t(rank_, grid_.dim);
  eval_into(x, t.data());
  return t;
}

double SymTensorField::l2_norm() const {
  double cell = 1.0;
  for (int a = 0; a < grid_.dim; ++a) cell *= grid_.spacing[size_t(a)];
  double s = 0.0;
  const std::int64_t total = grid_.node_count();
  const ComponentSpace& cs = component_space(rank_, grid_.dim);
  for (std::int64_t node = 0; node < total; ++node) {
    const double* v = node_data(node);
    for (int c = 0; c < ncomp_; ++c) s += cs.mult[size_t(c)] * v[c] * v[c];
  }
  return std::sqrt(s * cell);
}

void SymTensorField::save(const std::string& path_base) const {
  {
    std::ofstream out(path_base + ".f64", std::ios::binary);
    if (!out) throw std::runtime_error("SymTensorField::save: cannot open " + path_base + ".f64");
    // Raw little-endian doubles; in-memory layout already matches the file
    // contract (components fastest within a node, nodes row-major).
    const std::int64_t total = grid_.node_count();
    out.write(reinterpret_cast<const char*>(data_.data()),
              std::streamsize(sizeof(double) * std::size_t(total) * std::size_t(ncomp_)));
    if (!out) throw std::runtime_error("SymTensorField::save: write failed");
  }
  json meta;
  meta["dim"] = grid_.dim;
  meta["rank"] = rank_;
  meta["origin"] = std::vector<double>(grid_.origin.begin(), grid_.origin.begin() + grid_.dim);
  meta["spacing"] = std::vector<double>(grid_.spacing.begin(), grid_.spacing.begin() + grid_.dim);
  meta["counts"] = std::vector<int>(grid_.counts.begin(), grid_.counts.begin() + grid_.dim);
  meta["support_radius"] = support_radius_;
  std::ofstream js(path_base + ".json");
  if (!js) throw std::runtime_error("SymTensorField::save: cannot open " + path_base + ".json");
  js << meta.dump(2) << "\n";
}

SymTensorField SymTensorField::load(const std::string& path_base) {
  std::ifstream js(path_base + ".json");
  if (!js) throw std::runtime_error("SymTensorField::load: missing sidecar " + path_base + ".json");
  json meta = json::parse(js);
  GridSpec g;
  g.dim = meta.at("dim").get<int>();
  auto origin = meta.at("origin").get<std::vector<double>>();
  auto spacing = meta.at("spacing").get<std::vector<double>>();
  auto counts = meta.at("counts").get<std::vector<int>>();
  if (int(origin.size()) != g.dim || int(spacing.size()) != g.dim || int(counts.size()) != g.dim)
    throw std::runtime_error("SymTensorField::load: sidecar arrays disagree with dim");
  for (int a = 0; a < g.dim; ++a) {
    g.origin[size_t(a)] = origin[size_t(a)];
    g.spacing[size_t(a)] = spacing[size_t(a)];
    g.counts[size_t(a)] = counts[size_t(a)];
  }
  SymTensorField f(g, meta.at("rank").get<int>(), meta.at("support_radius").get<double>());
  std::ifstream in(path_base + ".f64", std::ios::binary);
  if (!in) throw std::runtime_error("SymTensorField::load: missing payload " + path_base + ".f64");
  in.read(reinterpret_cast<char*>(f.data_.data()),
          std::streamsize(sizeof(double) * f.data_.size()));
  if (std::size_t(in.gcount()) != sizeof(double) * f.data_.size())
    throw std::runtime_error("SymTensorField::load: payload size mismatch");
  char extra;
  if (in.read(&extra, 1))
    throw std::runtime_error("SymTensorField::load: payload larger than sidecar describes");
  return f;
}

TensorBundle::TensorBundle(std::vector<SymTensorField> parts) : parts_(std::move(parts)) {
  if (parts_.empty()) throw std::invalid_argument("TensorBundle: no parts");
  for (int r = 0; r <= top_rank(); ++r) {
    if (parts_[size_t(r)].rank() != r)
      throw std::invalid_argument("TensorBundle: parts must be ranks 0..m in order");
    if (!(parts_[size_t(r)].grid() == parts_.front().grid()))
      throw std::invalid_argument("TensorBundle: parts must share one grid");
  }
}

void TensorBundle::save(const std::string& dir) const {
  std::filesystem::create_directories(dir);
  json manifest;
  manifest["top_rank"] = top_rank();
  json files = json::array();
  for (int r = 0; r <= top_rank(); ++r) {
    std::string base = "rank" + std::to_string(r);
    parts_[size_t(r)].save(dir + "/" + base);
    files.push_back(base);
  }
  manifest["parts"] = files;
  std::ofstream out(dir + "/manifest.json");
  if (!out) throw std::runtime_error("TensorBundle::save: cannot open manifest");
  out << manifest.dump(2) << "\n";
}

TensorBundle TensorBundle::load(const std::string& dir) {
  std::ifstream in(dir + "/manifest.json");
  if (!in) throw std::runtime_error("TensorBundle::load: missing manifest in " + dir);
  json manifest = json::parse(in);
  auto files = manifest.at("parts").get<std::vector<std::string>>();
  std::vector<SymTensorField> parts;
  parts.reserve(files.size());
  for (const auto& base : files) parts.push_back(SymTensorField::load(dir + "/" + base));
  return TensorBundle(std::move(parts));
}

}  // namespace mrt
