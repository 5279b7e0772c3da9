#pragma once

#include <functional>
#include <string>

#include "mrt/symtensor.hpp"

namespace mrt {

// Uniform node-centered grid. Nodes are laid out row-major with the last
// axis fastest; node i along axis a sits at origin[a] + i*spacing[a].
struct GridSpec {
  int dim = 0;
  Vec origin{};
  Vec spacing{};
  std::array<int, kMaxDim> counts{};

  void validate() const;
  std::int64_t node_count() const {
    std::int64_t n = 1;
    for (int a = 0; a < dim; ++a) n *= counts[size_t(a)];
    return n;
  }
  Vec center() const {
    Vec c{};
    for (int a = 0; a < dim; ++a)
      c[size_t(a)] = origin[size_t(a)] + 0.5 * spacing[size_t(a)] * double(counts[size_t(a)] - 1);
    return c;
  }
  Vec node_pos(const std::array<int, kMaxDim>& idx) const {
    Vec p{};
    for (int a = 0; a < dim; ++a)
      p[size_t(a)] = origin[size_t(a)] + spacing[size_t(a)] * double(idx[size_t(a)]);
    return p;
  }
  std::int64_t node_linear(const std::array<int, kMaxDim>& idx) const {
    std::int64_t f = 0;
    for (int a = 0; a < dim; ++a) f = f * counts[size_t(a)] + idx[size_t(a)];
    return f;
  }
  bool operator==(const GridSpec& o) const;
};

// Symmetric tensor field sampled on a grid. The support is a ball of radius
// support_radius about the grid center: stored values vanish identically
// outside it, eval() clamps to exact zero there, and the ball must sit at
// least two cells inside the grid box so the cubic window never leaves it.
class SymTensorField {
public:
  SymTensorField() = default;
  SymTensorField(GridSpec grid, int rank, double support_radius);

  static SymTensorField sample(const GridSpec& grid, int rank, double support_radius,
                               const std::function<SymTensor(const Vec&)>& fn);

  const GridSpec& grid() const { return grid_; }
  int rank() const { return rank_; }
  int ncomp() const { return ncomp_; }
  double support_radius() const { return support_radius_; }
  Vec support_center() const { return grid_.center(); }

  double* node_data(std::int64_t node) { return data_.data() + node * ncomp_; }
  const double* node_data(std::int64_t node) const { return data_.data() + node * ncomp_; }
  std::vector<double>& raw() { return data_; }
  const std::vector<double>& raw() const { return data_; }

  // Re-applies the support mask (zero outside the ball). Called by sample();
  // needed again after writing node data by hand.
  void enforce_support();

  // Componentwise tensor-product cubic (4-point Lagrange) interpolation.
  // Total on R^n: exact zero outside the support ball (which the margin rule
  // keeps strictly inside the grid box), interpolated inside it.
  SymTensor eval(const Vec& x) const;
  void eval_into(const Vec& x, double* out) const;

  double l2_norm() const;  // sqrt of cell-volume-weighted sum of |tensor|^2

  // Flat little-endian float64 payload (components fastest, nodes row-major)
  // plus a JSON sidecar carrying the geometry.
  void save(const std::string& path_base) const;
  static SymTensorField load(const std::string& path_base);

private:
  GridSpec grid_;
  int rank_ = 0;
  int ncomp_ = 1;
  double support_radius_ = 0.0;
  std::vector<double> data_;
};

// Bundle of fields of ranks 0..m on one shared grid.
class TensorBundle {
public:
  TensorBundle() = default;
  explicit TensorBundle(std::vector<SymTensorField> parts);

  int top_rank() const { return int(parts_.size()) - 1; }
  const SymTensorField& part(int rank) const { return parts_[size_t(rank)]; }
  SymTensorField& part(int rank) { return parts_[size_t(rank)]; }
  const GridSpec& grid() const { return parts_.front().grid(); }

  void save(const std::string& dir) const;            // per-rank files + manifest.json
  static TensorBundle load(const std::string& dir);

private:
  std::vector<SymTensorField> parts_;
};

}  // namespace mrt
