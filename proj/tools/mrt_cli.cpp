// mrt: command-line driver for the momentum ray transform library.
//
// Subcommands:
//   phantom    generate a deterministic tensor bundle and save it
//   transform  sample momentum transforms over a ray grid, write a CSV
//   invert     reconstruct a bundle from its transforms, or a scalar field
//              from a moment-sample CSV, and compare against the reference
//   verify     spot-check one differential identity, write a pass/fail report
//   kernel     test null-space membership and emit the constructive potential
//   recover    run the staged structure-driven recovery on a 3-D bundle
//
// Exit codes: 0 success / verification passed, 1 tolerance or verification
// failure, 2 I/O or configuration error.
//
// Reports carry no timestamps and the library's parallel loops assign work
// deterministically, so a rerun with the same config and seed reproduces
// every output byte for byte.  The CLI layer itself never spawns threads;
// worker counts only reach the library through the config / --threads flag,
// capped by the MRT_THREADS environment variable.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "mrt/cliconfig.hpp"
#include "mrt/spherekernel.hpp"
#include "mrt/symtensor.hpp"

namespace {

using nlohmann::json;
using namespace mrt;

struct Options {
  std::string config_path;
  std::string out_override;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = -1;  // -1 = keep the config value
};

RunConfig effective_config(const Options& opt) {
  RunConfig cfg = opt.config_path.empty() ? RunConfig{} : load_run_config(opt.config_path);
  if (!opt.out_override.empty()) cfg.out_dir = opt.out_override;
  if (opt.seed_set) cfg.phantom.seed = opt.seed;
  if (opt.threads >= 0) cfg.threads = opt.threads;
  cfg.validate();
  return cfg;
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error("write failed for " + path);
}

std::string ensure_out_dir(const RunConfig& cfg) {
  std::filesystem::create_directories(cfg.out_dir);
  return cfg.out_dir;
}

// The phantom described by the config, scaled by the configured amplitude.
TensorBundle generate_phantom(const RunConfig& cfg) {
  TensorBundle F = make_phantom(cfg.phantom);
  if (cfg.amplitude != 1.0)
    for (int r = 0; r <= F.top_rank(); ++r)
      for (double& v : F.part(r).raw()) v *= cfg.amplitude;
  return F;
}

// Bundle input rule shared by transform/invert/kernel/recover: an explicit
// bundle directory wins; otherwise the configured phantom is generated.
TensorBundle acquire_bundle(const RunConfig& cfg) {
  if (!cfg.bundle_path.empty()) return TensorBundle::load(cfg.bundle_path);
  return generate_phantom(cfg);
}

// Parallel-beam ray grid in the plane, angle-major, matching the geometry
// the inversion pipeline samples: direction (cos, sin) at angle pi*a/angles,
// base point offset along the perpendicular (-sin, cos).
std::vector<Ray> beam_rays(int angles, int offsets, double extent) {
  std::vector<Ray> rays;
  rays.reserve(std::size_t(angles) * std::size_t(offsets));
  for (int a = 0; a < angles; ++a) {
    const double phi = M_PI * double(a) / double(angles);
    const double c = std::cos(phi), s = std::sin(phi);
    for (int j = 0; j < offsets; ++j) {
      const double off = -extent + 2.0 * extent * double(j) / double(offsets - 1);
      Ray ray;
      ray.x = Vec{-off * s, off * c, 0.0, 0.0};
      ray.xi = Vec{c, s, 0.0, 0.0};
      rays.push_back(ray);
    }
  }
  return rays;
}

std::vector<Ray> acquire_rays(const RunConfig& cfg, int dim) {
  if (!cfg.rays.path.empty()) return load_ray_grid_json(cfg.rays.path, dim);
  if (cfg.rays.beam) {
    if (dim != 2) throw std::runtime_error("config: beam ray grids are 2-D only");
    return beam_rays(cfg.pipeline.angles, cfg.pipeline.offsets, cfg.pipeline.detector_extent);
  }
  return random_unit_rays(dim, cfg.rays.count, cfg.rays.seed, cfg.rays.x_radius);
}

double bundle_l2(const TensorBundle& F) {
  double s = 0.0;
  for (int r = 0; r <= F.top_rank(); ++r) {
    const double n = F.part(r).l2_norm();
    s += n * n;
  }
  return std::sqrt(s);
}

// Relative L2 distance between a recovered field and a reference field that
// may live on a different grid: the reference is resampled onto the
// recovered field's grid first.
double rel_error_against(const SymTensorField& rec, const SymTensorField& ref) {
  SymTensorField ref_on_grid = SymTensorField::sample(
      rec.grid(), rec.rank(), rec.support_radius(),
      [&](const Vec& x) { return ref.eval(x); });
  SymTensorField diff = rec;
  const std::vector<double>& rv = ref_on_grid.raw();
  std::vector<double>& dv = diff.raw();
  for (std::size_t i = 0; i < dv.size(); ++i) dv[i] -= rv[i];
  const double den = ref_on_grid.l2_norm();
  if (den == 0.0) return diff.l2_norm() == 0.0 ? 0.0 : -1.0;
  return diff.l2_norm() / den;
}

// Central-row profile of one component, as a gnuplot-friendly CSV.
void write_profile_csv(const std::string& path, const SymTensorField& rec,
                       const SymTensorField* ref) {
  const GridSpec& g = rec.grid();
  if (g.dim != 2) return;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << (ref ? "x,recovered,reference\n" : "x,recovered\n");
  const int nx = g.counts[0], ny = g.counts[1];
  const int j = ny / 2;
  char buf[192];
  for (int i = 0; i < nx; ++i) {
    const std::int64_t node = std::int64_t(i) * ny + j;
    const double x = g.origin[0] + g.spacing[0] * double(i);
    const double v = rec.raw()[std::size_t(node) * std::size_t(rec.ncomp())];
    if (ref) {
      const double w = ref->raw()[std::size_t(node) * std::size_t(ref->ncomp())];
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", x, v, w);
    } else {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", x, v);
    }
    out << buf;
  }
}

// ---------------------------------------------------------------------------
// phantom

int cmd_phantom(const RunConfig& cfg) {
  const TensorBundle F = generate_phantom(cfg);
  const std::string dir = ensure_out_dir(cfg);
  const std::string bundle_dir = dir + "/bundle";
  F.save(bundle_dir);

  const double norm = bundle_l2(F);
  json rep;
  rep["schema_version"] = 1;
  rep["command"] = "phantom";
  rep["kind"] = cfg.phantom.kind;
  rep["dim"] = cfg.phantom.dim;
  rep["top_rank"] = cfg.phantom.top_rank;
  rep["nodes"] = cfg.phantom.nodes;
  rep["seed"] = cfg.phantom.seed;
  rep["support_radius"] = cfg.phantom.resolve_support();
  rep["amplitude"] = cfg.amplitude;
  rep["bundle_norm"] = norm;
  rep["zero"] = (norm == 0.0);
  rep["bundle_dir"] = "bundle";
  write_json_file(dir + "/phantom_report.json", rep);
  std::cout << "phantom: saved bundle (norm " << norm << ") to " << bundle_dir << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// transform

int cmd_transform(const RunConfig& cfg) {
  const TensorBundle F = acquire_bundle(cfg);
  const int dim = F.grid().dim;
  const std::vector<Ray> rays = acquire_rays(cfg, dim);

  std::vector<int> ks = cfg.moments;
  if (ks.empty())
    for (int k = 0; k <= F.top_rank(); ++k) ks.push_back(k);

  const MomentSamples samples = sample_moments(F, rays, ks, cfg.quad, cfg.threads);
  const std::string dir = ensure_out_dir(cfg);
  const std::string csv = dir + "/moments.csv";
  write_moments_csv(samples, csv);

  double max_abs = 0.0;
  for (double v : samples.values) max_abs = std::max(max_abs, std::abs(v));

  json rep;
  rep["schema_version"] = 1;
  rep["command"] = "transform";
  rep["dim"] = dim;
  rep["top_rank"] = F.top_rank();
  rep["ray_count"] = int(rays.size());
  rep["ks"] = ks;
  rep["rows"] = int(samples.values.size());
  rep["max_abs_value"] = max_abs;
  rep["csv"] = "moments.csv";
  write_json_file(dir + "/transform_report.json", rep);
  std::cout << "transform: wrote " << samples.values.size() << " samples to " << csv << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// invert

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

// Scalar route: the CSV's k = 0 rows are line integrals over the
// parallel-beam grid described by the pipeline section, angle-major
// (exactly what `transform` emits for a beam ray grid).
int invert_from_csv(const RunConfig& cfg) {
  std::ifstream in(cfg.moments_csv);
  if (!in) throw std::runtime_error("cannot open " + cfg.moments_csv);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty CSV " + cfg.moments_csv);
  const std::vector<std::string> header = split_csv_line(line);
  if (header.size() < 4 || header.front() != "k" || header.back() != "value" ||
      header.size() % 2 != 0)
    throw std::runtime_error("CSV header is not k,x...,xi...,value: " + cfg.moments_csv);
  const int dim = int(header.size() - 2) / 2;
  if (dim != 2) throw std::runtime_error("CSV inversion is 2-D only");

  std::vector<double> k0_values;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw std::runtime_error("CSV row " + std::to_string(lineno) + " has wrong arity");
    try {
      if (std::stoi(cells.front()) == 0) k0_values.push_back(std::stod(cells.back()));
    } catch (const std::exception&) {
      throw std::runtime_error("CSV row " + std::to_string(lineno) + " is not numeric");
    }
  }

  const PipelineConfig& pl = cfg.pipeline;
  if (int(k0_values.size()) != pl.angles * pl.offsets)
    throw std::runtime_error(
        "CSV k=0 row count " + std::to_string(k0_values.size()) + " does not match pipeline " +
        std::to_string(pl.angles) + " angles x " + std::to_string(pl.offsets) + " offsets");

  ParallelBeamData data;
  data.angles = pl.angles;
  data.offsets = pl.offsets;
  data.extent = pl.detector_extent;
  data.samples = std::move(k0_values);

  GridSpec grid;
  grid.dim = 2;
  for (int a = 0; a < 2; ++a) {
    grid.origin[std::size_t(a)] = -pl.recon_extent;
    grid.spacing[std::size_t(a)] = 2.0 * pl.recon_extent / double(pl.recon_nodes - 1);
    grid.counts[std::size_t(a)] = pl.recon_nodes;
  }
  const SymTensorField rec = invert_scalar_xray(data, grid, pl.support_radius);

  const std::string dir = ensure_out_dir(cfg);
  rec.save(dir + "/recovered_rank0");

  double rel = -1.0;
  if (!cfg.bundle_path.empty()) {
    const TensorBundle truth = TensorBundle::load(cfg.bundle_path);
    rel = rel_error_against(rec, truth.part(0));
    SymTensorField ref = SymTensorField::sample(
        rec.grid(), 0, rec.support_radius(),
        [&](const Vec& x) { return truth.part(0).eval(x); });
    write_profile_csv(dir + "/profile_rank0.csv", rec, &ref);
  } else {
    write_profile_csv(dir + "/profile_rank0.csv", rec, nullptr);
  }

  json rep;
  rep["schema_version"] = 1;
  rep["command"] = "invert";
  rep["source"] = "csv";
  rep["dim"] = 2;
  rep["top_rank"] = 0;
  rep["max_moment"] = 0;
  rep["angles"] = pl.angles;
  rep["offsets"] = pl.offsets;
  json ranks = json::array();
  ranks.push_back({{"rank", 0},
                   {"recovered", true},
                   {"note", "inverted from line-integral samples"},
                   {"rel_error", rel}});
  rep["ranks"] = ranks;
  rep["reconstruction_dir"] = "recovered_rank0";
  write_json_file(dir + "/invert_report.json", rep);
  std::cout << "invert: scalar reconstruction done (rel error "
            << (rel < 0 ? std::string("n/a") : std::to_string(rel)) << ")\n";
  return 0;
}

int cmd_invert(const RunConfig& cfg) {
  if (!cfg.moments_csv.empty()) return invert_from_csv(cfg);

  const TensorBundle truth = acquire_bundle(cfg);
  PipelineConfig pl = cfg.pipeline;
  pl.quad = cfg.quad;
  pl.stencil = cfg.stencil;
  pl.threads = cfg.threads;
  const InverseReport rep = full_inverse_pipeline(truth, pl);

  const std::string dir = ensure_out_dir(cfg);
  rep.reconstruction.save(dir + "/reconstruction");

  json jr;
  jr["schema_version"] = 1;
  jr["command"] = "invert";
  jr["source"] = "bundle";
  jr["dim"] = truth.grid().dim;
  jr["top_rank"] = rep.top_rank;
  jr["max_moment"] = rep.max_moment;
  jr["angles"] = rep.angles;
  jr["offsets"] = rep.offsets;
  json ranks = json::array();
  for (const RankStatus& rs : rep.ranks) {
    double rel = -1.0;
    if (rs.recovered)
      rel = rel_error_against(rep.reconstruction.part(rs.rank), truth.part(rs.rank));
    ranks.push_back({{"rank", rs.rank},
                     {"recovered", rs.recovered},
                     {"note", rs.note},
                     {"rel_error", rel}});
  }
  jr["ranks"] = ranks;
  jr["reconstruction_dir"] = "reconstruction";
  write_json_file(dir + "/invert_report.json", jr);

  SymTensorField ref = SymTensorField::sample(
      rep.reconstruction.part(0).grid(), 0, rep.reconstruction.part(0).support_radius(),
      [&](const Vec& x) { return truth.part(0).eval(x); });
  write_profile_csv(dir + "/profile_rank0.csv", rep.reconstruction.part(0), &ref);

  std::cout << "invert: reconstructed ranks 0.." << rep.max_moment << " of "
            << rep.top_rank << " into " << dir << "/reconstruction\n";
  return 0;
}

// ---------------------------------------------------------------------------
// verify

// The identity spot check probes the configured phantom.  Without a config
// it substitutes the identity-check phantom (polynomial-bump, 128 nodes):
// second-order composition checks difference the field interpolant twice,
// and coarser grids push that below the default tolerance envelope.
int cmd_verify(const RunConfig& cfg, bool have_config, const std::string& identity, int m,
               int k, int p) {
  if (m < 0 || m > 4) throw std::runtime_error("verify: --m must be in 0..4");
  if (k < 0) throw std::runtime_error("verify: --k must be >= 0");
  if (p < 0) throw std::runtime_error("verify: --p must be >= 0");

  PhantomSpec ph = cfg.phantom;
  if (!have_config) {
    ph.kind = "polynomial-bump";
    ph.nodes = 128;
  }
  if (ph.top_rank < m) ph.top_rank = m;
  RunConfig gen = cfg;
  gen.phantom = ph;
  const TensorBundle F = generate_phantom(gen);
  const int dim = F.grid().dim;
  const std::vector<Ray> rays = acquire_rays(cfg, dim);
  const SymTensorField& fm = F.part(m);

  double residual = 0.0;
  double scale = 1.0;
  if (identity == "homogeneity") {
    const std::vector<double> lambdas{0.5, 1.5, 2.0};
    for (const Ray& ray : rays)
      residual = std::max(residual, check_homogeneity(fm, k, ray, lambdas, cfg.quad));
  } else if (identity == "descent") {
    scale = moment_scale(F, k, rays, cfg.quad);
    for (const Ray& ray : rays)
      residual = std::max(residual, check_index_descent(F, k, 0, ray, cfg.quad, cfg.stencil));
  } else if (identity == "transport") {
    scale = moment_scale(F, k, rays, cfg.quad);
    for (const Ray& ray : rays)
      residual =
          std::max(residual, check_transport_power(F, k, p, ray, cfg.quad, cfg.stencil));
  } else if (identity == "euler" || identity == "pcomp") {
    const int order = identity == "euler" ? 1 : 2;
    scale = 0.0;
    for (const Ray& ray : rays)
      scale = std::max(scale, std::abs(mrt_rank(fm, ray, k, cfg.quad)));
    scale = std::max(scale, 1e-8);
    for (const Ray& ray : rays)
      residual = std::max(residual, check_euler(fm, k, order, ray, cfg.quad, cfg.stencil));
  } else {
    throw std::runtime_error("verify: unknown identity '" + identity + "'");
  }

  const double tolerance = cfg.tolerances.identity * scale;
  const bool pass = residual <= tolerance;

  json rep;
  rep["schema_version"] = 1;
  rep["command"] = "verify";
  rep["identity"] = identity;
  rep["params"] = {{"m", m}, {"k", k}, {"p", p}, {"rays", int(rays.size())}};
  rep["residual"] = residual;
  rep["scale"] = scale;
  rep["tolerance"] = tolerance;
  rep["pass"] = pass;
  const std::string dir = ensure_out_dir(cfg);
  write_json_file(dir + "/verify_report.json", rep);
  std::cout << "verify " << identity << " (m=" << m << ", k=" << k << ", p=" << p
            << "): residual " << residual << " vs tolerance " << tolerance << " -> "
            << (pass ? "pass" : "FAIL") << "\n";
  return pass ? 0 : 1;
}

// ---------------------------------------------------------------------------
// kernel

int cmd_kernel(const RunConfig& cfg) {
  const TensorBundle F = acquire_bundle(cfg);
  const int dim = F.grid().dim;
  std::vector<Ray> rays = acquire_rays(cfg, dim);
  for (const Ray& ray : rays) {
    double n2 = 0.0;
    for (int a = 0; a < dim; ++a) n2 += ray.xi[std::size_t(a)] * ray.xi[std::size_t(a)];
    if (std::abs(std::sqrt(n2) - 1.0) > 1e-9)
      throw std::runtime_error("kernel: probe rays must be unit-speed");
  }

  const KernelReport krep = kernel_membership(F, rays, cfg.tolerances.kernel, cfg.quad);

  const std::string dir = ensure_out_dir(cfg);
  const GridSpec& grid = F.grid();
  json v_fields = json::array();
  for (int r = 2; r <= F.top_rank(); ++r) {
    const SymTensorField& f = F.part(r);
    const double sup = f.support_radius();
    SymTensorField v(grid, r - 2, sup);
    SymTensorField lift(grid, r, sup);
    const int nf = f.ncomp(), nv = v.ncomp(), nl = lift.ncomp();
    const std::int64_t total = grid.node_count();
    for (std::int64_t node = 0; node < total; ++node) {
      SymTensor t(r, dim);
      for (int c = 0; c < nf; ++c)
        t[c] = f.raw()[std::size_t(node) * std::size_t(nf) + std::size_t(c)];
      const SymTensor vp = construct_v_point(t, 0);
      const SymTensor lp = i_delta(vp);
      for (int c = 0; c < nv; ++c)
        v.raw()[std::size_t(node) * std::size_t(nv) + std::size_t(c)] = vp[c];
      for (int c = 0; c < nl; ++c)
        lift.raw()[std::size_t(node) * std::size_t(nl) + std::size_t(c)] = lp[c];
    }
    v.enforce_support();
    lift.enforce_support();
    for (std::size_t i = 0; i < lift.raw().size(); ++i) lift.raw()[i] -= f.raw()[i];
    const double fn = f.l2_norm();
    const double cert = fn == 0.0 ? 0.0 : lift.l2_norm() / fn;
    const std::string base = dir + "/v_rank" + std::to_string(r);
    v.save(base);
    v_fields.push_back(
        {{"rank", r}, {"file", "v_rank" + std::to_string(r)}, {"certificate_residual", cert}});
  }

  json rep;
  rep["schema_version"] = 1;
  rep["command"] = "kernel";
  rep["in_kernel"] = krep.in_kernel_forward;
  rep["tolerance"] = krep.tol;
  rep["bundle_norm"] = krep.bundle_norm;
  rep["per_k_residuals"] = krep.per_k_residual;
  rep["characterization_residuals"] = {{"even", krep.residual_even},
                                       {"odd", krep.residual_odd}};
  rep["v_fields"] = v_fields;
  rep["verdicts"] = {{"forward", krep.in_kernel_forward},
                     {"reverse", krep.in_kernel_reverse},
                     {"top_only", krep.in_kernel_top_only},
                     {"agree", krep.agree}};
  write_json_file(dir + "/kernel_report.json", rep);
  std::cout << "kernel: " << (krep.in_kernel_forward ? "in kernel" : "not in kernel")
            << " (even " << krep.residual_even << ", odd " << krep.residual_odd << ")\n";
  return krep.agree ? 0 : 1;
}

// ---------------------------------------------------------------------------
// recover

int cmd_recover(const RunConfig& cfg) {
  const TensorBundle F = acquire_bundle(cfg);
  RecoveryConfig rc = cfg.recovery;
  rc.stencil = cfg.stencil;
  rc.threads = cfg.threads;
  const RecoveryReport rrep = iterative_recovery(F, rc);

  const std::string dir = ensure_out_dir(cfg);
  json fields = json::array();
  for (const RecoveredField& rf : rrep.fields) {
    const std::string base = dir + "/recovered_" + rf.name;
    rf.field.save(base);
    fields.push_back(
        {{"name", rf.name}, {"file", "recovered_" + rf.name}, {"rel_error", rf.rel_error}});
  }

  {
    std::ofstream steps(dir + "/steps.csv");
    if (!steps) throw std::runtime_error("cannot open " + dir + "/steps.csv");
    steps << "step,rank,action,data_residual,certificate_residual,worst_rel_error,ok\n";
    char buf[192];
    for (const StepReport& st : rrep.steps) {
      std::snprintf(buf, sizeof buf, "%d,%d,%s,%.17g,%.17g,%.17g,%d\n", st.step, st.rank,
                    st.action.c_str(), st.data_residual, st.certificate_residual,
                    st.worst_rel_error, st.ok ? 1 : 0);
      steps << buf;
    }
  }

  json steps = json::array();
  for (const StepReport& st : rrep.steps)
    steps.push_back({{"step", st.step},
                     {"rank", st.rank},
                     {"action", st.action},
                     {"data_residual", st.data_residual},
                     {"certificate_residual", st.certificate_residual},
                     {"worst_rel_error", st.worst_rel_error},
                     {"ok", st.ok}});

  json rep;
  rep["schema_version"] = 1;
  rep["command"] = "recover";
  rep["completed"] = rrep.completed;
  rep["steps_expected"] = rrep.steps_expected;
  rep["abort_step"] = rrep.abort_step;
  rep["abort_reason"] = rrep.abort_reason;
  rep["pair_consistency"] = rrep.pair_consistency;
  rep["steps"] = steps;
  rep["fields"] = fields;
  write_json_file(dir + "/recovery_report.json", rep);
  std::cout << "recover: " << (rrep.completed ? "completed" : "aborted") << " after "
            << rrep.steps.size() << " of " << rrep.steps_expected << " steps\n";
  return rrep.completed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"momentum ray transform toolkit"};
  app.fallthrough();
  app.require_subcommand(1);

  Options opt;
  app.add_option("--config", opt.config_path, "JSON config file (see schemas/config.schema.json)");
  app.add_option("--out", opt.out_override, "output directory (overrides the config)");
  CLI::Option* seed_opt =
      app.add_option("--seed", opt.seed, "phantom seed override (unsigned 64-bit)");
  app.add_option("--threads", opt.threads, "worker threads, 0 = auto (overrides the config)");

  CLI::App* c_phantom = app.add_subcommand("phantom", "generate and save a tensor bundle");
  CLI::App* c_transform =
      app.add_subcommand("transform", "sample momentum transforms over a ray grid");
  CLI::App* c_invert =
      app.add_subcommand("invert", "reconstruct from transforms (bundle or CSV input)");
  CLI::App* c_verify = app.add_subcommand("verify", "spot-check one differential identity");
  CLI::App* c_kernel =
      app.add_subcommand("kernel", "null-space membership test and constructive potential");
  CLI::App* c_recover =
      app.add_subcommand("recover", "staged structure-driven recovery of a 3-D bundle");

  std::string identity;
  int m = 2, k = 1, p = 1;
  c_verify->add_option("--identity", identity, "homogeneity|descent|transport|euler|pcomp")
      ->required()
      ->check(CLI::IsMember({"homogeneity", "descent", "transport", "euler", "pcomp"}));
  c_verify->add_option("--m", m, "tensor rank the identity is probed on (default 2)");
  c_verify->add_option("--k", k, "moment order (default 1)");
  c_verify->add_option("--p", p, "transport power (default 1)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  opt.seed_set = seed_opt->count() > 0;

  try {
    const RunConfig cfg = effective_config(opt);
    if (*c_phantom) return cmd_phantom(cfg);
    if (*c_transform) return cmd_transform(cfg);
    if (*c_invert) return cmd_invert(cfg);
    if (*c_verify) return cmd_verify(cfg, !opt.config_path.empty(), identity, m, k, p);
    if (*c_kernel) return cmd_kernel(cfg);
    if (*c_recover) return cmd_recover(cfg);
    std::cerr << "mrt: no command selected\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "mrt: error: " << e.what() << "\n";
    return 2;
  }
}
