#include "mrt/cliconfig.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace mrt {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) {
  throw std::runtime_error("config: " + msg);
}

// Strict key filter: any key outside `allowed` is a config error, so typos
// surface immediately instead of silently falling back to defaults.
void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const std::string& path) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed)
      if (it.key() == a) {
        ok = true;
        break;
      }
    if (!ok) fail(path + ": unknown key '" + it.key() + "'");
  }
}

const json* maybe_section(const json& root, const char* key, const std::string& path) {
  if (!root.contains(key)) return nullptr;
  const json& v = root.at(key);
  if (!v.is_object()) fail(path + "." + key + " must be an object");
  return &v;
}

int get_int(const json& o, const char* k, int dflt, const std::string& path) {
  if (!o.contains(k)) return dflt;
  const json& v = o.at(k);
  if (!v.is_number_integer()) fail(path + "." + k + " must be an integer");
  return v.get<int>();
}

std::uint64_t get_u64(const json& o, const char* k, std::uint64_t dflt,
                      const std::string& path) {
  if (!o.contains(k)) return dflt;
  const json& v = o.at(k);
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer()) {
    const auto s = v.get<std::int64_t>();
    if (s < 0) fail(path + "." + k + " must be non-negative");
    return static_cast<std::uint64_t>(s);
  }
  fail(path + "." + k + " must be a non-negative integer");
}

double get_num(const json& o, const char* k, double dflt, const std::string& path) {
  if (!o.contains(k)) return dflt;
  const json& v = o.at(k);
  if (!v.is_number()) fail(path + "." + k + " must be a number");
  return v.get<double>();
}

std::string get_str(const json& o, const char* k, const std::string& dflt,
                    const std::string& path) {
  if (!o.contains(k)) return dflt;
  const json& v = o.at(k);
  if (!v.is_string()) fail(path + "." + k + " must be a string");
  return v.get<std::string>();
}

bool get_bool(const json& o, const char* k, bool dflt, const std::string& path) {
  if (!o.contains(k)) return dflt;
  const json& v = o.at(k);
  if (!v.is_boolean()) fail(path + "." + k + " must be a boolean");
  return v.get<bool>();
}

void read_phantom(const json& o, PhantomSpec& p, double& amplitude) {
  const std::string path = "$.phantom";
  check_keys(o,
             {"kind", "dim", "top_rank", "nodes", "extent", "support_radius", "seed",
              "lift_level", "amplitude"},
             path);
  p.kind = get_str(o, "kind", p.kind, path);
  p.dim = get_int(o, "dim", p.dim, path);
  p.top_rank = get_int(o, "top_rank", p.top_rank, path);
  p.nodes = get_int(o, "nodes", p.nodes, path);
  p.extent = get_num(o, "extent", p.extent, path);
  p.support_radius = get_num(o, "support_radius", p.support_radius, path);
  p.seed = get_u64(o, "seed", p.seed, path);
  p.lift_level = get_int(o, "lift_level", p.lift_level, path);
  amplitude = get_num(o, "amplitude", amplitude, path);
}

void read_rays(const json& o, RayGridSpec& r) {
  const std::string path = "$.rays";
  check_keys(o, {"count", "seed", "x_radius", "path", "beam"}, path);
  r.count = get_int(o, "count", r.count, path);
  r.seed = get_u64(o, "seed", r.seed, path);
  r.x_radius = get_num(o, "x_radius", r.x_radius, path);
  r.path = get_str(o, "path", r.path, path);
  r.beam = get_bool(o, "beam", r.beam, path);
}

void read_quadrature(const json& o, QuadratureSpec& q) {
  const std::string path = "$.quadrature";
  check_keys(o, {"panels", "order"}, path);
  q.panels = get_int(o, "panels", q.panels, path);
  q.order = get_int(o, "order", q.order, path);
}

void read_stencil(const json& o, FDStencil& s) {
  const std::string path = "$.stencil";
  check_keys(o, {"h_x", "h_xi", "order"}, path);
  s.h_x = get_num(o, "h_x", s.h_x, path);
  s.h_xi = get_num(o, "h_xi", s.h_xi, path);
  s.order = get_int(o, "order", s.order, path);
}

void read_pipeline(const json& o, PipelineConfig& p) {
  const std::string path = "$.pipeline";
  check_keys(o,
             {"max_moment", "angles", "offsets", "detector_extent", "recon_nodes",
              "recon_extent", "support_radius"},
             path);
  p.max_moment = get_int(o, "max_moment", p.max_moment, path);
  p.angles = get_int(o, "angles", p.angles, path);
  p.offsets = get_int(o, "offsets", p.offsets, path);
  p.detector_extent = get_num(o, "detector_extent", p.detector_extent, path);
  p.recon_nodes = get_int(o, "recon_nodes", p.recon_nodes, path);
  p.recon_extent = get_num(o, "recon_extent", p.recon_extent, path);
  p.support_radius = get_num(o, "support_radius", p.support_radius, path);
}

void read_recovery(const json& o, RecoveryConfig& r) {
  const std::string path = "$.recovery";
  check_keys(o,
             {"tol", "max_rel_error", "plane_nodes", "plane_extent", "support_radius",
              "angles", "offsets", "detector_extent", "x1_panels", "x1_order",
              "line_panels", "line_order", "probe_lines", "probe_seed"},
             path);
  r.tol = get_num(o, "tol", r.tol, path);
  r.max_rel_error = get_num(o, "max_rel_error", r.max_rel_error, path);
  r.plane_nodes = get_int(o, "plane_nodes", r.plane_nodes, path);
  r.plane_extent = get_num(o, "plane_extent", r.plane_extent, path);
  r.support_radius = get_num(o, "support_radius", r.support_radius, path);
  r.angles = get_int(o, "angles", r.angles, path);
  r.offsets = get_int(o, "offsets", r.offsets, path);
  r.detector_extent = get_num(o, "detector_extent", r.detector_extent, path);
  r.x1_panels = get_int(o, "x1_panels", r.x1_panels, path);
  r.x1_order = get_int(o, "x1_order", r.x1_order, path);
  r.line_panels = get_int(o, "line_panels", r.line_panels, path);
  r.line_order = get_int(o, "line_order", r.line_order, path);
  r.probe_lines = get_int(o, "probe_lines", r.probe_lines, path);
  r.probe_seed = get_u64(o, "probe_seed", r.probe_seed, path);
}

void read_tolerances(const json& o, ToleranceSpec& t) {
  const std::string path = "$.tolerances";
  check_keys(o, {"identity", "kernel", "recovery"}, path);
  t.identity = get_num(o, "identity", t.identity, path);
  t.kernel = get_num(o, "kernel", t.kernel, path);
  t.recovery = get_num(o, "recovery", t.recovery, path);
}

}  // namespace

void RayGridSpec::validate() const {
  if (count < 1) throw std::runtime_error("config: $.rays.count must be >= 1");
  if (!(x_radius > 0.0)) throw std::runtime_error("config: $.rays.x_radius must be > 0");
}

void ToleranceSpec::validate() const {
  if (!(identity > 0.0)) throw std::runtime_error("config: $.tolerances.identity must be > 0");
  if (!(kernel > 0.0)) throw std::runtime_error("config: $.tolerances.kernel must be > 0");
  if (!(recovery > 0.0)) throw std::runtime_error("config: $.tolerances.recovery must be > 0");
}

void RunConfig::validate() const {
  if (schema_version != 1)
    throw std::runtime_error("config: unsupported schema_version (expected 1)");
  if (!std::isfinite(amplitude))
    throw std::runtime_error("config: $.phantom.amplitude must be finite");
  if (threads < 0) throw std::runtime_error("config: $.threads must be >= 0");
  for (int k : moments)
    if (k < 0) throw std::runtime_error("config: $.moments entries must be >= 0");
  rays.validate();
  tolerances.validate();
  quad.validate();
  if (!(stencil.h_x > 0.0)) throw std::runtime_error("config: $.stencil.h_x must be > 0");
  if (!(stencil.h_xi > 0.0)) throw std::runtime_error("config: $.stencil.h_xi must be > 0");
  if (stencil.order != 2 && stencil.order != 4)
    throw std::runtime_error("config: $.stencil.order must be 2 or 4");
  if (pipeline.angles < 1) throw std::runtime_error("config: $.pipeline.angles must be >= 1");
  if (pipeline.offsets < 2) throw std::runtime_error("config: $.pipeline.offsets must be >= 2");
  if (!(pipeline.detector_extent > 0.0))
    throw std::runtime_error("config: $.pipeline.detector_extent must be > 0");
  if (pipeline.recon_nodes < 4)
    throw std::runtime_error("config: $.pipeline.recon_nodes must be >= 4");
  if (!(pipeline.recon_extent > 0.0))
    throw std::runtime_error("config: $.pipeline.recon_extent must be > 0");
  if (!(pipeline.support_radius > 0.0))
    throw std::runtime_error("config: $.pipeline.support_radius must be > 0");
  try {
    recovery.validate();
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("config: $.recovery invalid: ") + e.what());
  }
}

RunConfig parse_run_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    fail(std::string("invalid JSON: ") + e.what());
  }
  if (!root.is_object()) fail("top level must be an object");
  check_keys(root,
             {"schema_version", "phantom", "bundle", "moments_csv", "rays", "quadrature",
              "stencil", "moments", "pipeline", "recovery", "tolerances", "output",
              "threads"},
             "$");
  if (!root.contains("schema_version")) fail("missing required key 'schema_version'");

  RunConfig cfg;
  cfg.schema_version = get_int(root, "schema_version", 0, "$");
  if (const json* o = maybe_section(root, "phantom", "$")) read_phantom(*o, cfg.phantom, cfg.amplitude);
  cfg.bundle_path = get_str(root, "bundle", cfg.bundle_path, "$");
  cfg.moments_csv = get_str(root, "moments_csv", cfg.moments_csv, "$");
  if (const json* o = maybe_section(root, "rays", "$")) read_rays(*o, cfg.rays);
  if (const json* o = maybe_section(root, "quadrature", "$")) read_quadrature(*o, cfg.quad);
  if (const json* o = maybe_section(root, "stencil", "$")) read_stencil(*o, cfg.stencil);
  if (root.contains("moments")) {
    const json& v = root.at("moments");
    if (!v.is_array()) fail("$.moments must be an array of integers");
    for (const json& e : v) {
      if (!e.is_number_integer()) fail("$.moments must be an array of integers");
      cfg.moments.push_back(e.get<int>());
    }
  }
  if (const json* o = maybe_section(root, "pipeline", "$")) read_pipeline(*o, cfg.pipeline);
  if (const json* o = maybe_section(root, "recovery", "$")) read_recovery(*o, cfg.recovery);
  if (const json* o = maybe_section(root, "tolerances", "$")) read_tolerances(*o, cfg.tolerances);
  if (const json* o = maybe_section(root, "output", "$")) {
    check_keys(*o, {"dir"}, "$.output");
    cfg.out_dir = get_str(*o, "dir", cfg.out_dir, "$.output");
  }
  cfg.threads = get_int(root, "threads", cfg.threads, "$");

  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

namespace {

const char* json_type_name(const json& v) {
  if (v.is_object()) return "object";
  if (v.is_array()) return "array";
  if (v.is_string()) return "string";
  if (v.is_boolean()) return "boolean";
  if (v.is_null()) return "null";
  if (v.is_number_integer()) return "integer";
  return "number";
}

bool type_matches(const std::string& want, const json& v) {
  if (want == "object") return v.is_object();
  if (want == "array") return v.is_array();
  if (want == "string") return v.is_string();
  if (want == "boolean") return v.is_boolean();
  if (want == "null") return v.is_null();
  if (want == "integer") return v.is_number_integer();
  if (want == "number") return v.is_number();
  return false;
}

void validate_node(const json& schema, const json& doc, const std::string& path,
                   std::vector<std::string>& out) {
  if (!schema.is_object()) return;  // permissive for schema fragments we do not model

  if (schema.contains("type")) {
    const json& t = schema.at("type");
    bool ok = false;
    if (t.is_string()) {
      ok = type_matches(t.get<std::string>(), doc);
    } else if (t.is_array()) {
      for (const json& alt : t)
        if (alt.is_string() && type_matches(alt.get<std::string>(), doc)) {
          ok = true;
          break;
        }
    }
    if (!ok) {
      out.push_back(path + ": expected type " + t.dump() + ", got " + json_type_name(doc));
      return;  // deeper checks would only cascade
    }
  }

  if (schema.contains("enum")) {
    bool ok = false;
    for (const json& cand : schema.at("enum"))
      if (cand == doc) {
        ok = true;
        break;
      }
    if (!ok) out.push_back(path + ": value " + doc.dump() + " not in enum");
  }

  if (doc.is_number()) {
    const double x = doc.get<double>();
    if (schema.contains("minimum") && x < schema.at("minimum").get<double>())
      out.push_back(path + ": value below minimum " + schema.at("minimum").dump());
    if (schema.contains("maximum") && x > schema.at("maximum").get<double>())
      out.push_back(path + ": value above maximum " + schema.at("maximum").dump());
    if (schema.contains("exclusiveMinimum") &&
        x <= schema.at("exclusiveMinimum").get<double>())
      out.push_back(path + ": value not above exclusiveMinimum " +
                    schema.at("exclusiveMinimum").dump());
  }

  if (doc.is_object()) {
    if (schema.contains("required"))
      for (const json& req : schema.at("required")) {
        const std::string key = req.get<std::string>();
        if (!doc.contains(key)) out.push_back(path + ": missing required key '" + key + "'");
      }
    const json* props = schema.contains("properties") ? &schema.at("properties") : nullptr;
    if (props)
      for (auto it = props->begin(); it != props->end(); ++it)
        if (doc.contains(it.key()))
          validate_node(it.value(), doc.at(it.key()), path + "." + it.key(), out);
    if (schema.contains("additionalProperties") &&
        schema.at("additionalProperties").is_boolean() &&
        !schema.at("additionalProperties").get<bool>())
      for (auto it = doc.begin(); it != doc.end(); ++it)
        if (!props || !props->contains(it.key()))
          out.push_back(path + ": unexpected key '" + it.key() + "'");
  }

  if (doc.is_array()) {
    if (schema.contains("minItems") &&
        doc.size() < schema.at("minItems").get<std::size_t>())
      out.push_back(path + ": fewer than minItems " + schema.at("minItems").dump());
    if (schema.contains("maxItems") &&
        doc.size() > schema.at("maxItems").get<std::size_t>())
      out.push_back(path + ": more than maxItems " + schema.at("maxItems").dump());
    if (schema.contains("items")) {
      const json& items = schema.at("items");
      for (std::size_t i = 0; i < doc.size(); ++i)
        validate_node(items, doc[i], path + "[" + std::to_string(i) + "]", out);
    }
  }
}

}  // namespace

std::vector<std::string> schema_violations(const std::string& schema_text,
                                           const std::string& document_text) {
  json schema, doc;
  try {
    schema = json::parse(schema_text);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("schema_violations: schema is not valid JSON: ") +
                             e.what());
  }
  try {
    doc = json::parse(document_text);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("schema_violations: document is not valid JSON: ") +
                             e.what());
  }
  std::vector<std::string> out;
  validate_node(schema, doc, "$", out);
  return out;
}

}  // namespace mrt
